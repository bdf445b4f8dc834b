//! Hybrid BIST test generation and power-constrained concurrent test
//! scheduling for systems on chip.
//!
//! `fault_lab` and `hybrid_testgen` decide, per core, how many pseudo-random
//! and deterministic patterns to apply. `power_groups` lists the core sets
//! that fit a peak-power budget, and `scheduler` orders them into a test
//! schedule.

pub mod core_model;
pub mod fault_lab;
pub mod hybrid_testgen;
pub mod power_groups;
pub mod units;
pub mod soc_io;
pub mod scheduler;
pub mod cli;
