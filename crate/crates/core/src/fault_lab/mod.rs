//! Gate-level backend: `.bench` parsing, stuck-at fault simulation, LFSR
//! pattern generation and a small ATPG. Together they act as the coverage
//! oracle for hybrid test generation.

mod atpg;
mod lfsr;
mod netlist;
mod sim;

use thiserror::Error;

pub use atpg::{atpg, compact, AtpgConfig, AtpgResult};
pub use lfsr::{lfsr_sequence, primitive_polynomial, Lfsr, MAX_WIDTH};
pub use netlist::{parse_bench, Gate, GateKind, NetId, Netlist};
pub use sim::{fault_list, fault_simulate, first_detections, parse_pattern_file, Fault, Pattern, StuckAt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultLabError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown gate `{name}`")]
    UnknownGate { line: usize, name: String },
    #[error("line {line}: wrong number of inputs for {gate}")]
    Arity { line: usize, gate: &'static str },
    #[error("line {line}: net `{net}` has more than one driver")]
    MultipleDrivers { line: usize, net: String },
    #[error("net `{0}` is used but never driven")]
    UndrivenNet(String),
    #[error("combinational loop through net `{0}`")]
    CombinationalLoop(String),
    #[error("vector has {got} bits, circuit expects {expected}")]
    VectorWidthMismatch { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    PatternSyntax { line: usize, msg: String },
    #[error("LFSR seed must be non-zero")]
    ZeroSeed,
    #[error("LFSR seed {seed:#x} does not fit in {width} bits")]
    SeedTooWide { seed: u64, width: u32 },
    #[error("{0:#x} is not a usable feedback polynomial")]
    BadPolynomial(u128),
    #[error("no built-in polynomial for width {0}")]
    UnsupportedWidth(u32),
}
