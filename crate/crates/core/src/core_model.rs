//! Per-core and per-SoC parameters plus the closed-form time equations.
//!
//! Pattern application speed is `F / AC` (clock frequency over cycles per
//! pattern) for both the BIST and the external channel. A core's test time is
//! the sum of its PRTP application time and its DTP application time.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::units::{Mhz, Micros, Power};

pub type CoreId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("SoC has no cores")]
    EmptySoc,
    #[error("duplicate core id {0}")]
    DuplicateCoreId(CoreId),
    #[error("core ids must be contiguous from 1, missing {0}")]
    NonContiguousIds(CoreId),
    #[error("core {id} has peak power {p_m} above the budget {p_max}")]
    InfeasibleCore { id: CoreId, p_m: Power, p_max: Power },
    #[error("core {id}: {reason}")]
    InvalidCore { id: CoreId, reason: &'static str },
    #[error("power budget must be positive")]
    NonPositiveBudget,
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("test set belongs to core {test_set} but was applied to core {core}")]
    CoreMismatch { test_set: CoreId, core: CoreId },
}

/// Power, timing and pattern-application parameters of one core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreSpec {
    pub id: CoreId,
    /// Peak test power, assumed constant over the whole test.
    pub p_m: Power,
    /// Remaining external (deterministic) test time.
    pub t_vd: Micros,
    /// Remaining BIST (pseudo-random) test time.
    pub t_vp: Micros,
    pub f_b: Mhz,
    /// Clock cycles to apply one PRTP.
    pub ac_b: u64,
    pub f_e: Mhz,
    /// Clock cycles to apply one DTP (scan shift).
    pub ac_e: u64,
    pub pis: u32,
    pub ppis: u32,
}

impl CoreSpec {
    /// A core with the given power and times, clocked at `freq` on both
    /// channels and one cycle per pattern.
    pub fn with_times(id: CoreId, p_m: Power, t_vd: Micros, t_vp: Micros, freq: Mhz) -> Self {
        Self {
            id,
            p_m,
            t_vd,
            t_vp,
            f_b: freq,
            ac_b: 1,
            f_e: freq,
            ac_e: 1,
            pis: 0,
            ppis: 0,
        }
    }

    /// A core whose external cycle count follows the full-scan shift model
    /// (`ac_e = pis + ppis`) and whose BIST applies one pattern per cycle.
    pub fn scan_core(id: CoreId, p_m: Power, pis: u32, ppis: u32, f_b: Mhz, f_e: Mhz) -> Self {
        Self {
            id,
            p_m,
            t_vd: Micros::ZERO,
            t_vp: Micros::ZERO,
            f_b,
            ac_b: 1,
            f_e,
            ac_e: (u64::from(pis) + u64::from(ppis)).max(1),
            pis,
            ppis,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason| Err(ModelError::InvalidCore { id: self.id, reason });
        if self.id == 0 {
            return bad("id must be positive");
        }
        if self.p_m.centi() <= 0 {
            return bad("peak power must be positive");
        }
        if self.t_vd.centi() < 0 || self.t_vp.centi() < 0 {
            return bad("test times must be non-negative");
        }
        if self.f_b.centi() <= 0 || self.f_e.centi() <= 0 {
            return bad("clock frequencies must be positive");
        }
        if self.ac_b == 0 || self.ac_e == 0 {
            return bad("cycles per pattern must be at least 1");
        }
        Ok(())
    }

    /// Replaces the remaining times with those implied by a test set.
    pub fn with_test_set(mut self, ts: &TestSet) -> Result<Self, ModelError> {
        if ts.core_id != self.id {
            return Err(ModelError::CoreMismatch { test_set: ts.core_id, core: self.id });
        }
        self.t_vd = external_time(&self, ts.n_dtp())?;
        self.t_vp = bist_time(&self, ts.n_prtp)?;
        Ok(self)
    }

    pub fn total_time(&self) -> Micros {
        self.t_vd + self.t_vp
    }
}

/// A whole SoC: its cores and the peak power budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocSpec {
    pub name: String,
    /// Ordered by id, ids are `1..=n`.
    pub cores: Vec<CoreSpec>,
    pub p_max: Power,
    /// External channel width in pins; carried, not optimised.
    pub tam_width: u32,
    pub ate_freq_mhz: Mhz,
}

impl SocSpec {
    /// Validates and canonicalises (cores sorted by id).
    pub fn new(
        name: impl Into<String>,
        mut cores: Vec<CoreSpec>,
        p_max: Power,
        tam_width: u32,
        ate_freq_mhz: Mhz,
    ) -> Result<Self, ModelError> {
        cores.sort_by_key(|c| c.id);
        let soc = Self { name: name.into(), cores, p_max, tam_width, ate_freq_mhz };
        soc.validate()?;
        Ok(soc)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.p_max.centi() <= 0 {
            return Err(ModelError::NonPositiveBudget);
        }
        if self.cores.is_empty() {
            return Err(ModelError::EmptySoc);
        }
        let mut seen = BTreeSet::new();
        for core in &self.cores {
            core.validate()?;
            if !seen.insert(core.id) {
                return Err(ModelError::DuplicateCoreId(core.id));
            }
        }
        for (expected, core) in (1..).zip(&self.cores) {
            if core.id != expected {
                return Err(ModelError::NonContiguousIds(expected));
            }
        }
        for core in &self.cores {
            if core.p_m > self.p_max {
                return Err(ModelError::InfeasibleCore {
                    id: core.id,
                    p_m: core.p_m,
                    p_max: self.p_max,
                });
            }
        }
        Ok(())
    }

    pub fn core(&self, id: CoreId) -> Option<&CoreSpec> {
        // ids are contiguous from 1 once validated
        self.cores.get((id as usize).checked_sub(1)?).filter(|c| c.id == id)
    }

    pub fn core_ids(&self) -> impl Iterator<Item = CoreId> + '_ {
        self.cores.iter().map(|c| c.id)
    }

    /// Same SoC under a different power budget, re-validated.
    pub fn with_p_max(&self, p_max: Power) -> Result<Self, ModelError> {
        let soc = Self { p_max, ..self.clone() };
        soc.validate()?;
        Ok(soc)
    }

    /// Lower bound on any schedule: the longest single core.
    pub fn max_core_time(&self) -> Micros {
        self.cores.iter().map(CoreSpec::total_time).max().unwrap_or_default()
    }

    /// Upper bound: every part run back to back.
    pub fn serial_time(&self) -> Micros {
        self.cores.iter().map(CoreSpec::total_time).sum()
    }
}

/// A core's pattern budget across the three generation phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TestSet {
    pub core_id: CoreId,
    pub n_dtp_phase1: u64,
    pub n_prtp: u64,
    pub n_dtp_phase2: u64,
}

impl TestSet {
    pub fn n_dtp(&self) -> u64 {
        self.n_dtp_phase1 + self.n_dtp_phase2
    }
}

/// BIST speed in patterns per second.
pub fn bist_speed(core: &CoreSpec) -> f64 {
    core.f_b.as_f64() * 1e6 / core.ac_b as f64
}

/// External speed in patterns per second.
pub fn external_speed(core: &CoreSpec) -> f64 {
    core.f_e.as_f64() * 1e6 / core.ac_e as f64
}

/// Total scan-model test cycles: `pmdv * (pis + ppis) + opt_prtp`.
pub fn test_cycles(pmdv: u64, pis: u64, ppis: u64, opt_prtp: u64) -> Result<u64, ModelError> {
    pis.checked_add(ppis)
        .and_then(|w| pmdv.checked_mul(w))
        .and_then(|c| c.checked_add(opt_prtp))
        .ok_or(ModelError::Overflow("test_cycles"))
}

/// `n * cycles / f` in µs, rounded half-up to 0.01 µs.
fn pattern_time(n: u64, cycles: u64, f: Mhz) -> Result<Micros, ModelError> {
    // f is in hundredths of MHz; result is in hundredths of µs:
    // n * cycles / (f / 100) * 100 = n * cycles * 10^4 / f
    let num = u128::from(n)
        .checked_mul(u128::from(cycles))
        .and_then(|v| v.checked_mul(10_000))
        .ok_or(ModelError::Overflow("pattern_time"))?;
    let den = f.centi() as u128;
    let q = (num + den / 2) / den;
    i64::try_from(q).map(Micros).map_err(|_| ModelError::Overflow("pattern_time"))
}

/// Time to apply `n_prtp` pseudo-random patterns through the core's BIST.
pub fn bist_time(core: &CoreSpec, n_prtp: u64) -> Result<Micros, ModelError> {
    pattern_time(n_prtp, core.ac_b, core.f_b)
}

/// Time to apply `n_dtp` deterministic patterns through the external channel.
pub fn external_time(core: &CoreSpec, n_dtp: u64) -> Result<Micros, ModelError> {
    pattern_time(n_dtp, core.ac_e, core.f_e)
}

/// Test application time of a test set: DTP time plus PRTP time. Each part
/// is rounded to 0.01 µs separately so the sum equals `t_vd + t_vp` of the
/// derived core.
pub fn test_time(ts: &TestSet, core: &CoreSpec) -> Result<Micros, ModelError> {
    if ts.core_id != core.id {
        return Err(ModelError::CoreMismatch { test_set: ts.core_id, core: core.id });
    }
    Ok(external_time(core, ts.n_dtp())? + bist_time(core, ts.n_prtp)?)
}
