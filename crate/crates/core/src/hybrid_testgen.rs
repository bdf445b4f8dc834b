//! Three-phase hybrid test generation and the optimal PRTP-count search.
//!
//! A core's test is split into deterministic patterns aimed at
//! very-hard-to-detect faults (phase 1), a run of LFSR patterns, and
//! deterministic clean-up patterns for whatever is left (phase 2). The
//! search picks the LFSR run length that minimises total test time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::core_model::{test_time, CoreSpec, ModelError, TestSet};
use crate::fault_lab::{
    atpg, fault_list, first_detections, lfsr_sequence, AtpgConfig, Fault, FaultLabError, Lfsr, Netlist, Pattern,
};
use crate::units::Micros;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestgenError {
    #[error("no coverage data for {n} PRTPs")]
    OracleRangeExceeded { n: u64 },
    #[error("search range [{min}, {max}] is empty")]
    InvalidRange { min: u64, max: u64 },
    #[error("curve row {row}: {msg}")]
    MonotonicityViolation { row: usize, msg: String },
    #[error("coverage curve has no rows")]
    EmptyCurve,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    FaultLab(#[from] FaultLabError),
}

/// Pattern counts the oracle reports for a given PRTP count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleResponse {
    pub n_dtp_phase1: u64,
    pub n_dtp_phase2: u64,
    /// Faults no phase detects.
    pub residual: u64,
}

/// Maps a PRTP count to the deterministic patterns still needed.
///
/// For a fixed seed `n_dtp_phase2` never increases with the PRTP count.
pub trait CoverageOracle: Sync {
    fn query(&self, n_prtp: u64) -> Result<OracleResponse, TestgenError>;

    /// Largest PRTP count at most `n` the oracle can answer for.
    fn floor_point(&self, n: u64) -> Option<u64>;

    fn seed(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveRow {
    pub n_prtp: u64,
    pub n_dtp_phase1: u64,
    pub n_dtp_phase2: u64,
}

/// Coverage data from a table. Only the listed PRTP counts are defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveOracle {
    rows: Vec<CurveRow>,
}

impl CurveOracle {
    pub fn new(rows: Vec<CurveRow>) -> Result<Self, TestgenError> {
        if rows.is_empty() {
            return Err(TestgenError::EmptyCurve);
        }
        for (i, pair) in rows.windows(2).enumerate() {
            if pair[1].n_prtp <= pair[0].n_prtp {
                return Err(TestgenError::MonotonicityViolation {
                    row: i + 1,
                    msg: "n_prtp must be strictly increasing".into(),
                });
            }
            if pair[1].n_dtp_phase2 > pair[0].n_dtp_phase2 {
                return Err(TestgenError::MonotonicityViolation {
                    row: i + 1,
                    msg: "n_dtp_phase2 must not increase".into(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }
}

impl CoverageOracle for CurveOracle {
    fn query(&self, n_prtp: u64) -> Result<OracleResponse, TestgenError> {
        let i = self
            .rows
            .binary_search_by_key(&n_prtp, |r| r.n_prtp)
            .map_err(|_| TestgenError::OracleRangeExceeded { n: n_prtp })?;
        let r = self.rows[i];
        Ok(OracleResponse { n_dtp_phase1: r.n_dtp_phase1, n_dtp_phase2: r.n_dtp_phase2, residual: 0 })
    }

    fn floor_point(&self, n: u64) -> Option<u64> {
        let idx = self.rows.partition_point(|r| r.n_prtp <= n);
        idx.checked_sub(1).map(|i| self.rows[i].n_prtp)
    }

    fn seed(&self) -> u64 {
        0
    }
}

/// How phase 1 picks its very-hard-to-detect faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase1 {
    /// No phase-1 patterns (the classic two-phase flow).
    Disabled,
    /// Faults missed by the first `L` LFSR patterns are very hard.
    Threshold(u64),
    /// `L = 10 * 2^min(inputs, 16)`, at most 100 000.
    Default,
}

impl Phase1 {
    pub fn threshold(self, inputs: usize) -> Option<u64> {
        match self {
            Self::Disabled => None,
            Self::Threshold(l) => Some(l),
            Self::Default => Some(default_threshold(inputs)),
        }
    }
}

pub fn default_threshold(inputs: usize) -> u64 {
    (10u64 << inputs.min(16)).min(100_000)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase1Result {
    pub patterns: Vec<Pattern>,
    /// Faults the LFSR prefix missed.
    pub very_hard: Vec<Fault>,
    /// Faults the phase-1 patterns detect (any class).
    pub detected: BTreeSet<Fault>,
}

/// Phase 1: ATPG on exactly the faults the first `threshold` LFSR patterns
/// leave undetected. The prefix is cut at the LFSR period since the stream
/// repeats after that.
pub fn generate_phase1(
    nl: &Netlist,
    lfsr: &Lfsr,
    threshold: u64,
    cfg: &AtpgConfig,
) -> Result<Phase1Result, TestgenError> {
    let faults = fault_list(nl);
    let period = if lfsr.width() >= 63 { u64::MAX } else { (1u64 << lfsr.width()) - 1 };
    let len = threshold.min(period);
    let stream = lfsr_sequence(lfsr, len as usize, nl.input_width());
    let first = first_detections(nl, &stream, &faults)?;
    let very_hard: Vec<Fault> =
        faults.iter().zip(&first).filter(|(_, d)| d.is_none()).map(|(f, _)| *f).collect();
    let generated = atpg(nl, &very_hard, cfg);
    let detected = crate::fault_lab::fault_simulate(nl, &generated.patterns, &faults)?;
    Ok(Phase1Result { patterns: generated.patterns, very_hard, detected })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitConfig {
    pub seed: u64,
    pub phase1: Phase1,
    /// Longest LFSR prefix the oracle will answer for.
    pub horizon: u64,
    pub atpg: AtpgConfig,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { seed: 1, phase1: Phase1::Default, horizon: 4096, atpg: AtpgConfig::default() }
    }
}

/// Coverage oracle backed by fault simulation of a real circuit.
///
/// Phase-2 patterns come from one ATPG pool built for every fault phase 1
/// leaves open. For a PRTP count `n` the phase-2 set is, for each fault the
/// first `n` LFSR patterns still miss, the earliest pool pattern detecting
/// it. Since the LFSR stream of `n` patterns is a prefix of the stream of
/// `n + k`, the open-fault set only shrinks and so does the phase-2 set.
pub struct CircuitOracle {
    netlist: Netlist,
    seed: u64,
    lfsr: Lfsr,
    horizon: u64,
    faults: Vec<Fault>,
    phase1: Vec<Pattern>,
    phase1_detects: Vec<bool>,
    lfsr_first: Vec<Option<usize>>,
    pool: Vec<Pattern>,
    pool_first: Vec<Option<usize>>,
}

impl CircuitOracle {
    pub fn new(netlist: Netlist, cfg: &CircuitConfig) -> Result<Self, TestgenError> {
        let width = netlist.input_width();
        let lfsr = Lfsr::for_inputs(width, cfg.seed);
        let faults = fault_list(&netlist);
        let atpg_cfg = AtpgConfig { seed: cfg.seed, ..cfg.atpg.clone() };

        let (phase1, detected) = match cfg.phase1.threshold(width) {
            Some(l) => {
                let r = generate_phase1(&netlist, &lfsr, l, &atpg_cfg)?;
                (r.patterns, r.detected)
            }
            None => (Vec::new(), BTreeSet::new()),
        };
        let phase1_detects: Vec<bool> = faults.iter().map(|f| detected.contains(f)).collect();

        let stream = lfsr_sequence(&lfsr, cfg.horizon as usize, width);
        let lfsr_first = first_detections(&netlist, &stream, &faults)?;

        let open: Vec<Fault> =
            faults.iter().zip(&phase1_detects).filter(|(_, &d)| !d).map(|(f, _)| *f).collect();
        let pool = atpg(&netlist, &open, &atpg_cfg).patterns;
        let pool_first = first_detections(&netlist, &pool, &faults)?;

        Ok(Self {
            netlist,
            seed: cfg.seed,
            lfsr,
            horizon: cfg.horizon,
            faults,
            phase1,
            phase1_detects,
            lfsr_first,
            pool,
            pool_first,
        })
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn lfsr(&self) -> &Lfsr {
        &self.lfsr
    }

    pub fn phase1_patterns(&self) -> &[Pattern] {
        &self.phase1
    }

    pub fn prtp_patterns(&self, n_prtp: u64) -> Vec<Pattern> {
        lfsr_sequence(&self.lfsr, n_prtp as usize, self.netlist.input_width())
    }

    fn open_after(&self, n_prtp: u64) -> impl Iterator<Item = usize> + '_ {
        (0..self.faults.len()).filter(move |&i| {
            !self.phase1_detects[i] && !matches!(self.lfsr_first[i], Some(d) if (d as u64) < n_prtp)
        })
    }

    fn phase2_indices(&self, n_prtp: u64) -> (BTreeSet<usize>, u64) {
        let mut chosen = BTreeSet::new();
        let mut residual = 0;
        for i in self.open_after(n_prtp) {
            match self.pool_first[i] {
                Some(p) => {
                    chosen.insert(p);
                }
                None => residual += 1,
            }
        }
        (chosen, residual)
    }

    pub fn phase2_patterns(&self, n_prtp: u64) -> Result<Vec<Pattern>, TestgenError> {
        self.check(n_prtp)?;
        Ok(self.phase2_indices(n_prtp).0.into_iter().map(|i| self.pool[i].clone()).collect())
    }

    /// Faults no phase can detect at this PRTP count.
    pub fn undetected(&self, n_prtp: u64) -> Result<Vec<Fault>, TestgenError> {
        self.check(n_prtp)?;
        Ok(self.open_after(n_prtp).filter(|&i| self.pool_first[i].is_none()).map(|i| self.faults[i]).collect())
    }

    fn check(&self, n_prtp: u64) -> Result<(), TestgenError> {
        if n_prtp > self.horizon {
            Err(TestgenError::OracleRangeExceeded { n: n_prtp })
        } else {
            Ok(())
        }
    }
}

impl CoverageOracle for CircuitOracle {
    fn query(&self, n_prtp: u64) -> Result<OracleResponse, TestgenError> {
        self.check(n_prtp)?;
        let (chosen, residual) = self.phase2_indices(n_prtp);
        Ok(OracleResponse {
            n_dtp_phase1: self.phase1.len() as u64,
            n_dtp_phase2: chosen.len() as u64,
            residual,
        })
    }

    fn floor_point(&self, n: u64) -> Option<u64> {
        Some(n.min(self.horizon))
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TatCurvePoint {
    pub n_prtp: u64,
    pub tat: Micros,
    pub test_set: TestSet,
}

/// Queries the oracle at one PRTP count and prices the resulting test set.
pub fn evaluate_tat(core: &CoreSpec, oracle: &dyn CoverageOracle, n_prtp: u64) -> Result<TatCurvePoint, TestgenError> {
    let r = oracle.query(n_prtp)?;
    let test_set = TestSet {
        core_id: core.id,
        n_dtp_phase1: r.n_dtp_phase1,
        n_prtp,
        n_dtp_phase2: r.n_dtp_phase2,
    };
    Ok(TatCurvePoint { n_prtp, tat: test_time(&test_set, core)?, test_set })
}

/// Memoising TAT evaluator for one core and one oracle (hence one seed).
pub struct TatEvaluator<'a> {
    core: &'a CoreSpec,
    oracle: &'a dyn CoverageOracle,
    memo: Mutex<BTreeMap<u64, TatCurvePoint>>,
    calls: AtomicUsize,
}

impl<'a> TatEvaluator<'a> {
    pub fn new(core: &'a CoreSpec, oracle: &'a dyn CoverageOracle) -> Self {
        Self { core, oracle, memo: Mutex::new(BTreeMap::new()), calls: AtomicUsize::new(0) }
    }

    pub fn eval(&self, n_prtp: u64) -> Result<TatCurvePoint, TestgenError> {
        if let Some(p) = self.memo.lock().expect("memo lock").get(&n_prtp) {
            return Ok(*p);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let p = evaluate_tat(self.core, self.oracle, n_prtp)?;
        self.memo.lock().expect("memo lock").insert(n_prtp, p);
        Ok(p)
    }

    /// Evaluates several points concurrently; the memo makes the outcome
    /// independent of completion order.
    pub fn eval_many(&self, points: &[u64]) -> Result<Vec<TatCurvePoint>, TestgenError> {
        let fresh: BTreeSet<u64> = {
            let memo = self.memo.lock().expect("memo lock");
            points.iter().copied().filter(|n| !memo.contains_key(n)).collect()
        };
        let fresh: Vec<u64> = fresh.into_iter().collect();
        fresh.par_iter().map(|&n| self.eval(n)).collect::<Result<Vec<_>, _>>()?;
        points.iter().map(|&n| self.eval(n)).collect()
    }

    /// Distinct oracle queries made so far.
    pub fn oracle_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Every evaluated point, by PRTP count.
    pub fn points(&self) -> Vec<TatCurvePoint> {
        self.memo.lock().expect("memo lock").values().copied().collect()
    }
}

/// Lower TAT wins; equal TAT prefers fewer PRTPs.
fn better(a: &TatCurvePoint, b: &TatCurvePoint) -> bool {
    (a.tat, a.n_prtp) < (b.tat, b.n_prtp)
}

fn argmin(points: &[TatCurvePoint]) -> TatCurvePoint {
    let mut best = points[0];
    for p in &points[1..] {
        if better(p, &best) {
            best = *p;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub best: TatCurvePoint,
    /// Every probed point, sorted by PRTP count.
    pub probes: Vec<TatCurvePoint>,
    pub oracle_calls: usize,
    /// The search stopped at the "max is better than min" check.
    pub fast_path: bool,
}

/// Five-point interval search for the PRTP count with minimal TAT.
///
/// If `max` already beats `min` it is reported directly. Otherwise the
/// interval is probed at its ends, quarters and middle; when the right half
/// is rising (`T5 > T4 > T3`) the search keeps the left half, else the
/// right half. It stops once the interval is at most `granularity` wide and
/// returns the best point probed along the way. Probes lie on the grid
/// `min, min + granularity, ...` (plus `max`), so a table sampled on that
/// grid answers every probe.
pub fn find_optimal_nprtp(
    core: &CoreSpec,
    oracle: &dyn CoverageOracle,
    min_n: u64,
    max_n: u64,
    granularity: u64,
) -> Result<SearchOutcome, TestgenError> {
    if min_n >= max_n {
        return Err(TestgenError::InvalidRange { min: min_n, max: max_n });
    }
    let g = granularity.max(1);
    let eval = TatEvaluator::new(core, oracle);
    let ends = eval.eval_many(&[max_n, min_n])?;
    let (t_max, t_min) = (ends[0], ends[1]);
    if t_max.tat < t_min.tat {
        return Ok(SearchOutcome {
            best: t_max,
            probes: eval.points(),
            oracle_calls: eval.oracle_calls(),
            fast_path: true,
        });
    }
    // probes sit on the grid min, min+g, ..., with max as the last point
    let at = |i: u64| min_n.saturating_add(i.saturating_mul(g)).min(max_n);
    let (mut lo, mut hi) = (0, (max_n - min_n).div_ceil(g));
    while hi - lo > 1 {
        let w = hi - lo;
        let mid = lo + w / 2;
        let idx = [lo, lo + w / 4, mid, lo + (3 * w) / 4, hi];
        let t = eval.eval_many(&idx.map(at))?;
        if t[4].tat > t[3].tat && t[3].tat > t[2].tat {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let probes = eval.points();
    Ok(SearchOutcome { best: argmin(&probes), probes, oracle_calls: eval.oracle_calls(), fast_path: false })
}

/// Every PRTP count `min, min+g, ...` up to and including `max`.
pub fn sweep(
    core: &CoreSpec,
    oracle: &dyn CoverageOracle,
    min_n: u64,
    max_n: u64,
    granularity: u64,
) -> Result<Vec<TatCurvePoint>, TestgenError> {
    if min_n > max_n {
        return Err(TestgenError::InvalidRange { min: min_n, max: max_n });
    }
    let g = granularity.max(1);
    let mut ns: Vec<u64> = (min_n..=max_n).step_by(usize::try_from(g).unwrap_or(usize::MAX)).collect();
    if ns.last() != Some(&max_n) {
        ns.push(max_n);
    }
    ns.par_iter().map(|&n| evaluate_tat(core, oracle, n)).collect()
}

/// Exhaustive minimum, same tie-break as the search.
pub fn exhaustive_optimum(
    core: &CoreSpec,
    oracle: &dyn CoverageOracle,
    min_n: u64,
    max_n: u64,
    granularity: u64,
) -> Result<TatCurvePoint, TestgenError> {
    Ok(argmin(&sweep(core, oracle, min_n, max_n, granularity)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBounds {
    pub min: u64,
    pub max: u64,
    pub granularity: u64,
}

/// The complete three-phase test of one circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridTest {
    pub test_set: TestSet,
    pub tat: Micros,
    pub phase1: Vec<Pattern>,
    pub prtps: Vec<Pattern>,
    pub phase2: Vec<Pattern>,
    /// Faults no phase detects (untestable, or given up on wide circuits).
    pub untestable: Vec<Fault>,
    pub search: SearchOutcome,
}

impl HybridTest {
    /// All patterns in application order: phase 1, PRTPs, phase 2.
    pub fn all_patterns(&self) -> Vec<Pattern> {
        let mut v = self.phase1.clone();
        v.extend(self.prtps.iter().cloned());
        v.extend(self.phase2.iter().cloned());
        v
    }
}

/// Runs phase 1, searches the PRTP count, then builds phase 2.
pub fn build_test_set(
    netlist: &Netlist,
    core: &CoreSpec,
    cfg: &CircuitConfig,
    bounds: &SearchBounds,
) -> Result<HybridTest, TestgenError> {
    let cfg = CircuitConfig { horizon: cfg.horizon.max(bounds.max), ..cfg.clone() };
    let oracle = CircuitOracle::new(netlist.clone(), &cfg)?;
    build_from_oracle(&oracle, core, bounds)
}

pub fn build_from_oracle(
    oracle: &CircuitOracle,
    core: &CoreSpec,
    bounds: &SearchBounds,
) -> Result<HybridTest, TestgenError> {
    let search = find_optimal_nprtp(core, oracle, bounds.min, bounds.max, bounds.granularity)?;
    let n = search.best.n_prtp;
    Ok(HybridTest {
        test_set: search.best.test_set,
        tat: search.best.tat,
        phase1: oracle.phase1_patterns().to_vec(),
        prtps: oracle.prtp_patterns(n),
        phase2: oracle.phase2_patterns(n)?,
        untestable: oracle.undetected(n)?,
        search,
    })
}
