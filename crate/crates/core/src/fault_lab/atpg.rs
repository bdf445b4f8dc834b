//! Desk-scale deterministic test generation.
//!
//! Circuits with at most [`AtpgConfig::exhaustive_limit`] inputs are searched
//! exhaustively, so a fault left undetected is provably untestable. Wider
//! circuits get seeded random patterns followed by per-fault bit-flip hill
//! climbing. Either way the result is compacted by reverse-order fault
//! dropping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::{GateKind, NetId, Netlist};
use super::sim::{first_detections, good_values, lane_mask, unpack, Fault, Pattern, Propagator, StuckAt};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtpgConfig {
    pub seed: u64,
    pub exhaustive_limit: usize,
    /// Random 64-pattern blocks tried before hill climbing (bounded path).
    pub random_blocks: usize,
    /// Hill-climbing evaluations per fault (bounded path).
    pub trial_budget: usize,
}

impl Default for AtpgConfig {
    fn default() -> Self {
        Self { seed: 1, exhaustive_limit: 24, random_blocks: 64, trial_budget: 10_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtpgResult {
    pub patterns: Vec<Pattern>,
    /// Targets no returned pattern detects, in target order.
    pub undetected: Vec<Fault>,
}

/// Input words for block `block` of the exhaustive enumeration.
fn exhaustive_block(width: usize, block: u64) -> Vec<u64> {
    const LOW: [u64; 6] = [
        0xaaaa_aaaa_aaaa_aaaa,
        0xcccc_cccc_cccc_cccc,
        0xf0f0_f0f0_f0f0_f0f0,
        0xff00_ff00_ff00_ff00,
        0xffff_0000_ffff_0000,
        0xffff_ffff_0000_0000,
    ];
    (0..width)
        .map(|j| {
            if j < 6 {
                LOW[j]
            } else if (block >> (j - 6)) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

/// Greedy cover inside one block: repeatedly take the lane that detects the
/// most still-open targets. Returns the chosen lanes.
fn cover_block(open: &mut Vec<usize>, hits: &[u64]) -> Vec<usize> {
    let mut hits: Vec<(usize, u64)> = open.iter().copied().zip(hits.iter().copied()).collect();
    let mut lanes = Vec::new();
    loop {
        let mut counts = [0u32; 64];
        for &(_, h) in &hits {
            let mut w = h;
            while w != 0 {
                counts[w.trailing_zeros() as usize] += 1;
                w &= w - 1;
            }
        }
        let (lane, &best) = counts
            .iter()
            .enumerate()
            .max_by_key(|&(lane, &c)| (c, std::cmp::Reverse(lane)))
            .expect("64 lanes");
        if best == 0 {
            break;
        }
        lanes.push(lane);
        hits.retain(|&(_, h)| (h >> lane) & 1 == 0);
    }
    *open = hits.into_iter().map(|(f, _)| f).collect();
    lanes
}

pub fn atpg(nl: &Netlist, targets: &[Fault], cfg: &AtpgConfig) -> AtpgResult {
    if targets.is_empty() {
        return AtpgResult::default();
    }
    let width = nl.input_width();
    let mut prop = Propagator::new(nl);
    let mut open: Vec<usize> = (0..targets.len()).collect();
    let mut patterns = Vec::new();

    let mut run_block = |words: Vec<u64>, mask: u64, open: &mut Vec<usize>, patterns: &mut Vec<Pattern>| {
        let good = good_values(nl, &words);
        let hits: Vec<u64> = open.iter().map(|&f| prop.detect(nl, &good, targets[f], mask)).collect();
        let before = open.len();
        for lane in cover_block(open, &hits) {
            patterns.push(unpack(&words, lane));
        }
        open.len() != before
    };

    if width <= cfg.exhaustive_limit {
        let total: u64 = 1u64 << width;
        let blocks = total.div_ceil(64);
        let mask = lane_mask(total.min(64) as usize);
        for block in 0..blocks {
            if open.is_empty() {
                break;
            }
            run_block(exhaustive_block(width, block), mask, &mut open, &mut patterns);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idle = 0;
        for _ in 0..cfg.random_blocks {
            if open.is_empty() || idle >= 8 {
                break;
            }
            let words: Vec<u64> = (0..width).map(|_| rng.gen()).collect();
            if run_block(words, !0, &mut open, &mut patterns) {
                idle = 0;
            } else {
                idle += 1;
            }
        }
        let mut i = 0;
        while i < open.len() {
            let fault = targets[open[i]];
            match climb(nl, fault, cfg.trial_budget, &mut rng, &mut prop) {
                Some(p) => {
                    let first = first_detections(nl, std::slice::from_ref(&p), &open.iter().map(|&f| targets[f]).collect::<Vec<_>>())
                        .expect("width matches");
                    open = open.iter().zip(first).filter(|(_, d)| d.is_none()).map(|(&f, _)| f).collect();
                    patterns.push(p);
                }
                None => i += 1,
            }
        }
    }

    let patterns = compact(nl, patterns, targets);
    AtpgResult { patterns, undetected: open.into_iter().map(|f| targets[f]).collect() }
}

/// Keeps a pattern only if, scanning from the last pattern backwards, it is
/// the first to detect some target.
pub fn compact(nl: &Netlist, patterns: Vec<Pattern>, targets: &[Fault]) -> Vec<Pattern> {
    if patterns.is_empty() {
        return patterns;
    }
    let reversed: Vec<Pattern> = patterns.iter().rev().cloned().collect();
    let first = first_detections(nl, &reversed, targets).expect("width matches");
    let n = patterns.len();
    let mut keep = vec![false; n];
    for idx in first.into_iter().flatten() {
        keep[n - 1 - idx] = true;
    }
    patterns.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

/// Effort to drive `net` to `want` under the current lane values: 0 if it
/// already holds, otherwise the number of input flips a simple backtrace
/// would need (sum over all-required inputs, min over any-suffices inputs).
fn control_cost(nl: &Netlist, good: &[u64], lane: usize, net: NetId, want: bool, memo: &mut [u32]) -> u32 {
    let val = |n: NetId| (good[n] >> lane) & 1 == 1;
    if val(net) == want {
        return 0;
    }
    let slot = net * 2 + usize::from(want);
    if memo[slot] != u32::MAX {
        return memo[slot];
    }
    let cost = match nl.driver(net) {
        None => 1,
        Some(pos) => {
            let g = &nl.gates()[pos];
            let all = |v: bool, memo: &mut [u32]| {
                g.inputs.iter().fold(0u32, |acc, &i| acc.saturating_add(control_cost(nl, good, lane, i, v, memo)))
            };
            let any = |v: bool, memo: &mut [u32]| {
                g.inputs.iter().map(|&i| control_cost(nl, good, lane, i, v, memo)).min().unwrap_or(u32::MAX)
            };
            match (g.kind, want) {
                (GateKind::And, true) | (GateKind::Nand, false) => all(true, memo),
                (GateKind::And, false) | (GateKind::Nand, true) => any(false, memo),
                (GateKind::Or, false) | (GateKind::Nor, true) => all(false, memo),
                (GateKind::Or, true) | (GateKind::Nor, false) => any(true, memo),
                (GateKind::Xor | GateKind::Xnor, _) => g
                    .inputs
                    .iter()
                    .map(|&i| control_cost(nl, good, lane, i, !val(i), memo))
                    .min()
                    .unwrap_or(u32::MAX),
                (GateKind::Not, w) => control_cost(nl, good, lane, g.inputs[0], !w, memo),
                (GateKind::Buff | GateKind::Dff, w) => control_cost(nl, good, lane, g.inputs[0], w, memo),
            }
        }
    };
    memo[slot] = cost;
    cost
}

const UNEXCITED: u32 = 1_000_000;
const BLOCKED: u32 = 500_000;

/// Lower is better: excitation effort while the fault is not excited, then
/// the cheapest way to open a gate on the fault-effect frontier.
fn lane_score(nl: &Netlist, good: &[u64], fault: Fault, prop: &Propagator, lane: usize, memo: &mut Vec<u32>) -> u32 {
    memo.clear();
    memo.resize(nl.num_nets() * 2, u32::MAX);
    let stuck = fault.stuck == StuckAt::One;
    if (good[fault.net] >> lane) & 1 == u64::from(stuck) {
        return UNEXCITED.saturating_add(control_cost(nl, good, lane, fault.net, !stuck, memo));
    }
    let has_diff = |n: NetId| (prop.diff(n) >> lane) & 1 == 1;
    let mut best = BLOCKED;
    for &net in prop.touched() {
        if !has_diff(net) {
            continue;
        }
        for &pos in nl.fanout(net) {
            let g = &nl.gates()[pos];
            if has_diff(g.output) {
                continue;
            }
            let non_controlling = match g.kind {
                GateKind::And | GateKind::Nand => true,
                GateKind::Or | GateKind::Nor => false,
                _ => continue,
            };
            let cost = g
                .inputs
                .iter()
                .filter(|&&i| !has_diff(i))
                .fold(0u32, |acc, &i| acc.saturating_add(control_cost(nl, good, lane, i, non_controlling, memo)));
            best = best.min(cost);
        }
    }
    best
}

/// Bit-flip hill climbing, 64 single-bit neighbours per step.
fn climb(nl: &Netlist, fault: Fault, budget: usize, rng: &mut ChaCha8Rng, prop: &mut Propagator) -> Option<Pattern> {
    let width = nl.input_width();
    let mut current: Vec<bool> = (0..width).map(|_| rng.gen()).collect();
    let mut current_score = u32::MAX;
    let mut memo = Vec::new();
    let mut trials = 0;
    while trials < budget {
        let flips: Vec<usize> = (0..64).map(|_| rng.gen_range(0..width)).collect();
        let mut words: Vec<u64> = current.iter().map(|&b| if b { !0 } else { 0 }).collect();
        for (lane, &bit) in flips.iter().enumerate() {
            words[bit] ^= 1u64 << lane;
        }
        trials += 64;
        let good = good_values(nl, &words);
        let detected = prop.detect(nl, &good, fault, !0);
        if detected != 0 {
            return Some(unpack(&words, detected.trailing_zeros() as usize));
        }
        let (lane, best) = (0..64)
            .map(|lane| (lane, lane_score(nl, &good, fault, prop, lane, &mut memo)))
            .min_by_key(|&(lane, s)| (s, lane))
            .expect("64 lanes");
        if best <= current_score {
            current[flips[lane]] = !current[flips[lane]];
            current_score = best;
        } else {
            current = (0..width).map(|_| rng.gen()).collect();
            current_score = u32::MAX;
        }
    }
    None
}
