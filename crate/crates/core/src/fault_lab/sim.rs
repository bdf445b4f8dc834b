//! Word-parallel single-stuck-at fault simulation.
//!
//! Patterns are packed 64 to a word. For each fault only the nets whose value
//! actually differs from the fault-free circuit are re-evaluated.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;

use super::netlist::{NetId, Netlist};
use super::FaultLabError;

/// One input vector, indexed like [`Netlist::inputs`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Pattern whose bit `j` is bit `j` of `index`.
    pub fn from_index(index: u64, width: usize) -> Self {
        Self((0..width).map(|j| j < 64 && (index >> j) & 1 == 1).collect())
    }

    /// Hex text, most significant digit first; input `j` is bit `j` of the value.
    pub fn to_hex(&self) -> String {
        let digits = self.0.len().div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4).fold(0u32, |acc, b| {
                    acc | (u32::from(*self.0.get(d * 4 + b).unwrap_or(&false)) << b)
                });
                char::from_digit(nibble, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(text: &str, width: usize) -> Result<Self, FaultLabError> {
        let digits = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")).unwrap_or(text);
        let expected = width.div_ceil(4).max(1);
        if digits.len() != expected {
            return Err(FaultLabError::VectorWidthMismatch { expected: width, got: digits.len() * 4 });
        }
        let mut bits = vec![false; expected * 4];
        for (d, ch) in digits.chars().rev().enumerate() {
            let v = ch.to_digit(16).ok_or_else(|| FaultLabError::PatternSyntax {
                line: 0,
                msg: format!("`{ch}` is not a hex digit"),
            })?;
            for b in 0..4 {
                bits[d * 4 + b] = (v >> b) & 1 == 1;
            }
        }
        if bits[width..].iter().any(|&b| b) {
            return Err(FaultLabError::VectorWidthMismatch { expected: width, got: bits.len() });
        }
        bits.truncate(width);
        Ok(Self(bits))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a pattern file: one hex vector per line, `#` comments.
pub fn parse_pattern_file(text: &str, width: usize) -> Result<Vec<Pattern>, FaultLabError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let p = Pattern::from_hex(body, width).map_err(|e| match e {
            FaultLabError::PatternSyntax { msg, .. } => FaultLabError::PatternSyntax { line: idx + 1, msg },
            FaultLabError::VectorWidthMismatch { expected, got } => FaultLabError::PatternSyntax {
                line: idx + 1,
                msg: format!("vector is {got} bits wide, circuit has {expected} inputs"),
            },
            other => other,
        })?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StuckAt {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fault {
    pub net: NetId,
    pub stuck: StuckAt,
}

impl Fault {
    pub fn describe(&self, nl: &Netlist) -> String {
        let v = match self.stuck {
            StuckAt::Zero => 0,
            StuckAt::One => 1,
        };
        format!("{}/sa{v}", nl.net_name(self.net))
    }
}

/// Both polarities on every net, in net order.
pub fn fault_list(nl: &Netlist) -> Vec<Fault> {
    (0..nl.num_nets())
        .flat_map(|net| [Fault { net, stuck: StuckAt::Zero }, Fault { net, stuck: StuckAt::One }])
        .collect()
}

/// Lane mask for a block holding `n` patterns.
pub(crate) fn lane_mask(n: usize) -> u64 {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

/// Packs up to 64 patterns into one word per input.
pub(crate) fn pack(patterns: &[Pattern], width: usize) -> Vec<u64> {
    let mut words = vec![0u64; width];
    for (lane, p) in patterns.iter().enumerate() {
        for (j, &b) in p.0.iter().enumerate() {
            words[j] |= u64::from(b) << lane;
        }
    }
    words
}

pub(crate) fn unpack(words: &[u64], lane: usize) -> Pattern {
    Pattern(words.iter().map(|w| (w >> lane) & 1 == 1).collect())
}

/// Fault-free values for one block of packed inputs.
pub(crate) fn good_values(nl: &Netlist, input_words: &[u64]) -> Vec<u64> {
    let mut values = vec![0u64; nl.num_nets()];
    for (&net, &w) in nl.inputs().iter().zip(input_words) {
        values[net] = w;
    }
    for g in nl.gates() {
        values[g.output] = g.kind.eval(g.inputs.iter().map(|&i| values[i]));
    }
    values
}

/// Reusable scratch space for fault-effect propagation.
pub(crate) struct Propagator {
    diff: Vec<u64>,
    touched: Vec<NetId>,
    dirty: Vec<bool>,
    queue: std::collections::BinaryHeap<std::cmp::Reverse<usize>>,
    is_output: Vec<bool>,
}

impl Propagator {
    pub(crate) fn new(nl: &Netlist) -> Self {
        let mut is_output = vec![false; nl.num_nets()];
        for &o in nl.outputs() {
            is_output[o] = true;
        }
        Self {
            diff: vec![0; nl.num_nets()],
            touched: Vec::new(),
            dirty: vec![false; nl.gates().len()],
            queue: Default::default(),
            is_output,
        }
    }

    fn reset(&mut self) {
        for &n in &self.touched {
            self.diff[n] = 0;
        }
        self.touched.clear();
    }

    /// Injects `fault` and returns the lanes where some output differs.
    /// After the call, [`Self::touched`] lists nets carrying a fault effect.
    pub(crate) fn detect(&mut self, nl: &Netlist, good: &[u64], fault: Fault, mask: u64) -> u64 {
        self.reset();
        let forced = match fault.stuck {
            StuckAt::Zero => 0,
            StuckAt::One => !0,
        };
        let site = (good[fault.net] ^ forced) & mask;
        if site == 0 {
            return 0;
        }
        self.diff[fault.net] = site;
        self.touched.push(fault.net);
        let mut detected = if self.is_output[fault.net] { site } else { 0 };
        for &g in nl.fanout(fault.net) {
            if !std::mem::replace(&mut self.dirty[g], true) {
                self.queue.push(std::cmp::Reverse(g));
            }
        }
        let gates = nl.gates();
        while let Some(std::cmp::Reverse(pos)) = self.queue.pop() {
            self.dirty[pos] = false;
            let g = &gates[pos];
            let diff = &self.diff;
            let faulty = g.kind.eval(g.inputs.iter().map(|&i| good[i] ^ diff[i]));
            let d = (faulty ^ good[g.output]) & mask;
            if d == 0 {
                continue;
            }
            self.diff[g.output] = d;
            self.touched.push(g.output);
            if self.is_output[g.output] {
                detected |= d;
            }
            for &r in nl.fanout(g.output) {
                if !std::mem::replace(&mut self.dirty[r], true) {
                    self.queue.push(std::cmp::Reverse(r));
                }
            }
        }
        detected
    }

    pub(crate) fn touched(&self) -> &[NetId] {
        &self.touched
    }

    pub(crate) fn diff(&self, net: NetId) -> u64 {
        self.diff[net]
    }
}

fn check_widths(nl: &Netlist, patterns: &[Pattern]) -> Result<(), FaultLabError> {
    let width = nl.input_width();
    match patterns.iter().find(|p| p.width() != width) {
        Some(p) => Err(FaultLabError::VectorWidthMismatch { expected: width, got: p.width() }),
        None => Ok(()),
    }
}

/// Faults below this count are simulated on the calling thread.
const PARALLEL_THRESHOLD: usize = 256;

/// Index of the first pattern detecting each fault, or `None`.
pub fn first_detections(
    nl: &Netlist,
    patterns: &[Pattern],
    faults: &[Fault],
) -> Result<Vec<Option<usize>>, FaultLabError> {
    check_widths(nl, patterns)?;
    let mut first = vec![None; faults.len()];
    let mut live: Vec<usize> = (0..faults.len()).collect();
    for (block, chunk) in patterns.chunks(64).enumerate() {
        if live.is_empty() {
            break;
        }
        let good = good_values(nl, &pack(chunk, nl.input_width()));
        let mask = lane_mask(chunk.len());
        let hits: Vec<u64> = if live.len() < PARALLEL_THRESHOLD {
            let mut prop = Propagator::new(nl);
            live.iter().map(|&f| prop.detect(nl, &good, faults[f], mask)).collect()
        } else {
            live.par_chunks(64)
                .flat_map_iter(|fs| {
                    let mut prop = Propagator::new(nl);
                    fs.iter().map(|&f| prop.detect(nl, &good, faults[f], mask)).collect::<Vec<_>>()
                })
                .collect()
        };
        for (&f, &hit) in live.iter().zip(&hits) {
            if hit != 0 {
                first[f] = Some(block * 64 + hit.trailing_zeros() as usize);
            }
        }
        live.retain(|&f| first[f].is_none());
    }
    Ok(first)
}

/// The set of faults detected by at least one pattern.
pub fn fault_simulate(
    nl: &Netlist,
    patterns: &[Pattern],
    faults: &[Fault],
) -> Result<BTreeSet<Fault>, FaultLabError> {
    let first = first_detections(nl, patterns, faults)?;
    Ok(faults
        .iter()
        .zip(first)
        .filter_map(|(f, d)| d.map(|_| *f))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault_lab::netlist::parse_bench;

    fn and1() -> Netlist {
        parse_bench("and", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a,b)\n").unwrap()
    }

    fn names(nl: &Netlist, set: &BTreeSet<Fault>) -> Vec<String> {
        set.iter().map(|f| f.describe(nl)).collect()
    }

    fn pat(bits: &[u8]) -> Pattern {
        Pattern(bits.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn fault_list_sizes() {
        assert_eq!(fault_list(&and1()).len(), 6);
        let buf = parse_bench("b", "INPUT(a)\nOUTPUT(y)\ny = BUFF(a)\n").unwrap();
        assert_eq!(fault_list(&buf).len(), 4);
        let c17 = parse_bench("c17", include_str!("../../fixtures/c17.bench")).unwrap();
        assert_eq!(fault_list(&c17).len(), 22);
    }

    #[test]
    fn and_gate_truth_table() {
        let nl = and1();
        let faults = fault_list(&nl);
        let d = fault_simulate(&nl, &[pat(&[1, 1])], &faults).unwrap();
        assert_eq!(names(&nl, &d), ["a/sa0", "b/sa0", "y/sa0"]);
        let d = fault_simulate(&nl, &[pat(&[0, 0])], &faults).unwrap();
        assert_eq!(names(&nl, &d), ["y/sa1"]);
        assert!(fault_simulate(&nl, &[], &faults).unwrap().is_empty());
    }

    #[test]
    fn width_mismatch() {
        let nl = and1();
        let err = fault_simulate(&nl, &[pat(&[1])], &fault_list(&nl)).unwrap_err();
        assert_eq!(err, FaultLabError::VectorWidthMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn first_detection_spans_blocks() {
        let nl = and1();
        let mut ps = vec![pat(&[0, 0]); 130];
        ps.push(pat(&[1, 1]));
        let first = first_detections(&nl, &ps, &[Fault { net: 2, stuck: StuckAt::Zero }]).unwrap();
        assert_eq!(first, vec![Some(130)]);
    }

    #[test]
    fn hex_round_trip() {
        let p = pat(&[1, 0, 1, 1, 0, 0, 0, 0, 1]);
        assert_eq!(p.to_hex(), "10d");
        assert_eq!(Pattern::from_hex("10d", 9).unwrap(), p);
        assert_eq!(Pattern::from_hex("0x10d", 9).unwrap(), p);
        assert!(Pattern::from_hex("30d", 9).is_err());
        assert!(Pattern::from_hex("0d", 9).is_err());
        assert!(Pattern::from_hex("1g", 5).is_err());
    }

    #[test]
    fn pattern_file() {
        let ps = parse_pattern_file("# vectors\n3\n\n1 # a only\n", 2).unwrap();
        assert_eq!(ps, vec![pat(&[1, 1]), pat(&[1, 0])]);
        let err = parse_pattern_file("3\nz\n", 2).unwrap_err();
        assert!(matches!(err, FaultLabError::PatternSyntax { line: 2, .. }));
    }
}
