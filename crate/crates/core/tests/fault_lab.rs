mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use socbist::fault_lab::{
    atpg, compact, fault_list, fault_simulate, first_detections, lfsr_sequence, parse_bench, primitive_polynomial,
    AtpgConfig, Fault, Lfsr, Pattern, StuckAt,
};

fn exhaustive(width: usize) -> Vec<Pattern> {
    (0..1u64 << width).map(|i| Pattern::from_index(i, width)).collect()
}

#[test]
fn and_gate_truth_table() {
    let nl = parse_bench("and1", AND1).unwrap();
    let faults = fault_list(&nl);
    assert_eq!(faults.len(), 6);
    let y = nl.net_by_name("y").unwrap();
    let a = nl.net_by_name("a").unwrap();
    // only 11 exposes y/sa0; 01 exposes a/sa1 and y/sa1
    let p11 = Pattern(vec![true, true]);
    let p01 = Pattern(vec![false, true]);
    let d11 = fault_simulate(&nl, &[p11], &faults).unwrap();
    assert!(d11.contains(&Fault { net: y, stuck: StuckAt::Zero }));
    assert!(!d11.contains(&Fault { net: y, stuck: StuckAt::One }));
    let d01 = fault_simulate(&nl, &[p01], &faults).unwrap();
    assert_eq!(d01, [Fault { net: a, stuck: StuckAt::One }, Fault { net: y, stuck: StuckAt::One }].into());
}

#[test]
fn c17_exhaustive_detects_every_fault() {
    let nl = parse_bench("c17", C17).unwrap();
    let faults = fault_list(&nl);
    assert_eq!(faults.len(), 22);
    let all = exhaustive(nl.input_width());
    assert_eq!(fault_simulate(&nl, &all, &faults).unwrap().len(), 22);
    assert_eq!(scalar_fault_sim(&nl, &all, &faults).len(), 22);
}

#[test]
fn width_mismatch_is_an_error() {
    let nl = parse_bench("c17", C17).unwrap();
    assert!(fault_simulate(&nl, &[Pattern(vec![true; 4])], &fault_list(&nl)).is_err());
}

#[test]
fn lfsr_periods_are_maximal() {
    for width in 1..=14u32 {
        let mut l = Lfsr::with_width(width, 1).unwrap();
        let start = l.state();
        let mut period = 0u64;
        loop {
            l.step();
            period += 1;
            if l.state() == start {
                break;
            }
        }
        assert_eq!(period, (1u64 << width) - 1, "width {width}");
    }
    assert!(primitive_polynomial(64).is_some());
    assert!(primitive_polynomial(65).is_none());
}

#[test]
fn lfsr_rejects_bad_seeds() {
    assert!(Lfsr::new(0x25, 0).is_err());
    assert!(Lfsr::new(0x25, 0x40).is_err());
    assert!(Lfsr::new(0x24, 1).is_err());
}

#[test]
fn lfsr_streams_are_prefixes() {
    let l = Lfsr::with_width(7, 5).unwrap();
    let long = lfsr_sequence(&l, 200, 9);
    let short = lfsr_sequence(&l, 50, 9);
    assert_eq!(&long[..50], &short[..]);
}

#[test]
fn atpg_covers_every_detectable_fault() {
    let mut r = rng(11);
    for _ in 0..20 {
        let nl = parse_bench("r", &random_bench(&mut r, 5, 15)).unwrap();
        let faults = fault_list(&nl);
        let detectable = scalar_fault_sim(&nl, &exhaustive(nl.input_width()), &faults);
        let res = atpg(&nl, &faults, &AtpgConfig::default());
        let got = fault_simulate(&nl, &res.patterns, &faults).unwrap();
        assert_eq!(got, detectable);
        let missed: BTreeSet<Fault> = res.undetected.iter().copied().collect();
        assert_eq!(missed, faults.iter().copied().filter(|f| !detectable.contains(f)).collect());
    }
}

#[test]
fn bounded_atpg_finds_easy_faults_on_wide_circuits() {
    let mut r = rng(12);
    let nl = parse_bench("wide", &random_bench(&mut r, 30, 25)).unwrap();
    let faults = fault_list(&nl);
    let res = atpg(&nl, &faults, &AtpgConfig::default());
    let got = fault_simulate(&nl, &res.patterns, &faults).unwrap();
    let sampled = scalar_fault_sim(&nl, &random_patterns(&mut r, nl.input_width(), 64), &faults);
    assert!(sampled.is_subset(&got));
}

#[test]
fn compaction_keeps_coverage() {
    let nl = parse_bench("c17", C17).unwrap();
    let faults = fault_list(&nl);
    let all = exhaustive(nl.input_width());
    let small = compact(&nl, all.clone(), &faults);
    assert!(small.len() < all.len());
    assert_eq!(fault_simulate(&nl, &small, &faults).unwrap(), fault_simulate(&nl, &all, &faults).unwrap());
}

#[test]
fn bench_round_trip() {
    let mut r = rng(13);
    for _ in 0..20 {
        let nl = parse_bench("r", &random_bench(&mut r, 6, 20)).unwrap();
        let back = parse_bench("r", &nl.to_bench()).unwrap();
        let pats = random_patterns(&mut r, nl.input_width(), 40);
        assert_eq!(back.input_width(), nl.input_width());
        let names = |n: &socbist::fault_lab::Netlist, set: BTreeSet<Fault>| -> BTreeSet<String> {
            set.iter().map(|f| f.describe(n)).collect()
        };
        assert_eq!(
            names(&nl, fault_simulate(&nl, &pats, &fault_list(&nl)).unwrap()),
            names(&back, fault_simulate(&back, &pats, &fault_list(&back)).unwrap())
        );
    }
}

#[test]
fn parse_errors_carry_lines() {
    let e = parse_bench("bad", "INPUT(a)\nOUTPUT(y)\ny = FROB(a)\n").unwrap_err();
    assert!(e.to_string().starts_with("line 3"), "{e}");
    assert!(parse_bench("loop", "INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = NOT(y)\n").is_err());
    assert!(parse_bench("undriven", "INPUT(a)\nOUTPUT(y)\ny = AND(a, q)\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn word_parallel_equals_scalar(seed in any::<u64>(), inputs in 1usize..9, gates in 1usize..31, n in 1usize..140) {
        let mut r = rng(seed);
        let nl = parse_bench("p", &random_bench(&mut r, inputs, gates)).unwrap();
        let pats = random_patterns(&mut r, nl.input_width(), n);
        let faults = fault_list(&nl);
        prop_assert_eq!(fault_simulate(&nl, &pats, &faults).unwrap(), scalar_fault_sim(&nl, &pats, &faults));
    }

    #[test]
    fn first_detection_is_earliest(seed in any::<u64>(), n in 1usize..100) {
        let mut r = rng(seed);
        let nl = parse_bench("p", &random_bench(&mut r, 6, 20)).unwrap();
        let pats = random_patterns(&mut r, nl.input_width(), n);
        let faults = fault_list(&nl);
        let first = first_detections(&nl, &pats, &faults).unwrap();
        for (f, d) in faults.iter().zip(first) {
            let expect = pats.iter().position(|p| scalar_detects(&nl, p, *f));
            prop_assert_eq!(d, expect);
        }
    }
}
