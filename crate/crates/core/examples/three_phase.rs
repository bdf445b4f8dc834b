//! Three-phase test generation against the two-phase flow on one circuit.

use socbist::core_model::CoreSpec;
use socbist::fault_lab::{fault_list, fault_simulate, parse_bench};
use socbist::hybrid_testgen::{build_test_set, CircuitConfig, Phase1, SearchBounds};
use socbist::units::{Mhz, Power};

fn main() {
    let nl = parse_bench("c17", include_str!("../fixtures/c17.bench")).expect("fixture parses");
    let core = CoreSpec::scan_core(1, Power::from_units(1), 5, 0, Mhz::from_units(100), Mhz::from_units(100));
    let bounds = SearchBounds { min: 0, max: 512, granularity: 1 };
    let faults = fault_list(&nl);
    for (label, phase1) in [("two-phase", Phase1::Disabled), ("three-phase L=8", Phase1::Threshold(8)), ("three-phase", Phase1::Default)] {
        let cfg = CircuitConfig { seed: 1, phase1, ..Default::default() };
        let t = build_test_set(&nl, &core, &cfg, &bounds).unwrap();
        let covered = fault_simulate(&nl, &t.all_patterns(), &faults).unwrap().len();
        println!(
            "{label:<16} phase1 {} prtp {} phase2 {}  tat {} us  coverage {covered}/{}",
            t.test_set.n_dtp_phase1,
            t.test_set.n_prtp,
            t.test_set.n_dtp_phase2,
            t.tat,
            faults.len()
        );
    }
}
