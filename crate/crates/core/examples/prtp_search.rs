//! Searching the PRTP count that minimises a core's test time, compared
//! with a full sweep.

use socbist::core_model::CoreSpec;
use socbist::fault_lab::parse_bench;
use socbist::hybrid_testgen::{exhaustive_optimum, find_optimal_nprtp, CircuitConfig, CircuitOracle};
use socbist::units::{Mhz, Power};

fn main() {
    let nl = parse_bench("c17", include_str!("../fixtures/c17.bench")).expect("fixture parses");
    let core = CoreSpec::scan_core(1, Power::from_units(1), 5, 0, Mhz::from_units(100), Mhz::from_units(100));
    let oracle = CircuitOracle::new(nl, &CircuitConfig { horizon: 1024, ..Default::default() }).unwrap();
    let found = find_optimal_nprtp(&core, &oracle, 0, 1024, 1).unwrap();
    for p in &found.probes {
        println!("n_prtp {:>5}  tat {:>6} us", p.n_prtp, p.tat);
    }
    println!("search: n_prtp {} tat {} us after {} oracle calls", found.best.n_prtp, found.best.tat, found.oracle_calls);
    let best = exhaustive_optimum(&core, &oracle, 0, 1024, 1).unwrap();
    println!("sweep:  n_prtp {} tat {} us", best.n_prtp, best.tat);
}
