//! Stuck-at fault simulation of c17 with random patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socbist::fault_lab::{fault_list, first_detections, parse_bench, Pattern};

fn main() {
    let nl = parse_bench("c17", include_str!("../fixtures/c17.bench")).expect("fixture parses");
    let faults = fault_list(&nl);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let patterns: Vec<Pattern> =
        (0..12).map(|_| Pattern((0..nl.input_width()).map(|_| rng.gen()).collect())).collect();
    let first = first_detections(&nl, &patterns, &faults).expect("widths match");
    for (f, d) in faults.iter().zip(&first) {
        match d {
            Some(i) => println!("{:<10} pattern {i} ({})", f.describe(&nl), patterns[*i].to_hex()),
            None => println!("{:<10} undetected", f.describe(&nl)),
        }
    }
    let hit = first.iter().filter(|d| d.is_some()).count();
    println!("{hit}/{} faults detected by {} patterns", faults.len(), patterns.len());
}
