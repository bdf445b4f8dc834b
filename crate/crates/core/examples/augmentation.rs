//! Filling an incomplete node with extra BIST work from a coverage curve.

use std::collections::BTreeMap;

use socbist::core_model::CoreId;
use socbist::hybrid_testgen::CoverageOracle;
use socbist::power_groups::enumerate_groups;
use socbist::scheduler::{augment_incomplete, build_schedule, to_text};
use socbist::soc_io::{parse_curve, parse_soc};

fn main() {
    let soc = parse_soc(include_str!("../fixtures/pair.soc")).expect("fixture parses");
    let curve = parse_curve(include_str!("../fixtures/curves/pair_steep/core2.csv")).expect("curve parses");
    let catalog = enumerate_groups(&soc).unwrap();
    let before = build_schedule(&soc, &catalog).unwrap();
    print!("before\n{}", to_text(&before));
    let oracles: BTreeMap<CoreId, &dyn CoverageOracle> = [(2, &curve as &dyn CoverageOracle)].into();
    let out = augment_incomplete(&soc, &catalog, &before, &oracles).unwrap();
    for p in &out.graph.augmentations {
        println!(
            "node {} core {}: PRTPs {} -> {}, {} DTPs saved, +{} us BIST, -{} us external",
            p.node, p.core_id, p.from_prtp, p.to_prtp, p.saved_dtp, p.extra_bist, p.saved_external
        );
    }
    print!("after\n{}", to_text(&out.graph));
}
