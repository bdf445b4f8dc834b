//! Maximal power groups of the five-core example SoC, at two budgets.

use socbist::power_groups::{enumerate_groups, is_incomplete};
use socbist::soc_io::parse_soc;
use socbist::units::Power;

fn main() {
    let soc = parse_soc(include_str!("../fixtures/five_core.soc")).expect("fixture parses");
    for budget in [300, 400] {
        let soc = soc.with_p_max(Power::from_units(budget)).expect("every core fits");
        let catalog = enumerate_groups(&soc).expect("small catalog");
        println!("pmax {budget}: {} groups", catalog.len());
        for g in catalog.iter() {
            println!("  {g}  power {}", g.power(&soc));
        }
    }
    println!("{{3,5}} incomplete: {}", is_incomplete(&[3, 5], &soc).unwrap());
}
