//! Greedy concurrent schedule of the five-core example SoC.

use socbist::power_groups::enumerate_groups;
use socbist::scheduler::{build_schedule, to_text, weight, CoreTestState, WeightMode};
use socbist::soc_io::parse_soc;

fn main() {
    let soc = parse_soc(include_str!("../fixtures/five_core.soc")).expect("fixture parses");
    let catalog = enumerate_groups(&soc).unwrap();
    let states = CoreTestState::initial(&soc);
    for g in catalog.iter() {
        println!("{g} weight {}", weight(g, &states, WeightMode::WithExternal));
    }
    let graph = build_schedule(&soc, &catalog).unwrap();
    print!("{}", to_text(&graph));
    println!("longest core {} us, serial {} us", soc.max_core_time(), soc.serial_time());
}
