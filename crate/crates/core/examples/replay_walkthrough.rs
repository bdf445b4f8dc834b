//! Replaying a schedule with hand-picked groups instead of the weights.

use socbist::power_groups::enumerate_groups;
use socbist::scheduler::{replay, to_text};
use socbist::soc_io::parse_soc;

fn main() {
    let soc = parse_soc(include_str!("../fixtures/five_core.soc")).expect("fixture parses");
    let catalog = enumerate_groups(&soc).unwrap();
    let picks = [vec![1, 2], vec![2, 3, 5], vec![2, 3, 5], vec![2, 3, 5]];
    let graph = replay(&soc, &catalog, &picks).unwrap();
    print!("{}", to_text(&graph));
}
