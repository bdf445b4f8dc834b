//! Writes the example schedule as JSON and as an SVG Gantt chart.

use socbist::power_groups::enumerate_groups;
use socbist::scheduler::{build_schedule, from_json, gantt_svg, to_json};
use socbist::soc_io::parse_soc;

fn main() -> std::io::Result<()> {
    let soc = parse_soc(include_str!("../fixtures/five_core.soc")).expect("fixture parses");
    let graph = build_schedule(&soc, &enumerate_groups(&soc).unwrap()).unwrap();
    let dir = std::env::temp_dir();
    let json = to_json(&graph);
    std::fs::write(dir.join("five_core_schedule.json"), &json)?;
    std::fs::write(dir.join("five_core_schedule.svg"), gantt_svg(&graph))?;
    assert_eq!(from_json(&json).unwrap(), graph);
    println!("wrote {} and {}", dir.join("five_core_schedule.json").display(), dir.join("five_core_schedule.svg").display());
    Ok(())
}
