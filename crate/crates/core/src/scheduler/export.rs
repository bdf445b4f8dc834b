//! Schedule output: JSON, plain text and a Gantt chart in SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::core_model::CoreId;
use crate::units::Micros;

use super::{CoreTarget, Mode, NodeKind, Part, ScheduleError, ScheduleGraph, ScheduleNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub index: usize,
    pub kind: NodeKind,
    pub active: Vec<Part>,
    pub duration_us: f64,
    pub releases: Vec<Part>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleJson {
    pub nodes: Vec<NodeJson>,
    pub total_time_us: f64,
}

impl From<&ScheduleGraph> for ScheduleJson {
    fn from(g: &ScheduleGraph) -> Self {
        Self {
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeJson {
                    index: n.index,
                    kind: n.kind,
                    active: n.active.clone(),
                    duration_us: n.duration.as_f64(),
                    releases: n.releases.clone(),
                })
                .collect(),
            total_time_us: g.total_time.as_f64(),
        }
    }
}

pub fn to_json(g: &ScheduleGraph) -> String {
    let mut s = serde_json::to_string_pretty(&ScheduleJson::from(g)).expect("plain data serialises");
    s.push('\n');
    s
}

/// Reads a schedule back. Per-core targets are the work the nodes deliver;
/// augmentation records are not part of the file.
pub fn from_json(text: &str) -> Result<ScheduleGraph, ScheduleError> {
    let j: ScheduleJson = serde_json::from_str(text).map_err(|e| ScheduleError::Format(e.to_string()))?;
    let mut work: BTreeMap<CoreId, (Micros, Micros)> = BTreeMap::new();
    let nodes: Vec<ScheduleNode> = j
        .nodes
        .into_iter()
        .map(|n| {
            let duration = Micros::from_f64(n.duration_us);
            for p in &n.active {
                let w = work.entry(p.core).or_default();
                match p.mode {
                    Mode::Bist => w.0 += duration,
                    Mode::External => w.1 += duration,
                }
            }
            ScheduleNode { index: n.index, kind: n.kind, active: n.active, duration, releases: n.releases }
        })
        .collect();
    let total_time = Micros::from_f64(j.total_time_us);
    if total_time != nodes.iter().map(|n| n.duration).sum() {
        return Err(ScheduleError::Format("total_time_us is not the sum of node durations".into()));
    }
    let max_id = work.keys().next_back().copied().unwrap_or(0);
    let targets = (1..=max_id)
        .map(|id| {
            let (bist, external) = work.get(&id).copied().unwrap_or_default();
            CoreTarget { core_id: id, bist, external }
        })
        .collect();
    Ok(ScheduleGraph { nodes, total_time, targets, augmentations: Vec::new() })
}

fn parts(list: &[Part]) -> String {
    if list.is_empty() {
        return "-".into();
    }
    list.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// One line per node, then the total: `node 2 incomplete 200 active B2 E3 releases E3`.
pub fn to_text(g: &ScheduleGraph) -> String {
    let mut out = String::new();
    for n in &g.nodes {
        let kind = match n.kind {
            NodeKind::Group => "group",
            NodeKind::Incomplete => "incomplete",
        };
        writeln!(out, "node {} {} {} active {} releases {}", n.index, kind, n.duration, parts(&n.active), parts(&n.releases))
            .expect("string write");
    }
    writeln!(out, "total {}", g.total_time).expect("string write");
    out
}

const ROW: f64 = 28.0;
const LABEL: f64 = 70.0;
const PLOT: f64 = 720.0;
const TOP: f64 = 40.0;

/// Gantt chart: one row per core, BIST bars solid blue, external bars
/// orange with a dark outline.
pub fn gantt_svg(g: &ScheduleGraph) -> String {
    let cores: Vec<CoreId> = {
        let mut v: Vec<CoreId> = g.nodes.iter().flat_map(|n| n.active.iter().map(|p| p.core)).collect();
        v.extend(g.targets.iter().map(|t| t.core_id));
        v.sort_unstable();
        v.dedup();
        v
    };
    let row_of: BTreeMap<CoreId, usize> = cores.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let total = g.total_time.centi().max(1) as f64;
    let x = |t: i64| LABEL + PLOT * t as f64 / total;
    let width = LABEL + PLOT + 20.0;
    let height = TOP + ROW * cores.len() as f64 + 40.0;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(w, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(w, r#"<text x="{LABEL:.0}" y="20">total {} us</text>"#, g.total_time);
    for (&core, &i) in &row_of {
        let y = TOP + ROW * i as f64;
        let _ = writeln!(w, r#"<text x="8" y="{:.1}">core {core}</text>"#, y + ROW * 0.6);
    }
    let mut t = 0i64;
    for n in &g.nodes {
        let (x0, x1) = (x(t), x(t + n.duration.centi()));
        let _ = writeln!(
            w,
            r##"<line x1="{x0:.2}" y1="{:.1}" x2="{x0:.2}" y2="{:.1}" stroke="#cccccc"/>"##,
            TOP - 4.0,
            TOP + ROW * cores.len() as f64
        );
        for p in &n.active {
            let y = TOP + ROW * row_of[&p.core] as f64 + 4.0;
            let (class, fill, stroke) = match p.mode {
                Mode::Bist => ("bist", "#4a90d9", "none"),
                Mode::External => ("external", "#f5a623", "#5a3a00"),
            };
            let _ = writeln!(
                w,
                r#"<rect class="{class}" x="{x0:.2}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="{fill}" stroke="{stroke}"><title>node {} {} {} us</title></rect>"#,
                x1 - x0,
                ROW - 8.0,
                n.index,
                p,
                n.duration
            );
        }
        t += n.duration.centi();
    }
    let ly = TOP + ROW * cores.len() as f64 + 20.0;
    let _ = writeln!(w, r##"<rect x="{LABEL:.0}" y="{:.1}" width="14" height="12" fill="#4a90d9"/>"##, ly - 10.0);
    let _ = writeln!(w, r#"<text x="{:.0}" y="{ly:.1}">BIST</text>"#, LABEL + 20.0);
    let _ = writeln!(
        w,
        r##"<rect x="{:.0}" y="{:.1}" width="14" height="12" fill="#f5a623" stroke="#5a3a00"/>"##,
        LABEL + 80.0,
        ly - 10.0
    );
    let _ = writeln!(w, r#"<text x="{:.0}" y="{ly:.1}">External</text>"#, LABEL + 100.0);
    let _ = writeln!(w, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power_groups::enumerate_groups;
    use crate::scheduler::build_schedule;
    use crate::soc_io::parse_soc;

    fn five_core_graph() -> ScheduleGraph {
        let soc = parse_soc(include_str!("../../fixtures/five_core.soc")).unwrap();
        build_schedule(&soc, &enumerate_groups(&soc).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let g = five_core_graph();
        let text = to_json(&g);
        let back = from_json(&text).unwrap();
        assert_eq!(back, g);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"][0]["active"][0]["mode"], "External");
        assert_eq!(v["nodes"][1]["kind"], "incomplete");
        assert_eq!(v["total_time_us"], 1650.0);
    }

    #[test]
    fn text_lines() {
        let t = to_text(&five_core_graph());
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "node 1 group 300 active E3 B4 B5 releases B5");
        assert_eq!(lines.last(), Some(&"total 1650"));
    }

    #[test]
    fn svg_has_both_bar_kinds() {
        let svg = gantt_svg(&five_core_graph());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="external""#).count(), 7);
        assert!(svg.contains(r#"class="bist""#));
    }

    #[test]
    fn bad_total_rejected() {
        let text = to_json(&five_core_graph()).replace("\"total_time_us\": 1650.0", "\"total_time_us\": 1.0");
        assert!(matches!(from_json(&text), Err(ScheduleError::Format(_))));
    }
}
