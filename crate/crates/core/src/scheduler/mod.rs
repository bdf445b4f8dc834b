//! Power-constrained test scheduling.
//!
//! The schedule is a sequence of nodes. Each node runs a set of test parts
//! (one per active core, either its BIST part or its external part) until
//! the first of them finishes. At most one external part runs at a time and
//! an external part, once started, runs without pause until it is done.
//!
//! Groups are picked greedily by weight. With external work left a group
//! weighs `max external * mean BIST of the other members`; with none left it
//! weighs the mean BIST time of all members. When a BIST part finishes
//! while an external part keeps running, the freed power is refilled with
//! the best group that still contains the running external core.

mod augment;
mod export;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{CoreId, ModelError, SocSpec};
use crate::power_groups::{GroupCatalog, GroupError, PowerGroup};
use crate::units::{Micros, Power, SCALE};

pub use augment::{augment_incomplete, AugmentOutcome, AugmentPlan, MAX_AUGMENT_ROUNDS};
pub use export::{from_json, gantt_svg, to_json, to_text, ScheduleJson};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("no group can make progress with work remaining")]
    Stuck,
    #[error("selection {0} cannot run: {1}")]
    BadSelection(PowerGroup, &'static str),
    #[error("schedule file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "BIST")]
    Bist,
    External,
}

impl Mode {
    pub fn letter(self) -> char {
        match self {
            Self::Bist => 'B',
            Self::External => 'E',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Group,
    Incomplete,
}

/// One core's test part inside a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Part {
    pub core: CoreId,
    pub mode: Mode,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.mode.letter(), self.core)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleNode {
    /// 1-based position in the schedule.
    pub index: usize,
    pub kind: NodeKind,
    /// Sorted by core id, one part per core.
    pub active: Vec<Part>,
    pub duration: Micros,
    /// Parts that finish exactly at the end of the node, by core id.
    pub releases: Vec<Part>,
}

impl ScheduleNode {
    pub fn cores(&self) -> Vec<CoreId> {
        self.active.iter().map(|p| p.core).collect()
    }

    pub fn external(&self) -> Option<CoreId> {
        self.active.iter().find(|p| p.mode == Mode::External).map(|p| p.core)
    }

    pub fn power(&self, soc: &SocSpec) -> Power {
        self.active.iter().filter_map(|p| soc.core(p.core)).map(|c| c.p_m).sum()
    }
}

/// Remaining work of one core while the schedule is being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreTestState {
    pub core_id: CoreId,
    pub remaining_bist: Micros,
    pub remaining_external: Micros,
    pub external_started: bool,
}

impl CoreTestState {
    pub fn initial(soc: &SocSpec) -> Vec<Self> {
        soc.cores
            .iter()
            .map(|c| Self {
                core_id: c.id,
                remaining_bist: c.t_vp,
                remaining_external: c.t_vd,
                external_started: false,
            })
            .collect()
    }

    pub fn remaining(&self, mode: Mode) -> Micros {
        match mode {
            Mode::Bist => self.remaining_bist,
            Mode::External => self.remaining_external,
        }
    }

    fn remaining_mut(&mut self, mode: Mode) -> &mut Micros {
        match mode {
            Mode::Bist => &mut self.remaining_bist,
            Mode::External => &mut self.remaining_external,
        }
    }

    pub fn is_done(&self) -> bool {
        self.remaining_bist.is_zero() && self.remaining_external.is_zero()
    }
}

/// Total work a schedule must deliver to one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreTarget {
    pub core_id: CoreId,
    pub bist: Micros,
    pub external: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleGraph {
    pub nodes: Vec<ScheduleNode>,
    pub total_time: Micros,
    /// Work per core the nodes add up to.
    pub targets: Vec<CoreTarget>,
    /// Extra BIST work inserted by augmentation, applied at node entry.
    pub augmentations: Vec<AugmentPlan>,
}

impl ScheduleGraph {
    pub fn empty() -> Self {
        Self { nodes: Vec::new(), total_time: Micros::ZERO, targets: Vec::new(), augmentations: Vec::new() }
    }
}

/// Sum of node durations.
pub fn total_time(graph: &ScheduleGraph) -> Micros {
    graph.nodes.iter().map(|n| n.duration).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    WithExternal,
    BistOnly,
}

/// An exact non-negative rational in µs (or µs² for the external product).
#[derive(Debug, Clone, Copy)]
pub struct Weight {
    num: i128,
    den: i128,
}

impl Weight {
    fn new(num: i128, den: i128) -> Self {
        Self { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Weight {}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let centi = (self.num * 100 + self.den / 2) / self.den;
        f.write_str(&crate::units::format_centi(centi as i64))
    }
}

fn state_of(states: &[CoreTestState], id: CoreId) -> &CoreTestState {
    &states[id as usize - 1]
}

/// The member with the most external work left, smallest id on ties.
pub fn external_core(group: &PowerGroup, states: &[CoreTestState]) -> CoreId {
    let mut best = group.members()[0];
    for &id in &group.members()[1..] {
        if state_of(states, id).remaining_external > state_of(states, best).remaining_external {
            best = id;
        }
    }
    best
}

fn mean_bist_weight(group: &PowerGroup, states: &[CoreTestState]) -> Weight {
    let sum: i128 = group.members().iter().map(|&i| i128::from(state_of(states, i).remaining_bist.centi())).sum();
    Weight::new(sum, SCALE as i128 * group.len() as i128)
}

/// `remaining external of e * mean remaining BIST of the other members`;
/// a lone core weighs its external time.
fn external_weight(group: &PowerGroup, e: CoreId, states: &[CoreTestState]) -> Weight {
    let vd = i128::from(state_of(states, e).remaining_external.centi());
    let others = group.len() as i128 - 1;
    if others == 0 {
        return Weight::new(vd, SCALE as i128);
    }
    let sum: i128 = group
        .members()
        .iter()
        .filter(|&&i| i != e)
        .map(|&i| i128::from(state_of(states, i).remaining_bist.centi()))
        .sum();
    Weight::new(vd * sum, (SCALE * SCALE) as i128 * others)
}

/// Weight of a group under the current remaining times.
///
/// In `WithExternal` mode a group whose members have no external work left
/// gets its `BistOnly` weight.
pub fn weight(group: &PowerGroup, states: &[CoreTestState], mode: WeightMode) -> Weight {
    match mode {
        WeightMode::WithExternal => {
            let e = external_core(group, states);
            if state_of(states, e).remaining_external.is_zero() {
                mean_bist_weight(group, states)
            } else {
                external_weight(group, e, states)
            }
        }
        WeightMode::BistOnly => mean_bist_weight(group, states),
    }
}

/// Parts a selection would run, given its external core.
fn parts_for(members: &[CoreId], external: Option<CoreId>, states: &[CoreTestState]) -> Vec<Part> {
    members
        .iter()
        .filter_map(|&id| {
            if Some(id) == external {
                Some(Part { core: id, mode: Mode::External })
            } else if state_of(states, id).remaining_bist > Micros::ZERO {
                Some(Part { core: id, mode: Mode::Bist })
            } else {
                None
            }
        })
        .collect()
}

struct Candidate<'c> {
    group: &'c PowerGroup,
    weight: Weight,
    parts: Vec<Part>,
}

/// Higher weight first, then more members, then the smaller member list.
fn rank(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    a.weight
        .cmp(&b.weight)
        .then(a.group.len().cmp(&b.group.len()))
        .then_with(|| b.group.members().cmp(a.group.members()))
}

/// Incremental schedule builder.
pub(crate) struct Engine<'a> {
    soc: &'a SocSpec,
    catalog: &'a GroupCatalog,
    states: Vec<CoreTestState>,
    running_external: Option<CoreId>,
    nodes: Vec<ScheduleNode>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(soc: &'a SocSpec, catalog: &'a GroupCatalog, states: Vec<CoreTestState>) -> Self {
        Self { soc, catalog, states, running_external: None, nodes: Vec::new() }
    }

    pub(crate) fn states(&self) -> &[CoreTestState] {
        &self.states
    }

    pub(crate) fn states_mut(&mut self) -> &mut [CoreTestState] {
        &mut self.states
    }

    fn all_done(&self) -> bool {
        self.states.iter().all(CoreTestState::is_done)
    }

    fn best_candidate(&self) -> Option<Candidate<'a>> {
        let states = &self.states;
        let running = self.running_external;
        let mode = if states.iter().any(|s| s.remaining_external > Micros::ZERO) {
            WeightMode::WithExternal
        } else {
            WeightMode::BistOnly
        };
        self.catalog
            .groups()
            .par_iter()
            .filter_map(|g| {
                let (weight, external) = match running {
                    Some(e) if !g.contains(e) => return None,
                    Some(e) => (external_weight(g, e, states), Some(e)),
                    None => {
                        let e = external_core(g, states);
                        let has_ext = state_of(states, e).remaining_external > Micros::ZERO;
                        let ext = (mode == WeightMode::WithExternal && has_ext).then_some(e);
                        (weight(g, states, mode), ext)
                    }
                };
                let parts = parts_for(g.members(), external, states);
                (!parts.is_empty()).then_some(Candidate { group: g, weight, parts })
            })
            .max_by(rank)
    }

    /// Picks the next group and runs one node.
    pub(crate) fn step(&mut self) -> Result<(), ScheduleError> {
        let c = self.best_candidate().ok_or(ScheduleError::Stuck)?;
        self.run_node(c.parts);
        Ok(())
    }

    /// Runs one node on an explicit core set. Its external core is the
    /// running external core if any, else the member with most external
    /// work left (if it has any).
    pub(crate) fn step_forced(&mut self, members: &[CoreId]) -> Result<(), ScheduleError> {
        let group = PowerGroup::new(members.to_vec());
        if group.is_empty() {
            return Err(ScheduleError::BadSelection(group, "no cores"));
        }
        if let Some(&id) = group.members().iter().find(|&&id| self.soc.core(id).is_none()) {
            return Err(GroupError::UnknownCore(id).into());
        }
        if group.power(self.soc) > self.soc.p_max {
            return Err(ScheduleError::BadSelection(group, "exceeds the power budget"));
        }
        let external = match self.running_external {
            Some(e) if !group.contains(e) => {
                return Err(ScheduleError::BadSelection(group, "drops the running external test"))
            }
            Some(e) => Some(e),
            None => {
                let e = external_core(&group, &self.states);
                (state_of(&self.states, e).remaining_external > Micros::ZERO).then_some(e)
            }
        };
        let parts = parts_for(group.members(), external, &self.states);
        if parts.is_empty() {
            return Err(ScheduleError::BadSelection(group, "has no work left"));
        }
        self.run_node(parts);
        Ok(())
    }

    pub(crate) fn run_node(&mut self, active: Vec<Part>) {
        let duration = active
            .iter()
            .map(|p| state_of(&self.states, p.core).remaining(p.mode))
            .min()
            .expect("non-empty node");
        let mut releases = Vec::new();
        for p in &active {
            let s = &mut self.states[p.core as usize - 1];
            if p.mode == Mode::External {
                s.external_started = true;
            }
            let r = s.remaining_mut(p.mode);
            *r -= duration;
            if r.is_zero() {
                releases.push(*p);
            }
        }
        self.running_external = active
            .iter()
            .find(|p| p.mode == Mode::External && !releases.contains(p))
            .map(|p| p.core);
        let cores: Vec<CoreId> = active.iter().map(|p| p.core).collect();
        let kind = if self.catalog.contains(&cores) { NodeKind::Group } else { NodeKind::Incomplete };
        self.nodes.push(ScheduleNode { index: self.nodes.len() + 1, kind, active, duration, releases });
    }

    pub(crate) fn finish(mut self, targets: Vec<CoreTarget>, augmentations: Vec<AugmentPlan>) -> Result<ScheduleGraph, ScheduleError> {
        let guard = self.states.len() * 2 + self.nodes.len() + 1;
        let mut steps = 0;
        while !self.all_done() {
            self.step()?;
            steps += 1;
            assert!(steps <= guard, "every node releases at least one part");
        }
        let total_time = self.nodes.iter().map(|n| n.duration).sum();
        Ok(ScheduleGraph { nodes: self.nodes, total_time, targets, augmentations })
    }
}

fn initial_targets(soc: &SocSpec) -> Vec<CoreTarget> {
    soc.cores.iter().map(|c| CoreTarget { core_id: c.id, bist: c.t_vp, external: c.t_vd }).collect()
}

fn check_catalog(soc: &SocSpec, catalog: &GroupCatalog) -> Result<(), ScheduleError> {
    soc.validate()?;
    for g in catalog {
        if let Some(&id) = g.members().iter().find(|&&id| soc.core(id).is_none()) {
            return Err(GroupError::UnknownCore(id).into());
        }
    }
    Ok(())
}

/// Builds the schedule greedily from the catalog of maximal groups.
pub fn build_schedule(soc: &SocSpec, catalog: &GroupCatalog) -> Result<ScheduleGraph, ScheduleError> {
    replay(soc, catalog, &[])
}

/// Like [`build_schedule`], but the first selections are given explicitly
/// (one core set per node); the greedy choice takes over afterwards.
pub fn replay(soc: &SocSpec, catalog: &GroupCatalog, picks: &[Vec<CoreId>]) -> Result<ScheduleGraph, ScheduleError> {
    check_catalog(soc, catalog)?;
    let mut engine = Engine::new(soc, catalog, CoreTestState::initial(soc));
    for pick in picks {
        engine.step_forced(pick)?;
    }
    engine.finish(initial_targets(soc), Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::CoreSpec;
    use crate::power_groups::enumerate_groups;
    use crate::soc_io::parse_soc;
    use crate::units::Mhz;

    fn five_core() -> SocSpec {
        parse_soc(include_str!("../../fixtures/five_core.soc")).unwrap()
    }

    fn trace(g: &ScheduleGraph) -> Vec<String> {
        g.nodes
            .iter()
            .map(|n| {
                let parts: Vec<String> = n.active.iter().map(ToString::to_string).collect();
                format!("{} {}", parts.join(" "), n.duration)
            })
            .collect()
    }

    #[test]
    fn five_core_weights() {
        let soc = five_core();
        let s = CoreTestState::initial(&soc);
        let g = PowerGroup::new(vec![1, 3, 5]);
        assert_eq!(weight(&g, &s, WeightMode::WithExternal).to_string(), "125000");
        assert_eq!(weight(&g, &s, WeightMode::BistOnly).to_string(), "233.33");
        let all: Vec<String> = enumerate_groups(&soc)
            .unwrap()
            .iter()
            .map(|g| weight(g, &s, WeightMode::WithExternal).to_string())
            .collect();
        assert_eq!(all, ["80000", "125000", "180000", "200000", "225000"]);
    }

    #[test]
    fn exhausted_external_falls_back_to_mean_bist() {
        let soc = five_core();
        let mut s = CoreTestState::initial(&soc);
        for id in [1, 3, 5] {
            s[id - 1].remaining_external = Micros::ZERO;
        }
        let g = PowerGroup::new(vec![1, 3, 5]);
        assert_eq!(weight(&g, &s, WeightMode::WithExternal), weight(&g, &s, WeightMode::BistOnly));
    }

    #[test]
    fn singleton_weight_is_external_time() {
        let soc = five_core();
        let s = CoreTestState::initial(&soc);
        assert_eq!(weight(&PowerGroup::new(vec![2]), &s, WeightMode::WithExternal).to_string(), "400");
    }

    #[test]
    fn five_core_schedule() {
        let soc = five_core();
        let g = build_schedule(&soc, &enumerate_groups(&soc).unwrap()).unwrap();
        assert_eq!(
            trace(&g),
            [
                "E3 B4 B5 300",
                "B2 E3 200",
                "E1 B4 300",
                "B1 E2 200",
                "E2 B3 200",
                "B2 E5 100",
                "B2 200",
                "E4 150"
            ]
        );
        assert_eq!(g.total_time, Micros::from_units(1650));
        assert_eq!(total_time(&g), g.total_time);
    }

    #[test]
    fn walkthrough_replay() {
        let soc = five_core();
        let cat = enumerate_groups(&soc).unwrap();
        let g = replay(&soc, &cat, &[vec![1, 2], vec![2, 3, 5], vec![2, 3, 5], vec![2, 3, 5]]).unwrap();
        let t = trace(&g);
        assert_eq!(t[..4], ["B1 E2 200", "E2 B3 B5 200", "B2 E3 B5 100", "B2 E3 400"]);
        assert_eq!(g.nodes[3].kind, NodeKind::Incomplete);
        assert_eq!(g.nodes[1].releases, [Part { core: 2, mode: Mode::External }, Part { core: 3, mode: Mode::Bist }]);
    }

    #[test]
    fn bad_forced_selection() {
        let soc = five_core();
        let cat = enumerate_groups(&soc).unwrap();
        assert!(matches!(replay(&soc, &cat, &[vec![2, 4]]), Err(ScheduleError::BadSelection(..))));
        assert!(matches!(
            replay(&soc, &cat, &[vec![1, 2], vec![3, 4]]),
            Err(ScheduleError::BadSelection(_, "drops the running external test"))
        ));
    }

    #[test]
    fn single_bist_core() {
        let c = CoreSpec::with_times(1, Power::from_units(1), Micros::ZERO, Micros::from_units(100), Mhz::from_units(1));
        let soc = SocSpec::new("one", vec![c], Power::from_units(1), 0, Mhz::from_units(1)).unwrap();
        let g = build_schedule(&soc, &enumerate_groups(&soc).unwrap()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.total_time, Micros::from_units(100));
    }

    #[test]
    fn no_concurrency_is_serial() {
        let mk = |id, vd, vp| {
            CoreSpec::with_times(id, Power::from_units(200), Micros::from_units(vd), Micros::from_units(vp), Mhz::from_units(1))
        };
        let soc = SocSpec::new("pair", vec![mk(1, 30, 70), mk(2, 50, 10)], Power::from_units(300), 0, Mhz::from_units(1))
            .unwrap();
        let g = build_schedule(&soc, &enumerate_groups(&soc).unwrap()).unwrap();
        assert_eq!(g.total_time, soc.serial_time());
        assert!(g.nodes.iter().all(|n| n.active.len() == 1));
    }

    #[test]
    fn empty_graph_total() {
        assert_eq!(total_time(&ScheduleGraph::empty()), Micros::ZERO);
    }
}
