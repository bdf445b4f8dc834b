//! Filling incomplete nodes with extra BIST work.
//!
//! A core that fits into an incomplete node and has not started its
//! external test may run more PRTPs there. The coverage oracle tells how
//! many DTPs that saves, which shortens the core's external part. The
//! schedule is rebuilt from that node on and the change is kept only if the
//! total time drops.

use std::collections::BTreeMap;

use crate::core_model::{bist_time, external_time, CoreId, SocSpec};
use crate::hybrid_testgen::CoverageOracle;
use crate::power_groups::GroupCatalog;
use crate::units::{Micros, SCALE};

use super::{CoreTestState, Engine, Mode, NodeKind, Part, ScheduleError, ScheduleGraph};

pub const MAX_AUGMENT_ROUNDS: usize = 100;

/// One accepted augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentPlan {
    /// 1-based index of the node that receives the extra BIST work.
    pub node: usize,
    pub core_id: CoreId,
    pub from_prtp: u64,
    pub to_prtp: u64,
    pub saved_dtp: u64,
    pub extra_bist: Micros,
    pub saved_external: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentOutcome {
    pub graph: ScheduleGraph,
    pub rounds: usize,
}

/// PRTPs that fit in `time` on the core's BIST channel.
fn patterns_in(soc: &SocSpec, id: CoreId, time: Micros) -> u64 {
    let c = soc.core(id).expect("validated core");
    let num = i128::from(time.centi()) * i128::from(c.f_b.centi());
    let den = i128::from(SCALE * SCALE) * i128::from(c.ac_b);
    (num / den) as u64
}

fn inject(states: &mut [CoreTestState], plan: &AugmentPlan) {
    let s = &mut states[plan.core_id as usize - 1];
    s.remaining_bist += plan.extra_bist;
    s.remaining_external = s.remaining_external.saturating_sub(plan.saved_external);
}

/// Engine positioned at the entry of node `upto` (0-based), with every
/// augmentation up to and including that node applied.
fn engine_at<'a>(
    soc: &'a SocSpec,
    catalog: &'a GroupCatalog,
    graph: &ScheduleGraph,
    plans: &[AugmentPlan],
    upto: usize,
) -> Engine<'a> {
    let mut engine = Engine::new(soc, catalog, CoreTestState::initial(soc));
    for i in 0..=upto {
        for p in plans.iter().filter(|p| p.node == i + 1) {
            inject(engine.states_mut(), p);
        }
        if i < upto {
            engine.run_node(graph.nodes[i].active.clone());
        }
    }
    engine
}

/// Adds BIST work to incomplete nodes while doing so shortens the schedule.
///
/// Nodes are visited front to back; cores are tried in id order and the
/// first improving change is kept. Cores without an oracle are never added.
/// An augmentation that saves no DTPs, or does not shorten the schedule, is
/// discarded and the input schedule is returned unchanged.
pub fn augment_incomplete(
    soc: &SocSpec,
    catalog: &GroupCatalog,
    graph: &ScheduleGraph,
    oracles: &BTreeMap<CoreId, &dyn CoverageOracle>,
) -> Result<AugmentOutcome, ScheduleError> {
    let mut current = graph.clone();
    let mut counts: BTreeMap<CoreId, u64> =
        current.targets.iter().map(|t| (t.core_id, patterns_in(soc, t.core_id, t.bist))).collect();
    let mut start = current.augmentations.last().map_or(0, |p| p.node - 1);
    let mut rounds = 0;

    while rounds < MAX_AUGMENT_ROUNDS {
        let Some((next, plan_start)) = improve_once(soc, catalog, &current, oracles, &counts, start)? else {
            break;
        };
        let plan = *next.augmentations.last().expect("just added");
        counts.insert(plan.core_id, plan.to_prtp);
        current = next;
        start = plan_start;
        rounds += 1;
    }
    Ok(AugmentOutcome { graph: current, rounds })
}

fn improve_once(
    soc: &SocSpec,
    catalog: &GroupCatalog,
    graph: &ScheduleGraph,
    oracles: &BTreeMap<CoreId, &dyn CoverageOracle>,
    counts: &BTreeMap<CoreId, u64>,
    start: usize,
) -> Result<Option<(ScheduleGraph, usize)>, ScheduleError> {
    for k in start..graph.nodes.len() {
        let node = &graph.nodes[k];
        if node.kind != NodeKind::Incomplete {
            continue;
        }
        let entry = engine_at(soc, catalog, graph, &graph.augmentations, k);
        let states = entry.states();
        let used = node.power(soc);
        for (&id, oracle) in oracles {
            let Some(core) = soc.core(id) else { continue };
            let s = &states[id as usize - 1];
            if node.active.iter().any(|p| p.core == id)
                || used + core.p_m > soc.p_max
                || s.external_started
                || s.remaining_external.is_zero()
            {
                continue;
            }
            let Some(plan) = plan_for(soc, *oracle, id, counts[&id], node.duration, s.remaining_external, k + 1)?
            else {
                continue;
            };
            let mut plans = graph.augmentations.clone();
            plans.push(plan);
            let mut engine = engine_at(soc, catalog, graph, &plans, k);
            let mut parts = node.active.clone();
            parts.push(Part { core: id, mode: Mode::Bist });
            parts.sort();
            engine.run_node(parts);
            let mut targets = graph.targets.clone();
            let t = &mut targets[id as usize - 1];
            t.bist += plan.extra_bist;
            t.external -= plan.saved_external;
            let next = engine.finish(targets, plans)?;
            if next.total_time < graph.total_time {
                return Ok(Some((next, k)));
            }
        }
    }
    Ok(None)
}

fn plan_for(
    soc: &SocSpec,
    oracle: &dyn CoverageOracle,
    id: CoreId,
    n0: u64,
    duration: Micros,
    remaining_external: Micros,
    node: usize,
) -> Result<Option<AugmentPlan>, ScheduleError> {
    let core = soc.core(id).expect("validated core");
    let Some(base) = oracle.floor_point(n0) else { return Ok(None) };
    let Some(to) = oracle.floor_point(n0 + patterns_in(soc, id, duration)) else { return Ok(None) };
    if to <= n0 {
        return Ok(None);
    }
    let (Ok(before), Ok(after)) = (oracle.query(base), oracle.query(to)) else {
        return Ok(None);
    };
    let saved_dtp = before.n_dtp_phase2.saturating_sub(after.n_dtp_phase2);
    if saved_dtp == 0 {
        return Ok(None);
    }
    let saved_external = external_time(core, saved_dtp)?.min(remaining_external);
    Ok(Some(AugmentPlan {
        node,
        core_id: id,
        from_prtp: n0,
        to_prtp: to,
        saved_dtp,
        extra_bist: bist_time(core, to - n0)?,
        saved_external,
    }))
}
