//! Maximal power-feasible core groups.
//!
//! A power group is a set of cores that can be tested concurrently within the
//! SoC peak-power budget and that no further core can join. The catalog holds
//! every such group; a feasible set that could still accept a core is
//! *incomplete*.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{CoreId, SocSpec};
use crate::units::Power;

pub const DEFAULT_CATALOG_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("SoC has no cores")]
    EmptySoc,
    #[error("core {id} has peak power {p_m} above the budget {p_max}")]
    InfeasibleCore { id: CoreId, p_m: Power, p_max: Power },
    #[error("core set draws {total} which exceeds the budget {p_max}")]
    InfeasibleSet { total: Power, p_max: Power },
    #[error("unknown core id {0}")]
    UnknownCore(CoreId),
    #[error("more than {cap} power groups")]
    CatalogTooLarge { cap: usize },
}

/// A set of core ids, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerGroup {
    members: Vec<CoreId>,
}

impl PowerGroup {
    pub fn new(mut members: Vec<CoreId>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn members(&self) -> &[CoreId] {
        &self.members
    }

    pub fn contains(&self, id: CoreId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn power(&self, soc: &SocSpec) -> Power {
        self.members
            .iter()
            .filter_map(|&id| soc.core(id))
            .map(|c| c.p_m)
            .sum()
    }
}

impl fmt::Display for PowerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, id) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

/// All maximal power groups of an SoC, in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupCatalog {
    groups: Vec<PowerGroup>,
}

impl GroupCatalog {
    pub fn groups(&self) -> &[PowerGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn contains(&self, members: &[CoreId]) -> bool {
        let g = PowerGroup::new(members.to_vec());
        self.groups.binary_search(&g).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PowerGroup> {
        self.groups.iter()
    }
}

impl<'a> IntoIterator for &'a GroupCatalog {
    type Item = &'a PowerGroup;
    type IntoIter = std::slice::Iter<'a, PowerGroup>;
    fn into_iter(self) -> Self::IntoIter {
        self.groups.iter()
    }
}

fn check_cores(soc: &SocSpec) -> Result<(), GroupError> {
    if soc.cores.is_empty() {
        return Err(GroupError::EmptySoc);
    }
    if let Some(c) = soc.cores.iter().find(|c| c.p_m > soc.p_max) {
        return Err(GroupError::InfeasibleCore { id: c.id, p_m: c.p_m, p_max: soc.p_max });
    }
    Ok(())
}

pub fn enumerate_groups(soc: &SocSpec) -> Result<GroupCatalog, GroupError> {
    enumerate_groups_capped(soc, DEFAULT_CATALOG_CAP)
}

/// Enumerates every maximal feasible subset.
///
/// Sets are grown only with ids larger than their current maximum, so each
/// subset is visited once and emitted in lexicographic order. The top-level
/// branches run in parallel and are concatenated in branch order.
pub fn enumerate_groups_capped(soc: &SocSpec, cap: usize) -> Result<GroupCatalog, GroupError> {
    check_cores(soc)?;
    let powers: Vec<i64> = soc.cores.iter().map(|c| c.p_m.centi()).collect();
    let budget = soc.p_max.centi();
    let found = AtomicUsize::new(0);

    let branches: Vec<Result<Vec<PowerGroup>, GroupError>> = (0..powers.len())
        .into_par_iter()
        .map(|first| {
            let mut walker = Walker {
                powers: &powers,
                found: &found,
                cap,
                members: vec![first],
                in_set: vec![false; powers.len()],
                out: Vec::new(),
            };
            walker.in_set[first] = true;
            walker.visit(budget - powers[first])?;
            Ok(walker.out)
        })
        .collect();

    let mut groups = Vec::new();
    for branch in branches {
        groups.extend(branch?);
    }
    groups.sort();
    groups.dedup();
    Ok(GroupCatalog { groups })
}

struct Walker<'a> {
    powers: &'a [i64],
    found: &'a AtomicUsize,
    cap: usize,
    members: Vec<usize>,
    in_set: Vec<bool>,
    out: Vec<PowerGroup>,
}

impl Walker<'_> {
    fn visit(&mut self, residual: i64) -> Result<(), GroupError> {
        let maximal = self
            .powers
            .iter()
            .zip(&self.in_set)
            .all(|(&p, &inside)| inside || p > residual);
        if maximal {
            if self.found.fetch_add(1, Ordering::Relaxed) >= self.cap {
                return Err(GroupError::CatalogTooLarge { cap: self.cap });
            }
            self.out.push(PowerGroup::new(
                self.members.iter().map(|&i| i as CoreId + 1).collect(),
            ));
            return Ok(());
        }
        let last = *self.members.last().expect("non-empty");
        for next in last + 1..self.powers.len() {
            let p = self.powers[next];
            if p <= residual {
                self.members.push(next);
                self.in_set[next] = true;
                self.visit(residual - p)?;
                self.in_set[next] = false;
                self.members.pop();
            }
        }
        Ok(())
    }
}

/// True iff some core outside `set` still fits in the remaining budget.
pub fn is_incomplete(set: &[CoreId], soc: &SocSpec) -> Result<bool, GroupError> {
    let group = PowerGroup::new(set.to_vec());
    let mut total = Power::ZERO;
    for &id in group.members() {
        total += soc.core(id).ok_or(GroupError::UnknownCore(id))?.p_m;
    }
    if total > soc.p_max {
        return Err(GroupError::InfeasibleSet { total, p_max: soc.p_max });
    }
    let residual = soc.p_max - total;
    Ok(soc
        .cores
        .iter()
        .any(|c| !group.contains(c.id) && c.p_m <= residual))
}
