//! Sufficient and minimally sufficient adjustment sets on SWIGs.
//!
//! A set `M` is sufficient for period `t` when the random half of the
//! treatment is d-separated from `Y_t^0` given `M`. Candidates may be
//! observed or named latent nodes, but never the treatment, an outcome
//! being adjusted for, a descendant of the treatment, or a synthetic latent
//! introduced by completion.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::completion::{enumerate_completions, CompletionError};
use crate::dsep::{open_path_witness_in, separated_by_mask, Step};
use crate::graph::{CausalGraph, NodeId, Period, Role};
use crate::swig::{build_swig, Swig, SwigError};

/// Most candidate nodes an exhaustive subset search will accept.
pub const MAX_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdjustmentError {
    #[error("{node} cannot be adjusted for: {reason}")]
    InvalidCandidate { node: NodeId, reason: &'static str },
    #[error("{count} candidate adjustment variables exceed the limit of {limit}")]
    TooManyCandidates { count: usize, limit: usize },
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Swig(#[from] SwigError),
}

/// A candidate adjustment set. Orders by size, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct AdjustmentSet(BTreeSet<NodeId>);

impl AdjustmentSet {
    pub fn new(members: impl IntoIterator<Item = NodeId>) -> Self {
        AdjustmentSet(members.into_iter().collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.contains(v)
    }

    pub fn is_subset(&self, other: &AdjustmentSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.iter().map(NodeId::as_str).collect()
    }
}

impl Ord for AdjustmentSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.iter().cmp(other.0.iter()))
    }
}

impl PartialOrd for AdjustmentSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AdjustmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

impl FromIterator<NodeId> for AdjustmentSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        AdjustmentSet::new(iter)
    }
}

/// All minimally sufficient sets for one outcome period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinSetFamily {
    pub period: Period,
    pub sets: Vec<AdjustmentSet>,
}

/// Which outcomes a candidate must be valid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    One(Period),
    Both,
}

fn reject(s: &Swig, v: &NodeId, target: Target) -> Option<&'static str> {
    let Some(node) = s.base().node(v.as_str()) else {
        return Some("not a node of the graph");
    };
    if node.synthetic {
        return Some("synthetic latent from graph completion");
    }
    match node.role {
        Role::Treatment => return Some("it is the treatment"),
        Role::Outcome(Period::Post) => return Some("it is the post-treatment outcome"),
        Role::Outcome(Period::Pre) if target != Target::One(Period::Post) => {
            return Some("it is the pre-treatment outcome")
        }
        _ => {}
    }
    if s.is_relabeled(v.as_str()) {
        return Some("it is a descendant of the treatment");
    }
    None
}

fn check(s: &Swig, m: &AdjustmentSet, target: Target) -> Result<(), AdjustmentError> {
    for v in m.members() {
        if let Some(reason) = reject(s, v, target) {
            return Err(AdjustmentError::InvalidCandidate {
                node: v.clone(),
                reason,
            });
        }
    }
    Ok(())
}

fn pool(s: &Swig, target: Target) -> Vec<NodeId> {
    s.base()
        .nodes()
        .map(|n| n.id.clone())
        .filter(|v| reject(s, v, target).is_none())
        .collect()
}

/// Eligible adjustment variables for one period, in name order.
pub fn candidates(s: &Swig, period: Period) -> Vec<NodeId> {
    pool(s, Target::One(period))
}

/// Eligible members of a set meant to serve both periods.
pub fn common_candidates(s: &Swig) -> Vec<NodeId> {
    pool(s, Target::Both)
}

/// Subset sufficiency checks over a fixed candidate list, by bit mask.
pub(crate) struct Oracle<'a> {
    swig: &'a Swig,
    pool: Vec<NodeId>,
    pool_index: Vec<usize>,
    treatment: usize,
    outcomes: [usize; 2],
}

impl<'a> Oracle<'a> {
    pub(crate) fn new(swig: &'a Swig, pool: Vec<NodeId>) -> Result<Self, AdjustmentError> {
        if pool.len() > MAX_CANDIDATES {
            return Err(AdjustmentError::TooManyCandidates {
                count: pool.len(),
                limit: MAX_CANDIDATES,
            });
        }
        let idx = swig.index();
        let pool_index = pool
            .iter()
            .map(|v| idx.get(v.as_str()).expect("pool nodes exist"))
            .collect();
        Ok(Oracle {
            swig,
            pool,
            pool_index,
            treatment: idx.get(swig.treatment().as_str()).expect("treatment exists"),
            outcomes: [
                idx.get(swig.outcome(Period::Pre).as_str()).expect("Y0 exists"),
                idx.get(swig.outcome(Period::Post).as_str()).expect("Y1 exists"),
            ],
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.pool.len()
    }

    pub(crate) fn sufficient(&self, mask: u32, period: Period) -> bool {
        let mut z = vec![false; self.swig.index().len()];
        for (bit, &i) in self.pool_index.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                z[i] = true;
            }
        }
        separated_by_mask(
            self.swig.index(),
            self.treatment,
            self.outcomes[period.index() as usize],
            &z,
        )
    }

    pub(crate) fn set(&self, mask: u32) -> AdjustmentSet {
        (0..self.pool.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| self.pool[b].clone())
            .collect()
    }

    /// Masks of all subsets of `within`, by size then lexicographically.
    pub(crate) fn subsets(&self, within: u32) -> Vec<u32> {
        let bits: Vec<u32> = (0..self.pool.len() as u32)
            .filter(|b| within & (1 << b) != 0)
            .collect();
        (0..=bits.len())
            .flat_map(|k| {
                bits.iter()
                    .copied()
                    .combinations(k)
                    .map(|c| c.into_iter().fold(0u32, |m, b| m | (1 << b)))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub(crate) fn full(&self) -> u32 {
        if self.pool.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.pool.len()) - 1
        }
    }
}

/// Whether `m` d-separates the treatment from `Y_t^0` in the SWIG. `Y0^0`
/// is `Y0` (no anticipation).
pub fn is_sufficient(s: &Swig, m: &AdjustmentSet, period: Period) -> Result<bool, AdjustmentError> {
    check(s, m, Target::One(period))?;
    let idx = s.index();
    let mut z = vec![false; idx.len()];
    for v in m.members() {
        z[idx.get(v.as_str()).expect("checked")] = true;
    }
    let a = idx.get(s.treatment().as_str()).expect("treatment exists");
    let y = idx.get(s.outcome(period).as_str()).expect("outcome exists");
    Ok(separated_by_mask(idx, a, y, &z))
}

/// Sufficient for both periods.
pub fn is_common_sufficient(s: &Swig, m: &AdjustmentSet) -> Result<bool, AdjustmentError> {
    check(s, m, Target::Both)?;
    Ok(is_sufficient(s, m, Period::Pre)? && is_sufficient(s, m, Period::Post)?)
}

fn minimal_masks(oracle: &Oracle, accept: impl Fn(u32) -> bool) -> Vec<u32> {
    let mut found: Vec<u32> = Vec::new();
    for mask in oracle.subsets(oracle.full()) {
        if found.iter().any(|&f| f & !mask == 0) {
            continue;
        }
        if accept(mask) {
            found.push(mask);
        }
    }
    found
}

/// Every subset-minimal sufficient set for `period`, in canonical order.
pub fn minimal_sufficient_sets(s: &Swig, period: Period) -> Result<MinSetFamily, AdjustmentError> {
    let oracle = Oracle::new(s, candidates(s, period))?;
    let mut sets: Vec<AdjustmentSet> = minimal_masks(&oracle, |m| oracle.sufficient(m, period))
        .into_iter()
        .map(|m| oracle.set(m))
        .collect();
    sets.sort();
    Ok(MinSetFamily { period, sets })
}

/// Every subset-minimal set sufficient for both periods.
pub fn minimal_common_sets(s: &Swig) -> Result<Vec<AdjustmentSet>, AdjustmentError> {
    let oracle = Oracle::new(s, common_candidates(s))?;
    let mut sets: Vec<AdjustmentSet> = minimal_masks(&oracle, |m| {
        oracle.sufficient(m, Period::Pre) && oracle.sufficient(m, Period::Post)
    })
    .into_iter()
    .map(|m| oracle.set(m))
    .collect();
    sets.sort();
    Ok(sets)
}

/// Smallest set sufficient for both periods (ties broken lexicographically).
pub fn smallest_common_sufficient_set(s: &Swig) -> Result<Option<AdjustmentSet>, AdjustmentError> {
    Ok(minimal_common_sets(s)?.into_iter().next())
}

/// A set sufficient for both periods, when one exists.
///
/// Starts from the union of a minimal set per period. When the union fails
/// for some period, the open path it leaves has a collider (or a descendant
/// of one) in the union; the path is then blocked by adding its first
/// eligible non-collider on the treatment side. If repair stalls, falls back
/// to exhaustive search.
pub fn common_sufficient_set(s: &Swig) -> Result<Option<AdjustmentSet>, AdjustmentError> {
    let pool = common_candidates(s);
    let oracle = Oracle::new(s, pool.clone())?;
    let pre = minimal_masks(&oracle, |m| oracle.sufficient(m, Period::Pre));
    let post = minimal_masks(&oracle, |m| oracle.sufficient(m, Period::Post));
    let is_common = |m: u32| oracle.sufficient(m, Period::Pre) && oracle.sufficient(m, Period::Post);

    for &m0 in &pre {
        for &m1 in &post {
            if let Some(found) = repair(s, &oracle, m0 | m1, &is_common) {
                return Ok(Some(oracle.set(found)));
            }
        }
    }
    smallest_common_sufficient_set(s)
}

fn repair(s: &Swig, oracle: &Oracle, start: u32, is_common: &impl Fn(u32) -> bool) -> Option<u32> {
    let mut mask = start;
    for _ in 0..=oracle.len() {
        if is_common(mask) {
            return Some(mask);
        }
        let z: BTreeSet<NodeId> = oracle.set(mask).members().clone();
        let failing = Period::BOTH
            .into_iter()
            .find(|&t| !oracle.sufficient(mask, t))?;
        let path = open_path_witness_in(
            s.index(),
            s.treatment().as_str(),
            s.outcome(failing).as_str(),
            &z,
        )
        .ok()??;
        // First inner non-collider on the path that may be adjusted for.
        let blocker = (1..path.nodes.len() - 1).find_map(|i| {
            let collider = path.steps[i - 1] == Step::Forward && path.steps[i] == Step::Backward;
            let bit = oracle.pool.iter().position(|p| p == &path.nodes[i])?;
            (!collider && mask & (1 << bit) == 0).then_some(bit)
        })?;
        mask |= 1 << blocker;
    }
    None
}

/// A subset of `m` that is sufficient for one period but not the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AsymmetricSubset {
    pub subset: AdjustmentSet,
    pub sufficient_for: Period,
    pub fails_for: Period,
}

/// Every asymmetric subset of `m`, by size then lexicographically.
pub fn asymmetric_subsets(s: &Swig, m: &AdjustmentSet) -> Result<Vec<AsymmetricSubset>, AdjustmentError> {
    check(s, m, Target::Both)?;
    let oracle = Oracle::new(s, m.members().iter().cloned().collect())?;
    Ok(oracle
        .subsets(oracle.full())
        .into_iter()
        .filter_map(|mask| asymmetry(&oracle, mask))
        .collect())
}

fn asymmetry(oracle: &Oracle, mask: u32) -> Option<AsymmetricSubset> {
    let pre = oracle.sufficient(mask, Period::Pre);
    let post = oracle.sufficient(mask, Period::Post);
    (pre != post).then(|| {
        let ok = if pre { Period::Pre } else { Period::Post };
        AsymmetricSubset {
            subset: oracle.set(mask),
            sufficient_for: ok,
            fails_for: ok.other(),
        }
    })
}

/// First asymmetric subset of `m`, if any.
pub fn asymmetric_subset_witness(
    s: &Swig,
    m: &AdjustmentSet,
) -> Result<Option<AsymmetricSubset>, AdjustmentError> {
    Ok(asymmetric_subsets(s, m)?.into_iter().next())
}

/// A common sufficient set together with its asymmetric subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AsymmetryWitness {
    pub common_set: AdjustmentSet,
    pub subsets: Vec<AsymmetricSubset>,
}

/// Searches every common sufficient set for one with an asymmetric subset
/// and returns the smallest such set with all of its asymmetric subsets.
pub fn find_asymmetry(s: &Swig) -> Result<Option<AsymmetryWitness>, AdjustmentError> {
    let oracle = Oracle::new(s, common_candidates(s))?;
    for mask in oracle.subsets(oracle.full()) {
        if !(oracle.sufficient(mask, Period::Pre) && oracle.sufficient(mask, Period::Post)) {
            continue;
        }
        let subsets: Vec<AsymmetricSubset> = oracle
            .subsets(mask)
            .into_iter()
            .filter_map(|sub| asymmetry(&oracle, sub))
            .collect();
        if !subsets.is_empty() {
            return Ok(Some(AsymmetryWitness {
                common_set: oracle.set(mask),
                subsets,
            }));
        }
    }
    Ok(None)
}

/// Minimal-set families of one period for every completion of `g`, with the
/// sets shared by all completions and those found in any.
#[derive(Debug, Clone, Serialize)]
pub struct FamiliesByCompletion {
    pub period: Period,
    pub per_completion: Vec<CompletionFamily>,
    pub intersection: Vec<AdjustmentSet>,
    pub union: Vec<AdjustmentSet>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletionFamily {
    pub completion: usize,
    pub choices: Vec<String>,
    pub sets: Vec<AdjustmentSet>,
}

pub fn minimal_sets_by_completion(
    g: &CausalGraph,
    period: Period,
    cap: usize,
) -> Result<FamiliesByCompletion, AdjustmentError> {
    let base = g.without_split();
    let mut per_completion = Vec::new();
    for (i, c) in enumerate_completions(&base, cap)?.enumerate() {
        let s = build_swig(&c.graph, 0)?;
        per_completion.push(CompletionFamily {
            completion: i,
            choices: c.label(),
            sets: minimal_sufficient_sets(&s, period)?.sets,
        });
    }
    let mut union: BTreeSet<AdjustmentSet> = BTreeSet::new();
    for f in &per_completion {
        union.extend(f.sets.iter().cloned());
    }
    let intersection = union
        .iter()
        .filter(|m| per_completion.iter().all(|f| f.sets.contains(m)))
        .cloned()
        .collect();
    Ok(FamiliesByCompletion {
        period,
        per_completion,
        intersection,
        union: union.into_iter().collect(),
    })
}
