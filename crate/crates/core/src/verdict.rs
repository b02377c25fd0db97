//! Conditions 1–3 on each completion, aggregated into a verdict.
//!
//! - C1: the pre-treatment outcome causes treatment while confounding of
//!   treatment and the post-treatment outcome remains.
//! - C2: some common sufficient set has a subset that suffices for one period
//!   but not the other.
//! - C3: the pre-treatment outcome directly affects the post-treatment one.
//!
//! C1 and C2 reject parallel trends under linear faithfulness; C3 only casts
//! strong doubt on it.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjustment::{
    common_candidates, find_asymmetry, is_sufficient, AdjustmentError, AdjustmentSet,
    MAX_CANDIDATES,
};
use crate::completion::{enumerate_completions, CompletionError, DEFAULT_COMPLETION_CAP};
use crate::dsep::{d_separated_in, open_path_witness_in, Path, Step};
use crate::graph::{validate, CausalGraph, Edge, GraphError, NodeId, Period, ValidationReport};
use crate::swig::{build_swig, Swig, SwigError};

/// The residual assumption once no condition rejects.
pub const AHC_STATEMENT: &str = "E(Y1^0−Y0^0 | M) constant";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error("invalid graph")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Swig(#[from] SwigError),
    #[error(transparent)]
    Adjustment(#[from] AdjustmentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::C1, Condition::C2, Condition::C3];

    pub fn title(self) -> &'static str {
        match self {
            Condition::C1 => "no effect of the pre-treatment outcome on treatment under confounding",
            Condition::C2 => "no sufficient sets for one period only within a common sufficient set",
            Condition::C3 => "no direct effect of the pre-treatment outcome on the post-treatment outcome",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Reject,
    StronglyQuestioned,
}

/// Conditioning set used by C1's connection test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Conditioning {
    #[default]
    PreOutcome,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeOptions {
    pub c1_conditioning: C1Conditioning,
    pub completion_cap: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            c1_conditioning: C1Conditioning::PreOutcome,
            completion_cap: DEFAULT_COMPLETION_CAP,
        }
    }
}

/// Evidence for a violation; each kind can be re-checked against its graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Edge {
        tail: NodeId,
        head: NodeId,
    },
    Path {
        nodes: Vec<NodeId>,
        steps: Vec<Step>,
        colliders: Vec<bool>,
        conditioned_on: AdjustmentSet,
        text: String,
    },
    AsymmetricSubset {
        common_set: AdjustmentSet,
        subset: AdjustmentSet,
        sufficient_for: Period,
        fails_for: Period,
    },
}

impl Witness {
    fn path(s: &Swig, p: Path, z: &BTreeSet<NodeId>) -> Witness {
        let text = p.render(|v| s.display_name(v));
        Witness::Path {
            nodes: p.nodes,
            steps: p.steps,
            colliders: p.colliders,
            conditioned_on: z.iter().cloned().collect(),
            text,
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Edge { tail, head } => write!(f, "edge {tail} -> {head}"),
            Witness::Path {
                text,
                conditioned_on,
                ..
            } => write!(f, "open path {text} given {conditioned_on}"),
            Witness::AsymmetricSubset {
                common_set,
                subset,
                sufficient_for,
                fails_for,
            } => write!(
                f,
                "{subset} ⊆ {common_set} is sufficient for Y{} but not for Y{}",
                sufficient_for.index(),
                fails_for.index()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Violated { witnesses: Vec<Witness> },
    Satisfied {
        #[serde(skip_serializing_if = "Option::is_none")]
        advisory: Option<String>,
    },
    NotApplicable { reason: String },
}

impl Status {
    pub fn is_violated(&self) -> bool {
        matches!(self, Status::Violated { .. })
    }

    fn satisfied() -> Status {
        Status::Satisfied { advisory: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletionStatus {
    pub completion: usize,
    #[serde(flatten)]
    pub status: Status,
    /// C2 only: the status recomputed without the `Y0 -> Y1` edge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub without_y0_y1: Option<Status>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub title: &'static str,
    pub severity: Severity,
    pub violated_in: Vec<usize>,
    pub summary: String,
    pub per_completion: Vec<CompletionStatus>,
}

impl ConditionReport {
    fn new(condition: Condition, per_completion: Vec<CompletionStatus>) -> Self {
        let violated_in: Vec<usize> = per_completion
            .iter()
            .filter(|c| c.status.is_violated())
            .map(|c| c.completion)
            .collect();
        let n = per_completion.len();
        let summary = match violated_in.len() {
            0 if per_completion
                .iter()
                .all(|c| matches!(c.status, Status::NotApplicable { .. })) =>
            {
                "not applicable".to_string()
            }
            0 => "satisfied".to_string(),
            k if k == n && n == 1 => "violated".to_string(),
            k if k == n => format!("violated in all {n} completions"),
            k => format!("violated in {k} of {n} completions"),
        };
        ConditionReport {
            condition,
            title: condition.title(),
            severity: match condition {
                Condition::C3 => Severity::StronglyQuestioned,
                _ => Severity::Reject,
            },
            violated_in,
            summary,
            per_completion,
        }
    }

    pub fn violated_everywhere(&self) -> bool {
        !self.per_completion.is_empty() && self.violated_in.len() == self.per_completion.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Overall {
    Rejected,
    StronglyQuestioned,
    NotRejected,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Caveat {
    pub message: String,
    pub completions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatWitness {
    pub condition: Condition,
    pub completion: usize,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletionInfo {
    pub index: usize,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub overall: Overall,
    pub rejected_by: Vec<Condition>,
    pub caveat: Option<Caveat>,
    pub conditions: Vec<ConditionReport>,
    pub witnesses: Vec<FlatWitness>,
    pub obligation: Option<AdjustmentSet>,
    pub obligation_statement: Option<String>,
    pub completions_analyzed: usize,
    pub completions: Vec<CompletionInfo>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn condition(&self, c: Condition) -> &ConditionReport {
        &self.conditions[c as usize]
    }

    /// Stable JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdict serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("verdict: {}", self.overall);
        if !self.rejected_by.is_empty() {
            let by: Vec<String> = self.rejected_by.iter().map(ToString::to_string).collect();
            out += &format!(" ({})", by.join(", "));
        }
        out.push('\n');
        out += &format!("completions analyzed: {}\n", self.completions_analyzed);
        for r in &self.conditions {
            out += &format!("{}: {} — {}\n", r.condition, r.summary, r.title);
            for c in &r.per_completion {
                let prefix = if self.completions_analyzed > 1 {
                    format!("  [{}] ", c.completion)
                } else {
                    "  ".to_string()
                };
                match &c.status {
                    Status::Violated { witnesses } => {
                        for w in witnesses {
                            out += &format!("{prefix}{w}\n");
                        }
                    }
                    Status::Satisfied { advisory: Some(a) } => out += &format!("{prefix}{a}\n"),
                    Status::NotApplicable { reason } if self.completions_analyzed == 1 => {
                        out += &format!("{prefix}{reason}\n")
                    }
                    _ => {}
                }
            }
        }
        if let Some(c) = &self.caveat {
            out += &format!("caveat: {}\n", c.message);
        }
        if let Some(s) = &self.obligation_statement {
            out += &format!("obligation: {s}\n");
        }
        for n in &self.notes {
            out += &format!("note: {n}\n");
        }
        out
    }
}

fn outcome_names(s: &Swig) -> (&NodeId, &NodeId) {
    (s.outcome(Period::Pre), s.outcome(Period::Post))
}

/// C1 on one SWIG.
pub fn check_condition1(s: &Swig, conditioning: C1Conditioning) -> Result<Status, AnalyzeError> {
    let (y0, y1) = outcome_names(s);
    let a = s.treatment();
    if !s.base().has_edge(y0.as_str(), a.as_str()) {
        return Ok(Status::satisfied());
    }
    let z: BTreeSet<NodeId> = match conditioning {
        C1Conditioning::PreOutcome => BTreeSet::from([y0.clone()]),
        C1Conditioning::Empty => BTreeSet::new(),
    };
    let path = open_path_witness_in(s.index(), a.as_str(), y1.as_str(), &z)
        .map_err(|e| match e {
            crate::dsep::DsepError::Graph(g) => AnalyzeError::Graph(g),
            other => unreachable!("treatment and outcomes are distinct: {other}"),
        })?;
    Ok(match path {
        Some(p) => Status::Violated {
            witnesses: vec![
                Witness::Edge {
                    tail: y0.clone(),
                    head: a.clone(),
                },
                Witness::path(s, p, &z),
            ],
        },
        None => Status::Satisfied {
            advisory: Some(format!(
                "ATT identifiable by adjusting for {y0} alone; DID unnecessary"
            )),
        },
    })
}

/// C2 on one SWIG.
pub fn check_condition2(s: &Swig) -> Result<Status, AnalyzeError> {
    let (y0, _) = outcome_names(s);
    if s.base().has_edge(y0.as_str(), s.treatment().as_str()) {
        return Ok(Status::NotApplicable {
            reason: format!("{y0} -> {} leaves no sufficient set for {y0}", s.treatment()),
        });
    }
    Ok(match find_asymmetry(s)? {
        Some(w) => Status::Violated {
            witnesses: w
                .subsets
                .into_iter()
                .map(|a| Witness::AsymmetricSubset {
                    common_set: w.common_set.clone(),
                    subset: a.subset,
                    sufficient_for: a.sufficient_for,
                    fails_for: a.fails_for,
                })
                .collect(),
        },
        None if crate::adjustment::smallest_common_sufficient_set(s)?.is_none() => {
            Status::NotApplicable {
                reason: "no common sufficient set exists".to_string(),
            }
        }
        None => Status::satisfied(),
    })
}

/// C3 on one directed graph.
pub fn check_condition3(g: &CausalGraph) -> Status {
    match (g.outcome(Period::Pre), g.outcome(Period::Post)) {
        (Some(y0), Some(y1)) if g.has_edge(y0.as_str(), y1.as_str()) => Status::Violated {
            witnesses: vec![Witness::Edge {
                tail: y0.clone(),
                head: y1.clone(),
            }],
        },
        _ => Status::satisfied(),
    }
}

/// Re-checks a witness against the SWIG of the completion it came from.
pub fn verify_witness(s: &Swig, w: &Witness) -> bool {
    match w {
        Witness::Edge { tail, head } => s.base().has_edge(tail.as_str(), head.as_str()),
        Witness::Path {
            nodes,
            steps,
            colliders,
            conditioned_on,
            ..
        } => {
            let p = Path {
                nodes: nodes.clone(),
                steps: steps.clone(),
                colliders: colliders.clone(),
            };
            let (Some(first), Some(last)) = (nodes.first(), nodes.last()) else {
                return false;
            };
            first == s.treatment()
                && (last == s.outcome(Period::Post) || last == s.outcome(Period::Pre))
                && p.certify(s.graph(), conditioned_on.members())
                && !d_separated_in(
                    s.index(),
                    first.as_str(),
                    last.as_str(),
                    conditioned_on.members(),
                )
                .unwrap_or(true)
        }
        Witness::AsymmetricSubset {
            common_set,
            subset,
            sufficient_for,
            fails_for,
        } => {
            let ok = |m: &AdjustmentSet, t| is_sufficient(s, m, t).unwrap_or(false);
            subset.is_subset(common_set)
                && ok(common_set, Period::Pre)
                && ok(common_set, Period::Post)
                && sufficient_for != fails_for
                && ok(subset, *sufficient_for)
                && !ok(subset, *fails_for)
        }
    }
}

struct World {
    swig: Swig,
    c1: Status,
    c2: Status,
    c2_without: Option<Status>,
    c3: Status,
}

/// Runs C1–C3 on every completion of `g` and aggregates.
pub fn analyze(g: &CausalGraph, options: &AnalyzeOptions) -> Result<Verdict, AnalyzeError> {
    let g = g.without_split();
    let report = validate(&g);
    if !report.is_valid() {
        return Err(AnalyzeError::Invalid(report));
    }

    let mut worlds = Vec::new();
    let mut completions = Vec::new();
    for (i, c) in enumerate_completions(&g, options.completion_cap)?.enumerate() {
        let swig = build_swig(&c.graph, 0)?;
        let c1 = check_condition1(&swig, options.c1_conditioning)?;
        let c2 = check_condition2(&swig)?;
        let c3 = check_condition3(&c.graph);
        let c2_without = if c3.is_violated() {
            let (y0, y1) = outcome_names(&swig);
            let pruned = c.graph.without_edge(&Edge::directed(y0.clone(), y1.clone()));
            Some(check_condition2(&build_swig(&pruned, 0)?)?)
        } else {
            None
        };
        completions.push(CompletionInfo {
            index: i,
            choices: c.label(),
        });
        worlds.push(World {
            swig,
            c1,
            c2,
            c2_without,
            c3,
        });
    }

    let report_for = |cond: Condition| {
        let per = worlds
            .iter()
            .enumerate()
            .map(|(i, w)| CompletionStatus {
                completion: i,
                status: match cond {
                    Condition::C1 => w.c1.clone(),
                    Condition::C2 => w.c2.clone(),
                    Condition::C3 => w.c3.clone(),
                },
                without_y0_y1: match cond {
                    Condition::C2 => w.c2_without.clone(),
                    _ => None,
                },
            })
            .collect();
        ConditionReport::new(cond, per)
    };
    let conditions: Vec<ConditionReport> = Condition::ALL.into_iter().map(report_for).collect();

    let rejects = |w: &World| w.c1.is_violated() || w.c2.is_violated();
    let rejected = !worlds.is_empty() && worlds.iter().all(rejects);
    let overall = if rejected {
        Overall::Rejected
    } else if conditions[Condition::C3 as usize].violated_everywhere() {
        Overall::StronglyQuestioned
    } else {
        Overall::NotRejected
    };
    let rejected_by = if rejected {
        conditions[..2]
            .iter()
            .filter(|r| !r.violated_in.is_empty())
            .map(|r| r.condition)
            .collect()
    } else {
        Vec::new()
    };

    let flagged: Vec<usize> = worlds
        .iter()
        .enumerate()
        .filter(|(_, w)| rejects(w) || w.c3.is_violated())
        .map(|(i, _)| i)
        .collect();
    let caveat = (!rejected && !flagged.is_empty() && flagged.len() < worlds.len()).then(|| {
        let list: Vec<String> = flagged.iter().map(ToString::to_string).collect();
        Caveat {
            message: format!(
                "conditions are violated in {} of {} completions ({}); the verdict holds only if those can be ruled out",
                flagged.len(),
                worlds.len(),
                list.join(", ")
            ),
            completions: flagged,
        }
    });

    let mut notes = Vec::new();
    for w in &worlds {
        if let Some(without) = &w.c2_without {
            if without.is_violated() != w.c2.is_violated() {
                notes.push(format!(
                    "C2 is {} without the {} -> {} edge",
                    if without.is_violated() { "violated" } else { "satisfied" },
                    w.swig.outcome(Period::Pre),
                    w.swig.outcome(Period::Post)
                ));
                break;
            }
        }
    }

    let (obligation, obligation_statement) = if overall == Overall::NotRejected {
        let clean: Vec<&Swig> = worlds
            .iter()
            .filter(|w| !rejects(w))
            .map(|w| &w.swig)
            .collect();
        match obligation_set(&clean)? {
            Some(m) => {
                let statement = format!("{AHC_STATEMENT}, M = {m}");
                (Some(m), Some(statement))
            }
            None => {
                notes.push("no set is sufficient for both periods in every completion".to_string());
                (None, None)
            }
        }
    } else {
        (None, None)
    };

    let witnesses = conditions
        .iter()
        .flat_map(|r| {
            r.per_completion.iter().flat_map(move |c| match &c.status {
                Status::Violated { witnesses } => witnesses
                    .iter()
                    .map(|w| FlatWitness {
                        condition: r.condition,
                        completion: c.completion,
                        witness: w.clone(),
                    })
                    .collect(),
                _ => Vec::new(),
            })
        })
        .collect();

    Ok(Verdict {
        overall,
        rejected_by,
        caveat,
        conditions,
        witnesses,
        obligation,
        obligation_statement,
        completions_analyzed: worlds.len(),
        completions,
        notes,
    })
}

/// Smallest set (by size, then names) sufficient for both periods in every
/// given SWIG.
pub fn obligation_set(swigs: &[&Swig]) -> Result<Option<AdjustmentSet>, AnalyzeError> {
    let Some(first) = swigs.first() else {
        return Ok(None);
    };
    let pool: Vec<NodeId> = common_candidates(first)
        .into_iter()
        .filter(|v| swigs.iter().all(|s| common_candidates(s).contains(v)))
        .collect();
    if pool.len() > MAX_CANDIDATES {
        return Err(AdjustmentError::TooManyCandidates {
            count: pool.len(),
            limit: MAX_CANDIDATES,
        }
        .into());
    }
    use itertools::Itertools;
    for k in 0..=pool.len() {
        for combo in pool.iter().cloned().combinations(k) {
            let m = AdjustmentSet::new(combo);
            let works = swigs.iter().all(|s| {
                Period::BOTH
                    .into_iter()
                    .all(|t| is_sufficient(s, &m, t).unwrap_or(false))
            });
            if works {
                return Ok(Some(m));
            }
        }
    }
    Ok(None)
}
