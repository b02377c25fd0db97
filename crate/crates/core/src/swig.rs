//! Single-world intervention graphs under a fixed treatment value.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::{
    descendants, CausalGraph, DirectedIndex, GraphBuilder, NodeId, Period, SplitMarker,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwigError {
    #[error("graph still has undirected edges; enumerate completions first")]
    UndirectedEdgesPresent,
    #[error("graph has no treatment node")]
    NoTreatment,
    #[error("graph has no {0} outcome node")]
    MissingOutcome(&'static str),
    #[error("graph is already split at its treatment")]
    AlreadySplit,
}

/// The treatment node split into a random half (keeps in-edges, loses
/// out-edges) and a fixed half carrying `value`, whose out-edges lead to the
/// former children of the treatment. Descendants of the fixed half are the
/// potential outcomes `V^value`.
#[derive(Debug, Clone)]
pub struct Swig {
    base: CausalGraph,
    split: CausalGraph,
    index: DirectedIndex,
    treatment: NodeId,
    outcomes: [NodeId; 2],
    value: i64,
    fixed_children: BTreeSet<NodeId>,
    relabeled: BTreeSet<NodeId>,
}

/// Splits the treatment of a fully directed graph. All callers use
/// `value = 0`, the untreated intervention.
pub fn build_swig(g: &CausalGraph, value: i64) -> Result<Swig, SwigError> {
    if g.split().is_some() {
        return Err(SwigError::AlreadySplit);
    }
    if !g.is_fully_directed() {
        return Err(SwigError::UndirectedEdgesPresent);
    }
    let treatment = g.treatment().ok_or(SwigError::NoTreatment)?.clone();
    let y0 = g
        .outcome(Period::Pre)
        .ok_or(SwigError::MissingOutcome("pre-treatment"))?
        .clone();
    let y1 = g
        .outcome(Period::Post)
        .ok_or(SwigError::MissingOutcome("post-treatment"))?
        .clone();

    let fixed_children = g.children(treatment.as_str());
    let mut relabeled = descendants(g, treatment.as_str()).expect("treatment is a node");
    relabeled.remove(&treatment);

    let mut b = GraphBuilder::from_graph(g.clone());
    for e in g.directed_edges().filter(|e| e.tail == treatment) {
        b.remove_edge(e);
    }
    let split = b.build_unchecked();
    let index = split.index();

    Ok(Swig {
        base: g.clone(),
        split,
        index,
        treatment,
        outcomes: [y0, y1],
        value,
        fixed_children,
        relabeled,
    })
}

impl Swig {
    /// The directed graph the SWIG was built from.
    pub fn base(&self) -> &CausalGraph {
        &self.base
    }

    /// The split graph: the random half keeps only its in-edges and the
    /// fixed half is a constant, absent from separation queries.
    pub fn graph(&self) -> &CausalGraph {
        &self.split
    }

    pub fn index(&self) -> &DirectedIndex {
        &self.index
    }

    pub fn treatment(&self) -> &NodeId {
        &self.treatment
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    /// Outcome node for a period. For `Post` this is the potential outcome
    /// `Y1^a` whenever the treatment affects it; `Pre` is never relabeled.
    pub fn outcome(&self, period: Period) -> &NodeId {
        &self.outcomes[period.index() as usize]
    }

    pub fn fixed_children(&self) -> &BTreeSet<NodeId> {
        &self.fixed_children
    }

    pub fn relabeled(&self) -> &BTreeSet<NodeId> {
        &self.relabeled
    }

    pub fn is_relabeled(&self, id: &str) -> bool {
        self.relabeled.contains(id)
    }

    /// `Y1^0` for relabeled nodes, the plain name otherwise.
    pub fn display_name(&self, id: &NodeId) -> String {
        if self.relabeled.contains(id) {
            format!("{}^{}", id, self.value)
        } else {
            id.to_string()
        }
    }

    /// The base graph tagged as an intervention graph; serializes with an
    /// explicit `"|a=0"` node.
    pub fn to_graph(&self) -> CausalGraph {
        let mut b = GraphBuilder::from_graph(self.base.clone());
        b.split(Some(SplitMarker {
            value: self.value,
            position: None,
        }));
        b.build_unchecked()
    }
}
