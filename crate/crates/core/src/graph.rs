//! Partially directed causal graphs with difference-in-differences role
//! annotations.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid node name {0:?}: expected a letter followed by letters, digits or '_'")]
    BadName(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("directed part of the graph contains a cycle through {}", join(.0))]
    CyclicGraph(Vec<NodeId>),
    #[error("graph is invalid: {0}")]
    Invalid(ValidationReport),
}

fn join(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
}

/// Identifier of a node. Display aliases such as `Y1^0` are not identifiers;
/// the parser maps them back to `Y1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(NodeId(name))
        } else {
            Err(GraphError::BadName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for NodeId {
    type Error = GraphError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        NodeId::new(s)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

impl std::str::FromStr for NodeId {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeId::new(s)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observability {
    Observed,
    Latent,
}

/// Outcome period: 0 is pre-treatment, 1 is post-treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Period {
    Pre,
    Post,
}

impl Period {
    pub const BOTH: [Period; 2] = [Period::Pre, Period::Post];

    pub fn index(self) -> u8 {
        match self {
            Period::Pre => 0,
            Period::Post => 1,
        }
    }

    pub fn other(self) -> Period {
        match self {
            Period::Pre => Period::Post,
            Period::Post => Period::Pre,
        }
    }
}

impl From<Period> for u8 {
    fn from(p: Period) -> u8 {
        p.index()
    }
}

impl TryFrom<u8> for Period {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Period::Pre),
            1 => Ok(Period::Post),
            _ => Err(format!("outcome period must be 0 or 1, got {v}")),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Treatment,
    Outcome(Period),
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub observability: Observability,
    pub role: Role,
    pub position: Option<(f64, f64)>,
    /// Fresh latent introduced by completion; never offered as an adjustment
    /// candidate.
    pub synthetic: bool,
    /// Attributes the parser did not interpret, kept for round-tripping.
    pub attrs: Vec<(String, Option<String>)>,
}

impl Node {
    pub fn new(id: NodeId) -> Self {
        Node {
            id,
            observability: Observability::Observed,
            role: Role::Covariate,
            position: None,
            synthetic: false,
            attrs: Vec::new(),
        }
    }

    pub fn latent(mut self) -> Self {
        self.observability = Observability::Latent;
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn is_latent(&self) -> bool {
        self.observability == Observability::Latent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Directed,
    Undirected,
}

/// An edge. Undirected edges always have `tail < head`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn directed(tail: NodeId, head: NodeId) -> Self {
        Edge {
            tail,
            head,
            kind: EdgeKind::Directed,
        }
    }

    pub fn undirected(a: NodeId, b: NodeId) -> Self {
        let (tail, head) = if a <= b { (a, b) } else { (b, a) };
        Edge {
            tail,
            head,
            kind: EdgeKind::Undirected,
        }
    }

    pub fn is_directed(&self) -> bool {
        self.kind == EdgeKind::Directed
    }

    pub fn touches(&self, v: &NodeId) -> bool {
        &self.tail == v || &self.head == v
    }

    fn unordered_pair(&self) -> (&NodeId, &NodeId) {
        if self.tail <= self.head {
            (&self.tail, &self.head)
        } else {
            (&self.head, &self.tail)
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EdgeKind::Directed => write!(f, "{} -> {}", self.tail, self.head),
            EdgeKind::Undirected => write!(f, "{} -- {}", self.tail, self.head),
        }
    }
}

/// Marks a graph that was drawn as a single-world intervention graph, i.e.
/// the source text carried an explicit fixed-treatment node such as `"|a=0"`.
/// Edges leaving the fixed half are stored as edges leaving the treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMarker {
    pub value: i64,
    pub position: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CausalGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
    tiers: BTreeMap<NodeId, i64>,
    split: Option<SplitMarker>,
    attrs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    UnknownEndpoint { edge: String, node: NodeId },
    SelfLoop { node: NodeId },
    DuplicatePair { a: NodeId, b: NodeId },
    CycleViolation { cycle: Vec<NodeId> },
    RoleCardinalityViolation { role: String, count: usize },
    LatentRoleViolation { node: NodeId },
    TierViolation { tail: NodeId, head: NodeId },
    TimeOrderViolation { tail: NodeId, head: NodeId },
    UnknownTierNode { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownEndpoint { edge, node } => {
                write!(f, "edge {edge} refers to unknown node {node}")
            }
            Violation::SelfLoop { node } => write!(f, "self loop on {node}"),
            Violation::DuplicatePair { a, b } => {
                write!(f, "more than one edge between {a} and {b}")
            }
            Violation::CycleViolation { cycle } => {
                write!(f, "directed cycle through {}", join(cycle))
            }
            Violation::RoleCardinalityViolation { role, count } => {
                write!(f, "expected exactly one {role} node, found {count}")
            }
            Violation::LatentRoleViolation { node } => {
                write!(f, "{node} is a treatment or outcome and must be observed")
            }
            Violation::TierViolation { tail, head } => {
                write!(f, "edge {tail} -> {head} points backwards in tier order")
            }
            Violation::TimeOrderViolation { tail, head } => {
                write!(f, "edge {tail} -> {head} points into the pre-treatment outcome")
            }
            Violation::UnknownTierNode { node } => write!(f, "tier given for unknown node {node}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_cycle(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::CycleViolation { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Accumulates nodes and edges. `build` validates; `build_unchecked` does not.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    graph: CausalGraph,
    extra: Vec<Violation>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(graph: CausalGraph) -> Self {
        GraphBuilder {
            graph,
            extra: Vec::new(),
        }
    }

    pub fn node(&mut self, node: Node) -> &mut Self {
        self.graph.nodes.insert(node.id.clone(), node);
        self
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.graph.nodes.contains_key(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Node> {
        self.graph.nodes.get_mut(id)
    }

    pub fn edge(&mut self, edge: Edge) -> &mut Self {
        if self
            .graph
            .edges
            .iter()
            .any(|e| e.unordered_pair() == edge.unordered_pair())
        {
            let (a, b) = edge.unordered_pair();
            self.extra.push(Violation::DuplicatePair {
                a: a.clone(),
                b: b.clone(),
            });
        }
        self.graph.edges.insert(edge);
        self
    }

    pub fn remove_edge(&mut self, edge: &Edge) -> bool {
        self.graph.edges.remove(edge)
    }

    pub fn tier(&mut self, id: NodeId, tier: i64) -> &mut Self {
        self.graph.tiers.insert(id, tier);
        self
    }

    pub fn split(&mut self, marker: Option<SplitMarker>) -> &mut Self {
        self.graph.split = marker;
        self
    }

    pub fn attr(&mut self, key: String, value: String) -> &mut Self {
        self.graph.attrs.push((key, value));
        self
    }

    pub fn build(self) -> Result<CausalGraph, ValidationReport> {
        let mut report = validate(&self.graph);
        let mut violations = self.extra;
        violations.append(&mut report.violations);
        violations.dedup();
        if violations.is_empty() {
            Ok(self.graph)
        } else {
            Err(ValidationReport { violations })
        }
    }

    pub fn build_unchecked(self) -> CausalGraph {
        self.graph
    }
}

impl CausalGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_directed())
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.is_directed())
    }

    pub fn has_edge(&self, tail: &str, head: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.is_directed() && e.tail.as_str() == tail && e.head.as_str() == head)
    }

    pub fn is_fully_directed(&self) -> bool {
        self.edges.iter().all(Edge::is_directed)
    }

    pub fn tiers(&self) -> &BTreeMap<NodeId, i64> {
        &self.tiers
    }

    pub fn tier(&self, id: &str) -> Option<i64> {
        self.tiers.get(id).copied()
    }

    pub fn split(&self) -> Option<&SplitMarker> {
        self.split.as_ref()
    }

    pub fn attrs(&self) -> &[(String, String)] {
        &self.attrs
    }

    fn with_role(&self, role: Role) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.role == role)
    }

    pub fn treatment(&self) -> Option<&NodeId> {
        self.with_role(Role::Treatment).next().map(|n| &n.id)
    }

    pub fn outcome(&self, period: Period) -> Option<&NodeId> {
        self.with_role(Role::Outcome(period)).next().map(|n| &n.id)
    }

    pub fn parents(&self, v: &str) -> BTreeSet<NodeId> {
        self.directed_edges()
            .filter(|e| e.head.as_str() == v)
            .map(|e| e.tail.clone())
            .collect()
    }

    pub fn children(&self, v: &str) -> BTreeSet<NodeId> {
        self.directed_edges()
            .filter(|e| e.tail.as_str() == v)
            .map(|e| e.head.clone())
            .collect()
    }

    /// Name not used by any node, built from `base` with a numeric suffix
    /// if needed.
    pub fn fresh_name(&self, base: &str) -> NodeId {
        let mut candidate = base.to_string();
        let mut k = 1;
        while self.nodes.contains_key(candidate.as_str()) {
            candidate = format!("{base}_{k}");
            k += 1;
        }
        NodeId(candidate)
    }

    pub fn index(&self) -> DirectedIndex {
        DirectedIndex::new(self)
    }

    /// Copy of the graph without the split marker, i.e. the underlying
    /// causal graph of a file drawn as an intervention graph.
    pub fn without_split(&self) -> CausalGraph {
        CausalGraph {
            split: None,
            ..self.clone()
        }
    }

    /// Copy of the graph with `node` and all incident edges removed.
    pub fn without_node(&self, node: &str) -> CausalGraph {
        let mut g = self.clone();
        g.nodes.remove(node);
        g.tiers.remove(node);
        g.edges.retain(|e| e.tail.as_str() != node && e.head.as_str() != node);
        g
    }

    /// Copy of the graph with one edge removed.
    pub fn without_edge(&self, edge: &Edge) -> CausalGraph {
        let mut g = self.clone();
        g.edges.remove(edge);
        g
    }
}

/// Index-based adjacency of the directed part of a graph. Node indices
/// follow name order.
#[derive(Debug, Clone)]
pub struct DirectedIndex {
    names: Vec<NodeId>,
    position: HashMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl DirectedIndex {
    pub fn new(g: &CausalGraph) -> Self {
        let names: Vec<NodeId> = g.nodes.keys().cloned().collect();
        let position: HashMap<NodeId, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut parents = vec![Vec::new(); names.len()];
        let mut children = vec![Vec::new(); names.len()];
        for e in g.directed_edges() {
            if let (Some(&t), Some(&h)) = (position.get(&e.tail), position.get(&e.head)) {
                children[t].push(h);
                parents[h].push(t);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        DirectedIndex {
            names,
            position,
            parents,
            children,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &NodeId {
        &self.names[i]
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.position.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, GraphError> {
        self.get(id).ok_or_else(|| GraphError::UnknownNode(NodeId(id.to_string())))
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Reflexive descendants mask of the seeds.
    pub fn descendants_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(seeds, self.len(), |u| &self.children[u])
    }

    /// Reflexive ancestors mask of the seeds.
    pub fn ancestors_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(seeds, self.len(), |u| &self.parents[u])
    }

    /// Some directed cycle, if one exists.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            stack.push(root);
            while let Some(&mut (u, ref mut next)) = frames.last_mut() {
                if let Some(&w) = self.children[u].get(*next) {
                    *next += 1;
                    match state[w] {
                        0 => {
                            state[w] = 1;
                            stack.push(w);
                            frames.push((w, 0));
                        }
                        1 => {
                            let start = stack.iter().position(|&s| s == w).unwrap_or(0);
                            return Some(stack[start..].to_vec());
                        }
                        _ => {}
                    }
                } else {
                    state[u] = 2;
                    stack.pop();
                    frames.pop();
                }
            }
        }
        None
    }
}

fn closure<'a, F>(seeds: &[usize], n: usize, next: F) -> Vec<bool>
where
    F: Fn(usize) -> &'a [usize],
{
    let mut mask = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for &s in seeds {
        if !mask[s] {
            mask[s] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for &w in next(u) {
            if !mask[w] {
                mask[w] = true;
                stack.push(w);
            }
        }
    }
    mask
}

/// Lists every invariant violation of `g`. An empty report means valid.
pub fn validate(g: &CausalGraph) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen_pairs = BTreeSet::new();
    for e in &g.edges {
        for end in [&e.tail, &e.head] {
            if !g.nodes.contains_key(end) {
                violations.push(Violation::UnknownEndpoint {
                    edge: e.to_string(),
                    node: end.clone(),
                });
            }
        }
        if e.tail == e.head {
            violations.push(Violation::SelfLoop {
                node: e.tail.clone(),
            });
            continue;
        }
        let (a, b) = e.unordered_pair();
        if !seen_pairs.insert((a.clone(), b.clone())) {
            violations.push(Violation::DuplicatePair {
                a: a.clone(),
                b: b.clone(),
            });
        }
    }

    let idx = g.index();
    if let Some(cycle) = idx.find_cycle() {
        violations.push(Violation::CycleViolation {
            cycle: cycle.into_iter().map(|i| idx.name(i).clone()).collect(),
        });
    }

    let roles = [
        ("treatment", Role::Treatment),
        ("pre-treatment outcome", Role::Outcome(Period::Pre)),
        ("post-treatment outcome", Role::Outcome(Period::Post)),
    ];
    for (label, role) in roles {
        let count = g.with_role(role).count();
        if count != 1 {
            violations.push(Violation::RoleCardinalityViolation {
                role: label.to_string(),
                count,
            });
        }
    }
    for n in g.nodes.values() {
        if n.role != Role::Covariate && n.is_latent() {
            violations.push(Violation::LatentRoleViolation { node: n.id.clone() });
        }
    }

    for id in g.tiers.keys() {
        if !g.nodes.contains_key(id) {
            violations.push(Violation::UnknownTierNode { node: id.clone() });
        }
    }
    for e in g.directed_edges() {
        if let (Some(t), Some(h)) = (g.tier(e.tail.as_str()), g.tier(e.head.as_str())) {
            if t > h {
                violations.push(Violation::TierViolation {
                    tail: e.tail.clone(),
                    head: e.head.clone(),
                });
            }
        }
        let into_pre = g
            .node(e.head.as_str())
            .is_some_and(|n| n.role == Role::Outcome(Period::Pre));
        let from_late = g.node(e.tail.as_str()).is_some_and(|n| {
            matches!(n.role, Role::Treatment | Role::Outcome(Period::Post))
        });
        if into_pre && from_late {
            violations.push(Violation::TimeOrderViolation {
                tail: e.tail.clone(),
                head: e.head.clone(),
            });
        }
    }

    ValidationReport { violations }
}

/// Reflexive-transitive closure of `v` under directed edges.
pub fn descendants(g: &CausalGraph, v: &str) -> Result<BTreeSet<NodeId>, GraphError> {
    let idx = g.index();
    let i = idx.require(v)?;
    let mask = idx.descendants_mask(&[i]);
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(j, _)| idx.name(j).clone())
        .collect())
}

/// Topological order of the directed part. Ties are broken by (tier, name),
/// with untiered nodes sorting before tiered ones.
pub fn topological_order(g: &CausalGraph) -> Result<Vec<NodeId>, GraphError> {
    let idx = g.index();
    let n = idx.len();
    let mut indegree: Vec<usize> = (0..n).map(|i| idx.parents(i).len()).collect();
    let key = |i: usize| (g.tier(idx.name(i).as_str()), i);
    let mut ready: BinaryHeap<Reverse<(Option<i64>, usize)>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| Reverse(key(i)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, u))) = ready.pop() {
        order.push(idx.name(u).clone());
        for &w in idx.children(u) {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(key(w)));
            }
        }
    }
    if order.len() < n {
        let cycle = idx
            .find_cycle()
            .unwrap_or_default()
            .into_iter()
            .map(|i| idx.name(i).clone())
            .collect();
        return Err(GraphError::CyclicGraph(cycle));
    }
    Ok(order)
}
