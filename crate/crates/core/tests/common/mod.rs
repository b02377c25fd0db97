//! Random graph generators and independent brute-force oracles.
//!
//! The oracles deliberately avoid the library's own algorithms: separation
//! goes through the moralized ancestral graph, covariances through trek
//! sums, completions through plain recursion.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use ptgraph::graph::{CausalGraph, Edge, GraphBuilder, Node, NodeId, Period, Role};
use ptgraph::sem::LinearSem;

pub fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn set(names: &[&str]) -> BTreeSet<NodeId> {
    names.iter().map(|n| id(n)).collect()
}

pub fn figure(name: &str) -> String {
    let path = format!("{}/../../figures/{name}.dag", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn parse_figure(name: &str) -> CausalGraph {
    ptgraph::dsl::parse(&figure(name)).unwrap()
}

/// Names for `k` covariates: latent `U1..` for even positions, observed
/// `X1..` for odd ones when `mixed`, else all latent.
fn covariate_names(k: usize, mixed: bool) -> Vec<(String, bool)> {
    let (mut u, mut x) = (0, 0);
    (0..k)
        .map(|i| {
            if mixed && i % 2 == 1 {
                x += 1;
                (format!("X{x}"), false)
            } else {
                u += 1;
                (format!("U{u}"), true)
            }
        })
        .collect()
}

/// A valid DID graph from an ordering and an edge mask.
///
/// `order` lists the covariates and the three role nodes in causal order
/// with `Y0` before `A` before `Y1`; every forward pair is an edge when its
/// bit in `edges` is set.
pub fn did_from_bits(k: usize, slots: &[usize], edges: &[bool], mixed: bool) -> CausalGraph {
    let covs = covariate_names(k, mixed);
    // slots[i] is where covariate i sits relative to the role nodes.
    let mut order: Vec<(String, Option<Role>, bool)> = Vec::new();
    let roles = [
        ("Y0", Role::Outcome(Period::Pre)),
        ("A", Role::Treatment),
        ("Y1", Role::Outcome(Period::Post)),
    ];
    for (pos, (name, role)) in roles.iter().enumerate() {
        for (i, (c, latent)) in covs.iter().enumerate() {
            if slots[i] == pos {
                order.push((c.clone(), None, *latent));
            }
        }
        order.push((name.to_string(), Some(*role), false));
    }
    for (i, (c, latent)) in covs.iter().enumerate() {
        if slots[i] >= 3 {
            order.push((c.clone(), None, *latent));
        }
    }
    let mut b = GraphBuilder::new();
    for (name, role, latent) in &order {
        let mut n = Node::new(id(name));
        if let Some(r) = role {
            n = n.with_role(*r);
        } else if *latent {
            n = n.latent();
        }
        b.node(n);
    }
    let mut bit = 0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if edges[bit % edges.len()] {
                b.edge(Edge::directed(id(&order[i].0), id(&order[j].0)));
            }
            bit += 1;
        }
    }
    b.build().expect("forward edges over a valid order")
}

/// Random valid DID graphs with `lo..=hi` covariates.
pub fn arb_did(lo: usize, hi: usize, mixed: bool) -> impl Strategy<Value = CausalGraph> {
    (lo..=hi).prop_flat_map(move |k| {
        let pairs = (k + 3) * (k + 2) / 2;
        (
            prop::collection::vec(0usize..4, k),
            prop::collection::vec(prop::bool::weighted(0.35), pairs),
        )
            .prop_map(move |(slots, edges)| did_from_bits(k, &slots, &edges, mixed))
    })
}

/// Random DAG on `n` nodes named `V0..`, edges forward in a random order.
pub fn dag_from_bits(n: usize, perm: &[usize], edges: &[bool]) -> CausalGraph {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut b = GraphBuilder::new();
    for v in &names {
        b.node(Node::new(id(v)));
    }
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if edges[bit] {
                b.edge(Edge::directed(id(&names[perm[i]]), id(&names[perm[j]])));
            }
            bit += 1;
        }
    }
    b.build_unchecked()
}

pub fn arb_dag(lo: usize, hi: usize) -> impl Strategy<Value = CausalGraph> {
    (lo..=hi).prop_flat_map(|n| {
        (
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            prop::collection::vec(prop::bool::weighted(0.4), n * (n - 1) / 2),
        )
            .prop_map(move |(perm, edges)| dag_from_bits(n, &perm, &edges))
    })
}

/// Replaces some directed covariate–covariate edges by undirected ones.
pub fn soften(g: &CausalGraph, picks: &[bool]) -> CausalGraph {
    let mut b = GraphBuilder::from_graph(g.clone());
    let mut i = 0;
    for e in g.directed_edges() {
        let covs = [&e.tail, &e.head]
            .iter()
            .all(|v| g.node(v.as_str()).unwrap().role == Role::Covariate);
        if covs {
            if picks.get(i).copied().unwrap_or(false) {
                b.remove_edge(e);
                b.edge(Edge::undirected(e.tail.clone(), e.head.clone()));
            }
            i += 1;
        }
    }
    b.build().unwrap()
}

// ---- separation oracle ---------------------------------------------------

fn parents_map(g: &CausalGraph) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut p: BTreeMap<NodeId, BTreeSet<NodeId>> =
        g.nodes().map(|n| (n.id.clone(), BTreeSet::new())).collect();
    for e in g.directed_edges() {
        p.get_mut(&e.head).unwrap().insert(e.tail.clone());
    }
    p
}

/// Separation via the moral graph of the ancestral set of `{x, y} ∪ z`.
pub fn moral_separated(g: &CausalGraph, x: &str, y: &str, z: &BTreeSet<NodeId>) -> bool {
    let parents = parents_map(g);
    let mut anc: BTreeSet<NodeId> = BTreeSet::new();
    let mut stack: Vec<NodeId> = vec![id(x), id(y)];
    stack.extend(z.iter().cloned());
    while let Some(v) = stack.pop() {
        if anc.insert(v.clone()) {
            stack.extend(parents[&v].iter().cloned());
        }
    }
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut link = |a: &NodeId, b: &NodeId| {
        adj.entry(a.clone()).or_default().insert(b.clone());
        adj.entry(b.clone()).or_default().insert(a.clone());
    };
    for v in &anc {
        let ps: Vec<&NodeId> = parents[v].iter().collect();
        for p in &ps {
            link(p, v);
        }
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                link(ps[i], ps[j]);
            }
        }
    }
    let mut seen = BTreeSet::from([id(x)]);
    let mut queue = VecDeque::from([id(x)]);
    while let Some(v) = queue.pop_front() {
        if v.as_str() == y {
            return false;
        }
        for w in adj.get(&v).into_iter().flatten() {
            if !z.contains(w) && seen.insert(w.clone()) {
                queue.push_back(w.clone());
            }
        }
    }
    true
}

// ---- adjustment oracle ---------------------------------------------------

fn descendants_of(g: &CausalGraph, v: &str) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![id(v)];
    while let Some(u) = stack.pop() {
        if out.insert(u.clone()) {
            for e in g.directed_edges().filter(|e| e.tail == u) {
                stack.push(e.head.clone());
            }
        }
    }
    out
}

/// The treatment's out-edges removed.
pub fn cut_treatment(g: &CausalGraph) -> CausalGraph {
    let a = g.treatment().unwrap().clone();
    let mut b = GraphBuilder::from_graph(g.clone());
    for e in g.directed_edges().filter(|e| e.tail == a) {
        b.remove_edge(e);
    }
    b.build_unchecked()
}

pub fn eligible_pool(g: &CausalGraph, t: Option<Period>) -> Vec<NodeId> {
    let a = g.treatment().unwrap();
    let desc = descendants_of(g, a.as_str());
    g.nodes()
        .filter(|n| !n.synthetic && !desc.contains(&n.id))
        .filter(|n| match n.role {
            Role::Covariate => true,
            Role::Outcome(Period::Pre) => t == Some(Period::Post),
            _ => false,
        })
        .map(|n| n.id.clone())
        .collect()
}

pub fn oracle_sufficient(cut: &CausalGraph, m: &BTreeSet<NodeId>, t: Period) -> bool {
    let a = cut.treatment().unwrap();
    let y = cut.outcome(t).unwrap();
    moral_separated(cut, a.as_str(), y.as_str(), m)
}

fn all_subsets(pool: &[NodeId]) -> Vec<BTreeSet<NodeId>> {
    (0u32..1 << pool.len())
        .map(|mask| {
            (0..pool.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| pool[b].clone())
                .collect()
        })
        .collect()
}

/// Every sufficient set with no sufficient proper subset.
pub fn oracle_minimal_sets(g: &CausalGraph, t: Period) -> BTreeSet<BTreeSet<NodeId>> {
    let cut = cut_treatment(g);
    let pool = eligible_pool(g, Some(t));
    let sufficient: Vec<BTreeSet<NodeId>> = all_subsets(&pool)
        .into_iter()
        .filter(|m| oracle_sufficient(&cut, m, t))
        .collect();
    sufficient
        .iter()
        .filter(|m| !sufficient.iter().any(|s| s != *m && s.is_subset(m)))
        .cloned()
        .collect()
}

/// Whether any set over the common pool is sufficient for both periods.
pub fn oracle_common_exists(g: &CausalGraph) -> bool {
    let cut = cut_treatment(g);
    all_subsets(&eligible_pool(g, None)).iter().any(|m| {
        oracle_sufficient(&cut, m, Period::Pre) && oracle_sufficient(&cut, m, Period::Post)
    })
}

// ---- completion oracle ---------------------------------------------------

fn acyclic(nodes: &BTreeSet<NodeId>, edges: &[(NodeId, NodeId)]) -> bool {
    let mut indeg: BTreeMap<&NodeId, usize> = nodes.iter().map(|v| (v, 0)).collect();
    for (_, h) in edges {
        *indeg.get_mut(h).unwrap() += 1;
    }
    let mut ready: Vec<&NodeId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
    let mut done = 0;
    while let Some(v) = ready.pop() {
        done += 1;
        for (t, h) in edges {
            if t == v {
                let d = indeg.get_mut(h).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(h);
                }
            }
        }
    }
    done == nodes.len()
}

/// Directed edge sets of every valid completion, by plain recursion. A
/// common cause of `i -- j` is named `L_i_j`.
pub fn oracle_completions(g: &CausalGraph) -> BTreeSet<BTreeSet<(String, String)>> {
    let und: Vec<Edge> = g.undirected_edges().cloned().collect();
    let base: Vec<(NodeId, NodeId)> = g
        .directed_edges()
        .map(|e| (e.tail.clone(), e.head.clone()))
        .collect();
    let mut out = BTreeSet::new();
    let mut choice = vec![0u8; und.len()];
    loop {
        let mut nodes: BTreeSet<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
        let mut edges = base.clone();
        let mut tiers: BTreeMap<NodeId, i64> = g.tiers().clone();
        for (e, c) in und.iter().zip(&choice) {
            match c {
                0 => edges.push((e.tail.clone(), e.head.clone())),
                1 => edges.push((e.head.clone(), e.tail.clone())),
                _ => {
                    let l = id(&format!("L_{}_{}", e.tail, e.head));
                    nodes.insert(l.clone());
                    let ts: Vec<i64> = [&e.tail, &e.head]
                        .iter()
                        .filter_map(|v| tiers.get(*v).copied())
                        .collect();
                    if let Some(t) = ts.iter().min() {
                        tiers.insert(l.clone(), *t);
                    }
                    edges.push((l.clone(), e.tail.clone()));
                    edges.push((l, e.head.clone()));
                }
            }
        }
        let time_ok = edges.iter().all(|(t, h)| {
            let late = |v: &NodeId| {
                g.node(v.as_str()).is_some_and(|n| {
                    matches!(n.role, Role::Treatment | Role::Outcome(Period::Post))
                })
            };
            let pre = g
                .node(h.as_str())
                .is_some_and(|n| n.role == Role::Outcome(Period::Pre));
            !(pre && late(t))
        });
        let tiers_ok = edges.iter().all(|(t, h)| match (tiers.get(t), tiers.get(h)) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        });
        if time_ok && tiers_ok && acyclic(&nodes, &edges) {
            out.insert(
                edges
                    .iter()
                    .map(|(t, h)| (t.to_string(), h.to_string()))
                    .collect(),
            );
        }
        // Next choice vector in base 3.
        let mut i = 0;
        loop {
            if i == choice.len() {
                return out;
            }
            choice[i] += 1;
            if choice[i] < 3 {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

// ---- covariance oracle ---------------------------------------------------

/// Sum over directed paths `s ~> x` of coefficient products (1 for `s = x`).
fn path_total(m: &LinearSem, s: &NodeId, x: &NodeId, memo: &mut BTreeMap<(NodeId, NodeId), f64>) -> f64 {
    if s == x {
        return 1.0;
    }
    if let Some(v) = memo.get(&(s.clone(), x.clone())) {
        return *v;
    }
    let mut total = 0.0;
    for ((t, h), c) in m.coefficients() {
        if t == s {
            total += c * path_total(m, h, x, memo);
        }
    }
    memo.insert((s.clone(), x.clone()), total);
    total
}

/// Wright's trek rule: `Cov(X, Y) = Σ_s var(s) T(s, X) T(s, Y)`.
pub fn trek_covariance(m: &LinearSem, x: &str, y: &str) -> f64 {
    let mut memo = BTreeMap::new();
    let (x, y) = (id(x), id(y));
    m.graph()
        .nodes()
        .map(|n| {
            let v = m.noise_var(n.id.as_str()).unwrap();
            v * path_total(m, &n.id, &x, &mut memo) * path_total(m, &n.id, &y, &mut memo)
        })
        .sum()
}
