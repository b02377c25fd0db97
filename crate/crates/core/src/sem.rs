//! Exact linear-Gaussian structural equation models.
//!
//! `X = B X + e` with `e ~ N(0, D)`, so `Σ = (I − B)⁻¹ D (I − B)⁻ᵀ`. On the
//! linear scale parallel trends reads `Cov(A, Y1^0) = Cov(A, Y0)`; the
//! potential outcome `Y1^0` comes from the model with every out-edge of the
//! treatment zeroed.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::dsep::separated_by_mask;
use crate::graph::{validate, CausalGraph, Edge, GraphBuilder, NodeId, Period};

/// Covariances below this magnitude count as zero.
pub const ZERO_TOL: f64 = 1e-9;

/// Largest graph `faithfulness_check` will scan exhaustively.
pub const FAITHFULNESS_MAX_NODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemError {
    #[error("graph must be fully directed and acyclic")]
    NotDirected,
    #[error("coefficients must cover exactly the directed edges; {0} is off")]
    CoefficientMismatch(String),
    #[error("noise variance of {0} must be positive and finite")]
    BadVariance(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("coefficient range needs 0 < lo <= hi, got ({lo}, {hi})")]
    BadRange { lo: f64, hi: f64 },
    #[error("graph lacks a treatment or outcome role")]
    MissingRoles,
    #[error("I − B is singular")]
    SingularSystem,
    #[error("covariance of the conditioning set is singular")]
    SingularConditioningSet,
    #[error("Cov(A, Y0) is zero; no Y0 -> Y1 coefficient can cancel the gap")]
    DegenerateY0,
    #[error("model already has a {0} -> {1} edge")]
    EdgeExists(NodeId, NodeId),
    #[error("{nodes} nodes exceed the exhaustive-check limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSem {
    graph: CausalGraph,
    coeff: BTreeMap<(NodeId, NodeId), f64>,
    noise_var: BTreeMap<NodeId, f64>,
}

impl LinearSem {
    pub fn new(
        graph: CausalGraph,
        coeff: BTreeMap<(NodeId, NodeId), f64>,
        noise_var: BTreeMap<NodeId, f64>,
    ) -> Result<Self, SemError> {
        if !graph.is_fully_directed() || validate(&graph).has_cycle() {
            return Err(SemError::NotDirected);
        }
        let edges: BTreeSet<(NodeId, NodeId)> = graph
            .directed_edges()
            .map(|e| (e.tail.clone(), e.head.clone()))
            .collect();
        for (t, h) in coeff.keys() {
            if !edges.contains(&(t.clone(), h.clone())) {
                return Err(SemError::CoefficientMismatch(format!("{t} -> {h}")));
            }
        }
        if let Some((t, h)) = edges.iter().find(|k| !coeff.contains_key(*k)) {
            return Err(SemError::CoefficientMismatch(format!("{t} -> {h}")));
        }
        for n in graph.nodes() {
            match noise_var.get(&n.id) {
                Some(v) if *v > 0.0 && v.is_finite() => {}
                _ => return Err(SemError::BadVariance(n.id.clone())),
            }
        }
        if let Some(extra) = noise_var.keys().find(|k| !graph.contains(k.as_str())) {
            return Err(SemError::UnknownNode(extra.to_string()));
        }
        Ok(LinearSem {
            graph,
            coeff,
            noise_var,
        })
    }

    /// Same coefficient on every edge, same noise variance on every node.
    pub fn uniform(graph: CausalGraph, coeff: f64, var: f64) -> Result<Self, SemError> {
        let c = graph
            .directed_edges()
            .map(|e| ((e.tail.clone(), e.head.clone()), coeff))
            .collect();
        let v = graph.nodes().map(|n| (n.id.clone(), var)).collect();
        LinearSem::new(graph, c, v)
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn coeff(&self, tail: &str, head: &str) -> Option<f64> {
        self.coeff
            .iter()
            .find(|((t, h), _)| t.as_str() == tail && h.as_str() == head)
            .map(|(_, c)| *c)
    }

    pub fn coefficients(&self) -> &BTreeMap<(NodeId, NodeId), f64> {
        &self.coeff
    }

    pub fn noise_var(&self, v: &str) -> Option<f64> {
        self.noise_var.get(v).copied()
    }

    /// Replaces the coefficient of an existing edge.
    pub fn with_coeff(mut self, tail: &str, head: &str, c: f64) -> Result<Self, SemError> {
        let slot = self
            .coeff
            .iter_mut()
            .find(|((t, h), _)| t.as_str() == tail && h.as_str() == head)
            .ok_or_else(|| SemError::CoefficientMismatch(format!("{tail} -> {head}")))?;
        *slot.1 = c;
        Ok(self)
    }

    pub fn with_noise_var(mut self, v: &str, var: f64) -> Result<Self, SemError> {
        let id = self
            .graph
            .node(v)
            .ok_or_else(|| SemError::UnknownNode(v.to_string()))?
            .id
            .clone();
        if !(var > 0.0 && var.is_finite()) {
            return Err(SemError::BadVariance(id));
        }
        self.noise_var.insert(id, var);
        Ok(self)
    }

    /// Adds a new directed edge with coefficient `c`.
    pub fn with_edge(self, tail: &str, head: &str, c: f64) -> Result<Self, SemError> {
        let t = self
            .graph
            .node(tail)
            .ok_or_else(|| SemError::UnknownNode(tail.to_string()))?
            .id
            .clone();
        let h = self
            .graph
            .node(head)
            .ok_or_else(|| SemError::UnknownNode(head.to_string()))?
            .id
            .clone();
        if self.graph.has_edge(tail, head) {
            return Err(SemError::EdgeExists(t, h));
        }
        let mut b = GraphBuilder::from_graph(self.graph);
        b.edge(Edge::directed(t.clone(), h.clone()));
        let mut coeff = self.coeff;
        coeff.insert((t, h), c);
        LinearSem::new(b.build_unchecked(), coeff, self.noise_var)
    }

    /// The model under `do(A = 0)`: every out-edge of the treatment carries
    /// coefficient zero; everything else is unchanged.
    pub fn mutilated(&self) -> Result<Self, SemError> {
        let a = self.graph.treatment().ok_or(SemError::MissingRoles)?.clone();
        let mut m = self.clone();
        for ((t, _), c) in m.coeff.iter_mut() {
            if *t == a {
                *c = 0.0;
            }
        }
        Ok(m)
    }

    fn names(&self) -> Vec<NodeId> {
        self.graph.nodes().map(|n| n.id.clone()).collect()
    }

    fn position(&self, names: &[NodeId], v: &str) -> usize {
        names
            .iter()
            .position(|n| n.as_str() == v)
            .expect("edge endpoints are nodes")
    }

    fn roles(&self) -> Result<(NodeId, NodeId, NodeId), SemError> {
        let g = &self.graph;
        match (g.treatment(), g.outcome(Period::Pre), g.outcome(Period::Post)) {
            (Some(a), Some(y0), Some(y1)) => Ok((a.clone(), y0.clone(), y1.clone())),
            _ => Err(SemError::MissingRoles),
        }
    }
}

/// A covariance matrix indexed by node name.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    names: Vec<NodeId>,
    matrix: DMatrix<f64>,
}

impl Covariance {
    pub fn new(names: Vec<NodeId>, matrix: DMatrix<f64>) -> Self {
        assert_eq!(names.len(), matrix.nrows());
        Covariance { names, matrix }
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index(&self, v: &str) -> Result<usize, SemError> {
        self.names
            .iter()
            .position(|n| n.as_str() == v)
            .ok_or_else(|| SemError::UnknownNode(v.to_string()))
    }

    pub fn get(&self, x: &str, y: &str) -> Result<f64, SemError> {
        Ok(self.matrix[(self.index(x)?, self.index(y)?)])
    }

    /// `Σxy − ΣxZ ΣZZ⁻¹ ΣZy`.
    pub fn partial(&self, x: &str, y: &str, z: &[&str]) -> Result<f64, SemError> {
        let (xi, yi) = (self.index(x)?, self.index(y)?);
        let zi = z
            .iter()
            .map(|v| self.index(v))
            .collect::<Result<Vec<_>, _>>()?;
        self.partial_idx(xi, yi, &zi)
    }

    pub(crate) fn partial_idx(&self, x: usize, y: usize, z: &[usize]) -> Result<f64, SemError> {
        let sxy = self.matrix[(x, y)];
        if z.is_empty() {
            return Ok(sxy);
        }
        let k = z.len();
        let szz = DMatrix::from_fn(k, k, |i, j| self.matrix[(z[i], z[j])]);
        let sxz = DVector::from_fn(k, |i, _| self.matrix[(x, z[i])]);
        let syz = DVector::from_fn(k, |i, _| self.matrix[(y, z[i])]);
        let chol = szz.cholesky().ok_or(SemError::SingularConditioningSet)?;
        Ok(sxy - sxz.dot(&chol.solve(&syz)))
    }
}

pub fn implied_covariance(m: &LinearSem) -> Result<Covariance, SemError> {
    let names = m.names();
    let n = names.len();
    let mut i_minus_b = DMatrix::<f64>::identity(n, n);
    for ((t, h), c) in &m.coeff {
        let (ti, hi) = (m.position(&names, t.as_str()), m.position(&names, h.as_str()));
        i_minus_b[(hi, ti)] -= c;
    }
    let inv = i_minus_b.try_inverse().ok_or(SemError::SingularSystem)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        names.iter().map(|v| m.noise_var[v]),
    ));
    let sigma = &inv * d * inv.transpose();
    // Symmetrize away rounding.
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(Covariance::new(names, sigma))
}

/// `Cov(A, Y1^0)` and `Cov(A, Y0)`; the gap is their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtGap {
    pub cov_a_y1_0: f64,
    pub cov_a_y0: f64,
}

impl PtGap {
    pub fn gap(&self) -> f64 {
        self.cov_a_y1_0 - self.cov_a_y0
    }
}

pub fn pt_gap(m: &LinearSem) -> Result<PtGap, SemError> {
    let (a, y0, y1) = m.roles()?;
    let observed = implied_covariance(m)?;
    let untreated = implied_covariance(&m.mutilated()?)?;
    Ok(PtGap {
        cov_a_y1_0: untreated.get(a.as_str(), y1.as_str())?,
        cov_a_y0: observed.get(a.as_str(), y0.as_str())?,
    })
}

/// Coefficients uniform in `±[lo, hi]` (edges in sorted order), then noise
/// variances uniform in `[0.5, 1.5]` (nodes in sorted order).
pub fn random_sem(g: &CausalGraph, seed: u64, range: (f64, f64)) -> Result<LinearSem, SemError> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(SemError::BadRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeff = g
        .directed_edges()
        .map(|e| {
            let mag = rng.random_range(lo..=hi);
            let c = if rng.random_bool(0.5) { mag } else { -mag };
            ((e.tail.clone(), e.head.clone()), c)
        })
        .collect();
    let noise = g
        .nodes()
        .map(|n| (n.id.clone(), rng.random_range(0.5..=1.5)))
        .collect();
    LinearSem::new(g.clone(), coeff, noise)
}

/// The `Y0 -> Y1` coefficient that cancels the gap of a model without that
/// edge: adding it shifts the gap by exactly `α · Cov(A, Y0)`.
pub fn solve_alpha_star(m0: &LinearSem) -> Result<f64, SemError> {
    let (_, y0, y1) = m0.roles()?;
    if m0.graph.has_edge(y0.as_str(), y1.as_str()) {
        return Err(SemError::EdgeExists(y0, y1));
    }
    let g = pt_gap(m0)?;
    if g.cov_a_y0.abs() < ZERO_TOL {
        return Err(SemError::DegenerateY0);
    }
    Ok(-g.gap() / g.cov_a_y0)
}

/// Population least-squares coefficients of `Y_t^0` on `cond`, in the
/// order given.
pub fn regression_coeffs(m: &LinearSem, t: Period, cond: &[&str]) -> Result<Vec<f64>, SemError> {
    if cond.is_empty() {
        return Err(SemError::SingularConditioningSet);
    }
    let (_, y0, y1) = m.roles()?;
    let y = if t == Period::Pre { y0 } else { y1 };
    let cov = implied_covariance(&m.mutilated()?)?;
    let idx = cond
        .iter()
        .map(|v| cov.index(v))
        .collect::<Result<Vec<_>, _>>()?;
    let yi = cov.index(y.as_str())?;
    let k = idx.len();
    let scc = DMatrix::from_fn(k, k, |i, j| cov.matrix[(idx[i], idx[j])]);
    let scy = DVector::from_fn(k, |i, _| cov.matrix[(idx[i], yi)]);
    let chol = scc.cholesky().ok_or(SemError::SingularConditioningSet)?;
    Ok(chol.solve(&scy).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// Separation and covariance agree.
    Faithful,
    /// d-connected but the partial covariance vanishes.
    Unfaithful,
    /// d-separated yet the partial covariance is nonzero: a bug somewhere.
    InternalInconsistency,
}

pub fn classify(separated: bool, partial_cov: f64) -> PairClass {
    match (separated, partial_cov.abs() < ZERO_TOL) {
        (true, true) | (false, false) => PairClass::Faithful,
        (false, true) => PairClass::Unfaithful,
        (true, false) => PairClass::InternalInconsistency,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaithfulnessViolation {
    pub pair: (NodeId, NodeId),
    pub given: Vec<NodeId>,
    pub partial_cov: f64,
    pub class: PairClass,
}

/// Every (pair, conditioning set) whose partial covariance disagrees with
/// d-separation.
pub fn faithfulness_check(m: &LinearSem) -> Result<Vec<FaithfulnessViolation>, SemError> {
    let n = m.graph.node_count();
    if n > FAITHFULNESS_MAX_NODES {
        return Err(SemError::TooLarge {
            nodes: n,
            limit: FAITHFULNESS_MAX_NODES,
        });
    }
    let cov = implied_covariance(m)?;
    let idx = m.graph.index();
    let pos: Vec<usize> = idx
        .names()
        .iter()
        .map(|v| cov.index(v.as_str()).expect("same nodes"))
        .collect();
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
            for mask in 0u32..(1 << others.len()) {
                let z: Vec<usize> = (0..others.len())
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| others[b])
                    .collect();
                let mut zmask = vec![false; n];
                for &v in &z {
                    zmask[v] = true;
                }
                let sep = separated_by_mask(&idx, x, y, &zmask);
                let zc: Vec<usize> = z.iter().map(|&v| pos[v]).collect();
                let pc = cov.partial_idx(pos[x], pos[y], &zc)?;
                let class = classify(sep, pc);
                if class != PairClass::Faithful {
                    out.push(FaithfulnessViolation {
                        pair: (idx.name(x).clone(), idx.name(y).clone()),
                        given: z.iter().map(|&v| idx.name(v).clone()).collect(),
                        partial_cov: pc,
                        class,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// `n` draws from the model, one row per draw, columns in name order.
pub fn sample(m: &LinearSem, n: usize, seed: u64) -> Result<(Vec<NodeId>, DMatrix<f64>), SemError> {
    let names = m.names();
    let order = crate::graph::topological_order(&m.graph).map_err(|_| SemError::NotDirected)?;
    let col: BTreeMap<&NodeId, usize> = names.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let parents: Vec<Vec<(usize, f64)>> = names
        .iter()
        .map(|v| {
            m.coeff
                .iter()
                .filter(|((_, h), _)| h == v)
                .map(|((t, _), c)| (col[t], *c))
                .collect()
        })
        .collect();
    let sd: Vec<f64> = names.iter().map(|v| m.noise_var[v].sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::<f64>::zeros(n, names.len());
    for r in 0..n {
        for v in &order {
            let j = col[v];
            let e: f64 = rng.sample(StandardNormal);
            let mut x = sd[j] * e;
            for &(p, c) in &parents[j] {
                x += c * data[(r, p)];
            }
            data[(r, j)] = x;
        }
    }
    Ok((names, data))
}

/// Sample covariance (divisor `n − 1`).
pub fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let means = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    centered.transpose() * &centered / (n - 1.0)
}

/// Robustness check with a binary treatment `1{A > 0}`: the difference in
/// mean trends `E(Y1^0 − Y0 | A=1) − E(Y1^0 − Y0 | A=0)` from simulated
/// draws of the untreated model, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbitCheck {
    pub gap: f64,
    pub trend_difference: f64,
    pub standard_error: f64,
}

pub fn probit_check(m: &LinearSem, n: usize, seed: u64) -> Result<ProbitCheck, SemError> {
    let (a, y0, y1) = m.roles()?;
    let gap = pt_gap(m)?.gap();
    let (names, data) = sample(&m.mutilated()?, n, seed)?;
    let col = |v: &NodeId| names.iter().position(|x| x == v).expect("role node");
    let (ai, y0i, y1i) = (col(&a), col(&y0), col(&y1));
    let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for r in 0..n {
        let trend = data[(r, y1i)] - data[(r, y0i)];
        groups[usize::from(data[(r, ai)] > 0.0)].push(trend);
    }
    let stats = |xs: &[f64]| {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, var / k)
    };
    let (m1, v1) = stats(&groups[1]);
    let (m0, v0) = stats(&groups[0]);
    Ok(ProbitCheck {
        gap,
        trend_difference: m1 - m0,
        standard_error: (v1 + v0).sqrt(),
    })
}

/// Monte Carlo `Cov(h(Y0), V)` with `h(y) = y³` for each `v` in `m_set`,
/// paired with standard errors. Nonzero values mean an additively separable
/// `h(Y0)` term carries confounding variation into `Y1`.
pub fn cubic_h_covariances(
    m: &LinearSem,
    m_set: &[&str],
    n: usize,
    seed: u64,
) -> Result<Vec<(NodeId, f64, f64)>, SemError> {
    let (_, y0, _) = m.roles()?;
    let (names, data) = sample(m, n, seed)?;
    let col = |v: &str| {
        names
            .iter()
            .position(|x| x.as_str() == v)
            .ok_or_else(|| SemError::UnknownNode(v.to_string()))
    };
    let yi = col(y0.as_str())?;
    let h: Vec<f64> = (0..n).map(|r| data[(r, yi)].powi(3)).collect();
    let hbar = h.iter().sum::<f64>() / n as f64;
    m_set
        .iter()
        .map(|v| {
            let j = col(v)?;
            let x: Vec<f64> = (0..n).map(|r| data[(r, j)]).collect();
            let xbar = x.iter().sum::<f64>() / n as f64;
            let prods: Vec<f64> = (0..n).map(|r| (h[r] - hbar) * (x[r] - xbar)).collect();
            let cov = prods.iter().sum::<f64>() / (n as f64 - 1.0);
            let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            Ok((names[j].clone(), cov, (var / n as f64).sqrt()))
        })
        .collect()
}

/// One seed of a batch simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub seed: u64,
    /// Completion the model was drawn on, for partially directed inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion: Option<usize>,
    pub gap: f64,
    pub covariances: PtGap,
    /// `None` when the graph is too large for the exhaustive scan.
    pub violations: Option<Vec<FaithfulnessViolation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub seeds: usize,
    pub range: (f64, f64),
    pub nonzero_gaps: usize,
    pub threshold: f64,
    pub records: Vec<SimulationRecord>,
}

/// Threshold used by the batch summary's nonzero-gap count.
pub const GAP_THRESHOLD: f64 = 1e-6;

/// One random model on `g` and its gap and faithfulness report.
pub fn simulate_seed(g: &CausalGraph, seed: u64, range: (f64, f64)) -> Result<SimulationRecord, SemError> {
    let m = random_sem(g, seed, range)?;
    let covariances = pt_gap(&m)?;
    let violations = match faithfulness_check(&m) {
        Ok(v) => Some(v),
        Err(SemError::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SimulationRecord {
        seed,
        completion: None,
        gap: covariances.gap(),
        covariances,
        violations,
    })
}

impl BatchReport {
    pub fn new(range: (f64, f64), records: Vec<SimulationRecord>) -> Self {
        BatchReport {
            seeds: records.len(),
            range,
            nonzero_gaps: records.iter().filter(|r| r.gap.abs() > GAP_THRESHOLD).count(),
            threshold: GAP_THRESHOLD,
            records,
        }
    }
}

/// Seeds `0..seeds` on a directed graph.
pub fn simulate(g: &CausalGraph, seeds: u64, range: (f64, f64)) -> Result<BatchReport, SemError> {
    let records = (0..seeds)
        .map(|s| simulate_seed(g, s, range))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchReport::new(range, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{did_graph, id};
    use crate::graph::Node;

    fn plain(nodes: &[&str], edges: &[(&str, &str)]) -> CausalGraph {
        let mut b = GraphBuilder::new();
        for n in nodes {
            b.node(Node::new(id(n)));
        }
        for (t, h) in edges {
            b.edge(Edge::directed(id(t), id(h)));
        }
        b.build_unchecked()
    }

    fn figure4_directed() -> CausalGraph {
        did_graph(
            &["U1", "U2"],
            &[
                ("A", "Y1"),
                ("U1", "Y0"),
                ("U1", "A"),
                ("U1", "Y1"),
                ("U2", "Y0"),
                ("U2", "Y1"),
            ],
        )
        .build()
        .unwrap()
    }

    #[test]
    fn two_node_covariance() {
        let m = LinearSem::uniform(plain(&["X", "Y"], &[("X", "Y")]), 2.0, 1.0).unwrap();
        let s = implied_covariance(&m).unwrap();
        assert!((s.get("Y", "Y").unwrap() - 5.0).abs() < 1e-12);
        assert!((s.get("X", "Y").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn edgeless_covariance_is_diagonal() {
        let g = plain(&["X", "Y", "Z"], &[]);
        let m = LinearSem::uniform(g, 0.0, 1.0)
            .unwrap()
            .with_noise_var("Z", 3.0)
            .unwrap();
        let s = implied_covariance(&m).unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 3.0])));
    }

    #[test]
    fn matched_coefficients_close_the_gap() {
        let m = random_sem(&figure4_directed(), 7, (0.2, 1.5)).unwrap();
        let c1 = m.coeff("U1", "Y0").unwrap();
        let c2 = m.coeff("U2", "Y0").unwrap();
        let m = m.with_coeff("U1", "Y1", c1).unwrap().with_coeff("U2", "Y1", c2).unwrap();
        assert!(pt_gap(&m).unwrap().gap().abs() < 1e-12);
    }

    #[test]
    fn unconfounded_design_has_no_gap() {
        let g = did_graph(&[], &[("A", "Y1")]).build().unwrap();
        let m = random_sem(&g, 1, (0.2, 1.5)).unwrap();
        assert_eq!(pt_gap(&m).unwrap().gap(), 0.0);
    }

    #[test]
    fn random_sem_is_deterministic_and_checks_range() {
        let g = figure4_directed();
        assert_eq!(random_sem(&g, 3, (0.2, 1.5)), random_sem(&g, 3, (0.2, 1.5)));
        assert_ne!(random_sem(&g, 3, (0.2, 1.5)), random_sem(&g, 4, (0.2, 1.5)));
        assert!(matches!(random_sem(&g, 3, (0.0, 1.0)), Err(SemError::BadRange { .. })));
        let m = random_sem(&g, 3, (0.2, 1.5)).unwrap();
        for c in m.coefficients().values() {
            assert!((0.2..=1.5).contains(&c.abs()));
        }
    }

    #[test]
    fn alpha_star_cancels_and_is_zero_under_parallel_trends() {
        let g = figure4_directed();
        let m = LinearSem::uniform(g, 0.5, 1.0).unwrap();
        assert_eq!(solve_alpha_star(&m).unwrap(), 0.0);
        let m = m.with_coeff("U1", "Y1", 0.8).unwrap();
        let alpha = solve_alpha_star(&m).unwrap();
        let cov = implied_covariance(&m).unwrap();
        let expected = -0.3 * cov.get("A", "U1").unwrap() / cov.get("A", "Y0").unwrap();
        assert!((alpha - expected).abs() < 1e-12);
        let g1 = m.with_edge("Y0", "Y1", alpha).unwrap();
        assert!(pt_gap(&g1).unwrap().gap().abs() < 1e-12);
    }

    #[test]
    fn regression_equal_under_matched_coefficients() {
        let m = LinearSem::uniform(figure4_directed(), 0.6, 1.0).unwrap();
        let b0 = regression_coeffs(&m, Period::Pre, &["U1", "U2"]).unwrap();
        let b1 = regression_coeffs(&m, Period::Post, &["U1", "U2"]).unwrap();
        for (x, y) in b0.iter().zip(&b1) {
            assert!((x - y).abs() < 1e-12);
        }
        let g = did_graph(&["U1", "X"], &[("U1", "A"), ("U1", "Y0"), ("U1", "Y1")])
            .build()
            .unwrap();
        let m = LinearSem::uniform(g, 0.7, 1.0).unwrap();
        assert!(regression_coeffs(&m, Period::Post, &["X"]).unwrap()[0].abs() < 1e-15);
        assert!(matches!(
            regression_coeffs(&m, Period::Post, &[]),
            Err(SemError::SingularConditioningSet)
        ));
    }

    #[test]
    fn road_quality_cancellation_is_the_only_violation() {
        // Roads speed up driving and bring more police; the two effects on
        // fatalities offset exactly.
        let g = plain(
            &["Fatal", "Police", "Roads", "Speed"],
            &[("Roads", "Speed"), ("Roads", "Police"), ("Speed", "Fatal"), ("Police", "Fatal")],
        );
        let m = LinearSem::uniform(g, 1.0, 1.0)
            .unwrap()
            .with_coeff("Police", "Fatal", -1.0)
            .unwrap();
        let v = faithfulness_check(&m).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].pair, (id("Fatal"), id("Roads")));
        assert!(v[0].given.is_empty());
        assert_eq!(v[0].class, PairClass::Unfaithful);
    }

    #[test]
    fn classification() {
        assert_eq!(classify(true, 0.0), PairClass::Faithful);
        assert_eq!(classify(false, 0.3), PairClass::Faithful);
        assert_eq!(classify(false, 1e-12), PairClass::Unfaithful);
        assert_eq!(classify(true, 0.1), PairClass::InternalInconsistency);
    }

    #[test]
    fn coefficient_keys_must_match_edges() {
        let g = plain(&["X", "Y"], &[("X", "Y")]);
        let noise: BTreeMap<_, _> = [(id("X"), 1.0), (id("Y"), 1.0)].into();
        assert!(matches!(
            LinearSem::new(g.clone(), BTreeMap::new(), noise.clone()),
            Err(SemError::CoefficientMismatch(_))
        ));
        let coeff: BTreeMap<_, _> = [((id("Y"), id("X")), 1.0)].into();
        assert!(LinearSem::new(g.clone(), coeff, noise).is_err());
        let bad: BTreeMap<_, _> = [(id("X"), 1.0), (id("Y"), 0.0)].into();
        let coeff: BTreeMap<_, _> = [((id("X"), id("Y")), 1.0)].into();
        assert!(matches!(LinearSem::new(g, coeff, bad), Err(SemError::BadVariance(_))));
    }

    #[test]
    fn probit_check_tracks_the_gap() {
        let m = LinearSem::uniform(figure4_directed(), 0.6, 1.0).unwrap();
        let zero = probit_check(&m, 20_000, 1).unwrap();
        assert!(zero.gap.abs() < 1e-12);
        assert!(zero.trend_difference.abs() < 4.0 * zero.standard_error);
        let m = m.with_coeff("U1", "Y1", 1.5).unwrap();
        let off = probit_check(&m, 20_000, 1).unwrap();
        assert!(off.gap > 0.0 && off.trend_difference > 4.0 * off.standard_error);
    }

    #[test]
    fn cubic_h_correlates_with_confounders() {
        let m = LinearSem::uniform(figure4_directed(), 0.8, 1.0).unwrap();
        let c = cubic_h_covariances(&m, &["U1"], 50_000, 2).unwrap();
        let (_, cov, se) = &c[0];
        assert!(cov.abs() > 4.0 * se, "{c:?}");
    }
}
