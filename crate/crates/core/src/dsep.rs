//! d-separation and open-path witnesses on directed graphs.
//!
//! Decisions use a reachability sweep over (node, direction) states; witness
//! paths come from bounded enumeration of simple paths, shortest first.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{CausalGraph, DirectedIndex, GraphError, NodeId};
use crate::swig::Swig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DsepError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("endpoints of a separation query must differ ({0})")]
    SameEndpoints(NodeId),
    #[error("{0} is an endpoint and cannot also be conditioned on")]
    EndpointConditioned(NodeId),
}

/// Direction of one step along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// `nodes[i] -> nodes[i+1]`
    Forward,
    /// `nodes[i] <- nodes[i+1]`
    Backward,
}

/// A path of distinct nodes with per-node collider flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub steps: Vec<Step>,
    pub colliders: Vec<bool>,
}

impl Path {
    fn from_indices(idx: &DirectedIndex, nodes: &[usize], steps: &[Step]) -> Path {
        let colliders = (0..nodes.len())
            .map(|i| {
                i > 0
                    && i + 1 < nodes.len()
                    && steps[i - 1] == Step::Forward
                    && steps[i] == Step::Backward
            })
            .collect();
        Path {
            nodes: nodes.iter().map(|&i| idx.name(i).clone()).collect(),
            steps: steps.to_vec(),
            colliders,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Renders the path, naming nodes through `display`.
    pub fn render(&self, display: impl Fn(&NodeId) -> String) -> String {
        let mut out = display(&self.nodes[0]);
        for (step, node) in self.steps.iter().zip(&self.nodes[1..]) {
            out.push_str(match step {
                Step::Forward => " -> ",
                Step::Backward => " <- ",
            });
            out.push_str(&display(node));
        }
        out
    }

    /// Checks that this is a path of `g` that is open given `z`: nodes are
    /// distinct, every step is an edge of `g` with the stated orientation,
    /// collider flags match the orientations, no inner non-collider is in
    /// `z`, and every collider is in `z` or has a descendant there.
    pub fn certify(&self, g: &CausalGraph, z: &BTreeSet<NodeId>) -> bool {
        if self.nodes.len() != self.steps.len() + 1 || self.colliders.len() != self.nodes.len() {
            return false;
        }
        let distinct: BTreeSet<&NodeId> = self.nodes.iter().collect();
        if distinct.len() != self.nodes.len() {
            return false;
        }
        for (i, step) in self.steps.iter().enumerate() {
            let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
            let ok = match step {
                Step::Forward => g.has_edge(a.as_str(), b.as_str()),
                Step::Backward => g.has_edge(b.as_str(), a.as_str()),
            };
            if !ok {
                return false;
            }
        }
        let idx = g.index();
        let zi: Vec<usize> = match z.iter().map(|v| idx.get(v.as_str())).collect() {
            Some(v) => v,
            None => return false,
        };
        let anc = idx.ancestors_mask(&zi);
        for i in 0..self.nodes.len() {
            let inner = i > 0 && i + 1 < self.nodes.len();
            let collider =
                inner && self.steps[i - 1] == Step::Forward && self.steps[i] == Step::Backward;
            if self.colliders[i] != collider {
                return false;
            }
            if !inner {
                continue;
            }
            let v = &self.nodes[i];
            let open = if collider {
                idx.get(v.as_str()).is_some_and(|j| anc[j])
            } else {
                !z.contains(v)
            };
            if !open {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|n| n.to_string()))
    }
}

fn check_query(
    idx: &DirectedIndex,
    x: &str,
    y: &str,
    z: &BTreeSet<NodeId>,
) -> Result<(usize, usize, Vec<usize>), DsepError> {
    let xi = idx.require(x)?;
    let yi = idx.require(y)?;
    if xi == yi {
        return Err(DsepError::SameEndpoints(idx.name(xi).clone()));
    }
    let mut zi = Vec::with_capacity(z.len());
    for v in z {
        let i = idx.require(v.as_str())?;
        if i == xi || i == yi {
            return Err(DsepError::EndpointConditioned(v.clone()));
        }
        zi.push(i);
    }
    Ok((xi, yi, zi))
}

/// Nodes d-connected to `x` given the conditioned mask `z`.
pub fn reachable(idx: &DirectedIndex, x: usize, z: &[bool]) -> Vec<bool> {
    let n = idx.len();
    let seeds: Vec<usize> = (0..n).filter(|&i| z[i]).collect();
    let anc = idx.ancestors_mask(&seeds);
    // visited[v][0]: arrived from a child (moving up), [1]: from a parent.
    let mut visited = vec![[false; 2]; n];
    let mut reach = vec![false; n];
    let mut stack = vec![(x, 0usize)];
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !z[v] {
            reach[v] = true;
        }
        if dir == 0 {
            if !z[v] {
                stack.extend(idx.parents(v).iter().map(|&p| (p, 0)));
                stack.extend(idx.children(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !z[v] {
                stack.extend(idx.children(v).iter().map(|&c| (c, 1)));
            }
            if anc[v] {
                stack.extend(idx.parents(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    reach
}

/// Index-level query; `z` is a membership mask.
pub fn separated_by_mask(idx: &DirectedIndex, x: usize, y: usize, z: &[bool]) -> bool {
    !reachable(idx, x, z)[y]
}

pub fn d_separated(
    g: &CausalGraph,
    x: &str,
    y: &str,
    z: &BTreeSet<NodeId>,
) -> Result<bool, DsepError> {
    d_separated_in(&g.index(), x, y, z)
}

pub fn d_separated_in(
    idx: &DirectedIndex,
    x: &str,
    y: &str,
    z: &BTreeSet<NodeId>,
) -> Result<bool, DsepError> {
    let (xi, yi, zi) = check_query(idx, x, y, z)?;
    let mut mask = vec![false; idx.len()];
    for i in zi {
        mask[i] = true;
    }
    Ok(separated_by_mask(idx, xi, yi, &mask))
}

/// Shortest open path between `x` and `y` given `z`, ties broken by the
/// lexicographic order of node names along the path. `None` when separated.
pub fn open_path_witness(
    g: &CausalGraph,
    x: &str,
    y: &str,
    z: &BTreeSet<NodeId>,
) -> Result<Option<Path>, DsepError> {
    open_path_witness_in(&g.index(), x, y, z)
}

pub fn open_path_witness_in(
    idx: &DirectedIndex,
    x: &str,
    y: &str,
    z: &BTreeSet<NodeId>,
) -> Result<Option<Path>, DsepError> {
    let (xi, yi, zi) = check_query(idx, x, y, z)?;
    let n = idx.len();
    let mut zmask = vec![false; n];
    for &i in &zi {
        zmask[i] = true;
    }
    if separated_by_mask(idx, xi, yi, &zmask) {
        return Ok(None);
    }
    let anc = idx.ancestors_mask(&zi);

    // Neighbours in name order with the step that reaches them.
    let neighbours: Vec<Vec<(usize, Step)>> = (0..n)
        .map(|v| {
            let mut out: Vec<(usize, Step)> = idx
                .children(v)
                .iter()
                .map(|&c| (c, Step::Forward))
                .chain(idx.parents(v).iter().map(|&p| (p, Step::Backward)))
                .collect();
            out.sort_by_key(|&(w, _)| w);
            out
        })
        .collect();

    let mut search = PathSearch {
        neighbours: &neighbours,
        zmask: &zmask,
        anc: &anc,
        target: yi,
        nodes: vec![xi],
        steps: Vec::new(),
        on_path: vec![false; n],
    };
    search.on_path[xi] = true;
    for len in 1..n {
        if search.extend(len) {
            return Ok(Some(Path::from_indices(idx, &search.nodes, &search.steps)));
        }
    }
    Ok(None)
}

struct PathSearch<'a> {
    neighbours: &'a [Vec<(usize, Step)>],
    zmask: &'a [bool],
    anc: &'a [bool],
    target: usize,
    nodes: Vec<usize>,
    steps: Vec<Step>,
    on_path: Vec<bool>,
}

impl PathSearch<'_> {
    /// Depth-first search for an open path with exactly `remaining` more
    /// steps. Leaves the found path in `nodes`/`steps` on success.
    fn extend(&mut self, remaining: usize) -> bool {
        let v = *self.nodes.last().expect("path starts non-empty");
        for &(w, step) in &self.neighbours[v] {
            if self.on_path[w] {
                continue;
            }
            if (w == self.target) != (remaining == 1) {
                continue;
            }
            // `v` becomes an inner node once `w` is appended.
            if let Some(&prev) = self.steps.last() {
                let collider = prev == Step::Forward && step == Step::Backward;
                let open = if collider { self.anc[v] } else { !self.zmask[v] };
                if !open {
                    continue;
                }
            }
            self.nodes.push(w);
            self.steps.push(step);
            if remaining == 1 {
                return true;
            }
            self.on_path[w] = true;
            if self.extend(remaining - 1) {
                return true;
            }
            self.on_path[w] = false;
            self.nodes.pop();
            self.steps.pop();
        }
        false
    }
}

/// Whether a backdoor path from the random half of the treatment to the
/// post-treatment potential outcome is open given `z`. The SWIG has no
/// out-edges at the random half, so every connection is a backdoor path.
pub fn backdoor_open(s: &Swig, z: &BTreeSet<NodeId>) -> Result<bool, DsepError> {
    let y1 = s.outcome(crate::graph::Period::Post);
    Ok(!d_separated_in(s.index(), s.treatment().as_str(), y1.as_str(), z)?)
}
