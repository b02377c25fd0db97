//! Directed completions of a partially directed graph.
//!
//! Each undirected edge `i -- j` stands for one of three mechanisms:
//! `i -> j`, `j -> i`, or an unnamed common cause `i <- L_i_j -> j`.
//! A graph with `k` undirected edges therefore expands into `3^k` candidate
//! graphs, of which the acyclic, tier-respecting ones are its completions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{validate, CausalGraph, Edge, GraphBuilder, Node, NodeId};

pub const DEFAULT_COMPLETION_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompletionError {
    #[error("{found} undirected edges exceed the completion cap of {cap}; direct some edges or add tiers")]
    TooManyUndirectedEdges { found: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Orientation {
    /// `tail -> head` of the canonical undirected edge.
    Forward,
    /// `head -> tail`.
    Backward,
    /// A fresh latent parent of both endpoints.
    LatentCommonCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeChoice {
    pub edge: Edge,
    pub orientation: Orientation,
    /// Name of the fresh latent for `LatentCommonCause`.
    pub latent: Option<NodeId>,
}

impl fmt::Display for EdgeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (&self.edge.tail, &self.edge.head);
        match (self.orientation, &self.latent) {
            (Orientation::Forward, _) => write!(f, "{a} -> {b}"),
            (Orientation::Backward, _) => write!(f, "{b} -> {a}"),
            (Orientation::LatentCommonCause, Some(l)) => write!(f, "{a} <- {l} -> {b}"),
            (Orientation::LatentCommonCause, None) => write!(f, "{a} <-> {b}"),
        }
    }
}

/// One directed completion.
#[derive(Debug, Clone)]
pub struct Completion {
    /// Position in the lexicographic order over all `3^k` expansions.
    pub rank: usize,
    pub choices: Vec<EdgeChoice>,
    pub graph: CausalGraph,
}

impl Completion {
    pub fn label(&self) -> Vec<String> {
        self.choices.iter().map(ToString::to_string).collect()
    }
}

/// Streams the completions of `g` in lexicographic choice order
/// (`Forward < Backward < LatentCommonCause`, first undirected edge most
/// significant). Fully directed graphs yield themselves once.
pub fn enumerate_completions(g: &CausalGraph, cap: usize) -> Result<Completions, CompletionError> {
    let undirected: Vec<Edge> = g.undirected_edges().cloned().collect();
    if undirected.len() > cap {
        return Err(CompletionError::TooManyUndirectedEdges {
            found: undirected.len(),
            cap,
        });
    }
    let mut taken: BTreeSet<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
    let mut latents = Vec::with_capacity(undirected.len());
    for e in &undirected {
        let base = format!("L_{}_{}", e.tail, e.head);
        let mut name = base.clone();
        let mut k = 1;
        while taken.contains(name.as_str()) {
            name = format!("{base}_{k}");
            k += 1;
        }
        let id = NodeId::new(name).expect("built from identifiers");
        taken.insert(id.clone());
        latents.push(id);
    }
    let total = 3usize.pow(undirected.len() as u32);
    Ok(Completions {
        base: g.clone(),
        undirected,
        latents,
        next: 0,
        total,
    })
}

/// Collects all completions.
pub fn completions(g: &CausalGraph, cap: usize) -> Result<Vec<Completion>, CompletionError> {
    Ok(enumerate_completions(g, cap)?.collect())
}

#[derive(Debug, Clone)]
pub struct Completions {
    base: CausalGraph,
    undirected: Vec<Edge>,
    latents: Vec<NodeId>,
    next: usize,
    total: usize,
}

impl Completions {
    /// Number of candidate expansions, before the acyclicity filter.
    pub fn candidates(&self) -> usize {
        self.total
    }

    fn expand(&self, rank: usize) -> Option<Completion> {
        let k = self.undirected.len();
        let mut digits = vec![0usize; k];
        let mut r = rank;
        for d in digits.iter_mut().rev() {
            *d = r % 3;
            r /= 3;
        }

        let mut b = GraphBuilder::from_graph(self.base.clone());
        let mut choices = Vec::with_capacity(k);
        for ((edge, latent), digit) in self.undirected.iter().zip(&self.latents).zip(digits) {
            b.remove_edge(edge);
            let (a, c) = (edge.tail.clone(), edge.head.clone());
            let orientation = match digit {
                0 => Orientation::Forward,
                1 => Orientation::Backward,
                _ => Orientation::LatentCommonCause,
            };
            let mut chosen_latent = None;
            match orientation {
                Orientation::Forward => {
                    b.edge(Edge::directed(a, c));
                }
                Orientation::Backward => {
                    b.edge(Edge::directed(c, a));
                }
                Orientation::LatentCommonCause => {
                    let mut node = Node::new(latent.clone()).latent();
                    node.synthetic = true;
                    b.node(node);
                    let tiers = [self.base.tier(a.as_str()), self.base.tier(c.as_str())];
                    if let Some(t) = tiers.iter().flatten().min() {
                        b.tier(latent.clone(), *t);
                    }
                    b.edge(Edge::directed(latent.clone(), a));
                    b.edge(Edge::directed(latent.clone(), c));
                    chosen_latent = Some(latent.clone());
                }
            }
            choices.push(EdgeChoice {
                edge: edge.clone(),
                orientation,
                latent: chosen_latent,
            });
        }
        let graph = b.build_unchecked();
        if validate(&graph).is_valid() {
            Some(Completion {
                rank,
                choices,
                graph,
            })
        } else {
            None
        }
    }
}

impl Iterator for Completions {
    type Item = Completion;

    fn next(&mut self) -> Option<Completion> {
        while self.next < self.total {
            let rank = self.next;
            self.next += 1;
            if let Some(c) = self.expand(rank) {
                return Some(c);
            }
        }
        None
    }
}
