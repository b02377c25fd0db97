//! Graphical checks of the parallel trends assumption in two-period
//! difference-in-differences designs.
//!
//! Graphs are written in a dagitty-style text format ([`dsl`]), split at the
//! treatment into single-world intervention graphs ([`swig`]), and checked
//! for three structural conditions ([`verdict`]) in every directed completion
//! of their undirected edges ([`completion`]). [`sem`] evaluates the same
//! claims numerically in linear-Gaussian models.

pub mod adjustment;
pub mod api;
pub mod completion;
pub mod dsep;
pub mod dsl;
pub mod graph;
pub mod sem;
pub mod swig;
pub mod verdict;

pub use adjustment::{AdjustmentSet, MinSetFamily};
pub use graph::{CausalGraph, Edge, GraphBuilder, Node, NodeId, Period, Role};
pub use verdict::{analyze, AnalyzeOptions, Overall, Verdict};
