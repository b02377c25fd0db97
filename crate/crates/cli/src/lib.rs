//! Command line and HTTP front ends for `ptgraph`.

pub mod commands;
pub mod server;
