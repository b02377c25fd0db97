//! Subcommands. Each returns its process exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptgraph::api::{self, AnalyzeRequest, ApiError, MinsetsRequest, RequestOptions, SimulateRequest};
use ptgraph::verdict::C1Conditioning;

#[derive(Debug, Parser)]
#[command(name = "ptgraph", version, about = "Check parallel trends against a causal diagram")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the three conditions and print the verdict.
    Analyze {
        file: PathBuf,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
        /// Conditioning set for the treatment/outcome connection test.
        #[arg(long, value_enum, default_value_t = C1Set::Y0)]
        c1_given: C1Set,
        #[command(flatten)]
        cap: CapArg,
    },
    /// Minimally sufficient adjustment sets in every completion.
    Minsets {
        file: PathBuf,
        #[arg(long)]
        outcome: String,
        #[command(flatten)]
        cap: CapArg,
    },
    /// List the directed completions of a partially directed graph.
    Completions {
        file: PathBuf,
        #[command(flatten)]
        cap: CapArg,
    },
    /// Parallel-trends gaps in random linear models.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 200)]
        seeds: u64,
        /// Coefficient magnitudes, `lo,hi`.
        #[arg(long, default_value = "0.2,1.5", value_parser = parse_range)]
        range: (f64, f64),
        #[command(flatten)]
        cap: CapArg,
    },
    /// Print the intervention graph at a=0.
    Swig { file: PathBuf },
    /// Print the graph in canonical form.
    Fmt { file: PathBuf },
    /// Run the JSON service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CapArg {
    /// Most undirected edges to expand (default: $PTGRAPH_COMPLETION_CAP or 12).
    #[arg(long = "cap")]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum C1Set {
    Y0,
    Empty,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn read(path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path).map_err(|e| ApiError::io(format!("{}: {e}", path.display())))
}

enum Output {
    Json(String),
    Text(String),
}

fn dispatch(command: Command) -> Result<Output, ApiError> {
    match command {
        Command::Analyze {
            file,
            json,
            c1_given,
            cap,
            ..
        } => {
            let req = AnalyzeRequest {
                graph_text: read(&file)?,
                options: RequestOptions {
                    c1_conditioning: match c1_given {
                        C1Set::Y0 => C1Conditioning::PreOutcome,
                        C1Set::Empty => C1Conditioning::Empty,
                    },
                    completion_cap: cap.cap,
                },
            };
            let v = api::run_analyze(&req)?;
            Ok(if json {
                Output::Json(api::to_json(&v))
            } else {
                Output::Text(v.to_text())
            })
        }
        Command::Minsets { file, outcome, cap } => {
            let req = MinsetsRequest {
                graph_text: read(&file)?,
                outcome,
                completion_cap: cap.cap,
            };
            Ok(Output::Json(api::to_json(&api::run_minsets(&req)?)))
        }
        Command::Completions { file, cap } => Ok(Output::Json(api::to_json(
            &api::run_completions(&read(&file)?, cap.cap)?,
        ))),
        Command::Simulate {
            file,
            seeds,
            range,
            cap,
        } => {
            let req = SimulateRequest {
                graph_text: read(&file)?,
                seeds,
                range,
                completion_cap: cap.cap,
            };
            Ok(Output::Json(api::to_json(&api::run_simulate(&req)?)))
        }
        Command::Swig { file } => Ok(Output::Text(api::run_swig(&read(&file)?)?)),
        Command::Fmt { file } => Ok(Output::Text(api::run_fmt(&read(&file)?)?)),
        Command::Serve { .. } => unreachable!("handled by main"),
    }
}

/// Runs a non-server subcommand. Errors go to `out` as JSON and to `err` as
/// text.
pub fn run(command: Command, out: &mut impl Write, err: &mut impl Write) -> i32 {
    match dispatch(command) {
        Ok(Output::Json(s)) | Ok(Output::Text(s)) => {
            let _ = out.write_all(s.as_bytes());
            0
        }
        Err(e) => {
            let _ = out.write_all(e.to_json().as_bytes());
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
