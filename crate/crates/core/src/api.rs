//! Request and response types shared by the command line and the HTTP
//! service, so both emit byte-identical JSON for the same request.

use serde::{Deserialize, Serialize};

use crate::adjustment::{minimal_sets_by_completion, AdjustmentError, FamiliesByCompletion};
use crate::completion::{enumerate_completions, CompletionError, DEFAULT_COMPLETION_CAP};
use crate::dsl::{self, DslError, ParseError};
use crate::graph::{CausalGraph, Period, Violation};
use crate::sem::{simulate_seed, BatchReport, SemError};
use crate::swig::{build_swig, SwigError};
use crate::verdict::{analyze, AnalyzeError, AnalyzeOptions, C1Conditioning, Verdict};

/// Environment variable overriding the default completion cap.
pub const CAP_ENV: &str = "PTGRAPH_COMPLETION_CAP";

/// The completion cap: explicit request value, else the environment, else
/// the built-in default.
pub fn completion_cap(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var(CAP_ENV).ok()?.trim().parse().ok())
        .unwrap_or(DEFAULT_COMPLETION_CAP)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestOptions {
    pub c1_conditioning: C1Conditioning,
    pub completion_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub graph_text: String,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinsetsRequest {
    pub graph_text: String,
    /// `Y0`, `Y1`, `0`, `1`, or the name of an outcome node.
    pub outcome: String,
    #[serde(default)]
    pub completion_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub graph_text: String,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_range")]
    pub range: (f64, f64),
    #[serde(default)]
    pub completion_cap: Option<usize>,
}

fn default_seeds() -> u64 {
    200
}

fn default_range() -> (f64, f64) {
    (0.2, 1.5)
}

/// Most seeds a single simulate request may ask for.
pub const MAX_SEEDS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Malformed request or graph text.
    Parse,
    /// Well-formed graph that breaks a structural rule.
    Validation,
    /// Valid graph the requested analysis cannot handle.
    Semantic,
    /// Input could not be read.
    Io,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub error: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse: Option<ParseError>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    fn semantic(message: impl ToString) -> Self {
        ApiError {
            error: ErrorKind::Semantic,
            message: message.to_string(),
            parse: None,
            violations: Vec::new(),
        }
    }

    pub fn io(message: impl ToString) -> Self {
        ApiError {
            error: ErrorKind::Io,
            message: message.to_string(),
            parse: None,
            violations: Vec::new(),
        }
    }

    pub fn bad_request(message: impl ToString) -> Self {
        ApiError {
            error: ErrorKind::Parse,
            message: message.to_string(),
            parse: None,
            violations: Vec::new(),
        }
    }

    pub fn http_status(&self) -> u16 {
        match self.error {
            ErrorKind::Parse | ErrorKind::Validation => 400,
            ErrorKind::Semantic => 422,
            ErrorKind::Io => 400,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.error {
            ErrorKind::Parse | ErrorKind::Validation => 2,
            ErrorKind::Semantic | ErrorKind::Io => 1,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl From<DslError> for ApiError {
    fn from(e: DslError) -> Self {
        match e {
            DslError::Parse(p) => ApiError {
                error: ErrorKind::Parse,
                message: p.to_string(),
                parse: Some(p),
                violations: Vec::new(),
            },
            DslError::Invalid(r) => ApiError {
                error: ErrorKind::Validation,
                message: "invalid graph".to_string(),
                parse: None,
                violations: r.violations,
            },
        }
    }
}

impl From<AnalyzeError> for ApiError {
    fn from(e: AnalyzeError) -> Self {
        match e {
            AnalyzeError::Invalid(r) => DslError::Invalid(r).into(),
            other => ApiError::semantic(other),
        }
    }
}

macro_rules! semantic_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                ApiError::semantic(e)
            }
        }
    )*};
}

semantic_from!(AdjustmentError, CompletionError, SwigError, SemError);

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response types serialize");
    s.push('\n');
    s
}

pub fn parse_graph(text: &str) -> Result<CausalGraph, ApiError> {
    Ok(dsl::parse(text)?)
}

pub fn run_analyze(req: &AnalyzeRequest) -> Result<Verdict, ApiError> {
    let g = parse_graph(&req.graph_text)?;
    let options = AnalyzeOptions {
        c1_conditioning: req.options.c1_conditioning,
        completion_cap: completion_cap(req.options.completion_cap),
    };
    Ok(analyze(&g, &options)?)
}

pub fn parse_outcome(g: &CausalGraph, outcome: &str) -> Result<Period, ApiError> {
    let named = |p: Period| g.outcome(p).is_some_and(|v| v.as_str() == outcome);
    match outcome {
        "Y0" | "0" => Ok(Period::Pre),
        "Y1" | "Y1^0" | "1" => Ok(Period::Post),
        _ if named(Period::Pre) => Ok(Period::Pre),
        _ if named(Period::Post) => Ok(Period::Post),
        _ => Err(ApiError::bad_request(format!(
            "outcome must be Y0 or Y1, got {outcome:?}"
        ))),
    }
}

pub fn run_minsets(req: &MinsetsRequest) -> Result<FamiliesByCompletion, ApiError> {
    let g = parse_graph(&req.graph_text)?;
    let period = parse_outcome(&g, &req.outcome)?;
    Ok(minimal_sets_by_completion(
        &g,
        period,
        completion_cap(req.completion_cap),
    )?)
}

/// Random models over seeds `0..n`. A partially directed graph draws seed
/// `s` on completion `s mod k`.
pub fn run_simulate(req: &SimulateRequest) -> Result<BatchReport, ApiError> {
    if req.seeds > MAX_SEEDS {
        return Err(ApiError::bad_request(format!(
            "at most {MAX_SEEDS} seeds per request"
        )));
    }
    let g = parse_graph(&req.graph_text)?.without_split();
    let directed = g.is_fully_directed();
    let worlds: Vec<CausalGraph> = enumerate_completions(&g, completion_cap(req.completion_cap))?
        .map(|c| c.graph)
        .collect();
    let mut records = Vec::with_capacity(req.seeds as usize);
    for seed in 0..req.seeds {
        let k = (seed % worlds.len() as u64) as usize;
        let mut r = simulate_seed(&worlds[k], seed, req.range)?;
        if !directed {
            r.completion = Some(k);
        }
        records.push(r);
    }
    Ok(BatchReport::new(req.range, records))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletionListing {
    pub index: usize,
    pub rank: usize,
    pub choices: Vec<String>,
    pub graph_text: String,
}

pub fn run_completions(text: &str, cap: Option<usize>) -> Result<Vec<CompletionListing>, ApiError> {
    let g = parse_graph(text)?.without_split();
    Ok(enumerate_completions(&g, completion_cap(cap))?
        .enumerate()
        .map(|(index, c)| CompletionListing {
            index,
            rank: c.rank,
            choices: c.label(),
            graph_text: dsl::serialize(&c.graph),
        })
        .collect())
}

/// The SWIG of a directed graph, serialized with its split node.
pub fn run_swig(text: &str) -> Result<String, ApiError> {
    let g = parse_graph(text)?.without_split();
    Ok(dsl::serialize(&build_swig(&g, 0)?.to_graph()))
}

pub fn run_fmt(text: &str) -> Result<String, ApiError> {
    Ok(dsl::serialize(&parse_graph(text)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Health {
    pub status: &'static str,
}

pub const HEALTH: Health = Health { status: "ok" };
