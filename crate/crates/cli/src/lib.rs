//! Command-line front end: reads network and observation JSON files, runs the
//! library operation and writes a JSON report to standard output.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0  | success |
//! | 1  | `validate`: network invalid; `check`: state not physically correct |
//! | 2  | observations inconsistent |
//! | 3  | solver did not converge |
//! | 4  | observations do not fit a completion result |
//! | 64 | usage error |
//! | 65 | unreadable or malformed input |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use hydrostate::hydraulics::SOLVER_TOLERANCE;
use hydrostate::network::NetworkFileError;
use hydrostate::observability::classify_observation_pattern;
use hydrostate::testkit::{random_connected_wds, GeneratorConfig};
use hydrostate::{
    complete, cycle_space_basis, residuals, CompletionError, CompletionOptions, Network, NetworkSpec,
    ObservationSet, Theorem,
};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_NOT_COVERED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "hydrostate", version, about = "Steady-state completion for water distribution networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a network file describes a valid network.
    Validate { network: PathBuf },
    /// Classify an observation pattern; only its keys are used.
    Analyze {
        network: PathBuf,
        #[arg(long)]
        pattern: PathBuf,
    },
    /// Complete the hydraulic state from observations.
    Solve {
        network: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum, default_value_t = TheoremArg::Auto)]
        theorem: TheoremArg,
        /// Newton acceptance threshold for demand-driven solves; relative
        /// image tolerance for heads-flows solves.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Report residuals of a complete state.
    Check {
        network: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = SOLVER_TOLERANCE)]
        tol: f64,
    },
    /// Write a random connected network.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        reservoirs: usize,
        #[arg(long)]
        consumers: usize,
        #[arg(long, default_value_t = 0)]
        extra_edges: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TheoremArg {
    Auto,
    AllHeads,
    HeadsFlows,
    ForestFlows,
    DemandDriven,
}

impl TheoremArg {
    fn theorem(self) -> Option<Theorem> {
        match self {
            TheoremArg::Auto => None,
            TheoremArg::AllHeads => Some(Theorem::AllHeads),
            TheoremArg::HeadsFlows => Some(Theorem::HeadsAndFlows),
            TheoremArg::ForestFlows => Some(Theorem::ForestFlows),
            TheoremArg::DemandDriven => Some(Theorem::DemandDriven),
        }
    }
}

/// Output of `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub summary: Option<NetworkSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<ValidationError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub pipes: usize,
    pub reservoirs: usize,
    pub consumers: usize,
    pub cycle_space_dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationError {
    pub kind: String,
    pub message: String,
}

/// A failed command: exit code plus a one-line diagnostic.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(EXIT_DATA, format!("cannot read {}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    Network::from_json(&read(path)?).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn load_observations(path: &Path) -> Result<ObservationSet, Failure> {
    ObservationSet::from_json(&read(path)?)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: malformed observation JSON: {e}", path.display())))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| Failure::new(EXIT_DATA, format!("cannot write output: {e}")))
}

fn summarize(net: &Network) -> NetworkSummary {
    NetworkSummary {
        nodes: net.node_count(),
        pipes: net.pipe_count(),
        reservoirs: net.reservoir_count(),
        consumers: net.consumer_count(),
        cycle_space_dimension: cycle_space_basis(net).dimension(),
    }
}

fn validate(path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let report = match Network::from_json(&read(path)?) {
        Ok(net) => ValidationReport { valid: true, summary: Some(summarize(&net)), error: None },
        Err(NetworkFileError::Invalid(e)) => ValidationReport {
            valid: false,
            summary: None,
            error: Some(ValidationError { kind: e.kind().into(), message: e.to_string() }),
        },
        Err(e @ NetworkFileError::Parse(_)) => return Err(Failure::new(EXIT_DATA, format!("{}: {e}", path.display()))),
    };
    emit(out, &report)?;
    Ok(if report.valid { EXIT_OK } else { EXIT_REJECTED })
}

fn analyze(network: &Path, pattern: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let net = load_network(network)?;
    let obs = load_observations(pattern)?;
    let verdict = classify_observation_pattern(&net, &obs)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", pattern.display())))?;
    emit(out, &verdict)?;
    Ok(EXIT_OK)
}

fn solve(
    network: &Path,
    obs_path: &Path,
    theorem: TheoremArg,
    tol: Option<f64>,
    max_iter: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let net = load_network(network)?;
    let obs = load_observations(obs_path)?;
    let data_error = |e: &dyn std::fmt::Display| Failure::new(EXIT_DATA, format!("{}: {e}", obs_path.display()));

    let theorem = match theorem.theorem() {
        Some(t) => t,
        None => {
            let verdict = classify_observation_pattern(&net, &obs).map_err(|e| data_error(&e))?;
            verdict.verdict.theorem().ok_or_else(|| {
                Failure::new(EXIT_NOT_COVERED, format!("{:?}: {}", verdict.verdict, verdict.detail))
            })?
        }
    };

    let mut opts = CompletionOptions::default();
    if let Some(tol) = tol {
        opts.solver.tolerance = tol;
        opts.image_tolerance = tol;
    }
    if let Some(n) = max_iter {
        opts.solver.max_iterations = n;
    }
    let report = complete(&net, &obs, theorem, &opts).map_err(|e| {
        let code = match e {
            CompletionError::InconsistentObservations { .. } => EXIT_INCONSISTENT,
            CompletionError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            CompletionError::MissingObservation(_) | CompletionError::DecompositionMismatch(_) => EXIT_NOT_COVERED,
            CompletionError::Observation(_) | CompletionError::Dimension(_) | CompletionError::WrongLength { .. } => {
                EXIT_DATA
            }
        };
        Failure::new(code, e.to_string())
    })?;
    emit(out, &report.to_record(&net))?;
    Ok(EXIT_OK)
}

fn check(network: &Path, state_path: &Path, tol: f64, out: &mut dyn Write) -> Result<i32, Failure> {
    let net = load_network(network)?;
    let state = load_observations(state_path)?
        .to_state(&net)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", state_path.display())))?;
    let report = residuals(&net, &state).expect("state built for this network");
    emit(out, &report)?;
    Ok(if report.is_physically_correct(tol) { EXIT_OK } else { EXIT_REJECTED })
}

fn generate(cfg: GeneratorConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let net = random_connected_wds(&cfg).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let spec: NetworkSpec = net.to_spec();
    emit(out, &spec)?;
    Ok(EXIT_OK)
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            let _ = writeln!(err, "{first}");
            return EXIT_USAGE;
        }
    };

    let result = match cli.command {
        Command::Validate { network } => validate(&network, out),
        Command::Analyze { network, pattern } => analyze(&network, &pattern, out),
        Command::Solve { network, obs, theorem, tol, max_iter } => solve(&network, &obs, theorem, tol, max_iter, out),
        Command::Check { network, state, tol } => check(&network, &state, tol, out),
        Command::Generate { seed, reservoirs, consumers, extra_edges } => {
            generate(GeneratorConfig::new(seed, reservoirs, consumers, extra_edges), out)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
