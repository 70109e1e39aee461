//! `cf-extremal`: command-line access to the extremal solvers, the group
//! reductions and the reproduction tables.
//!
//! Every command writes one JSON document (or CSV rows) to stdout. Exit codes:
//! 0 on success, 1 when an identity check fails beyond its tolerance, 2 on
//! usage or input errors, which come with a `{"error": …}` document.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cf_extremal::Error;

#[derive(Debug, Parser)]
#[command(name = "cf-extremal", version, about = "Carathéodory–Fejér type extremal problems for positive definite functions")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Solver tolerance, in (0, 1e-2].
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for randomized suites.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SequenceInput {
    /// Sequence JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sequence JSON given inline.
    #[arg(long)]
    pub json: Option<String>,
    /// Entries on ℤ, e.g. "-1=0.5,0=1,1=0.5".
    #[arg(long, allow_hyphen_values = true)]
    pub z_entries: Option<String>,
    /// Values ψ(0), …, ψ(m−1) on ℤ_m, e.g. "1,0.5,0,0.5".
    #[arg(long, allow_hyphen_values = true)]
    pub zm_values: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SupportInput {
    /// Work on ℤ_m.
    #[arg(long, conflicts_with = "z")]
    pub zm: bool,
    /// Work on ℤ.
    #[arg(long)]
    pub z: bool,
    #[arg(short = 'm', long)]
    pub modulus: Option<u64>,
    /// Symmetric support, e.g. "0,1,-1,5,-5".
    #[arg(short = 'H', long = "support", allow_hyphen_values = true)]
    pub support: Option<String>,
    /// Support JSON file.
    #[arg(long)]
    pub support_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GroupInput {
    /// "Z4xZ2", "TxZ", or descriptor JSON.
    #[arg(long)]
    pub group: String,
    /// Comma separated coordinates of z, rationals as "p/q".
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// Ω as inline JSON.
    #[arg(long)]
    pub omega: Option<String>,
    /// Ω JSON file.
    #[arg(long)]
    pub omega_file: Option<PathBuf>,
    /// Largest multiple of z examined when Ω does not bound them.
    #[arg(long)]
    pub bound: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Positive-definiteness certificate of a sequence.
    CheckPd(SequenceInput),
    /// Factor ψ = θ⋆θ̃.
    Factor {
        #[command(flatten)]
        seq: SequenceInput,
        /// Phases of the spectral square root on ℤ_m; random under --seed.
        #[arg(long, allow_hyphen_values = true)]
        phases: Option<String>,
    },
    /// Extremal value on ℤ_m or ℤ.
    Solve {
        #[command(flatten)]
        support: SupportInput,
        /// Complex-valued problem on ℤ_m.
        #[arg(long)]
        complex: bool,
        /// Skip the discretized cross-check on ℤ.
        #[arg(long)]
        no_check: bool,
        /// Largest grid in the cross-check on ℤ.
        #[arg(long, default_value_t = 1 << 14)]
        max_m: u64,
    },
    /// Trace set {k : kz ∈ Ω}.
    Reduce(GroupInput),
    /// Reduce and solve a problem on a group.
    SolveGroup {
        #[command(flatten)]
        problem: GroupInput,
        #[arg(long)]
        complex: bool,
    },
    /// Duality identity for H and H*.
    Duality {
        #[command(flatten)]
        support: SupportInput,
        /// Truncation bounds on ℤ.
        #[arg(long, default_value = "20,40,60")]
        universes: String,
    },
    /// M([0,n]) by exchange and on a fine grid.
    ClassicTable {
        #[arg(short = 'n', long, default_value = "1..6")]
        n: String,
        #[arg(long, default_value_t = 1 << 14)]
        grid_m: u64,
    },
    /// CF of {0,±1} ∪ {±N, …, ±M}.
    SparseFamily {
        #[arg(short = 'N', long = "n")]
        n: u64,
        /// Truncation M; defaults to 10N.
        #[arg(short = 'M', long = "truncation")]
        truncation: Option<u64>,
    },
    /// Exhaustive lower bound for Λ(n).
    Lambda {
        #[arg(short = 'n', long)]
        n: u64,
        #[arg(short = 'U', long, default_value_t = 12)]
        universe: u64,
    },
    /// Doubling grid sequence against the exchange value on ℤ.
    Convergence {
        /// Symmetric support; repeat for several.
        #[arg(short = 'H', long = "support", allow_hyphen_values = true, required = true)]
        supports: Vec<String>,
        #[arg(long, default_value_t = 1 << 14)]
        max_m: u64,
    },
    /// Reduced solve against the direct solve on a finite group.
    OracleCompare {
        #[command(flatten)]
        problem: OracleInput,
        #[arg(long)]
        complex: bool,
        /// Run this many random instances instead (seed from --seed).
        #[arg(long, conflicts_with_all = ["group", "z", "omega", "omega_file"])]
        random: Option<usize>,
        /// Largest group order in the random suite.
        #[arg(long, default_value_t = 1024)]
        max_order: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct OracleInput {
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub omega_file: Option<PathBuf>,
}

/// A command's result: the report and whether an identity check failed.
pub struct Outcome {
    pub json: serde_json::Value,
    pub table: Option<output::Table>,
    pub failed: bool,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Inadmissible(_) => "inadmissible",
        Error::NotSelfConverse(_) => "not_self_converse",
        Error::NotPositiveDefinite(_) => "not_positive_definite",
        Error::RootsDidNotConverge { .. } => "roots_did_not_converge",
        Error::RootPairing(_) => "root_pairing",
        Error::FactorResidual { .. } => "factor_residual",
        Error::LpStatus(_) => "lp_status",
        Error::LpIterationLimit(_) => "lp_iteration_limit",
        Error::ExchangeDidNotConverge { .. } => "exchange_did_not_converge",
        Error::SolverDisagreement { .. } => "solver_disagreement",
        Error::BudgetExceeded { .. } => "budget_exceeded",
        Error::SizeCap(_) => "size_cap",
        Error::Unbounded(_) => "unbounded",
        Error::TheoremViolation(_) => "theorem_violation",
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TheoremViolation(_) | Error::SolverDisagreement { .. } => 1,
        _ => 2,
    }
}

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    eprintln!("cf-extremal: {message}");
    println!("{}", output::to_json(&json!({ "error": message, "kind": kind })));
    ExitCode::from(code)
}

pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{}", e.render());
            let message = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&message).trim_start_matches("error: ").to_string();
            println!("{}", output::to_json(&json!({ "error": first, "kind": "usage" })));
            return ExitCode::from(2);
        }
    };
    if !(cli.run.tol > 0.0 && cli.run.tol <= 1e-2) {
        return fail(2, "usage", format!("--tol must lie in (0, 1e-2], got {}", cli.run.tol));
    }
    let pool = match commands::thread_pool() {
        Ok(p) => p,
        Err(e) => return fail(2, "usage", e),
    };
    match pool.install(|| commands::execute(&cli)) {
        Ok(outcome) => {
            match (cli.run.format, outcome.table) {
                (Format::Csv, Some(table)) => print!("{}", table.render()),
                (Format::Csv, None) => {
                    return fail(2, "usage", "this command has no CSV form; use --format json".into());
                }
                (Format::Json, _) => println!("{}", output::to_json(&outcome.json)),
            }
            if outcome.failed {
                eprintln!("cf-extremal: identity check failed beyond tolerance");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(exit_code(&e), error_kind(&e), e.to_string()),
    }
}

fn main() -> ExitCode {
    run(std::env::args_os())
}
