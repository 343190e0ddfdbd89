//! `rayleigh`: reproducible experiments on strong Rayleigh measures.
//!
//! Exit codes: 0 pass, 1 usage, 2 validation failure, 3 inequality
//! violation, 4 internal numeric failure. Errors are printed to stderr as
//! JSON `{"error": kind, "message": text, "exit_code": code}`.

mod commands;
mod config;
mod suite;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayleigh_core::Error;
use serde_json::json;

use crate::config::{measure_flag, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rayleigh", version, about = "Matrix Poincaré and concentration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Measure: fixture name, family pattern or measure JSON file.
    #[arg(long, global = true)]
    measure: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load and validate a measure.
    ValidateMeasure,
    /// Brute-force stochastic covering property check.
    ScpCheck,
    /// Build the normalized flip-swap walk and its spectral gap.
    BuildWalk,
    /// Matrix Poincaré check with the scalar gap (or a given λ).
    PoincareCheck,
    /// Seeded trials of every trace and operator inequality.
    IneqSuite,
    /// Trace mgf against its bound on a θ grid (CSV).
    Mgf,
    /// Exact or empirical tails against the closed-form bounds (CSV).
    Tail,
    /// Crossover against the martingale bound (CSV).
    CompareKs,
    /// Exact draws as hex masks, one per line.
    Sample,
}

const USAGE: u8 = 1;
const VALIDATION: u8 = 2;
const VIOLATION: u8 = 3;
const NUMERIC: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Json(_) | Error::EmptyGrid => USAGE,
        Error::NonFinite | Error::Csv(_) | Error::Io(_) => NUMERIC,
        _ => VALIDATION,
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let body = json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn config(cli: &Cli) -> rayleigh_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p).map_err(|e| match e {
            Error::Io(io) => Error::InvalidArgument(format!("cannot read config {}: {io}", p.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &cli.measure {
        cfg.measure = Some(measure_flag(m));
    }
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.tol = cli.tol.or(cfg.tol);
    cfg.trials = cli.trials.or(cfg.trials);
    cfg.out = cli.out.clone().or(cfg.out);
    Ok(cfg)
}

fn run(cli: &Cli) -> rayleigh_core::Result<bool> {
    let cfg = config(cli)?;
    let report = match cli.command {
        Command::ValidateMeasure => commands::validate_measure(&cfg),
        Command::ScpCheck => commands::scp(&cfg),
        Command::BuildWalk => commands::build_walk(&cfg),
        Command::PoincareCheck => commands::poincare(&cfg),
        Command::IneqSuite => commands::ineq_suite(&cfg),
        Command::Mgf => commands::mgf(&cfg),
        Command::Tail => commands::tail(&cfg),
        Command::CompareKs => commands::compare_ks(&cfg),
        Command::Sample => commands::sample(&cfg),
    }?;
    match &cfg.out {
        Some(path) => fs::write(path, &report.body)?,
        None => std::io::stdout().write_all(&report.body)?,
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string(), USAGE),
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => fail("InequalityViolation", "an asserted inequality failed".into(), VIOLATION),
        Err(e) => fail(e.kind(), e.to_string(), exit_code(&e)),
    }
}
