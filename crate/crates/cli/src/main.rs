//! Batch experiment driver.
//!
//! `linkflow run <config.toml>` executes one experiment and writes its
//! artifacts (per-sample CSV, summary JSON, optional running-average plot)
//! into the configured output directory; the exit status is 0 exactly when
//! every acceptance comparison passed. `linkflow selftest` runs a quick
//! built-in verification; `linkflow list-experiments` names the experiments.
//!
//! Set LINKFLOW_WORKERS to override the worker-pool size.

mod config;
mod experiments;
mod plot;

use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig};

// Exit codes: 0 pass; 1 failed comparison or runtime error; 2 bad config;
// 3 degenerate-sample overflow; 4 quadrature non-convergence.
const EXIT_FAIL: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_DEGENERATE: i32 = 3;
const EXIT_QUADRATURE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "linkflow",
    about = "Average asymptotic linking numbers of divergence-free flows: ergodic estimators vs Hopf-type integrals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Path to the experiment config (see `list-experiments` and the
        /// README for the schema).
        config: std::path::PathBuf,
    },
    /// Quick built-in verification (seconds).
    Selftest,
    /// List the available experiments.
    ListExperiments,
}

fn main() {
    if let Ok(v) = std::env::var("LINKFLOW_WORKERS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring invalid LINKFLOW_WORKERS={v:?}"),
        }
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => run_command(&config),
        Command::Selftest => match experiments::selftest() {
            Ok(true) => 0,
            Ok(false) => EXIT_FAIL,
            Err(e) => {
                eprintln!("selftest error: {e:#}");
                EXIT_FAIL
            }
        },
        Command::ListExperiments => {
            for (exp, blurb) in Experiment::all() {
                println!("{:<16} {}", exp.name(), blurb);
            }
            0
        }
    };
    std::process::exit(code);
}

fn run_command(path: &std::path::Path) -> i32 {
    let cfg = match ExperimentConfig::load(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    match experiments::run(&cfg) {
        Ok(summary) => {
            match (summary.target, summary.tolerance) {
                (Some(t), Some(tol)) => println!(
                    "{}: estimate {:.6} ± {:.2e}, target {:.6}, tolerance {:.1e} → {}",
                    summary.experiment,
                    summary.estimate,
                    summary.stderr,
                    t,
                    tol,
                    if summary.pass { "pass" } else { "FAIL" }
                ),
                _ => println!(
                    "{}: estimate {:.6} → {}",
                    summary.experiment,
                    summary.estimate,
                    if summary.pass { "pass" } else { "FAIL" }
                ),
            }
            println!("artifacts in {}", cfg.out_dir.display());
            if summary.pass {
                0
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("run error: {e:#}");
            match e.downcast_ref::<linkflow_core::Error>() {
                Some(linkflow_core::Error::DegenerateSampleOverflow { .. }) => EXIT_DEGENERATE,
                Some(linkflow_core::Error::QuadratureNonConvergence { .. }) => EXIT_QUADRATURE,
                Some(linkflow_core::Error::Config(_)) | Some(linkflow_core::Error::ExprParse(_)) => {
                    EXIT_CONFIG
                }
                _ => EXIT_FAIL,
            }
        }
    }
}
