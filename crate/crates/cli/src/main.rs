//! `heatvoid`: synthesize boundary data, reconstruct a moving void, and run
//! the validation suite.
//!
//! Exit status: 0 on success, 2 for usage, configuration, or missing-data
//! errors, 3 when the line search fails during `invert` (partial outputs are
//! still written), 4 when a validation or gradient-check threshold fails,
//! 1 for anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatvoid::config::RunConfig;
use heatvoid::workflow::{cmd_gradcheck, cmd_invert, cmd_synth, cmd_validate};
use heatvoid::Error;

#[derive(Parser)]
#[command(
    name = "heatvoid",
    version,
    about = "Detect a moving void from thermal boundary data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Noise seed; overrides `seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate noisy exterior flux data for a known void.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Coefficient file of the void; `truth_radius` or the built-in moving void otherwise.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
    /// Reconstruct the void from a data directory.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Directory written by `synth`.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Coefficient file of the true void, for error reporting.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
    /// Determine conventions and run the convergence and gradient checks.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the adjoint gradient with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::MissingData(_) | Error::Geometry { .. } => 2,
        _ => 1,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Synth { common, truth } => {
            let (cfg, out) = load(&common)?;
            let s = cmd_synth(&cfg, &out, truth.as_deref())?;
            println!(
                "wrote {}×{} exterior data to {} (synthesis grid {}×{}, noise {}, seed {})",
                s.metadata.n_time + 1,
                s.metadata.n_space,
                out.display(),
                s.metadata.synth_n_time + 1,
                s.metadata.synth_n_space,
                s.metadata.noise_level,
                s.metadata.seed
            );
            Ok(0)
        }
        Command::Invert { common, data, truth } => {
            let (cfg, out) = load(&common)?;
            let s = cmd_invert(&cfg, &data, &out, truth.as_deref())?;
            let h = &s.outcome.history;
            if let (Some(first), Some(last)) = (h.records.first(), h.records.last()) {
                println!(
                    "{} iterations, J {:.6e} -> {:.6e}, stop: {:?}",
                    h.len(),
                    first.objective,
                    s.outcome.final_objective,
                    s.outcome.stop
                );
                if let Some(e) = last.coefficient_error {
                    println!("coefficient error at last recorded iterate: {e:.6e}");
                }
            }
            println!("results in {}", out.display());
            if s.line_search_failed() {
                eprintln!("line search failed; partial results written");
                return Ok(3);
            }
            Ok(0)
        }
        Command::Validate { common } => {
            let (cfg, out) = load(&common)?;
            let report = cmd_validate(&cfg, &out)?;
            print!("{}", report.summary());
            println!("conventions: {:?}", report.determined);
            Ok(if report.passed() { 0 } else { 4 })
        }
        Command::Gradcheck { common } => {
            let (cfg, out) = load(&common)?;
            let s = cmd_gradcheck(&cfg, &out)?;
            for (eps, worst) in &s.worst {
                println!("eps {eps:e}: worst relative error {worst:.3e}");
            }
            println!("{}", if s.passed { "PASS" } else { "FAIL" });
            Ok(if s.passed { 0 } else { 4 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
