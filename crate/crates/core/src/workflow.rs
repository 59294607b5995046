//! The commands behind the `heatvoid` binary. Each reads a [`RunConfig`],
//! writes its files into an output directory, and returns a summary the
//! caller turns into an exit status.
//!
//! Data directory written by [`cmd_synth`] and read by [`cmd_invert`]:
//! `dirichlet.csv`, `neumann.csv`, `metadata.toml`, `truth.toml`.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_mesh, ShapeCoefficients};
use crate::inverse::{run_inversion, InversionOutcome, StopReason};
use crate::io::{
    read_boundary_csv, read_coefficients, write_boundary_csv, write_coefficients, write_history, write_tube,
    DataMetadata,
};
use crate::resample::resample_rows;
use crate::solver::{add_noise_rows, synth_forward};
use crate::validation::{fd_gradient_check, random_directions, run_validation, FdRow, GradientCase, ValidationReport};

pub const DIRICHLET_FILE: &str = "dirichlet.csv";
pub const NEUMANN_FILE: &str = "neumann.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const TRUTH_FILE: &str = "truth.toml";
pub const HISTORY_FILE: &str = "history.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.toml";
pub const CONVENTIONS_FILE: &str = "conventions.toml";
pub const REPORT_FILE: &str = "validation_report.md";
pub const GRADCHECK_FILE: &str = "gradcheck.csv";

/// `f(t, ·) = t` on an `(N_t + 1) × N_x` grid.
pub fn linear_ramp(horizon: f64, n_time: usize, n_space: usize) -> Vec<Vec<f64>> {
    (0..=n_time)
        .map(|n| vec![horizon * (n as f64 / n_time as f64); n_space])
        .collect()
}

fn load_truth(cfg: &RunConfig, path: &Path) -> Result<ShapeCoefficients> {
    let truth = read_coefficients(path)?;
    if (truth.horizon() - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::Config(format!(
            "truth horizon {} differs from configured horizon {}",
            truth.horizon(),
            cfg.horizon
        )));
    }
    Ok(truth)
}

#[derive(Clone, Debug)]
pub struct SynthSummary {
    pub metadata: DataMetadata,
    pub truth: ShapeCoefficients,
    /// Noisy exterior flux on the inversion grid.
    pub neumann: Vec<Vec<f64>>,
}

/// Synthesize exterior flux data for a known void with the single-layer
/// representation on the synthesis grid, transfer it to the inversion grid,
/// and add noise.
pub fn cmd_synth(cfg: &RunConfig, out: &Path, truth: Option<&Path>) -> Result<SynthSummary> {
    cfg.validate()?;
    let (truth_shape, source) = match truth {
        Some(p) => (load_truth(cfg, p)?, p.display().to_string()),
        None => match cfg.truth_radius {
            Some(r) => (cfg.default_truth()?, format!("circle of radius {r}")),
            None => (cfg.default_truth()?, "built-in moving void".to_string()),
        },
    };
    let (st, sx) = cfg.synth_grid();
    let mesh = build_mesh(&truth_shape, cfg.exterior_radius, st, sx)?;
    build_mesh(&truth_shape, cfg.exterior_radius, cfg.n_time, cfg.n_space)?;
    let flux = synth_forward(&mesh, &linear_ramp(cfg.horizon, st, sx), &cfg.conventions()?)?;
    let clean = resample_rows(&flux, cfg.horizon, cfg.n_time, cfg.n_space)?;
    let neumann = add_noise_rows(&clean, cfg.noise_level, cfg.seed)?;

    let metadata = DataMetadata {
        horizon: cfg.horizon,
        exterior_radius: cfg.exterior_radius,
        n_time: cfg.n_time,
        n_space: cfg.n_space,
        synth_n_time: st,
        synth_n_space: sx,
        seed: cfg.seed,
        noise_level: cfg.noise_level,
        truth: source,
    };
    std::fs::create_dir_all(out)?;
    write_boundary_csv(&out.join(NEUMANN_FILE), &neumann, cfg.horizon)?;
    write_boundary_csv(
        &out.join(DIRICHLET_FILE),
        &linear_ramp(cfg.horizon, cfg.n_time, cfg.n_space),
        cfg.horizon,
    )?;
    metadata.write(&out.join(METADATA_FILE))?;
    write_coefficients(&out.join(TRUTH_FILE), &truth_shape)?;
    Ok(SynthSummary {
        metadata,
        truth: truth_shape,
        neumann,
    })
}

fn load_rows(cfg: &RunConfig, path: &Path) -> Result<Vec<Vec<f64>>> {
    let table = read_boundary_csv(path)?;
    if (table.horizon - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(Error::Config(format!(
            "{} covers [0, {}] but the configured horizon is {}",
            path.display(),
            table.horizon,
            cfg.horizon
        )));
    }
    resample_rows(&table.rows, cfg.horizon, cfg.n_time, cfg.n_space)
}

#[derive(Clone, Debug)]
pub struct InvertSummary {
    pub outcome: InversionOutcome,
    /// Truth in its own layout, when known.
    pub truth: Option<ShapeCoefficients>,
    pub files: Vec<PathBuf>,
}

impl InvertSummary {
    pub fn line_search_failed(&self) -> bool {
        self.outcome.stop == StopReason::LineSearchFailure
    }
}

/// Reconstruct the void from a data directory. The truth, from `truth` or
/// the data directory's `truth.toml`, only feeds the `l2_err` column and the
/// truth tube; it is compared in the inversion layout.
///
/// Outputs are written even when the line search fails.
pub fn cmd_invert(cfg: &RunConfig, data: &Path, out: &Path, truth: Option<&Path>) -> Result<InvertSummary> {
    cfg.validate()?;
    if !data.is_dir() {
        return Err(Error::MissingData(data.to_path_buf()));
    }
    let meta_path = data.join(METADATA_FILE);
    if meta_path.exists() {
        let meta = DataMetadata::read(&meta_path)?;
        if (meta.exterior_radius - cfg.exterior_radius).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "data were generated with exterior radius {}, configured {}",
                meta.exterior_radius, cfg.exterior_radius
            )));
        }
    }
    let f = load_rows(cfg, &data.join(DIRICHLET_FILE))?;
    let g = load_rows(cfg, &data.join(NEUMANN_FILE))?;

    let truth = match truth {
        Some(p) => Some(load_truth(cfg, p)?),
        None if data.join(TRUTH_FILE).exists() => Some(load_truth(cfg, &data.join(TRUTH_FILE))?),
        None => None,
    };
    let truth_in_layout = truth
        .as_ref()
        .map(|t| t.resized(cfg.n_legendre, cfg.n_fourier))
        .transpose()?;

    let settings = cfg.inversion_settings()?;
    let outcome = run_inversion(&settings, &cfg.initial_shape()?, &f, &g, truth_in_layout.as_ref())?;

    std::fs::create_dir_all(out)?;
    let mut files = vec![out.join(HISTORY_FILE), out.join(COEFFICIENTS_FILE)];
    write_history(&files[0], &outcome.history)?;
    write_coefficients(&files[1], &outcome.coefficients)?;
    write_tube(out, "reconstruction", &outcome.coefficients, cfg.n_time, cfg.n_space)?;
    files.extend([out.join("reconstruction.csv"), out.join("reconstruction.vtk")]);
    if let Some(t) = &truth {
        write_tube(out, "truth", t, cfg.n_time, cfg.n_space)?;
        files.extend([out.join("truth.csv"), out.join("truth.vtk")]);
    }
    Ok(InvertSummary { outcome, truth, files })
}

/// Run the validation suite; writes the determined conventions and the report.
pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<ValidationReport> {
    let report = run_validation(&cfg.validation_settings())?;
    std::fs::create_dir_all(out)?;
    report.determined.write(&out.join(CONVENTIONS_FILE))?;
    std::fs::write(out.join(REPORT_FILE), &report.text)?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct GradcheckSummary {
    pub rows: Vec<FdRow>,
    /// Worst relative error at each step size, in configured order.
    pub worst: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Adjoint gradient against central differences on the `gradient_grid` case,
/// judged at the middle step size.
pub fn cmd_gradcheck(cfg: &RunConfig, out: &Path) -> Result<GradcheckSummary> {
    if cfg.fd_epsilons.is_empty() || cfg.fd_directions == 0 {
        return Err(Error::Config(
            "gradcheck needs at least one direction and one step size".into(),
        ));
    }
    let [nt, nx, nk, nl] = cfg.gradient_grid;
    let case = GradientCase::new(nt, nx, nk, nl, false, &cfg.conventions()?)?;
    let dirs = random_directions(cfg.fd_directions, case.coefficients.len(), cfg.fd_seed);
    let rows = fd_gradient_check(&case, &dirs, &cfg.fd_epsilons)?;
    let worst: Vec<(f64, f64)> = cfg
        .fd_epsilons
        .iter()
        .map(|&e| {
            let w = rows
                .iter()
                .filter(|r| r.epsilon == e)
                .map(|r| r.relative_error)
                .fold(0.0f64, f64::max);
            (e, w)
        })
        .collect();
    let passed = worst[cfg.fd_epsilons.len() / 2].1 < cfg.fd_tolerance;

    let mut text = String::from("direction,epsilon,adjoint,fd,rel_err\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.direction, r.epsilon, r.analytic, r.finite_difference, r.relative_error
        ));
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(GRADCHECK_FILE), text)?;
    Ok(GradcheckSummary { rows, worst, passed })
}
