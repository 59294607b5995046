//! Run configuration: a flat TOML file whose keys are the fields of
//! [`RunConfig`]. Missing keys take the defaults of the reference experiment;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conventions::Conventions;
use crate::error::{Error, Result};
use crate::geometry::ShapeCoefficients;
use crate::inverse::{InversionSettings, LineSearchSettings};
use crate::validation::{ConventionOverrides, ValidationSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Time horizon `T`.
    pub horizon: f64,
    pub exterior_radius: f64,
    pub n_time: usize,
    pub n_space: usize,
    pub n_fourier: usize,
    pub n_legendre: usize,
    pub max_iterations: usize,
    pub lbfgs_memory: usize,
    /// Dense inverse-BFGS update instead of the limited-memory one.
    pub full_memory: bool,
    pub noise_level: f64,
    pub seed: u64,
    pub initial_radius: f64,
    /// Static circular truth for `synth`; the built-in moving shape when absent.
    pub truth_radius: Option<f64>,
    /// Synthesis grid; defaults to `(n_time + 7, n_space + 16)`.
    pub synth_n_time: Option<usize>,
    pub synth_n_space: Option<usize>,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
    pub armijo: f64,
    pub max_line_search_trials: usize,
    pub initial_step: f64,
    pub max_first_change: f64,
    pub output_dir: PathBuf,
    /// Conventions file produced by `validate`; built-in values when absent.
    pub conventions_file: Option<PathBuf>,

    pub validation_levels: Vec<[usize; 2]>,
    pub order_threshold: f64,
    /// `[N_t, N_x, N_K, N_L]` of the gradient checks.
    pub gradient_grid: [usize; 4],
    pub fd_directions: usize,
    pub fd_seed: u64,
    pub fd_epsilons: Vec<f64>,
    pub fd_tolerance: f64,
    pub local_grids: Vec<[usize; 2]>,
    pub local_tolerance: f64,
    pub override_curvature_factor: Option<f64>,
    pub override_adjoint_jump_sign: Option<f64>,
    pub override_gradient_sign: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let v = ValidationSettings::default();
        Self {
            horizon: 1.0,
            exterior_radius: 1.0,
            n_time: 90,
            n_space: 80,
            n_fourier: 8,
            n_legendre: 9,
            max_iterations: 100,
            lbfgs_memory: 10,
            full_memory: false,
            noise_level: 0.01,
            seed: 1,
            initial_radius: 0.3,
            truth_radius: None,
            synth_n_time: None,
            synth_n_space: None,
            gradient_tolerance: 1e-8,
            objective_tolerance: 0.0,
            armijo: 1e-4,
            max_line_search_trials: 20,
            initial_step: 1.0,
            max_first_change: 0.05,
            output_dir: PathBuf::from("out"),
            conventions_file: None,
            validation_levels: v.levels.iter().map(|&(a, b)| [a, b]).collect(),
            order_threshold: v.order_threshold,
            gradient_grid: [
                v.gradient_grid.0,
                v.gradient_grid.1,
                v.gradient_grid.2,
                v.gradient_grid.3,
            ],
            fd_directions: v.fd_directions,
            fd_seed: v.fd_seed,
            fd_epsilons: v.fd_epsilons,
            fd_tolerance: v.fd_tolerance,
            local_grids: v.local_grids.iter().map(|&(a, b)| [a, b]).collect(),
            local_tolerance: v.local_tolerance,
            override_curvature_factor: None,
            override_adjoint_jump_sign: None,
            override_gradient_sign: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_time", self.n_time),
            ("n_space", self.n_space),
            ("n_fourier", self.n_fourier),
            ("max_line_search_trials", self.max_line_search_trials),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.synth_n_time == Some(0) || self.synth_n_space == Some(0) {
            return Err(Error::Config("synthesis grid sizes must be positive".into()));
        }
        if !(self.horizon > 0.0) || !(self.exterior_radius > 0.0) {
            return Err(Error::Config("horizon and exterior_radius must be positive".into()));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Config(format!(
                "noise_level must be non-negative, got {}",
                self.noise_level
            )));
        }
        if !(self.initial_radius > 0.0 && self.initial_radius < self.exterior_radius) {
            return Err(Error::Config(format!(
                "initial_radius must lie in (0, {}), got {}",
                self.exterior_radius, self.initial_radius
            )));
        }
        if let Some(r) = self.truth_radius {
            if !(r > 0.0 && r < self.exterior_radius) {
                return Err(Error::Config(format!(
                    "truth_radius must lie in (0, {}), got {r}",
                    self.exterior_radius
                )));
            }
        }
        Ok(())
    }

    pub fn synth_grid(&self) -> (usize, usize) {
        (
            self.synth_n_time.unwrap_or(self.n_time + 7),
            self.synth_n_space.unwrap_or(self.n_space + 16),
        )
    }

    /// Conventions from `conventions_file`, or the built-in validated values.
    pub fn conventions(&self) -> Result<Conventions> {
        match &self.conventions_file {
            Some(p) => Conventions::read(p),
            None => Ok(Conventions::default()),
        }
    }

    pub fn inversion_settings(&self) -> Result<InversionSettings> {
        Ok(InversionSettings {
            exterior_radius: self.exterior_radius,
            n_time: self.n_time,
            n_space: self.n_space,
            max_iterations: self.max_iterations,
            memory: self.lbfgs_memory,
            full_memory: self.full_memory,
            gradient_tolerance: self.gradient_tolerance,
            objective_tolerance: self.objective_tolerance,
            line_search: LineSearchSettings {
                armijo: self.armijo,
                max_trials: self.max_line_search_trials,
                initial_step: self.initial_step,
                max_first_change: self.max_first_change,
            },
            conventions: self.conventions()?,
        })
    }

    pub fn validation_settings(&self) -> ValidationSettings {
        let [nt, nx, nk, nl] = self.gradient_grid;
        ValidationSettings {
            levels: self.validation_levels.iter().map(|&[a, b]| (a, b)).collect(),
            order_threshold: self.order_threshold,
            gradient_grid: (nt, nx, nk, nl),
            fd_directions: self.fd_directions,
            fd_seed: self.fd_seed,
            fd_epsilons: self.fd_epsilons.clone(),
            fd_tolerance: self.fd_tolerance,
            local_grids: self.local_grids.iter().map(|&[a, b]| (a, b)).collect(),
            local_tolerance: self.local_tolerance,
            overrides: ConventionOverrides {
                curvature_factor: self.override_curvature_factor,
                adjoint_jump_sign: self.override_adjoint_jump_sign,
                gradient_sign: self.override_gradient_sign,
            },
        }
    }

    pub fn initial_shape(&self) -> Result<ShapeCoefficients> {
        ShapeCoefficients::circle(self.initial_radius, self.n_legendre, self.n_fourier, self.horizon)
    }

    /// Ground truth for synthesis when no coefficient file is given.
    pub fn default_truth(&self) -> Result<ShapeCoefficients> {
        match self.truth_radius {
            Some(r) => ShapeCoefficients::circle(r, self.n_legendre, self.n_fourier, self.horizon),
            None => moving_truth(self.n_legendre, self.n_fourier, self.horizon),
        }
    }
}

/// A drifting, growing, elliptic void: mean radius 0.45 growing by 0.1 over
/// the horizon, a cos 2φ elongation, and a sideways drift.
pub fn moving_truth(n_legendre: usize, n_fourier: usize, horizon: f64) -> Result<ShapeCoefficients> {
    let mut c = ShapeCoefficients::circle(0.45, n_legendre, n_fourier, horizon)?;
    // L_1 = √(3/T)·(2t/T - 1), so a·L_1 changes by 2a√(3/T) over [0, T].
    let per_unit = 1.0 / (2.0 * (3.0 / horizon).sqrt());
    if n_legendre >= 1 {
        c.set_alpha(0, 1, 0.1 * per_unit);
        if n_fourier >= 1 {
            c.set_beta(1, 1, 0.08 * per_unit);
        }
    }
    if n_fourier >= 2 {
        c.set_alpha(2, 0, 0.06 * horizon.sqrt());
    }
    Ok(c)
}
