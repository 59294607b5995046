//! Thermal layer potentials split into a Gaussian surface integral and a
//! weakly singular `1/√(t-τ)` time factor.
//!
//! For source level `τ < t` the surface integrals are evaluated with the
//! periodic trapezoidal rule on the mesh nodes. At `τ = t` they are replaced by
//! their coincidence limits: the identity for the single layer and a curvature
//! multiple of the density for the double layer.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::conventions::Conventions;
use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, Component, SpaceTimeMesh};

/// `√(4π)`, the prefactor split off the time integral of both layer operators.
pub const SQRT_4PI: f64 = 3.544_907_701_811_032;

/// Inner Gaussian kernel `(4π·dt)^{-(d-1)/2} exp(-r²/(4·dt))`.
///
/// Multiplied by the `1/√(4π·dt)` time factor this is the `d`-dimensional heat kernel.
pub fn heat_kernel(dim: usize, dt: f64, r2: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs dt > 0, got {dt}")));
    }
    if dim == 0 {
        return Err(Error::Domain("heat kernel needs dimension >= 1".into()));
    }
    let exponent = (dim as f64 - 1.0) / 2.0;
    Ok((4.0 * PI * dt).powf(-exponent) * (-r2 / (4.0 * dt)).exp())
}

#[inline(always)]
pub(crate) fn gaussian_2d(s: f64, r2: f64) -> f64 {
    (-r2 / (4.0 * s)).exp() / (4.0 * PI * s).sqrt()
}

/// Declared endpoint behaviour of a space-time field.
///
/// A singular field stores the cofactor `χ`, the field itself being
/// `χ(t)/√(t - t_0)` near the singular endpoint `t_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EndpointSingularity {
    #[default]
    Smooth,
    InverseSqrtAtStart,
    InverseSqrtAtEnd,
}

impl EndpointSingularity {
    pub fn exponent(self) -> f64 {
        match self {
            EndpointSingularity::Smooth => 0.0,
            _ => -0.5,
        }
    }
}

/// Scalar samples on the space-time node grid, indexed by `(level, node)` with
/// interior nodes first on each level.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    n_levels: usize,
    n_nodes: usize,
    values: Vec<f64>,
    singularity: EndpointSingularity,
}

impl BoundaryField {
    pub fn zeros(n_levels: usize, n_nodes: usize) -> Self {
        Self {
            n_levels,
            n_nodes,
            values: vec![0.0; n_levels * n_nodes],
            singularity: EndpointSingularity::Smooth,
        }
    }

    pub fn zeros_like(mesh: &SpaceTimeMesh) -> Self {
        Self::zeros(mesh.n_levels(), mesh.n_nodes())
    }

    /// Field that is `f(t_n, node)` on the exterior circle and zero on the void.
    pub fn from_exterior(mesh: &SpaceTimeMesh, exterior: &[Vec<f64>]) -> Result<Self> {
        if exterior.len() != mesh.n_levels() || exterior.iter().any(|r| r.len() != mesh.n_space()) {
            return Err(Error::Config(format!(
                "exterior data must be {}x{}",
                mesh.n_levels(),
                mesh.n_space()
            )));
        }
        let mut f = Self::zeros_like(mesh);
        let range = mesh.component_range(Component::Exterior);
        for (n, row) in exterior.iter().enumerate() {
            f.level_mut(n)[range.clone()].copy_from_slice(row);
        }
        Ok(f)
    }

    pub fn with_singularity(mut self, singularity: EndpointSingularity) -> Self {
        self.singularity = singularity;
        self
    }

    pub fn singularity(&self) -> EndpointSingularity {
        self.singularity
    }

    pub fn singularity_exponent(&self) -> f64 {
        self.singularity.exponent()
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn matches(&self, mesh: &SpaceTimeMesh) -> bool {
        self.n_levels == mesh.n_levels() && self.n_nodes == mesh.n_nodes()
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.n_nodes + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One boundary component of one level, assuming equal node counts per component.
    pub fn component(&self, n: usize, component: Component) -> &[f64] {
        let half = self.n_nodes / 2;
        let lvl = self.level(n);
        match component {
            Component::Interior => &lvl[..half],
            Component::Exterior => &lvl[half..],
        }
    }

    /// Exterior samples as one row per level.
    pub fn exterior_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_levels)
            .map(|n| self.component(n, Component::Exterior).to_vec())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gaussian surface integrals between two time levels of one mesh.
#[derive(Clone, Copy, Debug)]
pub struct LayerOperators<'a> {
    mesh: &'a SpaceTimeMesh,
    curvature_factor: f64,
    include_velocity: bool,
}

impl<'a> LayerOperators<'a> {
    pub fn new(mesh: &'a SpaceTimeMesh, conventions: &Conventions) -> Self {
        Self {
            mesh,
            curvature_factor: conventions.curvature_factor,
            include_velocity: true,
        }
    }

    /// Drop the normal-velocity terms from the double layers. Used to check that
    /// static meshes are unaffected by them.
    pub fn without_velocity(mut self) -> Self {
        self.include_velocity = false;
        self
    }

    pub fn mesh(&self) -> &'a SpaceTimeMesh {
        self.mesh
    }

    pub fn curvature_factor(&self) -> f64 {
        self.curvature_factor
    }

    pub fn includes_velocity(&self) -> bool {
        self.include_velocity
    }

    /// Coincidence value `H(x)` of the double layer at node `x`.
    #[inline]
    pub fn coincidence(&self, x: &BoundarySample) -> f64 {
        self.curvature_factor * x.curvature
    }

    fn check(&self, source: usize, target: usize, density: &[f64]) -> Result<()> {
        if source > target {
            return Err(Error::Ordering {
                source_level: source,
                target_level: target,
            });
        }
        if target >= self.mesh.n_levels() {
            return Err(Error::Config(format!("target level {target} beyond mesh")));
        }
        if density.len() != self.mesh.n_nodes() {
            return Err(Error::Config(format!(
                "density has {} entries, mesh level has {}",
                density.len(),
                self.mesh.n_nodes()
            )));
        }
        Ok(())
    }

    fn apply<F>(&self, source: usize, target: usize, density: &[f64], kernel: F) -> Vec<f64>
    where
        F: Fn(&BoundarySample, &BoundarySample, f64) -> f64,
    {
        let s = self.mesh.step() * (target - source) as f64;
        let src = &self.mesh.level(source).nodes;
        let dw = 2.0 * PI / self.mesh.n_space() as f64;
        self.mesh
            .level(target)
            .nodes
            .iter()
            .map(|x| {
                src.iter()
                    .zip(density)
                    .map(|(y, &phi)| kernel(x, y, s) * phi * y.arc_element * dw)
                    .sum()
            })
            .collect()
    }

    /// Single-layer surface integral `Vφ(t, τ, ·)` at the target level nodes.
    pub fn single(&self, source: usize, target: usize, density: &[f64]) -> Result<Vec<f64>> {
        self.check(source, target, density)?;
        if source == target {
            return Ok(density.to_vec());
        }
        Ok(self.apply(source, target, density, |x, y, s| {
            gaussian_2d(s, dist2(&x.point, &y.point))
        }))
    }

    /// Double-layer surface integral `Kφ(t, τ, ·)`: the source-side normal trace
    /// `γ⁺_{1,y}` applied to the Gaussian.
    pub fn double(&self, source: usize, target: usize, density: &[f64]) -> Result<Vec<f64>> {
        self.check(source, target, density)?;
        if source == target {
            return Ok(self
                .mesh
                .level(target)
                .nodes
                .iter()
                .zip(density)
                .map(|(x, &phi)| self.coincidence(x) * phi)
                .collect());
        }
        let vel = if self.include_velocity { 0.5 } else { 0.0 };
        Ok(self.apply(source, target, density, |x, y, s| {
            let d = [x.point[0] - y.point[0], x.point[1] - y.point[1]];
            let proj = d[0] * y.unit_normal[0] + d[1] * y.unit_normal[1];
            (proj / (2.0 * s) - vel * y.normal_velocity) * gaussian_2d(s, d[0] * d[0] + d[1] * d[1])
        }))
    }

    /// Adjoint double layer: the target-side normal trace `γ⁻_{1,x}` applied to the Gaussian.
    pub fn adjoint_double(&self, source: usize, target: usize, density: &[f64]) -> Result<Vec<f64>> {
        self.check(source, target, density)?;
        if source == target {
            return Ok(self
                .mesh
                .level(target)
                .nodes
                .iter()
                .zip(density)
                .map(|(x, &phi)| self.coincidence(x) * phi)
                .collect());
        }
        let vel = if self.include_velocity { 0.5 } else { 0.0 };
        Ok(self.apply(source, target, density, |x, y, s| {
            let d = [x.point[0] - y.point[0], x.point[1] - y.point[1]];
            let proj = d[0] * x.unit_normal[0] + d[1] * x.unit_normal[1];
            (-proj / (2.0 * s) + vel * x.normal_velocity) * gaussian_2d(s, d[0] * d[0] + d[1] * d[1])
        }))
    }
}

#[inline(always)]
pub(crate) fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Which endpoints of `[0, t_n]` carry a `1/√` singularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleVariant {
    /// `∫₀^{t_n} f(τ)/√(t_n - τ) dτ` with `f` smooth.
    RightEndpoint,
    /// `∫₀^{t_n} g(τ)/(√τ·√(t_n - τ)) dτ` with `g` smooth.
    BothEndpoints,
}

impl FromStr for RuleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" | "right-endpoint" => Ok(RuleVariant::RightEndpoint),
            "both" | "both-endpoints" => Ok(RuleVariant::BothEndpoints),
            other => Err(Error::Config(format!("unknown time rule variant '{other}'"))),
        }
    }
}

/// Lower-triangular time weights: row `n` integrates over `[0, t_n]` using
/// samples at `t_0 … t_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedTimeRule {
    step: f64,
    variant: RuleVariant,
    rows: Vec<Vec<f64>>,
}

impl CorrectedTimeRule {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn variant(&self) -> RuleVariant {
        self.variant
    }

    pub fn n_time(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn weight(&self, n: usize, j: usize) -> f64 {
        self.rows[n][j]
    }

    /// Weight of the coincident sample `j = n`.
    pub fn diagonal(&self, n: usize) -> f64 {
        self.rows[n][n]
    }

    /// The correction `μ_n`: the diagonal weight with the `1/√(4π)` prefactor applied.
    pub fn mu(&self, n: usize) -> f64 {
        self.diagonal(n) / SQRT_4PI
    }

    /// Apply row `n` to samples `f(t_0) … f(t_n)`.
    pub fn integrate(&self, n: usize, samples: &[f64]) -> f64 {
        self.rows[n].iter().zip(samples).map(|(w, f)| w * f).sum()
    }
}

pub fn corrected_rule(n_time: usize, step: f64, variant: RuleVariant) -> Result<CorrectedTimeRule> {
    if n_time == 0 {
        return Err(Error::Config("time rule needs at least one interval".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {step}")));
    }
    let rows = match variant {
        RuleVariant::RightEndpoint => right_endpoint_rows(n_time, step),
        RuleVariant::BothEndpoints => both_endpoint_rows(n_time),
    };
    Ok(CorrectedTimeRule { step, variant, rows })
}

/// Trapezoidal rule for `f(τ)/√(t_n-τ)` with the `j = 0` sample halved and the
/// coincident weight fixed so that constants integrate exactly to `2√t_n`.
fn right_endpoint_rows(n_time: usize, h: f64) -> Vec<Vec<f64>> {
    let sh = h.sqrt();
    (0..=n_time)
        .map(|n| {
            let mut row = vec![0.0; n + 1];
            if n == 0 {
                return row;
            }
            for (j, w) in row.iter_mut().enumerate().take(n) {
                *w = sh / ((n - j) as f64).sqrt();
            }
            row[0] *= 0.5;
            let partial: f64 = row[..n].iter().sum();
            row[n] = 2.0 * sh * (n as f64).sqrt() - partial;
            row
        })
        .collect()
}

/// Product integration of `g(τ)/(√τ·√(t_n-τ))` against the piecewise-linear
/// interpolant of `g`. The weights do not depend on the step length.
fn both_endpoint_rows(n_time: usize) -> Vec<Vec<f64>> {
    (0..=n_time)
        .map(|n| {
            let mut row = vec![0.0; n + 1];
            if n == 0 {
                return row;
            }
            let nf = n as f64;
            // In units of the step: θ(u) = asin √(u/n), F0' = 1/√(u(n-u)), F1' = u/√(u(n-u)).
            let theta = |u: f64| u.sqrt().atan2((nf - u).max(0.0).sqrt());
            let f0 = |u: f64| 2.0 * theta(u);
            let f1 = |u: f64| nf * theta(u) - (u * (nf - u)).max(0.0).sqrt();
            for j in 0..n {
                let (a, b) = (j as f64, (j + 1) as f64);
                let m0 = f0(b) - f0(a);
                let m1 = f1(b) - f1(a);
                row[j] += b * m0 - m1;
                row[j + 1] += m1 - a * m0;
            }
            row
        })
        .collect()
}

/// Plain trapezoidal weights on `N_t + 1` equispaced samples.
pub fn trapezoid_weights(n_time: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n_time + 1];
    w[0] *= 0.5;
    w[n_time] *= 0.5;
    w
}
