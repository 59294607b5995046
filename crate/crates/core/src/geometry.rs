//! Star-shaped moving void, fixed exterior circle, and the space-time mesh.
//!
//! The void boundary is the polar graph `w(t, φ)·(cos φ, sin φ)` with
//!
//! ```text
//! w(t, φ) = Σ_ℓ L_ℓ(t) · ( α_{0,ℓ} + Σ_{k=1}^{N_K-1} {α_{k,ℓ} cos kφ + β_{k,ℓ} sin kφ} + α_{N_K,ℓ} cos N_K φ )
//! ```
//!
//! where `L_ℓ` are Legendre polynomials shifted to `[0, T]` and scaled to unit
//! `L²(0, T)` norm. Normals point out of the heat-conducting region: into the
//! void on the interior curve and away from the origin on the exterior circle.
//! Curvatures carry the matching sign, `-div_Γ n`, so the void boundary of a
//! circle has curvature `+1/r` and the exterior circle `-1/R`.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative slack allowed when a time lands a rounding error outside `[0, T]`.
const TIME_SLACK: f64 = 1e-12;

/// Fourier × Legendre coefficients of the void radius.
///
/// Row `ℓ` holds `[β_{N_K-1}, …, β_1, α_0, α_1, …, α_{N_K}]`; the flattened
/// parameter vector is the row-major concatenation of the rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeCoefficients {
    n_legendre: usize,
    n_fourier: usize,
    horizon: f64,
    coeffs: Vec<f64>,
}

/// The trigonometric factor attached to one coefficient column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourierMode {
    Cos(usize),
    Sin(usize),
}

impl FourierMode {
    pub fn eval(self, phi: f64) -> f64 {
        match self {
            FourierMode::Cos(k) => (k as f64 * phi).cos(),
            FourierMode::Sin(k) => (k as f64 * phi).sin(),
        }
    }
}

impl ShapeCoefficients {
    pub fn zeros(n_legendre: usize, n_fourier: usize, horizon: f64) -> Result<Self> {
        if n_fourier == 0 {
            return Err(Error::Config("n_fourier must be at least 1".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            n_legendre,
            n_fourier,
            horizon,
            coeffs: vec![0.0; (n_legendre + 1) * 2 * n_fourier],
        })
    }

    /// Time-independent circle of the given radius.
    pub fn circle(radius: f64, n_legendre: usize, n_fourier: usize, horizon: f64) -> Result<Self> {
        let mut c = Self::zeros(n_legendre, n_fourier, horizon)?;
        // L_0 = 1/√T under the unit-norm scaling.
        c.set_alpha(0, 0, radius * horizon.sqrt());
        Ok(c)
    }

    pub fn from_flat(n_legendre: usize, n_fourier: usize, horizon: f64, flat: Vec<f64>) -> Result<Self> {
        let mut c = Self::zeros(n_legendre, n_fourier, horizon)?;
        if flat.len() != c.coeffs.len() {
            return Err(Error::Config(format!(
                "expected {} shape coefficients, got {}",
                c.coeffs.len(),
                flat.len()
            )));
        }
        c.coeffs = flat;
        Ok(c)
    }

    pub fn n_legendre(&self) -> usize {
        self.n_legendre
    }

    pub fn n_fourier(&self) -> usize {
        self.n_fourier
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_rows(&self) -> usize {
        self.n_legendre + 1
    }

    pub fn n_cols(&self) -> usize {
        2 * self.n_fourier
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.coeffs.clone()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let n = self.n_cols();
        &self.coeffs[l * n..(l + 1) * n]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.n_legendre == other.n_legendre && self.n_fourier == other.n_fourier
    }

    /// Column holding `α_{k,ℓ}` (`0 ≤ k ≤ N_K`).
    pub fn alpha_column(&self, k: usize) -> usize {
        assert!(k <= self.n_fourier, "cosine frequency {k} exceeds N_K");
        self.n_fourier - 1 + k
    }

    /// Column holding `β_{k,ℓ}` (`1 ≤ k ≤ N_K - 1`).
    pub fn beta_column(&self, k: usize) -> usize {
        assert!(k >= 1 && k < self.n_fourier, "sine frequency {k} outside 1..N_K");
        self.n_fourier - 1 - k
    }

    pub fn column_mode(&self, col: usize) -> FourierMode {
        let nk = self.n_fourier;
        if col + 1 < nk {
            FourierMode::Sin(nk - 1 - col)
        } else {
            FourierMode::Cos(col + 1 - nk)
        }
    }

    pub fn alpha(&self, k: usize, l: usize) -> f64 {
        self.coeffs[l * self.n_cols() + self.alpha_column(k)]
    }

    pub fn beta(&self, k: usize, l: usize) -> f64 {
        self.coeffs[l * self.n_cols() + self.beta_column(k)]
    }

    pub fn set_alpha(&mut self, k: usize, l: usize, value: f64) {
        let i = l * self.n_cols() + self.alpha_column(k);
        self.coeffs[i] = value;
    }

    pub fn set_beta(&mut self, k: usize, l: usize, value: f64) {
        let i = l * self.n_cols() + self.beta_column(k);
        self.coeffs[i] = value;
    }

    /// The same shape in another layout: shared modes are copied, modes
    /// absent from `self` are zero, and modes beyond the new layout are dropped.
    pub fn resized(&self, n_legendre: usize, n_fourier: usize) -> Result<Self> {
        let mut out = Self::zeros(n_legendre, n_fourier, self.horizon)?;
        for l in 0..=n_legendre.min(self.n_legendre) {
            for k in 0..=n_fourier.min(self.n_fourier) {
                out.set_alpha(k, l, self.alpha(k, l));
            }
            for k in 1..n_fourier.min(self.n_fourier) {
                out.set_beta(k, l, self.beta(k, l));
            }
        }
        Ok(out)
    }

    /// `self + step·direction`, used by line searches.
    pub fn offset(&self, direction: &[f64], step: f64) -> Self {
        assert_eq!(direction.len(), self.coeffs.len());
        let mut out = self.clone();
        for (c, d) in out.coeffs.iter_mut().zip(direction) {
            *c += step * d;
        }
        out
    }

    /// Evaluate row `l`'s trigonometric polynomial and its first two angular derivatives.
    fn angular_row(&self, l: usize, phi: f64) -> [f64; 3] {
        let row = self.row(l);
        let mut out = [0.0; 3];
        for (col, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (val, d1, d2) = match self.column_mode(col) {
                FourierMode::Cos(k) => {
                    let kf = k as f64;
                    let (s, co) = (kf * phi).sin_cos();
                    (co, -kf * s, -kf * kf * co)
                }
                FourierMode::Sin(k) => {
                    let kf = k as f64;
                    let (s, co) = (kf * phi).sin_cos();
                    (s, kf * co, -kf * kf * s)
                }
            };
            out[0] += c * val;
            out[1] += c * d1;
            out[2] += c * d2;
        }
        out
    }
}

fn check_time(t: f64, horizon: f64) -> Result<f64> {
    let slack = TIME_SLACK * horizon.max(1.0);
    if !(t >= -slack && t <= horizon + slack) {
        return Err(Error::Domain(format!("time {t} outside [0, {horizon}]")));
    }
    Ok(t.clamp(0.0, horizon))
}

/// Unit-norm shifted Legendre polynomials `L_0(t) … L_{N_L}(t)` on `[0, T]`.
pub fn legendre_basis(t: f64, n_legendre: usize, horizon: f64) -> Result<Vec<f64>> {
    Ok(legendre_with_derivative(t, n_legendre, horizon)?.0)
}

/// Values and time derivatives of the shifted, normalized Legendre basis.
pub fn legendre_with_derivative(t: f64, n_legendre: usize, horizon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let t = check_time(t, horizon)?;
    let s = 2.0 * t / horizon - 1.0;
    let n = n_legendre + 1;
    let mut p = vec![0.0; n];
    let mut dp = vec![0.0; n];
    p[0] = 1.0;
    if n > 1 {
        p[1] = s;
        dp[1] = 1.0;
    }
    for l in 1..n.saturating_sub(1) {
        let lf = l as f64;
        p[l + 1] = ((2.0 * lf + 1.0) * s * p[l] - lf * p[l - 1]) / (lf + 1.0);
        dp[l + 1] = dp[l - 1] + (2.0 * lf + 1.0) * p[l];
    }
    let ds_dt = 2.0 / horizon;
    for l in 0..n {
        let scale = ((2 * l + 1) as f64 / horizon).sqrt();
        p[l] *= scale;
        dp[l] *= scale * ds_dt;
    }
    Ok((p, dp))
}

/// Radius and its partial derivatives at one `(t, φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProfile {
    pub w: f64,
    pub dphi: f64,
    pub dphi2: f64,
    pub dt: f64,
}

pub fn radius(coeffs: &ShapeCoefficients, t: f64, phi: f64) -> Result<RadialProfile> {
    let (l, dl) = legendre_with_derivative(t, coeffs.n_legendre, coeffs.horizon)?;
    let mut out = RadialProfile {
        w: 0.0,
        dphi: 0.0,
        dphi2: 0.0,
        dt: 0.0,
    };
    for row in 0..coeffs.n_rows() {
        let [om, om1, om2] = coeffs.angular_row(row, phi);
        out.w += l[row] * om;
        out.dphi += l[row] * om1;
        out.dphi2 += l[row] * om2;
        out.dt += dl[row] * om;
    }
    Ok(out)
}

/// Geometric data carried by one boundary quadrature node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: [f64; 2],
    /// Unit normal pointing out of the conducting region.
    pub unit_normal: [f64; 2],
    /// `|∂_φ γ|`, length per radian.
    pub arc_element: f64,
    /// `⟨∂_t γ, n⟩`.
    pub normal_velocity: f64,
    /// Signed curvature `-div_Γ n`.
    pub curvature: f64,
}

impl BoundarySample {
    pub fn from_profile(p: RadialProfile, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let w = p.w;
        let wp = p.dphi;
        let arc = (w * w + wp * wp).sqrt();
        let normal = [-(w * c + wp * s) / arc, -(w * s - wp * c) / arc];
        Self {
            point: [w * c, w * s],
            unit_normal: normal,
            arc_element: arc,
            normal_velocity: -w * p.dt / arc,
            curvature: (w * w + 2.0 * wp * wp - w * p.dphi2) / (arc * arc * arc),
        }
    }

    /// Node on the fixed exterior circle of radius `r`.
    pub fn exterior(r: f64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            point: [r * c, r * s],
            unit_normal: [c, s],
            arc_element: r,
            normal_velocity: 0.0,
            curvature: -1.0 / r,
        }
    }

    pub fn tangent(&self) -> [f64; 2] {
        [-self.unit_normal[1], self.unit_normal[0]]
    }
}

pub fn boundary_sample(coeffs: &ShapeCoefficients, t: f64, phi: f64) -> Result<BoundarySample> {
    let p = radius(coeffs, t, phi)?;
    if !(p.w > 0.0) {
        return Err(Error::Geometry {
            level: 0,
            node: 0,
            radius: p.w,
            limit: f64::INFINITY,
        });
    }
    Ok(BoundarySample::from_profile(p, phi))
}

/// Which closed curve a node belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Interior,
    Exterior,
}

/// Boundary nodes of one time level: `N_x` interior nodes followed by `N_x` exterior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshLevel {
    pub time: f64,
    pub nodes: Vec<BoundarySample>,
}

/// Space-time boundary mesh of the tube: `N_t + 1` levels at `t_n = n·T/N_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeMesh {
    horizon: f64,
    n_time: usize,
    n_space: usize,
    exterior_radius: f64,
    levels: Vec<MeshLevel>,
}

impl SpaceTimeMesh {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_levels(&self) -> usize {
        self.n_time + 1
    }

    /// Nodes per boundary component.
    pub fn n_space(&self) -> usize {
        self.n_space
    }

    /// Nodes per level over both components.
    pub fn n_nodes(&self) -> usize {
        2 * self.n_space
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_time as f64
    }

    pub fn exterior_radius(&self) -> f64 {
        self.exterior_radius
    }

    pub fn level(&self, n: usize) -> &MeshLevel {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[MeshLevel] {
        &self.levels
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_space as f64
    }

    pub fn component_range(&self, component: Component) -> std::ops::Range<usize> {
        match component {
            Component::Interior => 0..self.n_space,
            Component::Exterior => self.n_space..2 * self.n_space,
        }
    }

    pub fn component(&self, n: usize, component: Component) -> &[BoundarySample] {
        &self.levels[n].nodes[self.component_range(component)]
    }

    /// Spatial trapezoidal weight `|γ_φ|·2π/N_x` of a node.
    pub fn quadrature_weight(&self, sample: &BoundarySample) -> f64 {
        sample.arc_element * 2.0 * PI / self.n_space as f64
    }

    /// Tube traversed backwards in time: level `n` becomes level `N_t - n` and
    /// normal velocities change sign.
    pub fn time_reversed(&self) -> Self {
        let levels = self
            .levels
            .iter()
            .rev()
            .enumerate()
            .map(|(n, lvl)| MeshLevel {
                time: self.horizon * n as f64 / self.n_time as f64,
                nodes: lvl
                    .nodes
                    .iter()
                    .map(|s| BoundarySample {
                        normal_velocity: -s.normal_velocity,
                        ..*s
                    })
                    .collect(),
            })
            .collect();
        Self { levels, ..self.clone() }
    }
}

/// Trigonometric polynomial values and first two derivatives at `N_x` equispaced
/// angles, one FFT per quantity.
fn angular_rows_fft(coeffs: &ShapeCoefficients, n_space: usize) -> Vec<[Vec<f64>; 3]> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n_space);
    let n = n_space as i64;
    let bin = |k: i64| k.rem_euclid(n) as usize;
    (0..coeffs.n_rows())
        .map(|l| {
            let row = coeffs.row(l);
            let mut spectra = vec![vec![Complex::new(0.0, 0.0); n_space]; 3];
            for (col, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let (k, kf) = match coeffs.column_mode(col) {
                    FourierMode::Cos(k) | FourierMode::Sin(k) => (k as i64, k as f64),
                };
                // (a cos kφ + b sin kφ) -> bins ±k; derivatives rotate the pair.
                let (a, b) = match coeffs.column_mode(col) {
                    FourierMode::Cos(_) => (c, 0.0),
                    FourierMode::Sin(_) => (0.0, c),
                };
                let derivs = [(a, b), (kf * b, -kf * a), (-kf * kf * a, -kf * kf * b)];
                for (spec, (ca, cb)) in spectra.iter_mut().zip(derivs) {
                    if k == 0 {
                        spec[0] += Complex::new(ca, 0.0);
                    } else {
                        spec[bin(k)] += Complex::new(0.5 * ca, -0.5 * cb);
                        spec[bin(-k)] += Complex::new(0.5 * ca, 0.5 * cb);
                    }
                }
            }
            let mut out: [Vec<f64>; 3] = Default::default();
            for (slot, mut spec) in out.iter_mut().zip(spectra) {
                fft.process(&mut spec);
                *slot = spec.iter().map(|z| z.re).collect();
            }
            out
        })
        .collect()
}

/// Interior radii `w(t_n, φ_i)` at every mesh node, evaluated through the FFT path.
pub fn radius_grid(coeffs: &ShapeCoefficients, n_time: usize, n_space: usize) -> Result<Vec<Vec<f64>>> {
    let rows = angular_rows_fft(coeffs, n_space);
    (0..=n_time)
        .map(|n| {
            let t = coeffs.horizon * n as f64 / n_time as f64;
            let l = legendre_basis(t, coeffs.n_legendre, coeffs.horizon)?;
            Ok((0..n_space)
                .map(|i| rows.iter().zip(&l).map(|(r, lv)| lv * r[0][i]).sum())
                .collect())
        })
        .collect()
}

pub fn build_mesh(
    coeffs: &ShapeCoefficients,
    exterior_radius: f64,
    n_time: usize,
    n_space: usize,
) -> Result<SpaceTimeMesh> {
    if n_time == 0 || n_space < 3 {
        return Err(Error::Config(format!(
            "mesh needs n_time >= 1 and n_space >= 3, got ({n_time}, {n_space})"
        )));
    }
    if !(exterior_radius > 0.0) {
        return Err(Error::Config(format!(
            "exterior radius must be positive, got {exterior_radius}"
        )));
    }
    let horizon = coeffs.horizon;
    let rows = angular_rows_fft(coeffs, n_space);
    let angles: Vec<f64> = (0..n_space).map(|i| 2.0 * PI * i as f64 / n_space as f64).collect();
    let exterior: Vec<BoundarySample> = angles
        .iter()
        .map(|&phi| BoundarySample::exterior(exterior_radius, phi))
        .collect();

    let levels: Result<Vec<MeshLevel>> = (0..=n_time)
        .into_par_iter()
        .map(|n| {
            let t = horizon * n as f64 / n_time as f64;
            let (l, dl) = legendre_with_derivative(t, coeffs.n_legendre, horizon)?;
            let mut nodes = Vec::with_capacity(2 * n_space);
            for (i, &phi) in angles.iter().enumerate() {
                let mut p = RadialProfile {
                    w: 0.0,
                    dphi: 0.0,
                    dphi2: 0.0,
                    dt: 0.0,
                };
                for (row, r) in rows.iter().enumerate() {
                    p.w += l[row] * r[0][i];
                    p.dphi += l[row] * r[1][i];
                    p.dphi2 += l[row] * r[2][i];
                    p.dt += dl[row] * r[0][i];
                }
                if !(p.w > 0.0 && p.w < exterior_radius) {
                    return Err(Error::Geometry {
                        level: n,
                        node: i,
                        radius: p.w,
                        limit: exterior_radius,
                    });
                }
                nodes.push(BoundarySample::from_profile(p, phi));
            }
            nodes.extend_from_slice(&exterior);
            Ok(MeshLevel { time: t, nodes })
        })
        .collect();

    Ok(SpaceTimeMesh {
        horizon,
        n_time,
        n_space,
        exterior_radius,
        levels: levels?,
    })
}
