//! Exact heat solutions in the tube: single-layer potentials of a smooth density
//! on an auxiliary circle that stays inside the void.

use rayon::prelude::*;

use super::quadrature::{integrate, periodic_trapezoid};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, SpaceTimeMesh};
use crate::potentials::BoundaryField;

/// Density `μ(τ, θ) = amplitude · τ · (1 + a₁ cos θ + b₂ sin 2θ)` on the circle
/// of radius `radius` around `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub cos1: f64,
    pub sin2: f64,
    /// Absolute tolerance of the outer (time) quadrature.
    pub tolerance: f64,
}

impl ManufacturedSolution {
    pub fn new(center: [f64; 2], radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "auxiliary radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
            cos1: 0.5,
            sin2: 0.25,
            tolerance: 1e-10,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn density(&self, tau: f64, theta: f64) -> f64 {
        self.amplitude * tau * (1.0 + self.cos1 * theta.cos() + self.sin2 * (2.0 * theta).sin())
    }

    /// Smallest distance from the auxiliary circle to the sampled boundary.
    pub fn clearance(&self, mesh: &SpaceTimeMesh) -> f64 {
        mesh.levels()
            .iter()
            .flat_map(|l| l.nodes.iter())
            .map(|s| {
                let d = ((s.point[0] - self.center[0]).powi(2) + (s.point[1] - self.center[1]).powi(2)).sqrt();
                (d - self.radius).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `[v, ∂ₓv, ∂ᵧv]` at `(t, x)`.
    pub fn evaluate(&self, t: f64, x: [f64; 2]) -> [f64; 3] {
        if self.amplitude == 0.0 || t <= 0.0 {
            return [0.0; 3];
        }
        let inner_tol = 1e-2 * self.tolerance;
        let gap = (((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)).sqrt() - self.radius).abs();
        let spatial = |tau: f64| -> [f64; 3] {
            let s = t - tau;
            // The kernel is bounded by exp(-gap²/4s)/s, below 1e-20 here.
            if s <= 0.0 || gap * gap / (4.0 * s) > 46.0 + (1.0 / s).ln().max(0.0) {
                return [0.0; 3];
            }
            let inv4s = 0.25 / s;
            let norm = self.radius / (4.0 * std::f64::consts::PI * s);
            periodic_trapezoid(
                |theta: f64| {
                    let (sn, cs) = theta.sin_cos();
                    let dx = x[0] - self.center[0] - self.radius * cs;
                    let dy = x[1] - self.center[1] - self.radius * sn;
                    let g = norm * (-(dx * dx + dy * dy) * inv4s).exp() * self.density(tau, theta);
                    [g, -dx * 2.0 * inv4s * g, -dy * 2.0 * inv4s * g]
                },
                inner_tol,
            )
        };
        integrate(spatial, 0.0, t, self.tolerance, 400)
    }

    pub fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        self.evaluate(t, x)[0]
    }

    /// `γ₁⁻v = ∂v/∂n + ½⟨V,n⟩v` at a boundary sample.
    pub fn neumann_trace(&self, t: f64, sample: &BoundarySample) -> f64 {
        let [v, vx, vy] = self.evaluate(t, sample.point);
        vx * sample.unit_normal[0] + vy * sample.unit_normal[1] + 0.5 * sample.normal_velocity * v
    }

    /// Dirichlet data `v` and exact `γ₁⁻v` at every mesh node.
    pub fn boundary_fields(&self, mesh: &SpaceTimeMesh) -> (BoundaryField, BoundaryField) {
        let m = mesh.n_nodes();
        let pairs: Vec<(f64, f64)> = (0..mesh.n_levels() * m)
            .into_par_iter()
            .map(|idx| {
                let level = mesh.level(idx / m);
                let s = &level.nodes[idx % m];
                let [v, vx, vy] = self.evaluate(level.time, s.point);
                (
                    v,
                    vx * s.unit_normal[0] + vy * s.unit_normal[1] + 0.5 * s.normal_velocity * v,
                )
            })
            .collect();
        let mut dirichlet = BoundaryField::zeros_like(mesh);
        let mut neumann = BoundaryField::zeros_like(mesh);
        for (k, (v, g)) in pairs.into_iter().enumerate() {
            dirichlet.values_mut()[k] = v;
            neumann.values_mut()[k] = g;
        }
        (dirichlet, neumann)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_density_is_zero() {
        let m = ManufacturedSolution::new([0.0, 0.0], 0.15, 0.0).unwrap();
        assert_eq!(m.evaluate(0.7, [0.5, 0.1]), [0.0; 3]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = ManufacturedSolution::new([0.02, -0.01], 0.15, 1.0)
            .unwrap()
            .with_tolerance(1e-13);
        let x = [0.31, 0.17];
        let [_, vx, vy] = m.evaluate(0.6, x);
        let d = 1e-4;
        let fx = (m.value(0.6, [x[0] + d, x[1]]) - m.value(0.6, [x[0] - d, x[1]])) / (2.0 * d);
        let fy = (m.value(0.6, [x[0], x[1] + d]) - m.value(0.6, [x[0], x[1] - d])) / (2.0 * d);
        assert_abs_diff_eq!(vx, fx, epsilon = 1e-7);
        assert_abs_diff_eq!(vy, fy, epsilon = 1e-7);
    }

    #[test]
    fn satisfies_heat_equation() {
        // Sixth-order central stencils for v_t and Δv.
        let m = ManufacturedSolution::new([0.0, 0.0], 0.15, 1.0)
            .unwrap()
            .with_tolerance(1e-14);
        let c = [
            -1.0 / 90.0,
            3.0 / 20.0,
            -3.0 / 2.0,
            49.0 / 18.0,
            -3.0 / 2.0,
            3.0 / 20.0,
            -1.0 / 90.0,
        ];
        let c1 = [
            -1.0 / 60.0,
            3.0 / 20.0,
            -3.0 / 4.0,
            0.0,
            3.0 / 4.0,
            -3.0 / 20.0,
            1.0 / 60.0,
        ];
        for &(t, x) in &[(0.5, [0.4, 0.1]), (0.8, [-0.2, 0.55]), (0.3, [0.0, -0.35])] {
            let d = 0.005;
            let mut vt = 0.0;
            let mut lap = 0.0;
            for (j, (&a, &b)) in c.iter().zip(&c1).enumerate() {
                let o = (j as f64 - 3.0) * d;
                vt += b * m.value(t + o, x);
                lap -= a * (m.value(t, [x[0] + o, x[1]]) + m.value(t, [x[0], x[1] + o]));
            }
            vt /= d;
            lap /= d * d;
            assert!((vt - lap).abs() < 1e-9 * vt.abs().max(1.0), "t={t} vt={vt} lap={lap}");
        }
    }
}
