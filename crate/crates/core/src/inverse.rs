//! Tracking functional, adjoint shape gradient, and the quasi-Newton loop.

use std::collections::VecDeque;

use crate::conventions::Conventions;
use crate::error::{Error, Result};
use crate::geometry::{build_mesh, legendre_basis, Component, ShapeCoefficients, SpaceTimeMesh};
use crate::potentials::{corrected_rule, trapezoid_weights, BoundaryField, EndpointSingularity, RuleVariant};
use crate::solver::{solve_adjoint, solve_dirichlet, DirichletProblem, NeumannTrace};

/// Discretization and optimizer settings for one inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionSettings {
    pub exterior_radius: f64,
    pub n_time: usize,
    pub n_space: usize,
    pub max_iterations: usize,
    pub memory: usize,
    pub full_memory: bool,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
    pub line_search: LineSearchSettings,
    pub conventions: Conventions,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            exterior_radius: 1.0,
            n_time: 90,
            n_space: 80,
            max_iterations: 100,
            memory: 10,
            full_memory: false,
            gradient_tolerance: 1e-8,
            objective_tolerance: 0.0,
            line_search: LineSearchSettings::default(),
            conventions: Conventions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchSettings {
    pub armijo: f64,
    pub max_trials: usize,
    pub initial_step: f64,
    /// Largest coefficient change allowed on the first trial of the first
    /// iteration, before any curvature information is available.
    pub max_first_change: f64,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            max_trials: 20,
            initial_step: 1.0,
            max_first_change: 0.05,
        }
    }
}

/// Value of the tracking functional and the state it was computed from.
/// A geometry fault is reported as `value = +∞` with no state.
#[derive(Clone, Debug)]
pub struct ObjectiveReport {
    pub value: f64,
    pub mesh: Option<SpaceTimeMesh>,
    pub neumann_state: Option<NeumannTrace>,
    /// `∂v/∂n - g` on the exterior circle, one row per time level.
    pub mismatch: Vec<Vec<f64>>,
    pub gradient: Option<Vec<f64>>,
}

impl ObjectiveReport {
    pub fn is_fault(&self) -> bool {
        self.value.is_infinite()
    }

    fn fault() -> Self {
        Self {
            value: f64::INFINITY,
            mesh: None,
            neumann_state: None,
            mismatch: Vec::new(),
            gradient: None,
        }
    }
}

fn check_rows(name: &str, rows: &[Vec<f64>], n_time: usize, n_space: usize) -> Result<()> {
    if rows.len() != n_time + 1 || rows.iter().any(|r| r.len() != n_space) {
        return Err(Error::Config(format!(
            "{name} must be {}x{n_space}, got {}x{}",
            n_time + 1,
            rows.len(),
            rows.first().map_or(0, Vec::len)
        )));
    }
    Ok(())
}

/// `J = ½ ∫∫_{Σ^f} (∂v/∂n - g)²` with trapezoidal weights in time and angle.
pub fn tracking_functional(mismatch: &[Vec<f64>], step: f64, exterior_radius: f64) -> f64 {
    let n_time = mismatch.len() - 1;
    let wt = trapezoid_weights(n_time, step);
    mismatch
        .iter()
        .zip(&wt)
        .map(|(row, w)| {
            let ws = 2.0 * std::f64::consts::PI * exterior_radius / row.len() as f64;
            w * ws * row.iter().map(|d| d * d).sum::<f64>()
        })
        .sum::<f64>()
        * 0.5
}

/// Solve the state problem for `coeffs` and evaluate the tracking functional.
pub fn evaluate_objective(
    coeffs: &ShapeCoefficients,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    settings: &InversionSettings,
) -> Result<ObjectiveReport> {
    check_rows("dirichlet data", f, settings.n_time, settings.n_space)?;
    check_rows("neumann data", g, settings.n_time, settings.n_space)?;
    let mesh = match build_mesh(coeffs, settings.exterior_radius, settings.n_time, settings.n_space) {
        Ok(m) => m,
        Err(e) if e.is_geometry_fault() => return Ok(ObjectiveReport::fault()),
        Err(e) => return Err(e),
    };
    let state = solve_dirichlet(&DirichletProblem::exterior(&mesh, f)?, &settings.conventions)?;
    let mismatch: Vec<Vec<f64>> = state
        .exterior_rows()
        .iter()
        .zip(g)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let value = tracking_functional(&mismatch, mesh.step(), settings.exterior_radius);
    Ok(ObjectiveReport {
        value,
        mesh: Some(mesh),
        neumann_state: Some(state),
        mismatch,
        gradient: None,
    })
}

/// `∇J[(k,ℓ)] = σ ∫∫ (∂p/∂n)(∂v/∂n) L_ℓ(t) trig_k(φ) w(t,φ) dφ dt` over the void.
///
/// An adjoint trace that is singular at `t = T` stores the cofactor of
/// `(T - t)^{-1/2}`; the time integral then uses the corrected rule with the
/// singularity at the right endpoint.
pub fn shape_gradient(
    coeffs: &ShapeCoefficients,
    mesh: &SpaceTimeMesh,
    neumann_state: &BoundaryField,
    adjoint_trace: &BoundaryField,
    gradient_sign: f64,
) -> Result<Vec<f64>> {
    if !neumann_state.matches(mesh) || !adjoint_trace.matches(mesh) {
        return Err(Error::Config("state and adjoint traces must live on the mesh".into()));
    }
    let n_time = mesh.n_time();
    let n_space = mesh.n_space();
    let time_weights: Vec<f64> = match adjoint_trace.singularity() {
        EndpointSingularity::Smooth => trapezoid_weights(n_time, mesh.step()),
        EndpointSingularity::InverseSqrtAtEnd => corrected_rule(n_time, mesh.step(), RuleVariant::RightEndpoint)?
            .row(n_time)
            .to_vec(),
        EndpointSingularity::InverseSqrtAtStart => {
            return Err(Error::Config("adjoint trace cannot be singular at t = 0".into()));
        }
    };
    let interior = mesh.component_range(Component::Interior);
    let dphi = 2.0 * std::f64::consts::PI / n_space as f64;
    let n_cols = coeffs.n_cols();
    let modes: Vec<Vec<f64>> = (0..n_cols)
        .map(|c| {
            let mode = coeffs.column_mode(c);
            (0..n_space).map(|i| mode.eval(mesh.angle(i))).collect()
        })
        .collect();

    let mut grad = vec![0.0; coeffs.len()];
    for n in 0..=n_time {
        if time_weights[n] == 0.0 {
            continue;
        }
        let level = mesh.level(n);
        let legendre = legendre_basis(level.time, coeffs.n_legendre(), coeffs.horizon())?;
        let density: Vec<f64> = interior
            .clone()
            .map(|i| {
                let s = &level.nodes[i];
                let w = (s.point[0].powi(2) + s.point[1].powi(2)).sqrt();
                adjoint_trace.get(n, i) * neumann_state.get(n, i) * w * dphi
            })
            .collect();
        for (c, mode) in modes.iter().enumerate() {
            let angular: f64 = density.iter().zip(mode).map(|(d, m)| d * m).sum();
            for (l, lv) in legendre.iter().enumerate() {
                grad[l * n_cols + c] += gradient_sign * time_weights[n] * lv * angular;
            }
        }
    }
    Ok(grad)
}

/// Objective plus adjoint gradient at `coeffs`.
pub fn objective_and_gradient(
    coeffs: &ShapeCoefficients,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    settings: &InversionSettings,
) -> Result<ObjectiveReport> {
    let mut report = evaluate_objective(coeffs, f, g, settings)?;
    attach_gradient(coeffs, &mut report, settings)?;
    Ok(report)
}

fn attach_gradient(
    coeffs: &ShapeCoefficients,
    report: &mut ObjectiveReport,
    settings: &InversionSettings,
) -> Result<()> {
    let (Some(mesh), Some(state)) = (&report.mesh, &report.neumann_state) else {
        return Err(Error::Geometry {
            level: 0,
            node: 0,
            radius: f64::NAN,
            limit: settings.exterior_radius,
        });
    };
    let adjoint = solve_adjoint(mesh, &report.mismatch, &settings.conventions)?;
    report.gradient = Some(shape_gradient(
        coeffs,
        mesh,
        &state.values,
        &adjoint,
        settings.conventions.gradient_sign,
    )?);
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion over `(s, y)` pairs, oldest first.
pub fn lbfgs_direction(pairs: &[(Vec<f64>, Vec<f64>)], gradient: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = gradient.to_vec();
    let rho: Vec<f64> = pairs.iter().map(|(s, y)| 1.0 / dot(s, y)).collect();
    let mut alpha = vec![0.0; pairs.len()];
    for (i, (s, y)) in pairs.iter().enumerate().rev() {
        alpha[i] = rho[i] * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qv, yv)| *qv -= alpha[i] * yv);
    }
    if let Some((s, y)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (i, (s, y)) in pairs.iter().enumerate() {
        let beta = rho[i] * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qv, sv)| *qv += (alpha[i] - beta) * sv);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Curvature pairs for the inverse-BFGS update, limited or full memory.
#[derive(Clone, Debug)]
pub enum QuasiNewton {
    Limited {
        capacity: usize,
        pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    },
    /// Dense inverse Hessian, scaled by `⟨s,y⟩/⟨y,y⟩` at the first update.
    Full { inverse_hessian: Option<Vec<Vec<f64>>> },
}

impl QuasiNewton {
    pub fn limited(capacity: usize) -> Self {
        Self::Limited {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn full() -> Self {
        Self::Full { inverse_hessian: None }
    }

    /// Store a pair; returns `false` when it fails the curvature condition.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 0.0) {
            return false;
        }
        match self {
            Self::Limited { capacity, pairs } => {
                if *capacity == 0 {
                    return false;
                }
                if pairs.len() == *capacity {
                    pairs.pop_front();
                }
                pairs.push_back((s, y));
            }
            Self::Full { inverse_hessian } => {
                let n = s.len();
                let h = inverse_hessian.get_or_insert_with(|| {
                    let gamma = sy / dot(&y, &y);
                    (0..n)
                        .map(|i| (0..n).map(|j| if i == j { gamma } else { 0.0 }).collect())
                        .collect()
                });
                // H ← (I - ρsyᵀ) H (I - ρysᵀ) + ρssᵀ
                let rho = 1.0 / sy;
                let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
                let yhy = dot(&y, &hy);
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                    }
                }
            }
        }
        true
    }

    pub fn direction(&self, gradient: &[f64]) -> Vec<f64> {
        match self {
            Self::Limited { pairs, .. } => {
                let pairs: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().cloned().collect();
                lbfgs_direction(&pairs, gradient)
            }
            Self::Full { inverse_hessian: None } => gradient.iter().map(|g| -g).collect(),
            Self::Full {
                inverse_hessian: Some(h),
            } => h.iter().map(|row| -dot(row, gradient)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Self::Limited { pairs, .. } => pairs.is_empty(),
            Self::Full { inverse_hessian } => inverse_hessian.is_none(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub value: f64,
    pub trials: usize,
}

/// Backtracking with quadratic interpolation until the Armijo condition holds.
/// `phi` returns `+∞` for inadmissible steps.
pub fn line_search(
    mut phi: impl FnMut(f64) -> Result<f64>,
    phi0: f64,
    dphi0: f64,
    initial_step: f64,
    settings: &LineSearchSettings,
) -> Result<LineSearchOutcome> {
    if !(dphi0 < 0.0) {
        return Err(Error::Config(format!(
            "line search needs a descent direction, slope {dphi0}"
        )));
    }
    let mut alpha = initial_step;
    for trial in 1..=settings.max_trials {
        let value = phi(alpha)?;
        if value <= phi0 + settings.armijo * alpha * dphi0 {
            return Ok(LineSearchOutcome {
                step: alpha,
                value,
                trials: trial,
            });
        }
        alpha = if value.is_finite() {
            // Minimizer of the quadratic through φ(0), φ'(0), φ(α), kept in [0.1α, 0.5α].
            let curvature = value - phi0 - dphi0 * alpha;
            let fit = -dphi0 * alpha * alpha / (2.0 * curvature);
            fit.clamp(0.1 * alpha, 0.5 * alpha)
        } else {
            0.5 * alpha
        };
    }
    Err(Error::LineSearch {
        trials: settings.max_trials,
    })
}

pub fn coefficient_error(a: &ShapeCoefficients, b: &ShapeCoefficients) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::Config(format!(
            "coefficient layouts differ: ({}, {}) vs ({}, {})",
            a.n_legendre(),
            a.n_fourier(),
            b.n_legendre(),
            b.n_fourier()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_sup: f64,
    pub step: f64,
    pub coefficient_error: Option<f64>,
}

/// One record per iteration, taken at the iterate the iteration started from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InversionHistory {
    pub records: Vec<HistoryRecord>,
}

impl InversionHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,J,grad_inf,step,l2_err\n");
        for r in &self.records {
            let err = r
                .coefficient_error
                .map_or_else(|| "nan".to_string(), |e| format!("{e:.17e}"));
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{}\n",
                r.iteration, r.objective, r.gradient_sup, r.step, err
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    ObjectiveTolerance,
    LineSearchFailure,
}

#[derive(Clone, Debug)]
pub struct InversionOutcome {
    pub coefficients: ShapeCoefficients,
    pub history: InversionHistory,
    pub stop: StopReason,
    pub final_objective: f64,
}

/// Quasi-Newton minimization of the tracking functional from `initial`.
///
/// A line-search failure ends the run normally with
/// [`StopReason::LineSearchFailure`]; the last accepted iterate is returned.
pub fn run_inversion(
    settings: &InversionSettings,
    initial: &ShapeCoefficients,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    truth: Option<&ShapeCoefficients>,
) -> Result<InversionOutcome> {
    let mut coeffs = initial.clone();
    let mut report = objective_and_gradient(&coeffs, f, g, settings)?;
    if report.is_fault() {
        // Surface the underlying geometry error.
        build_mesh(&coeffs, settings.exterior_radius, settings.n_time, settings.n_space)?;
    }
    let mut memory = if settings.full_memory {
        QuasiNewton::full()
    } else {
        QuasiNewton::limited(settings.memory)
    };
    let mut history = InversionHistory::default();
    let mut stop = StopReason::MaxIterations;

    for iteration in 0..settings.max_iterations {
        let gradient = report.gradient.clone().expect("gradient attached");
        let gradient_sup = gradient.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let coefficient_error = truth.map(|t| coefficient_error(&coeffs, t)).transpose()?;
        let mut record = HistoryRecord {
            iteration,
            objective: report.value,
            gradient_sup,
            step: 0.0,
            coefficient_error,
        };
        if gradient_sup < settings.gradient_tolerance {
            history.records.push(record);
            stop = StopReason::GradientTolerance;
            break;
        }
        if report.value <= settings.objective_tolerance {
            history.records.push(record);
            stop = StopReason::ObjectiveTolerance;
            break;
        }

        let mut direction = memory.direction(&gradient);
        let mut slope = dot(&direction, &gradient);
        if !(slope < 0.0) {
            direction = gradient.iter().map(|v| -v).collect();
            slope = dot(&direction, &gradient);
        }
        let mut initial_step = settings.line_search.initial_step;
        if memory.is_empty() {
            let dir_sup = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            initial_step = initial_step.min(settings.line_search.max_first_change / dir_sup);
        }

        let mut last: Option<(f64, ObjectiveReport)> = None;
        let search = line_search(
            |alpha| {
                let trial = coeffs.offset(&direction, alpha);
                let r = evaluate_objective(&trial, f, g, settings)?;
                let v = r.value;
                last = Some((alpha, r));
                Ok(v)
            },
            report.value,
            slope,
            initial_step,
            &settings.line_search,
        );
        let outcome = match search {
            Ok(o) => o,
            Err(Error::LineSearch { .. }) => {
                history.records.push(record);
                stop = StopReason::LineSearchFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        let (alpha, mut next) = last.expect("line search evaluated a trial");
        debug_assert_eq!(alpha, outcome.step);
        record.step = outcome.step;
        history.records.push(record);

        let next_coeffs = coeffs.offset(&direction, outcome.step);
        attach_gradient(&next_coeffs, &mut next, settings)?;
        let s: Vec<f64> = direction.iter().map(|d| d * outcome.step).collect();
        let next_gradient = next.gradient.as_ref().expect("gradient attached");
        let y: Vec<f64> = next_gradient.iter().zip(&gradient).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        coeffs = next_coeffs;
        report = next;
    }
    Ok(InversionOutcome {
        coefficients: coeffs,
        history,
        stop,
        final_objective: report.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_mismatch_functional() {
        // Unit mismatch on the unit circle over [0, 1]: ½·2π·1.
        let rows = vec![vec![1.0; 32]; 11];
        assert_abs_diff_eq!(
            tracking_functional(&rows, 0.1, 1.0),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn functional_invariant_under_rotation_of_start_node() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|n| (0..16).map(|i| ((n * 7 + i * 3) % 5) as f64).collect())
            .collect();
        let rotated: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.rotate_left(5);
                r
            })
            .collect();
        assert_abs_diff_eq!(
            tracking_functional(&rows, 0.2, 1.0),
            tracking_functional(&rotated, 0.2, 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn perfect_data_gives_zero_and_zero_gradient() {
        let settings = InversionSettings {
            n_time: 8,
            n_space: 12,
            ..Default::default()
        };
        let coeffs = ShapeCoefficients::circle(0.4, 1, 2, 1.0).unwrap();
        let f: Vec<Vec<f64>> = (0..=8).map(|n| vec![n as f64 / 8.0; 12]).collect();
        let mesh = build_mesh(&coeffs, 1.0, 8, 12).unwrap();
        let g = solve_dirichlet(&DirichletProblem::exterior(&mesh, &f).unwrap(), &Conventions::default())
            .unwrap()
            .exterior_rows();
        let r = objective_and_gradient(&coeffs, &f, &g, &settings).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn geometry_fault_is_infinite() {
        let settings = InversionSettings {
            n_time: 4,
            n_space: 8,
            ..Default::default()
        };
        let coeffs = ShapeCoefficients::circle(1.2, 0, 1, 1.0).unwrap();
        let rows = vec![vec![0.0; 8]; 5];
        assert!(evaluate_objective(&coeffs, &rows, &rows, &settings).unwrap().is_fault());
        assert!(evaluate_objective(&coeffs, &rows[..3], &rows, &settings).is_err());
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient_and_symmetry() {
        let coeffs = ShapeCoefficients::circle(0.4, 1, 3, 1.0).unwrap();
        let mesh = build_mesh(&coeffs, 1.0, 6, 16).unwrap();
        let zero = BoundaryField::zeros_like(&mesh);
        let mut state = BoundaryField::zeros_like(&mesh);
        state
            .values_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(k, v)| *v = 1.0 + (k / 32) as f64);
        assert!(shape_gradient(&coeffs, &mesh, &state, &zero, 1.0)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let adjoint = state
            .scaled(0.5)
            .with_singularity(EndpointSingularity::InverseSqrtAtEnd);
        let grad = shape_gradient(&coeffs, &mesh, &state, &adjoint, 1.0).unwrap();
        for l in 0..coeffs.n_rows() {
            for c in 0..coeffs.n_cols() {
                let v = grad[l * coeffs.n_cols() + c];
                if c == coeffs.alpha_column(0) {
                    assert!(v.abs() > 1e-3);
                } else {
                    assert!(v.abs() < 1e-12, "l={l} c={c} v={v}");
                }
            }
        }
    }

    #[test]
    fn lbfgs_trivial_cases() {
        let g = vec![1.0, -2.0, 0.5];
        assert_eq!(lbfgs_direction(&[], &g), vec![-1.0, 2.0, -0.5]);
        let pairs = vec![(vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.1])];
        assert!(lbfgs_direction(&pairs, &[0.0; 3]).iter().all(|&v| v == 0.0));
    }

    fn spd(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (a, b)
    }

    fn solve_quadratic(memory: QuasiNewton, a: &[Vec<f64>], b: &[f64], exact_line: bool) -> (usize, Vec<f64>) {
        let n = b.len();
        let grad = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(&a[i], x) - b[i]).collect() };
        let mut memory = memory;
        let mut x = vec![0.0; n];
        let mut g = grad(&x);
        for it in 0..=n + 1 {
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10 {
                return (it, x);
            }
            let d = memory.direction(&g);
            let ad: Vec<f64> = (0..n).map(|i| dot(&a[i], &d)).collect();
            let alpha = if exact_line { -dot(&g, &d) / dot(&d, &ad) } else { 1.0 };
            let s: Vec<f64> = d.iter().map(|v| v * alpha).collect();
            x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
            let g_new = grad(&x);
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(p, q)| p - q).collect();
            memory.push(s, y);
            g = g_new;
        }
        (n + 2, x)
    }

    #[test]
    fn finite_termination_on_quadratics() {
        let n = 8;
        let (a, b) = spd(n, 5);
        for memory in [QuasiNewton::limited(n), QuasiNewton::full()] {
            let (iters, x) = solve_quadratic(memory, &a, &b, true);
            assert!(iters <= n + 1, "{iters}");
            for i in 0..n {
                assert_abs_diff_eq!(dot(&a[i], &x), b[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn curvature_violations_are_skipped() {
        let mut m = QuasiNewton::limited(3);
        assert!(!m.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(m.is_empty());
        assert!(m.push(vec![1.0, 0.0], vec![1.0, 0.0]));
        for _ in 0..5 {
            m.push(vec![1.0, 1.0], vec![2.0, 1.0]);
        }
        if let QuasiNewton::Limited { pairs, .. } = &m {
            assert_eq!(pairs.len(), 3);
        }
    }

    proptest! {
        #[test]
        fn lbfgs_gives_descent(
            seed in 0u64..500,
            n_pairs in 0usize..6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 5;
            let mut mem = QuasiNewton::limited(4);
            for _ in 0..n_pairs {
                let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = s.iter().map(|v| v * rng.random_range(0.5..3.0) + 0.1 * rng.random_range(-1.0..1.0)).collect();
                mem.push(s, y);
            }
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            prop_assert!(dot(&mem.direction(&g), &g) < 0.0);
        }

        #[test]
        fn coefficient_error_triangle(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || ShapeCoefficients::from_flat(1, 2, 1.0, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (a, b, c) = (draw(), draw(), draw());
            let ab = coefficient_error(&a, &b).unwrap();
            let bc = coefficient_error(&b, &c).unwrap();
            let ac = coefficient_error(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn coefficient_error_examples() {
        let a = ShapeCoefficients::circle(0.3, 2, 2, 1.0).unwrap();
        assert_eq!(coefficient_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.set_beta(1, 2, 0.125);
        assert_abs_diff_eq!(coefficient_error(&a, &b).unwrap(), 0.125, epsilon = 1e-15);
        let c = ShapeCoefficients::circle(0.3, 1, 2, 1.0).unwrap();
        assert!(coefficient_error(&a, &c).is_err());
    }

    #[test]
    fn line_search_examples() {
        let s = LineSearchSettings::default();
        let q = line_search(|a| Ok((a - 1.0).powi(2)), 1.0, -2.0, 1.0, &s).unwrap();
        assert_eq!((q.step, q.trials), (1.0, 1));

        // From α₀ = 4 the quadratic model is exact and lands on the minimizer.
        let q = line_search(|a| Ok((a - 1.0).powi(2)), 1.0, -2.0, 4.0, &s).unwrap();
        assert!(q.trials >= 2 && q.value <= 1.0 - 2e-4 * q.step);

        let lin = line_search(|a| Ok(1.0 - a), 1.0, -1.0, 1.0, &s).unwrap();
        assert_eq!((lin.step, lin.trials), (1.0, 1));

        // Inadmissible beyond α = 0.3.
        let fault = line_search(
            |a| Ok(if a > 0.3 { f64::INFINITY } else { (a - 0.2).powi(2) }),
            0.04,
            -0.4,
            1.0,
            &s,
        )
        .unwrap();
        assert!(fault.step <= 0.3 && fault.value < 0.04);

        let fail = line_search(|_| Ok(f64::INFINITY), 1.0, -1.0, 1.0, &s);
        assert!(matches!(fail, Err(Error::LineSearch { trials: 20 })));
        assert!(line_search(Ok, 0.0, 1.0, 1.0, &s).is_err());
    }
}
