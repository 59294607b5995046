//! Nyström time marching for Dirichlet problems of the heat equation on the tube.
//!
//! Green's integral equation `½φ = 𝒱γ₁⁻φ - 𝒦φ` is discretized with the corrected
//! time rules of [`crate::potentials`]. The coincident blocks are diagonal (identity
//! for the single layer, curvature for the double layer), so every time step is
//! an explicit update of the Neumann trace from the history sums.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::conventions::Conventions;
use crate::error::{Error, Result};
use crate::geometry::{Component, SpaceTimeMesh};
use crate::potentials::{
    corrected_rule, BoundaryField, CorrectedTimeRule, EndpointSingularity, LayerOperators, RuleVariant, SQRT_4PI,
};

/// Dirichlet data on the whole boundary of the tube.
#[derive(Clone, Debug)]
pub struct DirichletProblem<'a> {
    pub mesh: &'a SpaceTimeMesh,
    pub dirichlet: BoundaryField,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(mesh: &'a SpaceTimeMesh, dirichlet: BoundaryField) -> Result<Self> {
        if !dirichlet.matches(mesh) {
            return Err(Error::Config(format!(
                "dirichlet data is {}x{}, mesh is {}x{}",
                dirichlet.n_levels(),
                dirichlet.n_nodes(),
                mesh.n_levels(),
                mesh.n_nodes()
            )));
        }
        Ok(Self { mesh, dirichlet })
    }

    /// State problem: `f` on the exterior circle, zero on the void.
    pub fn exterior(mesh: &'a SpaceTimeMesh, exterior: &[Vec<f64>]) -> Result<Self> {
        Self::new(mesh, BoundaryField::from_exterior(mesh, exterior)?)
    }
}

/// `γ₁⁻v` at every node. On the void, where `v = 0`, this is `∂v/∂n`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeumannTrace {
    pub values: BoundaryField,
}

impl NeumannTrace {
    pub fn exterior_rows(&self) -> Vec<Vec<f64>> {
        self.values.exterior_rows()
    }
}

/// Per-level node data laid out for the history sums.
struct NodeArrays {
    px: Vec<f64>,
    py: Vec<f64>,
    nx: Vec<f64>,
    ny: Vec<f64>,
    vn: Vec<f64>,
    weight: Vec<f64>,
    coincidence: Vec<f64>,
}

impl NodeArrays {
    fn from_mesh(ops: &LayerOperators<'_>) -> Vec<Self> {
        let mesh = ops.mesh();
        let vel = if ops.includes_velocity() { 1.0 } else { 0.0 };
        mesh.levels()
            .iter()
            .map(|lvl| Self {
                px: lvl.nodes.iter().map(|s| s.point[0]).collect(),
                py: lvl.nodes.iter().map(|s| s.point[1]).collect(),
                nx: lvl.nodes.iter().map(|s| s.unit_normal[0]).collect(),
                ny: lvl.nodes.iter().map(|s| s.unit_normal[1]).collect(),
                vn: lvl.nodes.iter().map(|s| vel * s.normal_velocity).collect(),
                weight: lvl.nodes.iter().map(|s| mesh.quadrature_weight(s)).collect(),
                coincidence: lvl.nodes.iter().map(|s| ops.coincidence(s)).collect(),
            })
            .collect()
    }
}

/// History sums at target level `n` for the targets in `targets`:
/// `Σ_{j<n} wv_j·(Vρ_j)(x_i)` and `Σ_{j<n} wk_j·(Kφ_j)(x_i)`, with the densities
/// pre-multiplied by the spatial weights. Each target is summed sequentially so
/// the result does not depend on the thread count.
fn green_history(
    nodes: &[NodeArrays],
    step: f64,
    n: usize,
    targets: std::ops::Range<usize>,
    single: Option<(&[f64], &[Vec<f64>])>,
    double: Option<(&[f64], &[Vec<f64>])>,
) -> Vec<(f64, f64)> {
    let tgt = &nodes[n];
    targets
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (tgt.px[i], tgt.py[i]);
            let mut acc_v = 0.0;
            let mut acc_k = 0.0;
            for j in 0..n {
                let sv = single.and_then(|(w, d)| (w[j] != 0.0 && !d[j].is_empty()).then(|| (w[j], &d[j])));
                let sk = double.and_then(|(w, d)| (w[j] != 0.0 && !d[j].is_empty()).then(|| (w[j], &d[j])));
                if sv.is_none() && sk.is_none() {
                    continue;
                }
                let s = step * (n - j) as f64;
                let inv4s = 0.25 / s;
                let inv2s = 0.5 / s;
                let norm = 1.0 / (4.0 * std::f64::consts::PI * s).sqrt();
                let src = &nodes[j];
                let mut lv = 0.0;
                let mut lk = 0.0;
                for k in 0..src.px.len() {
                    let dx = xi - src.px[k];
                    let dy = yi - src.py[k];
                    let e = (-(dx * dx + dy * dy) * inv4s).exp();
                    if let Some((_, d)) = sv {
                        lv += e * d[k];
                    }
                    if let Some((_, d)) = sk {
                        let proj = dx * src.nx[k] + dy * src.ny[k];
                        lk += (proj * inv2s - 0.5 * src.vn[k]) * e * d[k];
                    }
                }
                if let Some((w, _)) = sv {
                    acc_v += w * norm * lv;
                }
                if let Some((w, _)) = sk {
                    acc_k += w * norm * lk;
                }
            }
            (acc_v, acc_k)
        })
        .collect()
}

/// `Σ_{j<n} w_j·(K'ρ_j)(x_i)` with the target-side normal trace.
fn adjoint_double_history(
    nodes: &[NodeArrays],
    step: f64,
    n: usize,
    targets: std::ops::Range<usize>,
    weights: &[f64],
    densities: &[Vec<f64>],
) -> Vec<f64> {
    let tgt = &nodes[n];
    targets
        .into_par_iter()
        .map(|i| {
            let (xi, yi, nxi, nyi, vni) = (tgt.px[i], tgt.py[i], tgt.nx[i], tgt.ny[i], tgt.vn[i]);
            let mut acc = 0.0;
            for j in 0..n {
                if weights[j] == 0.0 || densities[j].is_empty() {
                    continue;
                }
                let s = step * (n - j) as f64;
                let inv4s = 0.25 / s;
                let inv2s = 0.5 / s;
                let norm = 1.0 / (4.0 * std::f64::consts::PI * s).sqrt();
                let src = &nodes[j];
                let d = &densities[j];
                let mut local = 0.0;
                for k in 0..src.px.len() {
                    let dx = xi - src.px[k];
                    let dy = yi - src.py[k];
                    let e = (-(dx * dx + dy * dy) * inv4s).exp();
                    let proj = dx * nxi + dy * nyi;
                    local += (-proj * inv2s + 0.5 * vni) * e * d[k];
                }
                acc += weights[j] * norm * local;
            }
            acc
        })
        .collect()
}

fn weighted(values: &[f64], weights: &[f64]) -> Vec<f64> {
    if values.iter().all(|&v| v == 0.0) {
        return Vec::new();
    }
    values.iter().zip(weights).map(|(v, w)| v * w).collect()
}

/// Solve `½φ = 𝒱ψ - 𝒦φ` for `ψ` by time marching.
///
/// With `singular_start` the data may jump at `t = 0`; the unknown is then
/// represented as `χ(τ)/√τ` and the returned field holds `χ`.
pub(crate) fn march_green(
    ops: &LayerOperators<'_>,
    data: &BoundaryField,
    singular_start: bool,
) -> Result<BoundaryField> {
    let mesh = ops.mesh();
    if !data.matches(mesh) {
        return Err(Error::Config("dirichlet data does not match the mesh".into()));
    }
    let n_time = mesh.n_time();
    let h = mesh.step();
    let k_rule = corrected_rule(n_time, h, RuleVariant::RightEndpoint)?;
    let v_rule: CorrectedTimeRule = if singular_start {
        corrected_rule(n_time, h, RuleVariant::BothEndpoints)?
    } else {
        k_rule.clone()
    };
    let nodes = NodeArrays::from_mesh(ops);
    let m = mesh.n_nodes();

    let mut out = BoundaryField::zeros_like(mesh);
    if singular_start {
        // As t → 0 only the coincident single-layer term survives: ½φ(0+) = (√π/2)·χ(0).
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        for (o, &f) in out.level_mut(0).iter_mut().zip(data.level(0)) {
            *o = f * inv_sqrt_pi;
        }
        out = out.with_singularity(EndpointSingularity::InverseSqrtAtStart);
    } else if data.level(0).iter().any(|&v| v != 0.0) {
        return Err(Error::Config(
            "dirichlet data must vanish at t = 0 unless declared singular".into(),
        ));
    }

    let data_w: Vec<Vec<f64>> = (0..=n_time)
        .map(|n| weighted(data.level(n), &nodes[n].weight))
        .collect();
    let mut unknown_w: Vec<Vec<f64>> = Vec::with_capacity(n_time + 1);
    unknown_w.push(weighted(out.level(0), &nodes[0].weight));

    for n in 1..=n_time {
        let hist = green_history(
            &nodes,
            h,
            n,
            0..m,
            Some((v_rule.row(n), &unknown_w)),
            Some((k_rule.row(n), &data_w)),
        );
        let diag_v = v_rule.diagonal(n);
        let diag_k = k_rule.diagonal(n);
        let phi = data.level(n);
        let coinc = &nodes[n].coincidence;
        let next: Vec<f64> = (0..m)
            .map(|i| {
                let (hv, hk) = hist[i];
                (SQRT_4PI * 0.5 * phi[i] + hk + diag_k * coinc[i] * phi[i] - hv) / diag_v
            })
            .collect();
        out.level_mut(n).copy_from_slice(&next);
        unknown_w.push(weighted(&next, &nodes[n].weight));
    }
    Ok(out)
}

/// Neumann trace `γ₁⁻v` of the Dirichlet problem with zero initial data.
pub fn solve_dirichlet(problem: &DirichletProblem<'_>, conventions: &Conventions) -> Result<NeumannTrace> {
    let ops = LayerOperators::new(problem.mesh, conventions);
    solve_dirichlet_with(&ops, &problem.dirichlet)
}

/// Same as [`solve_dirichlet`] with explicitly configured operators.
pub fn solve_dirichlet_with(ops: &LayerOperators<'_>, dirichlet: &BoundaryField) -> Result<NeumannTrace> {
    Ok(NeumannTrace {
        values: march_green(ops, dirichlet, false)?,
    })
}

/// Neumann trace `∂p/∂n` of the adjoint state, which solves the backward heat
/// equation with `p = mismatch` on the exterior circle, `p = 0` on the void and
/// `p(T) = 0`.
///
/// The problem is solved forward in reversed time. When the mismatch does not
/// vanish at `t = T` the returned field is declared singular at the end and
/// stores the cofactor `χ` with `∂p/∂n = χ(t)/√(T - t)`.
pub fn solve_adjoint(mesh: &SpaceTimeMesh, mismatch: &[Vec<f64>], conventions: &Conventions) -> Result<BoundaryField> {
    let n_time = mesh.n_time();
    if mismatch.len() != n_time + 1 || mismatch.iter().any(|r| r.len() != mesh.n_space()) {
        return Err(Error::Config(format!(
            "mismatch must be {}x{}",
            n_time + 1,
            mesh.n_space()
        )));
    }
    let reversed = mesh.time_reversed();
    let reversed_rows: Vec<Vec<f64>> = mismatch.iter().rev().cloned().collect();
    let data = BoundaryField::from_exterior(&reversed, &reversed_rows)?;
    let singular = reversed_rows[0].iter().any(|&v| v != 0.0);
    let ops = LayerOperators::new(&reversed, conventions);
    let rev = march_green(&ops, &data, singular)?;

    let mut out = BoundaryField::zeros_like(mesh);
    for n in 0..=n_time {
        out.level_mut(n).copy_from_slice(rev.level(n_time - n));
    }
    Ok(if singular {
        out.with_singularity(EndpointSingularity::InverseSqrtAtEnd)
    } else {
        out
    })
}

/// Pointwise value of a possibly end-singular trace at forward level `n`;
/// infinite at the singular endpoint itself.
pub fn trace_value(field: &BoundaryField, mesh: &SpaceTimeMesh, n: usize, i: usize) -> f64 {
    let v = field.get(n, i);
    match field.singularity() {
        EndpointSingularity::Smooth => v,
        EndpointSingularity::InverseSqrtAtEnd => v / (mesh.horizon() - mesh.level(n).time).sqrt(),
        EndpointSingularity::InverseSqrtAtStart => v / mesh.level(n).time.sqrt(),
    }
}

/// Single-layer density `q` with `𝒱q = data` on the whole boundary.
pub fn solve_single_layer(ops: &LayerOperators<'_>, data: &BoundaryField) -> Result<BoundaryField> {
    let mesh = ops.mesh();
    if !data.matches(mesh) {
        return Err(Error::Config("single-layer data does not match the mesh".into()));
    }
    if data.level(0).iter().any(|&v| v != 0.0) {
        return Err(Error::Config("single-layer data must vanish at t = 0".into()));
    }
    let n_time = mesh.n_time();
    let h = mesh.step();
    let rule = corrected_rule(n_time, h, RuleVariant::RightEndpoint)?;
    let nodes = NodeArrays::from_mesh(ops);
    let m = mesh.n_nodes();
    let mut q = BoundaryField::zeros_like(mesh);
    let mut q_w: Vec<Vec<f64>> = vec![Vec::new()];
    for n in 1..=n_time {
        let hist = green_history(&nodes, h, n, 0..m, Some((rule.row(n), &q_w)), None);
        let diag = rule.diagonal(n);
        let f = data.level(n);
        let next: Vec<f64> = (0..m).map(|i| (SQRT_4PI * f[i] - hist[i].0) / diag).collect();
        q.level_mut(n).copy_from_slice(&next);
        q_w.push(weighted(&next, &nodes[n].weight));
    }
    Ok(q)
}

/// Exterior flux of the single-layer solution `v = 𝒱q` with `𝒱q = f` on the
/// exterior circle and `0` on the void: `g = s·½q + K'q`, `s` the jump sign.
///
/// This indirect formulation is independent of the direct Green's equation used
/// by [`solve_dirichlet`], so data generated here does not share its
/// discretization error.
pub fn synth_forward(
    mesh: &SpaceTimeMesh,
    exterior_data: &[Vec<f64>],
    conventions: &Conventions,
) -> Result<Vec<Vec<f64>>> {
    let data = BoundaryField::from_exterior(mesh, exterior_data)?;
    let ops = LayerOperators::new(mesh, conventions);
    let q = solve_single_layer(&ops, &data)?;
    exterior_flux_from_density(&ops, &q, conventions.adjoint_jump_sign)
}

pub(crate) fn exterior_flux_from_density(
    ops: &LayerOperators<'_>,
    q: &BoundaryField,
    jump_sign: f64,
) -> Result<Vec<Vec<f64>>> {
    let mesh = ops.mesh();
    let n_time = mesh.n_time();
    let rule = corrected_rule(n_time, mesh.step(), RuleVariant::RightEndpoint)?;
    let nodes = NodeArrays::from_mesh(ops);
    let q_w: Vec<Vec<f64>> = (0..=n_time).map(|n| weighted(q.level(n), &nodes[n].weight)).collect();
    let ext = mesh.component_range(Component::Exterior);
    let mut g = vec![vec![0.0; mesh.n_space()]; n_time + 1];
    for n in 1..=n_time {
        let hist = adjoint_double_history(&nodes, mesh.step(), n, ext.clone(), rule.row(n), &q_w);
        let diag = rule.diagonal(n);
        for (row_i, i) in ext.clone().enumerate() {
            let qn = q.get(n, i);
            g[n][row_i] = jump_sign * 0.5 * qn + (hist[row_i] + diag * nodes[n].coincidence[i] * qn) / SQRT_4PI;
        }
    }
    Ok(g)
}

/// `g + level·‖g‖_∞·η` with `η` i.i.d. standard normal from a seeded generator.
pub fn add_noise(values: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(level >= 0.0) {
        return Err(Error::Config(format!("noise level must be non-negative, got {level}")));
    }
    if level == 0.0 {
        return Ok(values.to_vec());
    }
    let scale = level * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values
        .iter()
        .map(|v| {
            let eta: f64 = StandardNormal.sample(&mut rng);
            v + scale * eta
        })
        .collect())
}

/// [`add_noise`] on row-structured data, with `‖g‖_∞` taken over all rows.
pub fn add_noise_rows(rows: &[Vec<f64>], level: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let noisy = add_noise(&flat, level, seed)?;
    let mut it = noisy.into_iter();
    Ok(rows.iter().map(|r| it.by_ref().take(r.len()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, ShapeCoefficients};
    use crate::potentials::LayerOperators;
    use approx::assert_abs_diff_eq;

    fn linear_data(mesh: &SpaceTimeMesh, slope: f64) -> Vec<Vec<f64>> {
        (0..mesh.n_levels())
            .map(|n| vec![slope * mesh.level(n).time; mesh.n_space()])
            .collect()
    }

    fn moving_mesh(n_time: usize, n_space: usize) -> SpaceTimeMesh {
        let mut c = ShapeCoefficients::circle(0.35, 2, 3, 1.0).unwrap();
        c.set_alpha(0, 1, 0.04);
        c.set_alpha(2, 1, 0.02);
        c.set_beta(1, 2, 0.01);
        build_mesh(&c, 1.0, n_time, n_space).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_trace() {
        let mesh = moving_mesh(6, 12);
        let problem = DirichletProblem::new(&mesh, BoundaryField::zeros_like(&mesh)).unwrap();
        let trace = solve_dirichlet(&problem, &Conventions::default()).unwrap();
        assert!(trace.values.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solver_is_linear() {
        let mesh = moving_mesh(8, 16);
        let conv = Conventions::default();
        let one = solve_dirichlet(
            &DirichletProblem::exterior(&mesh, &linear_data(&mesh, 1.0)).unwrap(),
            &conv,
        )
        .unwrap();
        let two = solve_dirichlet(
            &DirichletProblem::exterior(&mesh, &linear_data(&mesh, 2.0)).unwrap(),
            &conv,
        )
        .unwrap();
        for (a, b) in one.values.values().iter().zip(two.values.values()) {
            assert_abs_diff_eq!(2.0 * a, b, epsilon = 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn causality() {
        let mesh = moving_mesh(10, 12);
        let conv = Conventions::default();
        let base = linear_data(&mesh, 1.0);
        let mut perturbed = base.clone();
        for row in perturbed.iter_mut().skip(7) {
            row.iter_mut().for_each(|v| *v += 0.3);
        }
        let a = solve_dirichlet(&DirichletProblem::exterior(&mesh, &base).unwrap(), &conv).unwrap();
        let b = solve_dirichlet(&DirichletProblem::exterior(&mesh, &perturbed).unwrap(), &conv).unwrap();
        for n in 0..7 {
            assert_eq!(a.values.level(n), b.values.level(n));
        }
        assert_ne!(a.values.level(7), b.values.level(7));
    }

    #[test]
    fn static_mesh_ignores_velocity_terms_bitwise() {
        let c = ShapeCoefficients::circle(0.4, 1, 3, 1.0).unwrap();
        let mesh = build_mesh(&c, 1.0, 8, 16).unwrap();
        let conv = Conventions::default();
        let data = BoundaryField::from_exterior(&mesh, &linear_data(&mesh, 1.0)).unwrap();
        let ops = LayerOperators::new(&mesh, &conv);
        let a = solve_dirichlet_with(&ops, &data).unwrap();
        let b = solve_dirichlet_with(&ops.without_velocity(), &data).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fused_history_matches_operator_sums() {
        // One marching step reassembled from the standalone surface operators.
        let mesh = moving_mesh(5, 10);
        let conv = Conventions::default();
        let rows = linear_data(&mesh, 1.0);
        let data = BoundaryField::from_exterior(&mesh, &rows).unwrap();
        let psi = solve_dirichlet(&DirichletProblem::new(&mesh, data.clone()).unwrap(), &conv)
            .unwrap()
            .values;
        let ops = LayerOperators::new(&mesh, &conv);
        let rule = corrected_rule(5, mesh.step(), RuleVariant::RightEndpoint).unwrap();
        let n = 4;
        let mut lhs = vec![0.0; mesh.n_nodes()];
        for j in 0..=n {
            let v = ops.single(j, n, psi.level(j)).unwrap();
            let k = ops.double(j, n, data.level(j)).unwrap();
            for i in 0..mesh.n_nodes() {
                lhs[i] += rule.weight(n, j) * (v[i] - k[i]) / SQRT_4PI;
            }
        }
        for i in 0..mesh.n_nodes() {
            assert_abs_diff_eq!(lhs[i], 0.5 * data.get(n, i), epsilon = 1e-12);
        }
    }

    #[test]
    fn adjoint_zero_mismatch() {
        let mesh = moving_mesh(6, 10);
        let zero = vec![vec![0.0; 10]; 7];
        let p = solve_adjoint(&mesh, &zero, &Conventions::default()).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert_eq!(p.singularity(), EndpointSingularity::Smooth);
    }

    #[test]
    fn compatible_adjoint_equals_reversed_dirichlet() {
        let mesh = moving_mesh(8, 12);
        let conv = Conventions::default();
        // Mismatch vanishing at t = T.
        let mismatch: Vec<Vec<f64>> = (0..=8)
            .map(|n| {
                let t = mesh.level(n).time;
                (0..12).map(|i| (1.0 - t) * (1.0 + 0.2 * (i as f64).cos())).collect()
            })
            .collect();
        let p = solve_adjoint(&mesh, &mismatch, &conv).unwrap();
        assert_eq!(p.singularity(), EndpointSingularity::Smooth);

        let rev = mesh.time_reversed();
        let rev_rows: Vec<Vec<f64>> = mismatch.iter().rev().cloned().collect();
        let direct = solve_dirichlet(&DirichletProblem::exterior(&rev, &rev_rows).unwrap(), &conv).unwrap();
        for n in 0..=8 {
            for i in 0..24 {
                assert_abs_diff_eq!(p.get(n, i), direct.values.get(8 - n, i), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn incompatible_adjoint_has_finite_cofactor() {
        let c = ShapeCoefficients::circle(0.4, 0, 2, 1.0).unwrap();
        let conv = Conventions::default();
        let mut mid = Vec::new();
        for nt in [10, 20, 40] {
            let mesh = build_mesh(&c, 1.0, nt, 24).unwrap();
            let mismatch = vec![vec![1.0; 24]; nt + 1];
            let p = solve_adjoint(&mesh, &mismatch, &conv).unwrap();
            assert_eq!(p.singularity(), EndpointSingularity::InverseSqrtAtEnd);
            let ext = mesh.component_range(Component::Exterior).start;
            assert_abs_diff_eq!(p.get(nt, ext), 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-14);
            assert!(p.values().iter().all(|v| v.is_finite()));
            mid.push(p.get(nt / 2, ext));
        }
        let d1 = (mid[1] - mid[0]).abs();
        let d2 = (mid[2] - mid[1]).abs();
        assert!(d2 < 0.8 * d1, "{mid:?}");
    }

    #[test]
    fn synth_zero_and_linear() {
        let mesh = moving_mesh(6, 12);
        let conv = Conventions::default();
        let zero = vec![vec![0.0; 12]; 7];
        assert!(synth_forward(&mesh, &zero, &conv)
            .unwrap()
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let g1 = synth_forward(&mesh, &linear_data(&mesh, 1.0), &conv).unwrap();
        let g3 = synth_forward(&mesh, &linear_data(&mesh, 3.0), &conv).unwrap();
        for (a, b) in g1.iter().flatten().zip(g3.iter().flatten()) {
            assert_abs_diff_eq!(3.0 * a, b, epsilon = 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn noise_contract() {
        let g: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.01).sin()).collect();
        assert_eq!(add_noise(&g, 0.0, 3).unwrap(), g);
        assert_eq!(add_noise(&g, 0.01, 7).unwrap(), add_noise(&g, 0.01, 7).unwrap());
        assert_ne!(add_noise(&g, 0.01, 7).unwrap(), add_noise(&g, 0.01, 8).unwrap());
        assert!(add_noise(&g, -0.1, 1).is_err());

        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let noisy = add_noise(&g, 0.01, 11).unwrap();
        let z: Vec<f64> = noisy.iter().zip(&g).map(|(a, b)| (a - b) / sup).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 0.01).abs() / 0.01 < 3.0 / (z.len() as f64).sqrt(), "sd {sd}");
    }
}
