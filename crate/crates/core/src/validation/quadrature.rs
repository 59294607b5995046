//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

fn gk15<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> Panel<N> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for d in 0..N {
        k[d] = WGK[7] * fc[d];
        g[d] = WG[3] * fc[d];
    }
    for j in 0..7 {
        let x = hl * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        for d in 0..N {
            let s = f1[d] + f2[d];
            k[d] += WGK[j] * s;
            if j % 2 == 1 {
                g[d] += WG[j / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..N {
        k[d] *= hl;
        g[d] *= hl;
        error = error.max((k[d] - g[d]).abs());
    }
    Panel { a, b, value: k, error }
}

/// `∫_a^b f` to absolute accuracy `tol` in the max norm over components,
/// bisecting the panel with the largest error estimate. Stops after
/// `max_panels` panels with the best available estimate.
pub fn integrate<const N: usize>(f: impl Fn(f64) -> [f64; N], a: f64, b: f64, tol: f64, max_panels: usize) -> [f64; N] {
    if a == b {
        return [0.0; N];
    }
    let mut panels = vec![gk15(&f, a, b)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= tol || panels.len() >= max_panels {
            break;
        }
        let (worst, _) = panels.iter().enumerate().fold(
            (0, -1.0),
            |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) },
        );
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            panels.push(p);
            break;
        }
        panels.push(gk15(&f, p.a, m));
        panels.push(gk15(&f, m, p.b));
    }
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = [0.0; N];
    for p in &panels {
        for d in 0..N {
            out[d] += p.value[d];
        }
    }
    out
}

/// `∫_0^{2π} f` for a smooth periodic `f` by trapezoid sums, doubling the
/// node count until successive sums agree to `tol`.
pub fn periodic_trapezoid<const N: usize>(f: impl Fn(f64) -> [f64; N], tol: f64) -> [f64; N] {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut n = 16usize;
    let mut sum = [0.0; N];
    for i in 0..n {
        let v = f(two_pi * i as f64 / n as f64);
        for d in 0..N {
            sum[d] += v[d];
        }
    }
    let mut prev: [f64; N] = sum.map(|s| s * two_pi / n as f64);
    loop {
        // Add the midpoints of the current grid.
        for i in 0..n {
            let v = f(two_pi * (i as f64 + 0.5) / n as f64);
            for d in 0..N {
                sum[d] += v[d];
            }
        }
        n *= 2;
        let next: [f64; N] = sum.map(|s| s * two_pi / n as f64);
        let diff = next.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= tol || n >= 1 << 16 {
            return next;
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_exact_on_one_panel() {
        let v = integrate(|x| [x.powi(20), 1.0], -1.0, 1.0, 1e-15, 1);
        assert_abs_diff_eq!(v[0], 2.0 / 21.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn periodic_bessel_integral() {
        // ∫ exp(2 cos θ) dθ = 2π I₀(2)
        let v = periodic_trapezoid(|t| [(2.0 * t.cos()).exp()], 1e-14);
        assert_abs_diff_eq!(
            v[0],
            2.0 * std::f64::consts::PI * 2.279_585_302_336_067_3,
            epsilon = 1e-13
        );
    }

    #[test]
    fn peaked_and_endpoint_singular() {
        let v = integrate(
            |x| [(-(x - 0.3f64).powi(2) / 1e-4).exp(), x.sqrt()],
            0.0,
            1.0,
            1e-12,
            2000,
        );
        assert_abs_diff_eq!(v[0], (std::f64::consts::PI * 1e-4).sqrt(), epsilon = 1e-11);
        assert_abs_diff_eq!(v[1], 2.0 / 3.0, epsilon = 1e-11);
    }
}
