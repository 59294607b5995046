//! Transfer of exterior data between space-time grids: trigonometric
//! interpolation in angle, cubic Lagrange interpolation in time.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Values of the trigonometric interpolant of `row` (samples at `2πi/M`) at
/// the `n` angles `2πi/n`.
pub fn resample_angle(row: &[f64], n: usize) -> Vec<f64> {
    let m = row.len();
    if m == n {
        return row.to_vec();
    }
    let mut spectrum: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut spectrum);
    let scale = 1.0 / m as f64;
    (0..n)
        .map(|i| {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let mut v = spectrum[0].re * scale;
            for k in 1..=m / 2 {
                let c = spectrum[k] * scale;
                // The Nyquist mode of an even grid is split between ±k.
                let weight = if 2 * k == m { 1.0 } else { 2.0 };
                v += weight * (c.re * (k as f64 * phi).cos() - c.im * (k as f64 * phi).sin());
            }
            v
        })
        .collect()
}

/// Cubic Lagrange interpolation of equispaced samples on `[0, T]` at `t`,
/// using the four nearest nodes.
pub fn interpolate_time(values: &[f64], horizon: f64, t: f64) -> f64 {
    let n = values.len() - 1;
    if n < 3 {
        let x = t / horizon * n as f64;
        let j = (x.floor() as usize).min(n.saturating_sub(1));
        let frac = x - j as f64;
        return if n == 0 {
            values[0]
        } else {
            values[j] * (1.0 - frac) + values[j + 1] * frac
        };
    }
    let x = t / horizon * n as f64;
    let start = (x.floor() as isize - 1).clamp(0, n as isize - 3) as usize;
    let mut out = 0.0;
    for a in 0..4 {
        let xa = (start + a) as f64;
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                let xb = (start + b) as f64;
                l *= (x - xb) / (xa - xb);
            }
        }
        out += l * values[start + a];
    }
    out
}

/// Resample `(N_t+1) × N_x` rows on `[0, T]` to `(n_time+1) × n_space`.
pub fn resample_rows(rows: &[Vec<f64>], horizon: f64, n_time: usize, n_space: usize) -> Result<Vec<Vec<f64>>> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
        return Err(Error::Config("data rows must be non-empty and rectangular".into()));
    }
    let in_time = rows.len() - 1;
    let spatial: Vec<Vec<f64>> = rows.iter().map(|r| resample_angle(r, n_space)).collect();
    if in_time == n_time {
        return Ok(spatial);
    }
    Ok((0..=n_time)
        .map(|n| {
            let t = horizon * n as f64 / n_time as f64;
            (0..n_space)
                .map(|i| {
                    let column: Vec<f64> = spatial.iter().map(|r| r[i]).collect();
                    interpolate_time(&column, horizon, t)
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trig_polynomials_are_reproduced() {
        let f = |p: f64| 0.3 + (2.0 * p).cos() - 0.5 * (3.0 * p).sin();
        let row: Vec<f64> = (0..16)
            .map(|i| f(2.0 * std::f64::consts::PI * i as f64 / 16.0))
            .collect();
        for n in [9, 16, 40] {
            let out = resample_angle(&row, n);
            for (i, v) in out.iter().enumerate() {
                assert_abs_diff_eq!(*v, f(2.0 * std::f64::consts::PI * i as f64 / n as f64), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cubics_are_reproduced_in_time() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let samples: Vec<f64> = (0..=7).map(|n| f(n as f64 / 7.0)).collect();
        for t in [0.0, 0.03, 0.5, 0.97, 1.0] {
            assert_abs_diff_eq!(interpolate_time(&samples, 1.0, t), f(t), epsilon = 1e-13);
        }
    }

    #[test]
    fn identity_on_equal_grids() {
        let rows: Vec<Vec<f64>> = (0..5).map(|n| (0..6).map(|i| (n * i) as f64).collect()).collect();
        assert_eq!(resample_rows(&rows, 1.0, 4, 6).unwrap(), rows);
    }
}
