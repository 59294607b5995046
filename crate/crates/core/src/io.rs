//! File formats.
//!
//! - Boundary data: CSV `t,phi,value`, one row per node, time-major, with
//!   `t = T·n/N_t` and `phi = 2πi/N_x`.
//! - Data metadata: TOML sidecar [`DataMetadata`].
//! - Shape coefficients: TOML with `n_legendre`, `n_fourier`, `horizon`, and
//!   `rows`, one array per Legendre degree in the column order of
//!   [`ShapeCoefficients`].
//! - Tube surfaces: CSV `t,phi,x,y`, or legacy-VTK polydata whose points are
//!   `(x, y, t)`, with one closed polyline per time level and quads between
//!   consecutive levels.
//!
//! Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{radius_grid, ShapeCoefficients};
use crate::inverse::InversionHistory;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingData(path.to_path_buf()));
    }
    Ok(std::fs::read_to_string(path)?)
}

fn context(path: &Path) -> String {
    path.display().to_string()
}

pub fn boundary_csv(rows: &[Vec<f64>], horizon: f64) -> String {
    let n_time = rows.len().saturating_sub(1).max(1);
    let mut out = String::from("t,phi,value\n");
    for (n, row) in rows.iter().enumerate() {
        let t = horizon * (n as f64 / n_time as f64);
        for (i, v) in row.iter().enumerate() {
            let phi = TWO_PI * i as f64 / row.len() as f64;
            writeln!(out, "{t},{phi},{v}").expect("string write");
        }
    }
    out
}

pub fn write_boundary_csv(path: &Path, rows: &[Vec<f64>], horizon: f64) -> Result<()> {
    std::fs::write(path, boundary_csv(rows, horizon))?;
    Ok(())
}

/// Boundary samples on a `(N_t + 1) × N_x` grid over `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTable {
    pub horizon: f64,
    pub rows: Vec<Vec<f64>>,
}

impl BoundaryTable {
    pub fn n_time(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn n_space(&self) -> usize {
        self.rows[0].len()
    }
}

pub fn parse_boundary_csv(text: &str, name: &str) -> Result<BoundaryTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(name, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "phi", "value"] {
        return Err(Error::parse(
            name,
            format!(
                "expected header t,phi,value, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(name, e))?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .ok_or_else(|| Error::parse(name, format!("record {} has too few fields", line + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(name, format!("record {}: {e}", line + 1)))
        };
        let (t, value) = (field(0)?, field(2)?);
        field(1)?;
        if times.last() != Some(&t) {
            if times.last().is_some_and(|&last| t < last) {
                return Err(Error::parse(
                    name,
                    format!("record {}: times must be non-decreasing", line + 1),
                ));
            }
            times.push(t);
            rows.push(Vec::new());
        }
        rows.last_mut().expect("row opened").push(value);
    }
    if rows.len() < 2 {
        return Err(Error::parse(name, "need at least two time levels"));
    }
    let n_space = rows[0].len();
    if rows.iter().any(|r| r.len() != n_space) {
        return Err(Error::parse(name, "every time level needs the same number of angles"));
    }
    let horizon = *times.last().expect("non-empty");
    let n_time = rows.len() - 1;
    for (n, &t) in times.iter().enumerate() {
        let expected = horizon * (n as f64 / n_time as f64);
        if (t - expected).abs() > 1e-9 * horizon {
            return Err(Error::parse(
                name,
                format!("time levels are not equispaced: level {n} at {t}"),
            ));
        }
    }
    Ok(BoundaryTable { horizon, rows })
}

pub fn read_boundary_csv(path: &Path) -> Result<BoundaryTable> {
    parse_boundary_csv(&read_text(path)?, &context(path))
}

/// Sidecar describing a synthetic data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataMetadata {
    pub horizon: f64,
    pub exterior_radius: f64,
    pub n_time: usize,
    pub n_space: usize,
    pub synth_n_time: usize,
    pub synth_n_space: usize,
    pub seed: u64,
    pub noise_level: f64,
    /// Where the generating shape came from.
    pub truth: String,
}

impl DataMetadata {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, toml::to_string(self).expect("metadata serializes"))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        toml::from_str(&read_text(path)?).map_err(|e| Error::parse(context(path), e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientFile {
    n_legendre: usize,
    n_fourier: usize,
    horizon: f64,
    rows: Vec<Vec<f64>>,
}

pub fn coefficients_to_toml(c: &ShapeCoefficients) -> String {
    let file = CoefficientFile {
        n_legendre: c.n_legendre(),
        n_fourier: c.n_fourier(),
        horizon: c.horizon(),
        rows: (0..c.n_rows()).map(|l| c.row(l).to_vec()).collect(),
    };
    toml::to_string(&file).expect("coefficients serialize")
}

pub fn coefficients_from_toml(text: &str, name: &str) -> Result<ShapeCoefficients> {
    let file: CoefficientFile = toml::from_str(text).map_err(|e| Error::parse(name, e))?;
    if file.rows.len() != file.n_legendre + 1 || file.rows.iter().any(|r| r.len() != 2 * file.n_fourier) {
        return Err(Error::parse(
            name,
            format!(
                "expected {} rows of {} coefficients",
                file.n_legendre + 1,
                2 * file.n_fourier
            ),
        ));
    }
    ShapeCoefficients::from_flat(file.n_legendre, file.n_fourier, file.horizon, file.rows.concat())
}

pub fn write_coefficients(path: &Path, c: &ShapeCoefficients) -> Result<()> {
    std::fs::write(path, coefficients_to_toml(c))?;
    Ok(())
}

pub fn read_coefficients(path: &Path) -> Result<ShapeCoefficients> {
    coefficients_from_toml(&read_text(path)?, &context(path))
}

pub fn write_history(path: &Path, history: &InversionHistory) -> Result<()> {
    std::fs::write(path, history.to_csv())?;
    Ok(())
}

fn tube_points(c: &ShapeCoefficients, n_time: usize, n_space: usize) -> Result<Vec<(f64, f64, f64, f64)>> {
    let radii = radius_grid(c, n_time, n_space)?;
    let mut points = Vec::with_capacity((n_time + 1) * n_space);
    for (n, row) in radii.iter().enumerate() {
        let t = c.horizon() * n as f64 / n_time as f64;
        for (i, &w) in row.iter().enumerate() {
            let phi = TWO_PI * i as f64 / n_space as f64;
            points.push((t, phi, w * phi.cos(), w * phi.sin()));
        }
    }
    Ok(points)
}

pub fn tube_csv(c: &ShapeCoefficients, n_time: usize, n_space: usize) -> Result<String> {
    let mut out = String::from("t,phi,x,y\n");
    for (t, phi, x, y) in tube_points(c, n_time, n_space)? {
        writeln!(out, "{t},{phi},{x},{y}").expect("string write");
    }
    Ok(out)
}

pub fn tube_vtk(c: &ShapeCoefficients, n_time: usize, n_space: usize, title: &str) -> Result<String> {
    let points = tube_points(c, n_time, n_space)?;
    let m = n_space;
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA").expect("string write");
    writeln!(out, "POINTS {} double", points.len()).expect("string write");
    for (t, _, x, y) in &points {
        writeln!(out, "{x} {y} {t}").expect("string write");
    }
    writeln!(out, "LINES {} {}", n_time + 1, (n_time + 1) * (m + 2)).expect("string write");
    for n in 0..=n_time {
        let ring: Vec<String> = (0..=m).map(|i| (n * m + i % m).to_string()).collect();
        writeln!(out, "{} {}", m + 1, ring.join(" ")).expect("string write");
    }
    writeln!(out, "POLYGONS {} {}", n_time * m, n_time * m * 5).expect("string write");
    for n in 0..n_time {
        for i in 0..m {
            let j = (i + 1) % m;
            let (a, b) = (n * m, (n + 1) * m);
            writeln!(out, "4 {} {} {} {}", a + i, a + j, b + j, b + i).expect("string write");
        }
    }
    Ok(out)
}

/// Write `<stem>.csv` and `<stem>.vtk` tube surfaces into `dir`.
pub fn write_tube(dir: &Path, stem: &str, c: &ShapeCoefficients, n_time: usize, n_space: usize) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), tube_csv(c, n_time, n_space)?)?;
    std::fs::write(dir.join(format!("{stem}.vtk")), tube_vtk(c, n_time, n_space, stem)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_csv_round_trips_bitwise() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|n| (0..5).map(|i| (n as f64 * 0.1 + i as f64).sin() / 3.0).collect())
            .collect();
        let table = parse_boundary_csv(&boundary_csv(&rows, 0.7), "test").unwrap();
        assert_eq!(table.rows, rows);
        assert_eq!(table.horizon, 0.7);
        assert_eq!((table.n_time(), table.n_space()), (3, 5));
    }

    #[test]
    fn boundary_csv_rejects_ragged_and_bad_header() {
        assert!(parse_boundary_csv("t,phi,v\n0,0,1\n1,0,1\n", "x").is_err());
        assert!(parse_boundary_csv("t,phi,value\n0,0,1\n0,3,1\n1,0,1\n", "x").is_err());
        assert!(parse_boundary_csv("t,phi,value\n0,0,1\n", "x").is_err());
        assert!(parse_boundary_csv("t,phi,value\n0,0,1\n0.2,0,1\n1,0,1\n", "x").is_err());
    }

    #[test]
    fn coefficients_round_trip() {
        let mut c = ShapeCoefficients::circle(0.4, 2, 3, 1.5).unwrap();
        c.set_beta(2, 1, -0.013);
        c.set_alpha(3, 2, 1.0 / 3.0);
        let back = coefficients_from_toml(&coefficients_to_toml(&c), "test").unwrap();
        assert_eq!(back, c);
        assert!(coefficients_from_toml(
            "n_legendre = 1\nn_fourier = 1\nhorizon = 1.0\nrows = [[1.0, 0.0]]\n",
            "x"
        )
        .is_err());
    }

    #[test]
    fn tube_of_circle_lies_on_circle() {
        let c = ShapeCoefficients::circle(0.4, 1, 2, 1.0).unwrap();
        let text = tube_csv(&c, 3, 8).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,phi,x,y");
        assert_eq!(lines.len(), 1 + 4 * 8);
        for line in &lines[1..] {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert!((v[2].hypot(v[3]) - 0.4).abs() < 1e-12);
        }
        let vtk = tube_vtk(&c, 3, 8, "circle").unwrap();
        assert!(vtk.contains("POINTS 32 double"));
        assert!(vtk.contains("LINES 4 40"));
        assert!(vtk.contains("POLYGONS 24 120"));
    }
}
