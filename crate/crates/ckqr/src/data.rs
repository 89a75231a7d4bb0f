//! Regression data and fit results.

use crate::error::{Error, Result};
use crate::fmt::fmt_sig;
use crate::linalg::{full_column_rank, Mat};
use std::io::{BufRead, Write};

/// Response vector plus design matrix, first column conventionally all ones.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>, // row-major n×d
    n: usize,
    d: usize,
    names: Vec<String>,
}

impl Dataset {
    /// Validates finiteness, n > d ≥ 1 and full column rank
    /// (pivoted QR, tolerance 1e-10 relative to the largest pivot).
    pub fn new(y: Vec<f64>, x: Vec<f64>, d: usize) -> Result<Dataset> {
        let names = (0..d)
            .map(|j| {
                if j == 0 {
                    "intercept".into()
                } else {
                    format!("x{j}")
                }
            })
            .collect();
        Dataset::with_names(y, x, d, names)
    }

    pub fn with_names(y: Vec<f64>, x: Vec<f64>, d: usize, names: Vec<String>) -> Result<Dataset> {
        let n = y.len();
        if d < 1 || n <= d {
            return Err(Error::invalid(format!("need n > d >= 1, got n={n}, d={d}")));
        }
        if x.len() != n * d {
            return Err(Error::invalid(
                "design matrix shape does not match response length",
            ));
        }
        if names.len() != d {
            return Err(Error::invalid("column name count does not match d"));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in data"));
        }
        if !full_column_rank(&x, n, d, 1e-10) {
            return Err(Error::RankDeficient);
        }
        Ok(Dataset { y, x, n, d, names })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn col_names(&self) -> &[String] {
        &self.names
    }

    /// Column means of the design matrix.
    pub fn x_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                m[j] += v;
            }
        }
        for v in &mut m {
            *v /= self.n as f64;
        }
        m
    }

    /// Mean Euclidean row norm; the scale behind gradient tolerances.
    pub fn mean_row_norm(&self) -> f64 {
        let s: f64 = (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        s / self.n as f64
    }

    /// Residuals y − X b.
    pub fn residuals(&self, b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.y[i] - dot(self.row(i), b))
            .collect()
    }

    /// Sample moment matrix (1/n) Σ x_i x_i'.
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.d);
        for i in 0..self.n {
            g.add_outer(self.row(i), 1.0);
        }
        g.scale(1.0 / self.n as f64);
        g
    }

    /// New dataset from the given row indices (with repetition allowed).
    /// Rank re-validated; a degenerate resample surfaces as `RankDeficient`.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let mut y = Vec::with_capacity(idx.len());
        let mut x = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            y.push(self.y[i]);
            x.extend_from_slice(self.row(i));
        }
        Dataset::with_names(y, x, self.d, self.names.clone())
    }

    /// Read a dataset from CSV: header row, a column named `y`, every other
    /// column a covariate. An intercept column of ones is prepended unless a
    /// column named `intercept` already exists.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Dataset> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty file".into()))?
            .map_err(Error::Io)?;
        let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let y_pos = cols
            .iter()
            .position(|c| c == "y")
            .ok_or_else(|| Error::Csv("missing required column 'y'".into()))?;
        let has_intercept = cols.iter().any(|c| c == "intercept");
        let cov_pos: Vec<usize> = (0..cols.len()).filter(|&j| j != y_pos).collect();

        let mut y = Vec::new();
        let mut x = Vec::new();
        let d = cov_pos.len() + usize::from(!has_intercept);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            if fields.len() != cols.len() {
                return Err(Error::Csv(format!(
                    "row {}: expected {} fields, found {}",
                    lineno + 2,
                    cols.len(),
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {}: bad number '{s}'", lineno + 2)))
            };
            y.push(parse(fields[y_pos])?);
            if !has_intercept {
                x.push(1.0);
            }
            for &j in &cov_pos {
                x.push(parse(fields[j])?);
            }
        }
        let mut names = Vec::with_capacity(d);
        if !has_intercept {
            names.push("intercept".to_string());
        }
        for &j in &cov_pos {
            names.push(cols[j].clone());
        }
        Dataset::with_names(y, x, d, names)
    }

    /// Write as CSV with 17 significant digits so a read-back reproduces the
    /// same fit bit for bit.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "y")?;
        for name in &self.names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for i in 0..self.n {
            write!(w, "{}", fmt_sig(self.y[i], 17))?;
            for v in self.row(i) {
                write!(w, ",{}", fmt_sig(*v, 17))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A fitted coefficient vector at (τ, h) with convergence diagnostics.
/// `h = 0` marks an exact (unsmoothed) fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub h: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hessian: Option<Mat>,
}

impl FitResult {
    /// FitResult as a flat JSON object, floats at 17 significant digits.
    pub fn to_json(&self) -> String {
        let beta: Vec<String> = self.beta.iter().map(|b| fmt_sig(*b, 17)).collect();
        format!(
            "{{\"beta\":[{}],\"tau\":{},\"h\":{},\"objective\":{},\"converged\":{},\"iterations\":{}}}",
            beta.join(","),
            fmt_sig(self.tau, 17),
            fmt_sig(self.h, 17),
            fmt_sig(self.objective, 17),
            self.converged,
            self.iterations
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0], 1).unwrap()
    }

    #[test]
    fn validates_shape_and_rank() {
        assert!(Dataset::new(vec![1.0, 2.0], vec![1.0, 1.0], 1).is_ok());
        // n == d rejected
        assert!(Dataset::new(vec![1.0], vec![1.0], 1).is_err());
        // duplicate column
        let x = vec![1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 4.0, 4.0, 1.0, 5.0, 5.0];
        match Dataset::new(vec![1.0, 2.0, 3.0, 4.0], x, 3) {
            Err(Error::RankDeficient) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
        // non-finite
        assert!(Dataset::new(vec![1.0, f64::NAN, 3.0], vec![1.0, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        let ds = Dataset::new(
            vec![0.25, -1.5, 3.125, 2.0],
            vec![1.0, 0.3, 1.0, -0.7, 1.0, 1.9, 1.0, 0.11],
            2,
        )
        .unwrap();
        ds.to_csv(&mut buf).unwrap();
        let back = Dataset::from_csv(&buf[..]).unwrap();
        assert_eq!(back.n(), 4);
        assert_eq!(back.d(), 2);
        assert_eq!(back.y(), ds.y());
        for i in 0..4 {
            assert_eq!(back.row(i), ds.row(i));
        }
    }

    #[test]
    fn csv_auto_intercept() {
        let text = "y,x1\n1.0,2.0\n2.0,3.0\n3.5,4.0\n";
        let ds = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
        assert_eq!(ds.col_names()[0], "intercept");

        let text = "y,intercept,x1\n1.0,1.0,2.0\n2.0,1.0,3.0\n3.5,1.0,4.0\n";
        let ds = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.row(1), &[1.0, 3.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::from_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("y,x\n1\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("y,x\n1,zap\n".as_bytes()).is_err());
    }

    #[test]
    fn fit_result_json_shape() {
        let fit = FitResult {
            beta: vec![2.0, -0.5],
            tau: 0.5,
            h: 0.25,
            objective: 0.125,
            grad_norm: 1e-12,
            iterations: 4,
            converged: true,
            hessian: None,
        };
        let json = fit.to_json();
        assert!(json.starts_with("{\"beta\":[2"));
        for key in [
            "\"tau\":",
            "\"h\":",
            "\"objective\":",
            "\"converged\":true",
            "\"iterations\":4",
        ] {
            assert!(json.contains(key), "{json}");
        }
        // values round-trip at 17 significant digits
        assert!(json.contains(&crate::fmt::fmt_sig(0.125, 17)));
    }

    #[test]
    fn residuals_and_means() {
        let ds = toy();
        assert_eq!(ds.residuals(&[2.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(ds.x_mean(), vec![1.0]);
        assert!((ds.mean_row_norm() - 1.0).abs() < 1e-15);
    }
}
