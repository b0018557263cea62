//! Momentum-transfer dependence of the squared T-matrix kernel `|t̃(q)|²`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};

/// Model for `|t̃(q)|²`, taken independent of the collision energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TMatrixModel {
    /// `|t̃(q)|² = t0²`.
    Constant { t0: f64 },
    /// `|t̃(q)|² = t0² exp(-σ² q²)`.
    GaussianKernel { t0: f64, sigma: f64 },
    /// Monotone cubic interpolation through `(q, |t̃(q)|²)` samples.
    Tabulated(Table),
}

impl TMatrixModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            TMatrixModel::Constant { t0 } => non_negative("t0", *t0),
            TMatrixModel::GaussianKernel { t0, sigma } => {
                non_negative("t0", *t0)?;
                positive("sigma", *sigma)
            }
            TMatrixModel::Tabulated(table) => table.validate(),
        }
    }

    /// `|t̃(q)|²`; `None` outside a table's range.
    pub fn squared(&self, q: f64) -> Option<f64> {
        match self {
            TMatrixModel::Constant { t0 } => Some(t0 * t0),
            TMatrixModel::GaussianKernel { t0, sigma } => Some(t0 * t0 * (-sigma * sigma * q * q).exp()),
            TMatrixModel::Tabulated(table) => table.eval(q),
        }
    }
}

/// Samples of `|t̃(q)|²` with Fritsch–Carlson slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    q: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let (q, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let slopes = monotone_slopes(&q, &values);
        let table = Self { q, values, slopes };
        table.validate()?;
        Ok(table)
    }

    /// Two whitespace-separated columns `q |t̃(q)|²`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: format!("expected two columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    reason: format!("`{s}`: {e}"),
                })
            };
            points.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(points)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter {
            name: "tmatrix.file",
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.len() < 4 {
            return Err(Error::InvalidParameter {
                name: "tabulated",
                reason: format!("need at least 4 points, got {}", self.q.len()),
            });
        }
        for (&q, &v) in self.q.iter().zip(&self.values) {
            non_negative("tabulated q", q)?;
            non_negative("tabulated |t|^2", v)?;
        }
        if self.q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "tabulated",
                reason: "q values must be strictly increasing".into(),
            });
        }
        Ok(())
    }

    pub fn q_min(&self) -> f64 {
        self.q[0]
    }

    pub fn q_max(&self) -> f64 {
        *self.q.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.q
    }

    /// Cubic Hermite evaluation; no extrapolation.
    pub fn eval(&self, q: f64) -> Option<f64> {
        if !(q >= self.q_min() && q <= self.q_max()) {
            return None;
        }
        let k = match self.q.partition_point(|&x| x <= q) {
            0 => 0,
            i if i >= self.q.len() => self.q.len() - 2,
            i => i - 1,
        };
        let h = self.q[k + 1] - self.q[k];
        let t = (q - self.q[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1])
    }
}

// Fritsch–Carlson limited slopes: monotone on every interval, so the
// interpolant stays between neighbouring samples and never goes negative.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let secants: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for k in 1..n - 1 {
        m[k] = if secants[k - 1] * secants[k] <= 0.0 {
            0.0
        } else {
            0.5 * (secants[k - 1] + secants[k])
        };
    }
    for k in 0..n - 1 {
        if secants[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / secants[k];
        let b = m[k + 1] / secants[k];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[k] = tau * a * secants[k];
            m[k + 1] = tau * b * secants[k];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_two_columns_with_comments() {
        let text = "# q  |t|^2\n0 1\n0.5 0.8\n\n1.0 0.5\n  # trailing\n2.0 0.1\n";
        let t = Table::parse(text).unwrap();
        assert_eq!(t.knots(), &[0.0, 0.5, 1.0, 2.0]);
        assert_eq!(t.eval(0.5), Some(0.8));
        assert_eq!(t.eval(2.5), None);
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = Table::parse("0 1\n1 2 3\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                reason: "expected two columns, found 3".into()
            }
        );
        assert!(matches!(Table::parse("0 1\n1 x\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn table_invariants() {
        assert!(Table::new(vec![(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(Table::new(vec![(0.0, 1.0), (1.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(Table::new(vec![(0.0, 1.0), (1.0, -1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn interpolant_is_non_negative_on_steep_data() {
        let t = Table::new(vec![(0.0, 5.0), (1.0, 5.0), (1.1, 0.0), (3.0, 0.0), (3.2, 4.0)]).unwrap();
        for k in 0..=3200 {
            let q = k as f64 * 1e-3;
            let v = t.eval(q).unwrap();
            assert!(v >= -1e-15, "q={q}: {v}");
            assert!(v <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn reproduces_cubic_free_linear_data() {
        let t = Table::new((0..6).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect()).unwrap();
        for k in 0..50 {
            let q = k as f64 * 0.1;
            assert!((t.eval(q).unwrap() - (2.0 * q + 1.0)).abs() < 1e-12);
        }
    }
}
