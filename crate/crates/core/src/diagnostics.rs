//! Complete-positivity checks at the coefficient and channel level.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigenvalues, OperatorMatrix, C64};
use crate::linalg::expm;
use crate::master_equation::{superoperator_matrix, GeneratorSpec};

pub use crate::integrator::truncation_health;

/// Relative tolerance separating saturation from strict inequality.
pub const CP_REL_TOL: f64 = 1e-10;
/// Largest dimension for which a Choi matrix is assembled.
pub const CHOI_DIM_LIMIT: usize = 8;
/// Eigenvalues above `-PSD_FLOOR` count as non-negative.
pub const PSD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Saturated,
    StrictlySatisfied,
    Violated,
}

/// `D_pp·D_qq` against `(ħγ/2)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    /// `lhs - rhs`.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CPReport {
    pub coefficient_check: CoefficientCheck,
    pub choi_min_eig: Option<f64>,
    pub dim_used: Option<usize>,
}

impl CPReport {
    pub fn with_choi(mut self, min_eig: f64, dim: usize) -> Self {
        self.choi_min_eig = Some(min_eig);
        self.dim_used = Some(dim);
        self
    }
}

impl fmt::Display for CPReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.coefficient_check;
        writeln!(f, "complete positivity")?;
        writeln!(f, "  D_pp*D_qq      = {:.10e}", c.lhs)?;
        writeln!(f, "  (hbar*gamma/2)^2 = {:.10e}", c.rhs)?;
        writeln!(f, "  slack          = {:.3e}", c.slack)?;
        writeln!(f, "  verdict        = {:?}", c.verdict)?;
        match (self.choi_min_eig, self.dim_used) {
            (Some(e), Some(d)) => writeln!(f, "  choi min eig   = {e:.3e} (dim {d})"),
            _ => writeln!(f, "  choi min eig   = n/a"),
        }
    }
}

/// Verdict on `D_pp D_qq ≥ ħ²γ²/4` for raw coefficients.
pub fn cp_condition_raw(d_pp: f64, d_qq: f64, gamma: f64, hbar: f64) -> CPReport {
    let lhs = d_pp * d_qq;
    let rhs = (hbar * gamma / 2.0).powi(2);
    let slack = lhs - rhs;
    let tol = CP_REL_TOL * lhs.max(rhs).max(f64::MIN_POSITIVE);
    let verdict = if slack.abs() <= tol {
        Verdict::Saturated
    } else if slack > 0.0 {
        Verdict::StrictlySatisfied
    } else {
        Verdict::Violated
    };
    CPReport {
        coefficient_check: CoefficientCheck {
            lhs,
            rhs,
            verdict,
            slack,
        },
        choi_min_eig: None,
        dim_used: None,
    }
}

pub fn cp_condition(coeffs: &CoefficientSet) -> CPReport {
    cp_condition_raw(coeffs.d_pp, coeffs.d_qq, coeffs.gamma, coeffs.hbar)
}

/// Propagator `exp(tS)` on column-stacked density matrices.
pub fn propagator(spec: &GeneratorSpec, t: f64) -> Result<DMatrix<C64>> {
    let s = superoperator_matrix(spec)?;
    Ok(expm(&(s * C64::new(t, 0.0))))
}

/// Choi matrix `C = Σ_ij E_ij ⊗ Φ_t(E_ij)` of the channel `Φ_t = exp(t·L)`,
/// normalized so that `Tr C = dim` for trace-preserving channels.
///
/// Entry `((i, a), (j, b))`, flattened as `(i·dim + a, j·dim + b)`, is
/// `Φ_t(E_ij)[a, b]`.
pub fn choi_matrix(spec: &GeneratorSpec, t: f64) -> Result<OperatorMatrix> {
    let dim = spec.basis.dim;
    if dim > CHOI_DIM_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim,
            limit: CHOI_DIM_LIMIT,
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be finite and >= 0, got {t}"),
        });
    }
    let prop = propagator(spec, t)?;
    Ok(choi_from_propagator(&prop, dim))
}

pub fn choi_from_propagator(prop: &DMatrix<C64>, dim: usize) -> OperatorMatrix {
    let mut choi = DMatrix::zeros(dim * dim, dim * dim);
    for j in 0..dim {
        for i in 0..dim {
            // Φ(E_ij) is column i + dim·j of the propagator
            let image = prop.column(i + dim * j);
            for b in 0..dim {
                for a in 0..dim {
                    choi[(i * dim + a, j * dim + b)] = image[a + dim * b];
                }
            }
        }
    }
    OperatorMatrix::from_matrix_unchecked(choi)
}

/// Smallest eigenvalue of the Hermitian part of a Choi matrix.
pub fn choi_min_eigenvalue(choi: &OperatorMatrix) -> f64 {
    hermitian_eigenvalues(choi)[0]
}

/// Minimum Choi eigenvalue at each of `times`.
pub fn choi_scan(spec: &GeneratorSpec, times: &[f64]) -> Result<Vec<f64>> {
    let dim = spec.basis.dim;
    if dim > CHOI_DIM_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim,
            limit: CHOI_DIM_LIMIT,
        });
    }
    let s = superoperator_matrix(spec)?;
    Ok(times
        .iter()
        .map(|&t| choi_min_eigenvalue(&choi_from_propagator(&expm(&(&s * C64::new(t, 0.0))), dim)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{derive_coefficients, GasParameters};
    use crate::hilbert::BasisConfig;
    use crate::master_equation::{GeneratorForm, HamiltonianSpec};

    #[test]
    fn verdicts() {
        let derived = derive_coefficients(2.3, &GasParameters::new(0.01, 1.7, 1.0).unwrap(), 1.2, 0.9).unwrap();
        let r = cp_condition(&derived);
        assert_eq!(r.coefficient_check.verdict, Verdict::Saturated);
        assert!(r.coefficient_check.slack.abs() <= 1e-10 * r.coefficient_check.rhs);

        assert_eq!(
            cp_condition(&derived.caldeira_leggett()).coefficient_check.verdict,
            Verdict::Violated
        );
        assert_eq!(
            cp_condition_raw(1.0, 1.0, 1.0, 1.0).coefficient_check.verdict,
            Verdict::StrictlySatisfied
        );
        assert_eq!(
            cp_condition_raw(0.0, 0.0, 0.0, 1.0).coefficient_check.verdict,
            Verdict::Saturated
        );
    }

    #[test]
    fn identity_channel_choi() {
        let basis = BasisConfig::new(4, 1.0, 1.0).unwrap();
        let c = derive_coefficients(0.5, &GasParameters::new(0.01, 1.0, 1.0).unwrap(), 1.0, 1.0).unwrap();
        let spec = GeneratorSpec::qbm(GeneratorForm::Qbm4, c, HamiltonianSpec::harmonic(1.0), basis).unwrap();
        let choi = choi_matrix(&spec, 0.0).unwrap();
        assert!((choi.trace().re - 4.0).abs() < 1e-14);
        let eig = hermitian_eigenvalues(&choi);
        assert!((eig[15] - 4.0).abs() < 1e-12);
        assert!(eig[..15].iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn choi_limits() {
        let basis = BasisConfig::new(9, 1.0, 1.0).unwrap();
        let spec = GeneratorSpec::generic(basis, OperatorMatrix::zeros(9), vec![]).unwrap();
        assert!(matches!(choi_matrix(&spec, 1.0), Err(Error::DimensionTooLarge { .. })));
        let small =
            GeneratorSpec::generic(BasisConfig::new(3, 1.0, 1.0).unwrap(), OperatorMatrix::zeros(3), vec![]).unwrap();
        assert!(choi_matrix(&small, -1.0).is_err());
    }

    #[test]
    fn report_renders() {
        let r = cp_condition_raw(1.0, 0.25, 1.0, 1.0).with_choi(-1e-12, 6);
        let text = r.to_string();
        assert!(text.contains("Saturated"));
        assert!(text.contains("dim 6"));
    }
}
