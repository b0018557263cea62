//! Truncated number-basis operator algebra.
//!
//! All operators for one Cartesian axis live in the span of the first `dim`
//! eigenstates of a reference oscillator of mass `mass` and frequency
//! `omega_ref`. Operator identities such as `[x, p] = iħ` hold exactly on the
//! leading `(dim - 1)`-dimensional block; the `(dim, dim)` corner carries the
//! usual truncation defect and is left as is.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Tolerance on `max |ρ - ρ†|` accepted by [`DensityMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|Tr ρ - 1|` accepted by [`DensityMatrix::new`].
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted by [`DensityMatrix::new`].
pub const PSD_TOL: f64 = 1e-10;

/// Truncation and physical scales of a single-axis basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub dim: usize,
    pub mass: f64,
    pub omega_ref: f64,
    pub hbar: f64,
}

impl BasisConfig {
    /// Basis with `ħ = 1`.
    pub fn new(dim: usize, mass: f64, omega_ref: f64) -> Result<Self> {
        Self::with_hbar(dim, mass, omega_ref, 1.0)
    }

    pub fn with_hbar(dim: usize, mass: f64, omega_ref: f64, hbar: f64) -> Result<Self> {
        let cfg = Self {
            dim,
            mass,
            omega_ref,
            hbar,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: format!("must be at least 2, got {}", self.dim),
            });
        }
        positive("mass", self.mass)?;
        positive("omega_ref", self.omega_ref)?;
        positive("hbar", self.hbar)
    }

    /// Oscillator length `√(ħ / 2Mω)` multiplying `(a + a†)` in `x`.
    pub fn position_scale(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega_ref)).sqrt()
    }

    /// `√(ħMω / 2)` multiplying `i(a† - a)` in `p`.
    pub fn momentum_scale(&self) -> f64 {
        (self.hbar * self.mass * self.omega_ref / 2.0).sqrt()
    }
}

/// Square complex matrix representing an operator in the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<C64>);

impl OperatorMatrix {
    /// Wrap a matrix, checking it is square with finite entries.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(entries))
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<C64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise `max |A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Leading `k × k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        Self(self.0.view((0, 0), (k, k)).into_owned())
    }

    /// Zero every row and column outside `lo..dim - hi`.
    pub fn project_interior(&self, lo: usize, hi: usize) -> Self {
        let n = self.dim();
        let upper = n.saturating_sub(hi);
        let mut out = DMatrix::zeros(n, n);
        for j in lo..upper {
            for i in lo..upper {
                out[(i, j)] = self.0[(i, j)];
            }
        }
        Self(out)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

impl From<OperatorMatrix> for DMatrix<C64> {
    fn from(op: OperatorMatrix) -> Self {
        op.0
    }
}

impl<'a> Add<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix(-&self.0)
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: OperatorMatrix,
}

impl DensityMatrix {
    /// Validate Hermiticity, trace and positivity at the module tolerances.
    pub fn new(op: OperatorMatrix) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("hermiticity defect {herm:e}")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = min_eigenvalue_of(&op);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("min eigenvalue {min:e}")));
        }
        Ok(Self { op })
    }

    /// Normalize a pure state vector and build its projector.
    pub fn from_pure(state: &DVector<C64>) -> Result<Self> {
        let norm = state.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "state",
                reason: "vector must have finite non-zero norm".into(),
            });
        }
        let psi = state / C64::new(norm, 0.0);
        Self::new(OperatorMatrix(&psi * psi.adjoint()))
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: OperatorMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn op(&self) -> &OperatorMatrix {
        &self.op
    }

    pub fn into_op(self) -> OperatorMatrix {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Diagonal populations.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.op.get(k, k).re).collect()
    }
}

/// Lowering and raising operators, `a|n⟩ = √n |n-1⟩`.
pub fn build_ladder(cfg: &BasisConfig) -> (OperatorMatrix, OperatorMatrix) {
    let n = cfg.dim;
    let mut lower = DMatrix::zeros(n, n);
    for k in 1..n {
        lower[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let raise = lower.adjoint();
    (OperatorMatrix(lower), OperatorMatrix(raise))
}

/// `x = √(ħ/2Mω)(a + a†)`.
pub fn build_position(cfg: &BasisConfig) -> OperatorMatrix {
    let (a, ad) = build_ladder(cfg);
    (&a + &ad).scale_real(cfg.position_scale())
}

/// `p = i√(ħMω/2)(a† - a)`.
pub fn build_momentum(cfg: &BasisConfig) -> OperatorMatrix {
    let (a, ad) = build_ladder(cfg);
    (&ad - &a).scale(I * cfg.momentum_scale())
}

/// `a† a`.
pub fn build_number(cfg: &BasisConfig) -> OperatorMatrix {
    let diag: Vec<C64> = (0..cfg.dim).map(|k| C64::new(k as f64, 0.0)).collect();
    OperatorMatrix::from_diagonal(&diag)
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.check_dim(b)?;
    Ok(OperatorMatrix(&a.0 * &b.0 - &b.0 * &a.0))
}

pub fn anticommutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.check_dim(b)?;
    Ok(OperatorMatrix(&a.0 * &b.0 + &b.0 * &a.0))
}

/// Number state `|n⟩⟨n|`.
pub fn dm_fock(cfg: &BasisConfig, n: usize) -> Result<DensityMatrix> {
    if n >= cfg.dim {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("Fock index {n} outside basis of dimension {}", cfg.dim),
        });
    }
    let mut diag = vec![ZERO; cfg.dim];
    diag[n] = ONE;
    Ok(DensityMatrix {
        op: OperatorMatrix::from_diagonal(&diag),
    })
}

/// Gibbs state of the reference oscillator at inverse temperature `beta_eff`,
/// renormalized over the truncated basis. `f64::INFINITY` gives the vacuum.
pub fn dm_thermal(cfg: &BasisConfig, beta_eff: f64) -> Result<DensityMatrix> {
    if beta_eff.is_nan() || beta_eff <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta_eff",
            reason: format!("must be strictly positive, got {beta_eff}"),
        });
    }
    let quantum = beta_eff * cfg.hbar * cfg.omega_ref;
    let weights: Vec<f64> = (0..cfg.dim)
        .map(|k| if k == 0 { 1.0 } else { (-quantum * k as f64).exp() })
        .collect();
    let z: f64 = weights.iter().sum();
    let diag: Vec<C64> = weights.iter().map(|w| C64::new(w / z, 0.0)).collect();
    Ok(DensityMatrix {
        op: OperatorMatrix::from_diagonal(&diag),
    })
}

/// Truncated, renormalized coherent state `|α⟩`.
pub fn dm_coherent(cfg: &BasisConfig, alpha: C64) -> Result<DensityMatrix> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFinite);
    }
    if alpha.norm_sqr() > cfg.dim as f64 / 4.0 {
        log::warn!(
            "coherent amplitude |alpha|^2 = {} is large for a basis of dimension {}",
            alpha.norm_sqr(),
            cfg.dim
        );
    }
    // c_n = α^n / √n!, built recursively; the global e^{-|α|²/2} drops out on normalization.
    let mut psi = DVector::zeros(cfg.dim);
    psi[0] = ONE;
    for k in 1..cfg.dim {
        psi[k] = psi[k - 1] * alpha / (k as f64).sqrt();
    }
    DensityMatrix::from_pure(&psi)
}

/// Squeezed vacuum `exp(r(a² - a†²)/2)|0⟩`; `r > 0` narrows the position
/// distribution to `var_x = ħ e^{-2r} / (2Mω_ref)`.
pub fn dm_squeezed(cfg: &BasisConfig, r: f64) -> Result<DensityMatrix> {
    if !r.is_finite() {
        return Err(Error::NonFinite);
    }
    let t = -r.tanh();
    let mut psi = DVector::zeros(cfg.dim);
    // c_{2k} ∝ t^k √((2k)!) / (2^k k!), recursively: ratio t √((2k-1)(2k)) / (2k)
    let mut c = ONE;
    psi[0] = c;
    let mut k = 1;
    while 2 * k < cfg.dim {
        let m = 2.0 * k as f64;
        c *= t * ((m - 1.0) * m).sqrt() / m;
        psi[2 * k] = c;
        k += 1;
    }
    DensityMatrix::from_pure(&psi)
}

/// `Tr(ρA)`.
pub fn expectation(rho: &OperatorMatrix, a: &OperatorMatrix) -> Result<C64> {
    rho.check_dim(a)?;
    // Tr(ρA) = Σ_ij ρ_ij A_ji without forming the product.
    let n = rho.dim();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += rho.0[(i, j)] * a.0[(j, i)];
        }
    }
    Ok(acc)
}

/// `Tr(ρ²)`.
pub fn purity(rho: &OperatorMatrix) -> f64 {
    // Tr(ρ²) = Σ_ij |ρ_ij|² for Hermitian ρ.
    rho.0.iter().map(|z| z.norm_sqr()).sum()
}

/// Smallest eigenvalue of the Hermitian part of `rho`.
pub fn min_eigenvalue(rho: &OperatorMatrix) -> f64 {
    min_eigenvalue_of(rho)
}

fn min_eigenvalue_of(op: &OperatorMatrix) -> f64 {
    hermitian_eigenvalues(op).iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of the Hermitian part of `op`, ascending.
pub fn hermitian_eigenvalues(op: &OperatorMatrix) -> Vec<f64> {
    let h = op.hermitian_part();
    let mut vals: Vec<f64> = SymmetricEigen::new(h.0).eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_basis(dim: usize) -> BasisConfig {
        BasisConfig::new(dim, 1.0, 1.0).unwrap()
    }

    #[test]
    fn basis_rejects_bad_config() {
        assert!(BasisConfig::new(1, 1.0, 1.0).is_err());
        assert!(BasisConfig::new(4, 0.0, 1.0).is_err());
        assert!(BasisConfig::new(4, 1.0, f64::NAN).is_err());
        assert!(BasisConfig::with_hbar(4, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn ladder_small_dims() {
        let (a, ad) = build_ladder(&unit_basis(2));
        assert_eq!(a.get(0, 1), ONE);
        assert_eq!(a.get(0, 0), ZERO);
        assert_eq!(a.get(1, 0), ZERO);
        assert_eq!(a.get(1, 1), ZERO);
        assert_eq!(ad, a.adjoint());

        let (a3, _) = build_ladder(&unit_basis(3));
        assert!((a3.get(1, 2).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn number_operator_from_ladder() {
        let cfg = unit_basis(9);
        let (a, ad) = build_ladder(&cfg);
        let n = &ad * &a;
        for k in 0..9 {
            assert!((n.get(k, k).re - k as f64).abs() < 1e-13);
        }
        assert!((&n - &build_number(&cfg)).max_abs() < 1e-14);
    }

    #[test]
    fn position_dim2() {
        let x = build_position(&unit_basis(2));
        let s = 1.0 / 2f64.sqrt();
        assert!((x.get(0, 1).re - s).abs() < 1e-15);
        assert!((x.get(1, 0).re - s).abs() < 1e-15);
        assert_eq!(x.get(0, 0), ZERO);
    }

    #[test]
    fn canonical_commutator_interior() {
        let cfg = BasisConfig::with_hbar(30, 1.7, 0.6, 0.8).unwrap();
        let x = build_position(&cfg);
        let p = build_momentum(&cfg);
        assert!(x.hermiticity_defect() == 0.0);
        assert!(p.hermiticity_defect() == 0.0);
        let c = commutator(&x, &p).unwrap();
        let target = OperatorMatrix::identity(30).scale(I * cfg.hbar);
        let diff = (&c - &target).leading_block(29);
        assert!(diff.max_abs() <= 1e-12, "{}", diff.max_abs());
        // the corner carries the truncation defect -iħ(N-1)
        assert!((c.get(29, 29) - I * cfg.hbar * (1.0 - 30.0)).norm() < 1e-12);
    }

    #[test]
    fn mass_scaling() {
        let light = BasisConfig::new(6, 1.0, 1.0).unwrap();
        let heavy = BasisConfig::new(6, 4.0, 1.0).unwrap();
        let (x1, x4) = (build_position(&light), build_position(&heavy));
        let (p1, p4) = (build_momentum(&light), build_momentum(&heavy));
        for i in 0..6 {
            for j in 0..6 {
                assert!((x4.get(i, j) * 2.0 - x1.get(i, j)).norm() < 1e-14);
                assert!((p4.get(i, j) - p1.get(i, j) * 2.0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn commutator_identities() {
        let cfg = unit_basis(5);
        let x = build_position(&cfg);
        assert_eq!(commutator(&x, &x).unwrap().max_abs(), 0.0);
        let id = OperatorMatrix::identity(5);
        let twice = anticommutator(&id, &x).unwrap();
        assert!((&twice - &x.scale_real(2.0)).max_abs() < 1e-15);
        let y = build_position(&unit_basis(4));
        assert!(matches!(
            commutator(&x, &y),
            Err(Error::DimensionMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn simple_states() {
        let cfg = unit_basis(6);
        let vac = dm_fock(&cfg, 0).unwrap();
        assert_eq!(vac.op().get(0, 0), ONE);
        assert!(dm_fock(&cfg, 6).is_err());

        let cold = dm_thermal(&cfg, f64::INFINITY).unwrap();
        assert_eq!(cold, vac);
        assert!(dm_thermal(&cfg, 0.0).is_err());

        let coh = dm_coherent(&cfg, ZERO).unwrap();
        assert!((coh.op() - vac.op()).max_abs() < 1e-15);
        assert!(dm_coherent(&cfg, C64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn expectation_and_purity() {
        let cfg = unit_basis(8);
        let n_op = build_number(&cfg);
        let vac = dm_fock(&cfg, 0).unwrap();
        assert_eq!(expectation(vac.op(), &n_op).unwrap(), ZERO);
        for n in 0..8 {
            let f = dm_fock(&cfg, n).unwrap();
            assert!((purity(f.op()) - 1.0).abs() < 1e-15);
        }
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((purity(mixed.op()) - 0.25).abs() < 1e-15);
        assert!((min_eigenvalue(mixed.op()) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn coherent_state_moments() {
        let cfg = BasisConfig::new(40, 1.0, 1.0).unwrap();
        let alpha = C64::new(1.2, -0.5);
        let rho = dm_coherent(&cfg, alpha).unwrap();
        let x = build_position(&cfg);
        let p = build_momentum(&cfg);
        let mx = expectation(rho.op(), &x).unwrap().re;
        let mp = expectation(rho.op(), &p).unwrap().re;
        assert!((mx - 2.0 * alpha.re * cfg.position_scale()).abs() < 1e-12);
        assert!((mp - 2.0 * alpha.im * cfg.momentum_scale()).abs() < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_narrows_position() {
        let cfg = BasisConfig::new(60, 1.0, 1.0).unwrap();
        let r = 0.6;
        let rho = dm_squeezed(&cfg, r).unwrap();
        let x = build_position(&cfg);
        let p = build_momentum(&cfg);
        let vx = expectation(rho.op(), &(&x * &x)).unwrap().re;
        let vp = expectation(rho.op(), &(&p * &p)).unwrap().re;
        assert!((vx - 0.5 * (-2.0 * r).exp()).abs() < 1e-10, "{vx}");
        assert!((vp - 0.5 * (2.0 * r).exp()).abs() < 1e-10, "{vp}");
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = OperatorMatrix::identity(3);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let neg = OperatorMatrix::from_diagonal(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(neg).is_err());
        let mut m = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(OperatorMatrix::new(m).unwrap()).is_err());
        assert!(OperatorMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }
}
