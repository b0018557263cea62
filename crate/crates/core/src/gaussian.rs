//! Closed first- and second-moment dynamics of the quadratic generator.
//!
//! Tracing `x`, `p`, `x²`, `p²` and `{x,p}` against the double-commutator
//! generator with `H = p²/2M + Mω²x²/2` gives, for the central moments,
//!
//! ```text
//! d⟨x⟩/dt   = ⟨p⟩/M
//! d⟨p⟩/dt   = -Mω²⟨x⟩ - 2γ⟨p⟩
//! d var_x/dt = 2 cov/M + 2 D_qq
//! d var_p/dt = -2Mω² cov - 4γ var_p + 2 D_pp
//! d cov/dt   = var_p/M - Mω² var_x - 2γ cov
//! ```
//!
//! with `cov = ⟨{x,p}⟩/2 - ⟨x⟩⟨p⟩`. The system is affine with constant
//! coefficients and is propagated with an exact matrix exponential.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::hilbert::{build_momentum, build_position, expectation, BasisConfig, OperatorMatrix};
use crate::master_equation::HamiltonianSpec;

/// Slack allowed on `var_x var_p - cov² ≥ ħ²/4`.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl GaussianState {
    pub fn as_array(&self) -> [f64; 5] {
        [self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            mean_x: v[0],
            mean_p: v[1],
            var_x: v[2],
            var_p: v[3],
            cov_xp: v[4],
        }
    }

    /// `var_x var_p - cov²`.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    pub fn satisfies_uncertainty(&self, hbar: f64) -> bool {
        self.uncertainty_product() >= hbar * hbar / 4.0 - UNCERTAINTY_SLACK
    }

    /// Moments of a density matrix in the given basis.
    pub fn from_density(rho: &OperatorMatrix, basis: &BasisConfig) -> Result<Self> {
        let x = build_position(basis);
        let p = build_momentum(basis);
        Self::from_operators(rho, &x, &p)
    }

    pub fn from_operators(rho: &OperatorMatrix, x: &OperatorMatrix, p: &OperatorMatrix) -> Result<Self> {
        let mean_x = expectation(rho, x)?.re;
        let mean_p = expectation(rho, p)?.re;
        let x2 = expectation(rho, &(x * x))?.re;
        let p2 = expectation(rho, &(p * p))?.re;
        let xp = expectation(rho, &(x * p))?;
        // ⟨{x,p}⟩/2 = Re⟨xp⟩ for Hermitian ρ
        Ok(Self {
            mean_x,
            mean_p,
            var_x: x2 - mean_x * mean_x,
            var_p: p2 - mean_p * mean_p,
            cov_xp: xp.re - mean_x * mean_p,
        })
    }
}

// y' = A y + b over y = (mean_x, mean_p, var_x, var_p, cov).
fn affine_system(coeffs: &CoefficientSet, hamiltonian: &HamiltonianSpec) -> (DMatrix<f64>, DVector<f64>) {
    let m = coeffs.mass;
    let w2 = hamiltonian.omega().powi(2);
    let g = coeffs.gamma;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0,       1.0 / m,  0.0,       0.0,       0.0,
        -m * w2,   -2.0 * g, 0.0,       0.0,       0.0,
        0.0,       0.0,      0.0,       0.0,       2.0 / m,
        0.0,       0.0,      0.0,       -4.0 * g,  -2.0 * m * w2,
        0.0,       0.0,      -m * w2,   1.0 / m,   -2.0 * g,
    ]);
    let b = DVector::from_vec(vec![0.0, 0.0, 2.0 * coeffs.d_qq, 2.0 * coeffs.d_pp, 0.0]);
    (a, b)
}

/// Time derivative of the five moments.
pub fn moment_rhs(state: &GaussianState, coeffs: &CoefficientSet, hamiltonian: &HamiltonianSpec) -> GaussianState {
    let (a, b) = affine_system(coeffs, hamiltonian);
    let y = DVector::from_column_slice(&state.as_array());
    let dy = a * y + b;
    GaussianState::from_array([dy[0], dy[1], dy[2], dy[3], dy[4]])
}

/// Moments at each time of `t_grid` (measured from `state0`'s time).
pub fn propagate_moments(
    state0: &GaussianState,
    coeffs: &CoefficientSet,
    hamiltonian: &HamiltonianSpec,
    t_grid: &[f64],
) -> Vec<GaussianState> {
    let (a, b) = affine_system(coeffs, hamiltonian);
    // Augmented generator [[A, b], [0, 0]] acting on (y, 1).
    let mut aug = DMatrix::zeros(6, 6);
    aug.view_mut((0, 0), (5, 5)).copy_from(&a);
    aug.view_mut((0, 5), (5, 1)).copy_from(&b);
    let mut y0 = DVector::from_element(6, 1.0);
    y0.rows_mut(0, 5).copy_from_slice(&state0.as_array());
    t_grid
        .iter()
        .map(|&t| {
            let y = (&aug * t).exp() * &y0;
            GaussianState::from_array([y[0], y[1], y[2], y[3], y[4]])
        })
        .collect()
}

/// Fixed point of [`moment_rhs`]; `None` marks moments without one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryMoments {
    pub mean_x: Option<f64>,
    pub mean_p: Option<f64>,
    pub var_x: Option<f64>,
    pub var_p: Option<f64>,
    pub cov_xp: Option<f64>,
}

impl StationaryMoments {
    pub fn state(&self) -> Result<GaussianState> {
        match (self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp) {
            (Some(mean_x), Some(mean_p), Some(var_x), Some(var_p), Some(cov_xp)) => Ok(GaussianState {
                mean_x,
                mean_p,
                var_x,
                var_p,
                cov_xp,
            }),
            _ => Err(Error::NoStationaryState(format!("incomplete fixed point {self:?}"))),
        }
    }
}

pub fn stationary_moments(coeffs: &CoefficientSet, hamiltonian: &HamiltonianSpec) -> StationaryMoments {
    let g = coeffs.gamma;
    let w = hamiltonian.omega();
    let m = coeffs.mass;
    if g <= 0.0 {
        return StationaryMoments {
            mean_x: None,
            mean_p: None,
            var_x: None,
            var_p: None,
            cov_xp: None,
        };
    }
    if w <= 0.0 {
        // Free particle: momentum thermalizes, position keeps spreading.
        let var_p = coeffs.d_pp / (2.0 * g);
        return StationaryMoments {
            mean_x: None,
            mean_p: Some(0.0),
            var_x: None,
            var_p: Some(var_p),
            cov_xp: Some(var_p / (2.0 * g * m)),
        };
    }
    let w2 = w * w;
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0,     0.0,      2.0 / m,
        0.0,     -4.0 * g, -2.0 * m * w2,
        -m * w2, 1.0 / m,  -2.0 * g,
    );
    let b = Vector3::new(2.0 * coeffs.d_qq, 2.0 * coeffs.d_pp, 0.0);
    let y = a.lu().solve(&(-b)).expect("damped trapped system is nonsingular");
    StationaryMoments {
        mean_x: Some(0.0),
        mean_p: Some(0.0),
        var_x: Some(y[0]),
        var_p: Some(y[1]),
        cov_xp: Some(y[2]),
    }
}

/// Largest deviation between two moment trajectories. Each moment is scaled
/// by the largest value it reaches along `oracle`, floored by the matching
/// width (`√var_x` for `mean_x`, `√var_p` for `mean_p`, `√(var_x var_p)` for
/// `cov_xp`) so that moments passing through zero are not over-weighted.
pub fn max_relative_deviation(simulated: &[GaussianState], oracle: &[GaussianState]) -> f64 {
    let peak = |f: &dyn Fn(&GaussianState) -> f64| oracle.iter().map(|s| f(s).abs()).fold(0.0, f64::max);
    let width_x = peak(&|s| s.var_x.max(0.0).sqrt());
    let width_p = peak(&|s| s.var_p.max(0.0).sqrt());
    let scales = [
        peak(&|s| s.mean_x).max(width_x),
        peak(&|s| s.mean_p).max(width_p),
        peak(&|s| s.var_x),
        peak(&|s| s.var_p),
        peak(&|s| s.cov_xp).max(width_x * width_p),
    ];
    let mut worst = 0.0f64;
    for (a, b) in simulated.iter().zip(oracle) {
        let (a, b) = (a.as_array(), b.as_array());
        for k in 0..5 {
            let d = (a[k] - b[k]).abs();
            worst = worst.max(if scales[k] > 0.0 { d / scales[k] } else { d });
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{derive_coefficients, GasParameters};

    fn coeffs(d_pp: f64, beta: f64, mass: f64) -> CoefficientSet {
        derive_coefficients(d_pp, &GasParameters::new(0.01, beta, 1.0).unwrap(), mass, 1.0).unwrap()
    }

    fn state() -> GaussianState {
        GaussianState {
            mean_x: 0.7,
            mean_p: -0.3,
            var_x: 0.6,
            var_p: 0.9,
            cov_xp: 0.1,
        }
    }

    #[test]
    fn conservative_free_motion_keeps_var_p() {
        let d = moment_rhs(&state(), &coeffs(0.0, 1.0, 1.0), &HamiltonianSpec::free());
        assert_eq!(d.var_p, 0.0);
        assert_eq!(d.mean_p, 0.0);
    }

    #[test]
    fn stationary_trap_variance() {
        for (beta, omega, mass) in [(1.0, 1.0, 1.0), (2.5, 0.4, 3.0), (0.3, 2.0, 0.5)] {
            let c = coeffs(0.37, beta, mass);
            let h = HamiltonianSpec::harmonic(omega);
            let s = stationary_moments(&c, &h).state().unwrap();
            let want = mass / beta * (1.0 + (beta * omega / 4.0).powi(2));
            assert!((s.var_p - want).abs() < 1e-12 * want);
            assert!((s.cov_xp + mass * c.d_qq).abs() < 1e-12);
            assert_eq!((s.mean_x, s.mean_p), (0.0, 0.0));
            let d = moment_rhs(&s, &c, &h);
            assert!(d.as_array().iter().all(|v| v.abs() < 1e-12), "{d:?}");
        }
    }

    #[test]
    fn deviation_scales_by_width_near_zero() {
        let a = GaussianState {
            mean_x: 0.0,
            mean_p: 1.0,
            var_x: 4.0,
            var_p: 1.0,
            cov_xp: 0.0,
        };
        let mut b = a;
        b.mean_x = 0.02;
        b.cov_xp = 0.01;
        let d = max_relative_deviation(&[b], &[a]);
        assert!((d - 0.01).abs() < 1e-15, "{d}");
        assert_eq!(max_relative_deviation(&[a], &[a]), 0.0);
    }

    #[test]
    fn free_equipartition() {
        let c = coeffs(0.8, 2.0, 1.5);
        let s = stationary_moments(&c, &HamiltonianSpec::free());
        assert!((s.var_p.unwrap() - 1.5 / 2.0).abs() < 1e-14);
        assert!(s.var_x.is_none() && s.mean_x.is_none());
        assert!(s.state().is_err());
        let none = stationary_moments(&coeffs(0.0, 1.0, 1.0), &HamiltonianSpec::harmonic(1.0));
        assert!(none.var_p.is_none());
    }

    #[test]
    fn zero_generator_constant_trajectory() {
        let s0 = state();
        let traj = propagate_moments(&s0, &coeffs(0.0, 1.0, 1.0), &HamiltonianSpec::harmonic(0.0001), &[0.0]);
        assert_eq!(traj[0], s0);
    }

    #[test]
    fn ballistic_spreading() {
        let s0 = state();
        let m = 1.7;
        let c = coeffs(0.0, 1.0, m);
        let ts: Vec<f64> = (0..6).map(|k| k as f64 * 0.8).collect();
        for (t, s) in ts.iter().zip(propagate_moments(&s0, &c, &HamiltonianSpec::free(), &ts)) {
            let want = s0.var_x + 2.0 * t * s0.cov_xp / m + t * t * s0.var_p / (m * m);
            assert!((s.var_x - want).abs() < 1e-12, "t={t}");
            assert!((s.mean_x - (s0.mean_x + t * s0.mean_p / m)).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_relaxation() {
        let s0 = state();
        let c = coeffs(0.9, 1.3, 1.1);
        let ts: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        for (t, s) in ts.iter().zip(propagate_moments(&s0, &c, &HamiltonianSpec::free(), &ts)) {
            let want = s0.mean_p * (-2.0 * c.gamma * t).exp();
            assert!((s.mean_p - want).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn uncertainty_along_trajectory() {
        // minimum-uncertainty start, cold bath with a trap
        let s0 = GaussianState {
            mean_x: 1.0,
            mean_p: 0.0,
            var_x: 0.5,
            var_p: 0.5,
            cov_xp: 0.0,
        };
        let c = coeffs(0.05, 10.0, 1.0);
        let ts: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        for s in propagate_moments(&s0, &c, &HamiltonianSpec::harmonic(1.0), &ts) {
            assert!(s.satisfies_uncertainty(1.0), "{s:?}");
        }
    }
}
