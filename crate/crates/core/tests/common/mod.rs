#![allow(dead_code)]

use nalgebra::DMatrix;
use qbm_core::coefficients::{derive_coefficients, CoefficientSet, GasParameters};
use qbm_core::hilbert::{BasisConfig, DensityMatrix, OperatorMatrix, C64};
use rand::{rngs::StdRng, Rng};

pub fn random_complex(rng: &mut StdRng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random Hermitian matrix supported on levels `0..support`.
pub fn random_hermitian(dim: usize, support: usize, rng: &mut StdRng) -> OperatorMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..support {
        for i in 0..support {
            m[(i, j)] = random_complex(rng);
        }
    }
    OperatorMatrix::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Random mixed state `G G† / Tr` supported on levels `0..support`.
pub fn random_density(dim: usize, support: usize, rng: &mut StdRng) -> DensityMatrix {
    let mut g = DMatrix::zeros(dim, dim);
    for j in 0..support {
        for i in 0..support {
            g[(i, j)] = random_complex(rng);
        }
    }
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    DensityMatrix::new(OperatorMatrix::new(rho / tr).unwrap()).unwrap()
}

pub fn gas(m: f64, beta: f64, n: f64) -> GasParameters {
    GasParameters::new(m, beta, n).unwrap()
}

/// CP-saturating coefficients for a unit-mass particle.
pub fn saturated(d_pp: f64, beta: f64) -> CoefficientSet {
    derive_coefficients(d_pp, &gas(0.01, beta, 1.0), 1.0, 1.0).unwrap()
}

pub fn basis(dim: usize) -> BasisConfig {
    BasisConfig::new(dim, 1.0, 1.0).unwrap()
}

pub fn rel_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
