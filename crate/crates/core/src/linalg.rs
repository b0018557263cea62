//! Dense complex linear algebra helpers: matrix exponential and spectral
//! functions of Hermitian matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::hilbert::{OperatorMatrix, C64};

// Padé(13) numerator coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which Padé(13) reaches double precision without scaling.
const THETA13: f64 = 5.371920351148152;

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a fixed Padé(13) rational approximant.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * C64::new(2f64.powi(-squarings), 0.0);

    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let ident = DMatrix::<C64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_tail = &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1);
    let u = &scaled * (&a6 * u_inner + u_tail);

    let v_inner = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * v_inner + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `f(H)` for Hermitian `H` via its eigendecomposition.
pub fn hermitian_function(h: &OperatorMatrix, f: impl Fn(f64) -> C64) -> OperatorMatrix {
    let eig = SymmetricEigen::new(h.hermitian_part().into_matrix());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let fk = f(*lambda);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= fk;
        }
    }
    OperatorMatrix::from_matrix_unchecked(scaled * v.adjoint())
}

/// `exp(-i t H / ħ)`.
pub fn unitary_propagator(h: &OperatorMatrix, t: f64, hbar: f64) -> OperatorMatrix {
    hermitian_function(h, |lambda| (C64::new(0.0, -lambda * t / hbar)).exp())
}

/// Column-stacking vectorization `vec(A)[i + n j] = A[i, j]`.
pub fn vectorize(a: &DMatrix<C64>) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<C64>, n: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}
