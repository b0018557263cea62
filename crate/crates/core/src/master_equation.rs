//! Right-hand sides of the Brownian master equation for one Cartesian axis.
//!
//! Two algebraically identical forms are provided:
//!
//! * the double-commutator form
//!   `-(i/ħ)[H,ρ] - (D_pp/ħ²)[x,[x,ρ]] - (D_qq/ħ²)[p,[p,ρ]] - (iγ/ħ)[x,{p,ρ}]`;
//! * the single-generator Lindblad form
//!   `-(i/ħ)[H,ρ] - (D_pp/ħ²)(λ_M²/4)(i/ħ)[{x,p},ρ] + (D_pp/ħ²)λ_M²(AρA† - ½{A†A,ρ})`
//!   with `A = (√2/λ_M)(x + (i/ħ)(λ_M²/4)p)`.
//!
//! Their equality only uses `D_pp·D_qq = (ħγ/2)²` and operator identities that
//! hold for any matrices, so the truncated forms agree to rounding as long as
//! both are built from the same `x`, `p` and `H`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{positive, Error, Result};
use crate::hilbert::{
    anticommutator, build_momentum, build_position, commutator, BasisConfig, OperatorMatrix, C64, I, ONE,
};
use crate::linalg::vectorize;

/// Largest basis dimension for which the dense superoperator is built.
pub const SUPEROPERATOR_DIM_LIMIT: usize = 12;

/// Confinement of the Brownian particle along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Free,
    Harmonic { omega: f64 },
}

/// `H₀ + V`, with `V` a constant mean-field shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub potential: Potential,
    pub shift: f64,
}

impl HamiltonianSpec {
    pub fn free() -> Self {
        Self {
            potential: Potential::Free,
            shift: 0.0,
        }
    }

    pub fn harmonic(omega: f64) -> Self {
        Self {
            potential: Potential::Harmonic { omega },
            shift: 0.0,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Potential::Harmonic { omega } = self.potential {
            positive("omega_trap", omega)?;
        }
        if !self.shift.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Trap frequency, zero when free.
    pub fn omega(&self) -> f64 {
        match self.potential {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => omega,
        }
    }

    /// `p²/2M + Mω²x²/2 + shift` from the truncated `x`, `p` matrices.
    pub fn build(&self, basis: &BasisConfig) -> OperatorMatrix {
        let x = build_position(basis);
        let p = build_momentum(basis);
        self.build_from(basis, &x, &p)
    }

    fn build_from(&self, basis: &BasisConfig, x: &OperatorMatrix, p: &OperatorMatrix) -> OperatorMatrix {
        let mut h = (p * p).scale_real(0.5 / basis.mass);
        if let Potential::Harmonic { omega } = self.potential {
            h = &h + &(x * x).scale_real(0.5 * basis.mass * omega * omega);
        }
        if self.shift != 0.0 {
            h = &h + &OperatorMatrix::identity(basis.dim).scale_real(self.shift);
        }
        h
    }
}

/// Which right-hand side to build.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorForm {
    /// Double-commutator form.
    Qbm4,
    /// Single-generator Lindblad form.
    Qbm5,
    /// Double-commutator form with `D_qq` forced to zero.
    CaldeiraLeggett,
    /// `-(i/ħ)[H,ρ] + Σ(LρL† - ½{L†L,ρ})` with pre-scaled `L`.
    Generic {
        hamiltonian: OperatorMatrix,
        lindblad_ops: Vec<OperatorMatrix>,
    },
}

impl GeneratorForm {
    pub fn label(&self) -> &'static str {
        match self {
            GeneratorForm::Qbm4 => "qbm4",
            GeneratorForm::Qbm5 => "qbm5",
            GeneratorForm::CaldeiraLeggett => "caldeira_leggett",
            GeneratorForm::Generic { .. } => "generic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub form: GeneratorForm,
    pub coefficients: Option<CoefficientSet>,
    pub hamiltonian: HamiltonianSpec,
    pub basis: BasisConfig,
}

impl GeneratorSpec {
    pub fn qbm(
        form: GeneratorForm,
        coefficients: CoefficientSet,
        hamiltonian: HamiltonianSpec,
        basis: BasisConfig,
    ) -> Result<Self> {
        if matches!(form, GeneratorForm::Generic { .. }) {
            return Err(Error::InvalidParameter {
                name: "form",
                reason: "generic generators take explicit operators, use GeneratorSpec::generic".into(),
            });
        }
        let spec = Self {
            form,
            coefficients: Some(coefficients),
            hamiltonian,
            basis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn generic(basis: BasisConfig, hamiltonian: OperatorMatrix, lindblad_ops: Vec<OperatorMatrix>) -> Result<Self> {
        let spec = Self {
            form: GeneratorForm::Generic {
                hamiltonian,
                lindblad_ops,
            },
            coefficients: None,
            hamiltonian: HamiltonianSpec::free(),
            basis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        self.hamiltonian.validate()?;
        match &self.form {
            GeneratorForm::Generic {
                hamiltonian,
                lindblad_ops,
            } => {
                let dim = self.basis.dim;
                for op in std::iter::once(hamiltonian).chain(lindblad_ops) {
                    if op.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: op.dim(),
                        });
                    }
                }
            }
            _ => {
                let c = self.coefficients.as_ref().ok_or(Error::InvalidParameter {
                    name: "coefficients",
                    reason: "QBM forms require a coefficient set".into(),
                })?;
                if (c.hbar - self.basis.hbar).abs() > 1e-12 * self.basis.hbar {
                    return Err(Error::InvalidParameter {
                        name: "hbar",
                        reason: format!("coefficients use hbar = {}, basis uses {}", c.hbar, self.basis.hbar),
                    });
                }
            }
        }
        Ok(())
    }

    /// Same spec with a different form (coefficients and basis shared).
    pub fn with_form(&self, form: GeneratorForm) -> Self {
        Self { form, ..self.clone() }
    }

    pub fn compile(&self) -> Result<Generator> {
        Generator::new(self)
    }
}

/// Pre-built operators for repeated evaluation of one generator.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    hbar: f64,
    kind: Compiled,
}

#[derive(Debug, Clone)]
enum Compiled {
    DoubleCommutator {
        x: OperatorMatrix,
        p: OperatorMatrix,
        h: OperatorMatrix,
        d_pp: f64,
        d_qq: f64,
        gamma: f64,
    },
    Lindblad {
        h: OperatorMatrix,
        ops: Vec<OperatorMatrix>,
    },
}

impl Generator {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let basis = &spec.basis;
        let kind = match &spec.form {
            GeneratorForm::Generic {
                hamiltonian,
                lindblad_ops,
            } => Compiled::Lindblad {
                h: hamiltonian.clone(),
                ops: lindblad_ops.clone(),
            },
            form => {
                let c = spec.coefficients.as_ref().expect("validated");
                let x = build_position(basis);
                let p = build_momentum(basis);
                let h = spec.hamiltonian.build_from(basis, &x, &p);
                match form {
                    GeneratorForm::Qbm4 | GeneratorForm::CaldeiraLeggett => {
                        let d_qq = if matches!(form, GeneratorForm::CaldeiraLeggett) {
                            0.0
                        } else {
                            c.d_qq
                        };
                        Compiled::DoubleCommutator {
                            x,
                            p,
                            h,
                            d_pp: c.d_pp,
                            d_qq,
                            gamma: c.gamma,
                        }
                    }
                    _ => {
                        let (h_eff, op) = single_generator_parts(basis, c, &x, &p, &h)?;
                        Compiled::Lindblad {
                            h: h_eff,
                            ops: vec![op],
                        }
                    }
                }
            }
        };
        Ok(Self {
            dim: basis.dim,
            hbar: basis.hbar,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dρ/dt`.
    pub fn rhs(&self, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rho.dim(),
            });
        }
        Ok(OperatorMatrix::from_matrix_unchecked(self.rhs_matrix(rho.matrix())))
    }

    pub(crate) fn rhs_matrix(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let minus_i_over_hbar = -I / self.hbar;
        match &self.kind {
            Compiled::DoubleCommutator {
                x,
                p,
                h,
                d_pp,
                d_qq,
                gamma,
            } => {
                let (x, p, h) = (x.matrix(), p.matrix(), h.matrix());
                let hbar2 = self.hbar * self.hbar;
                let mut out = (h * rho - rho * h) * minus_i_over_hbar;
                if *d_pp != 0.0 {
                    let c = x * rho - rho * x;
                    out -= (x * &c - &c * x) * C64::new(d_pp / hbar2, 0.0);
                }
                if *d_qq != 0.0 || *gamma != 0.0 {
                    let p_rho = p * rho;
                    let rho_p = rho * p;
                    if *d_qq != 0.0 {
                        let c = &p_rho - &rho_p;
                        out -= (p * &c - &c * p) * C64::new(d_qq / hbar2, 0.0);
                    }
                    if *gamma != 0.0 {
                        let ac = &p_rho + &rho_p;
                        out += (x * &ac - &ac * x) * (minus_i_over_hbar * *gamma);
                    }
                }
                out
            }
            Compiled::Lindblad { h, ops } => {
                let h = h.matrix();
                let mut out = (h * rho - rho * h) * minus_i_over_hbar;
                for l in ops {
                    let l = l.matrix();
                    let ld = l.adjoint();
                    let ldl = &ld * l;
                    out += l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0);
                }
                out
            }
        }
    }
}

/// `A = (√2/λ_M)(x + (i/ħ)(λ_M²/4)p)` with `λ_M = √(ħ²β/M)`, `M = basis.mass`.
pub fn build_annihilation_a(basis: &BasisConfig, beta: f64) -> Result<OperatorMatrix> {
    basis.validate()?;
    positive("beta", beta)?;
    let x = build_position(basis);
    let p = build_momentum(basis);
    Ok(annihilation_from(basis, beta, &x, &p))
}

fn annihilation_from(basis: &BasisConfig, beta: f64, x: &OperatorMatrix, p: &OperatorMatrix) -> OperatorMatrix {
    let lambda2 = basis.hbar * basis.hbar * beta / basis.mass;
    let lambda = lambda2.sqrt();
    let mixed = &x.scale(ONE) + &p.scale(I * (lambda2 / (4.0 * basis.hbar)));
    mixed.scale_real(2f64.sqrt() / lambda)
}

// Effective Hamiltonian and the single scaled Lindblad operator of the
// one-generator form.
fn single_generator_parts(
    basis: &BasisConfig,
    c: &CoefficientSet,
    x: &OperatorMatrix,
    p: &OperatorMatrix,
    h: &OperatorMatrix,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    positive("beta", c.beta)?;
    let a = annihilation_from(basis, c.beta, x, p);
    let hbar2 = basis.hbar * basis.hbar;
    let lambda2 = basis.hbar * basis.hbar * c.beta / basis.mass;
    let xp = anticommutator(x, p)?;
    let h_eff = h + &xp.scale_real(c.d_pp / hbar2 * lambda2 / 4.0);
    let op = a.scale_real((c.d_pp * lambda2 / hbar2).sqrt());
    Ok((h_eff, op))
}

/// Effective Hamiltonian and Lindblad operator reproducing the single-generator form.
pub fn single_generator_decomposition(spec: &GeneratorSpec) -> Result<(OperatorMatrix, OperatorMatrix)> {
    spec.validate()?;
    let c = spec.coefficients.as_ref().ok_or(Error::InvalidParameter {
        name: "coefficients",
        reason: "decomposition needs a coefficient set".into(),
    })?;
    let x = build_position(&spec.basis);
    let p = build_momentum(&spec.basis);
    let h = spec.hamiltonian.build_from(&spec.basis, &x, &p);
    single_generator_parts(&spec.basis, c, &x, &p, &h)
}

fn evaluate(spec: &GeneratorSpec, form: GeneratorForm, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    spec.with_form(form).compile()?.rhs(rho)
}

/// Double-commutator right-hand side.
pub fn rhs_qbm4(spec: &GeneratorSpec, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    evaluate(spec, GeneratorForm::Qbm4, rho)
}

/// Single-generator Lindblad right-hand side.
pub fn rhs_qbm5(spec: &GeneratorSpec, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    evaluate(spec, GeneratorForm::Qbm5, rho)
}

/// Double-commutator form with `D_qq = 0`.
pub fn rhs_caldeira_leggett(spec: &GeneratorSpec, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    evaluate(spec, GeneratorForm::CaldeiraLeggett, rho)
}

/// `-(i/ħ)[H,ρ] + Σ(LρL† - ½{L†L,ρ})`; the caller owns any prefactors on `L`.
pub fn rhs_generic_lindblad(
    h: &OperatorMatrix,
    ops: &[OperatorMatrix],
    rho: &OperatorMatrix,
    hbar: f64,
) -> Result<OperatorMatrix> {
    let mut out = commutator(h, rho)?.scale(-I / hbar);
    for l in ops {
        let ld = l.adjoint();
        let ldl = &ld * l;
        let jump = &(l * rho) * &ld;
        let anti = anticommutator(&ldl, rho)?;
        out = &(&out + &jump) - &anti.scale_real(0.5);
    }
    Ok(out)
}

/// Dense `dim² × dim²` matrix `S` with `vec(dρ/dt) = S vec(ρ)` (column stacking).
pub fn superoperator_matrix(spec: &GeneratorSpec) -> Result<DMatrix<C64>> {
    let n = spec.basis.dim;
    if n > SUPEROPERATOR_DIM_LIMIT {
        return Err(Error::DimensionTooLarge {
            dim: n,
            limit: SUPEROPERATOR_DIM_LIMIT,
        });
    }
    let generator = spec.compile()?;
    let mut s = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let mut unit = DMatrix::zeros(n, n);
            unit[(i, j)] = ONE;
            let image = vectorize(&generator.rhs_matrix(&unit));
            s.set_column(i + n * j, &image);
        }
    }
    Ok(s)
}
