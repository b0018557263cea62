//! Temperature-dependent coefficients of the Brownian master equation.
//!
//! The momentum diffusion `D_pp` is a Boltzmann-weighted quadrature of the
//! squared T-matrix kernel over momentum transfer. Friction `γ` and position
//! diffusion `D_qq` follow from it through fixed powers of `β/M`, which makes
//! `D_pp·D_qq = (ħγ/2)²` hold identically.

pub mod quadrature;
pub mod tmatrix;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use quadrature::GaussLegendre;
pub use tmatrix::{TMatrixModel, Table};

/// Boltzmann gas the particle is immersed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParameters {
    /// Gas-particle mass `m`.
    pub m: f64,
    /// Inverse temperature `1/k_B T`.
    pub beta: f64,
    /// Number density.
    pub n: f64,
}

impl GasParameters {
    pub fn new(m: f64, beta: f64, n: f64) -> Result<Self> {
        let gas = Self { m, beta, n };
        gas.validate()?;
        Ok(gas)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gas.m", self.m)?;
        positive("gas.beta", self.beta)?;
        positive("gas.n", self.n)
    }

    /// Momentum scale `√(8m/β)` of the Boltzmann factor `exp(-βq²/8m)`.
    pub fn transfer_scale(&self) -> f64 {
        (8.0 * self.m / self.beta).sqrt()
    }
}

/// Gas thermal wavelength `λ_m = √(2πħ²β/m)`, the value that normalizes the
/// Boltzmann occupation `n λ_m³ exp(-βp²/2m)` to the density `n`.
pub fn thermal_wavelength_gas(gas: &GasParameters, hbar: f64) -> f64 {
    (2.0 * PI * hbar * hbar * gas.beta / gas.m).sqrt()
}

/// Brownian-particle wavelength `λ_M = √(ħ²β/M)` (no `2π`).
pub fn thermal_wavelength_particle(mass: f64, beta: f64, hbar: f64) -> f64 {
    (hbar * hbar * beta / mass).sqrt()
}

/// Node-doubling control for the `D_pp` quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Equal panels on `[0, q_max]` for the analytic models.
    pub panels: usize,
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Doubling stops once the relative change drops below this.
    pub target_rel: f64,
    /// Relative change tolerated at `max_nodes` before failing.
    pub fail_rel: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: 8,
            initial_nodes: 16,
            max_nodes: 1024,
            target_rel: 1e-10,
            fail_rel: 1e-6,
        }
    }
}

/// Upper cutoff `8√(8m/β)`; the Boltzmann factor there is `e^{-64}`.
pub fn quadrature_cutoff(gas: &GasParameters) -> f64 {
    8.0 * gas.transfer_scale()
}

/// Smallest `q` at which the Boltzmann factor has fallen below `1e-12`.
pub fn boltzmann_support(gas: &GasParameters) -> f64 {
    gas.transfer_scale() * (12.0 * 10f64.ln()).sqrt()
}

/// Momentum diffusion coefficient
/// `D_pp = (2/3)(π²m²/βħ) n λ_m³ · 4π ∫₀^∞ q³ |t̃(q)|² e^{-βq²/8m} dq`.
pub fn compute_dpp(gas: &GasParameters, tmodel: &TMatrixModel, quad: &QuadratureConfig, hbar: f64) -> Result<f64> {
    gas.validate()?;
    tmodel.validate()?;
    positive("hbar", hbar)?;

    let panels = integration_panels(gas, tmodel, quad)?;
    let c = gas.beta / (8.0 * gas.m);
    let integrand = |q: f64| {
        let t2 = tmodel.squared(q).expect("panels stay inside the model's range");
        q * q * q * t2 * (-c * q * q).exp()
    };
    let radial = converged_integral(&panels, quad, integrand)?;

    let lambda = thermal_wavelength_gas(gas, hbar);
    let prefactor = (2.0 / 3.0) * PI * PI * gas.m * gas.m / (gas.beta * hbar) * gas.n * lambda.powi(3);
    Ok(prefactor * 4.0 * PI * radial)
}

fn integration_panels(gas: &GasParameters, tmodel: &TMatrixModel, quad: &QuadratureConfig) -> Result<Vec<(f64, f64)>> {
    let cutoff = quadrature_cutoff(gas);
    match tmodel {
        TMatrixModel::Tabulated(table) => {
            if table.q_min() > 0.0 {
                return Err(Error::TableCoverage(format!(
                    "table starts at q = {} but must start at q = 0",
                    table.q_min()
                )));
            }
            let needed = boltzmann_support(gas);
            if table.q_max() < needed {
                return Err(Error::TableCoverage(format!(
                    "table ends at q = {} but the Boltzmann weight needs q up to {needed}",
                    table.q_max()
                )));
            }
            let end = cutoff.min(table.q_max());
            let mut edges: Vec<f64> = table.knots().iter().cloned().filter(|&q| q < end).collect();
            edges.push(end);
            Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
        }
        TMatrixModel::Constant { .. } => Ok(equal_panels(0.0, cutoff, quad.panels)),
        TMatrixModel::GaussianKernel { sigma, .. } => {
            // A narrow kernel concentrates the integrand well inside the
            // Boltzmann cutoff; resolve that region with its own panels.
            let effective = 8.0 / (gas.beta / (8.0 * gas.m) + sigma * sigma).sqrt();
            let mut panels = equal_panels(0.0, effective.min(cutoff), quad.panels);
            if effective < cutoff {
                panels.push((effective, cutoff));
            }
            Ok(panels)
        }
    }
}

fn equal_panels(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    (0..n).map(|k| (a + k as f64 * h, a + (k + 1) as f64 * h)).collect()
}

fn converged_integral(panels: &[(f64, f64)], quad: &QuadratureConfig, f: impl Fn(f64) -> f64) -> Result<f64> {
    let eval = |nodes: usize| {
        let rule = GaussLegendre::new(nodes);
        panels.iter().map(|&(a, b)| rule.integrate(a, b, &f)).sum::<f64>()
    };
    let mut nodes = quad.initial_nodes.max(2);
    let mut previous = eval(nodes);
    loop {
        let refined_nodes = nodes * 2;
        let refined = eval(refined_nodes);
        let change = (refined - previous).abs();
        let rel = if refined == 0.0 { change } else { change / refined.abs() };
        if rel <= quad.target_rel {
            return Ok(refined);
        }
        if refined_nodes * 2 > quad.max_nodes {
            if rel <= quad.fail_rel {
                log::warn!("D_pp quadrature stopped at relative change {rel:e}");
                return Ok(refined);
            }
            return Err(Error::QuadratureNotConverged {
                rel_change: rel,
                nodes: refined_nodes,
            });
        }
        nodes = refined_nodes;
        previous = refined;
    }
}

/// Inputs a [`CoefficientSet`] was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gas: Option<GasParameters>,
    pub tmatrix: Option<TMatrixModel>,
    pub forward_amplitude: f64,
    pub note: String,
}

/// Friction and diffusion coefficients for one Cartesian axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub d_pp: f64,
    pub d_qq: f64,
    pub gamma: f64,
    pub v_shift: f64,
    /// Mass ratio `m/M`.
    pub alpha: f64,
    /// Brownian-particle mass `M`.
    pub mass: f64,
    pub beta: f64,
    pub hbar: f64,
    pub provenance: Provenance,
}

/// `D_qq = (βħ/4M)² D_pp`, `γ = (β/2M) D_pp`.
pub fn derive_coefficients(d_pp: f64, gas: &GasParameters, mass: f64, hbar: f64) -> Result<CoefficientSet> {
    non_negative("d_pp", d_pp)?;
    gas.validate()?;
    positive("mass", mass)?;
    positive("hbar", hbar)?;
    let beta = gas.beta;
    let d_qq = (beta * hbar / (4.0 * mass)).powi(2) * d_pp;
    let gamma = beta / (2.0 * mass) * d_pp;
    Ok(CoefficientSet {
        d_pp,
        d_qq,
        gamma,
        v_shift: 0.0,
        alpha: gas.m / mass,
        mass,
        beta,
        hbar,
        provenance: Provenance {
            gas: Some(*gas),
            tmatrix: None,
            forward_amplitude: 0.0,
            note: "derived".into(),
        },
    })
}

/// Quadrature, derived relations and mean-field shift in one go.
pub fn compute_coefficients(
    gas: &GasParameters,
    mass: f64,
    tmodel: &TMatrixModel,
    quad: &QuadratureConfig,
    hbar: f64,
    forward_amplitude: f64,
) -> Result<CoefficientSet> {
    let d_pp = compute_dpp(gas, tmodel, quad, hbar)?;
    let mut set = derive_coefficients(d_pp, gas, mass, hbar)?;
    set.v_shift = mean_field_shift(gas, forward_amplitude, hbar);
    set.provenance.tmatrix = Some(tmodel.clone());
    set.provenance.forward_amplitude = forward_amplitude;
    set.provenance.note = "quadrature".into();
    Ok(set)
}

impl CoefficientSet {
    /// Comparison-model coefficients not tied by the derived relations.
    pub fn raw(d_pp: f64, d_qq: f64, gamma: f64, mass: f64, beta: f64, hbar: f64) -> Result<Self> {
        non_negative("d_pp", d_pp)?;
        non_negative("d_qq", d_qq)?;
        non_negative("gamma", gamma)?;
        positive("mass", mass)?;
        positive("beta", beta)?;
        positive("hbar", hbar)?;
        Ok(Self {
            d_pp,
            d_qq,
            gamma,
            v_shift: 0.0,
            alpha: 0.0,
            mass,
            beta,
            hbar,
            provenance: Provenance {
                gas: None,
                tmatrix: None,
                forward_amplitude: 0.0,
                note: "raw".into(),
            },
        })
    }

    /// Same set with `D_qq = 0` (Caldeira–Leggett).
    pub fn caldeira_leggett(&self) -> Self {
        let mut cl = self.clone();
        cl.d_qq = 0.0;
        cl.provenance.note = format!("{} with D_qq forced to 0", self.provenance.note);
        cl
    }

    pub fn with_shift(mut self, v_shift: f64) -> Self {
        self.v_shift = v_shift;
        self
    }

    /// `λ_M` for this set's mass and temperature.
    pub fn particle_wavelength(&self) -> f64 {
        thermal_wavelength_particle(self.mass, self.beta, self.hbar)
    }
}

/// Constant mean-field energy `-2πħ² n Re f(0) / m` from an energy-independent
/// forward scattering amplitude.
pub fn mean_field_shift(gas: &GasParameters, forward_amplitude: f64, hbar: f64) -> f64 {
    -2.0 * PI * hbar * hbar * gas.n * forward_amplitude / gas.m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LimitStatus {
    Ok,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianLimitReport {
    pub alpha: f64,
    pub status: LimitStatus,
}

impl BrownianLimitReport {
    /// Fails on `Fail` unless overridden.
    pub fn enforce(&self, override_limit: bool) -> Result<()> {
        match self.status {
            LimitStatus::Fail if !override_limit => Err(Error::BrownianLimit { alpha: self.alpha }),
            LimitStatus::Warn => {
                log::warn!("mass ratio alpha = {} is outside the Brownian regime", self.alpha);
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// OK for `α ≤ 0.1`, WARN up to `0.5`, FAIL above.
pub fn check_brownian_limit(gas: &GasParameters, mass: f64) -> BrownianLimitReport {
    let alpha = gas.m / mass;
    let status = if alpha <= 0.1 {
        LimitStatus::Ok
    } else if alpha <= 0.5 {
        LimitStatus::Warn
    } else {
        LimitStatus::Fail
    };
    BrownianLimitReport { alpha, status }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas(m: f64, beta: f64, n: f64) -> GasParameters {
        GasParameters::new(m, beta, n).unwrap()
    }

    #[test]
    fn gas_wavelength() {
        let g = gas(1.0, 2.0 * PI, 1.0);
        assert!((thermal_wavelength_gas(&g, 1.0) - 2.0 * PI).abs() < 1e-14);
        let base = thermal_wavelength_gas(&gas(0.7, 1.3, 1.0), 1.0);
        assert!((thermal_wavelength_gas(&gas(0.7, 5.2, 1.0), 1.0) - 2.0 * base).abs() < 1e-14);
        assert!((thermal_wavelength_gas(&gas(2.8, 1.3, 1.0), 1.0) - 0.5 * base).abs() < 1e-14);
    }

    #[test]
    fn particle_wavelength() {
        assert_eq!(thermal_wavelength_particle(1.0, 1.0, 1.0), 1.0);
        assert_eq!(thermal_wavelength_particle(4.0, 1.0, 1.0), 0.5);
        assert_eq!(thermal_wavelength_particle(1.0, 4.0, 1.0), 2.0);
    }

    #[test]
    fn derived_relations() {
        let set = derive_coefficients(4.0, &gas(0.01, 1.0, 1.0), 1.0, 1.0).unwrap();
        assert!((set.d_qq - 0.25).abs() < 1e-15);
        assert!((set.gamma - 2.0).abs() < 1e-15);
        assert!((set.d_pp * set.d_qq - (set.hbar * set.gamma / 2.0).powi(2)).abs() < 1e-15);
        assert!((set.alpha - 0.01).abs() < 1e-18);

        let zero = derive_coefficients(0.0, &gas(0.01, 1.0, 1.0), 1.0, 1.0).unwrap();
        assert_eq!((zero.d_pp, zero.d_qq, zero.gamma), (0.0, 0.0, 0.0));

        let hot = derive_coefficients(3.0, &gas(0.01, 0.5, 1.0), 2.0, 1.0).unwrap();
        let cold = derive_coefficients(3.0, &gas(0.01, 1.0, 1.0), 2.0, 1.0).unwrap();
        assert!((cold.gamma - 2.0 * hot.gamma).abs() < 1e-15);
        assert!((cold.d_qq - 4.0 * hot.d_qq).abs() < 1e-15);

        assert!(derive_coefficients(-1.0, &gas(0.01, 1.0, 1.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn mean_field() {
        let g = gas(2.0 * PI, 1.0, 1.0);
        assert!((mean_field_shift(&g, 1.0, 1.0) + 1.0).abs() < 1e-15);
        assert_eq!(mean_field_shift(&g, 0.0, 1.0), 0.0);
        let g2 = gas(2.0 * PI, 1.0, 2.0);
        assert!((mean_field_shift(&g2, 0.3, 1.0) - 2.0 * mean_field_shift(&g, 0.3, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn brownian_gate() {
        let ok = check_brownian_limit(&gas(1.0, 1.0, 1.0), 100.0);
        assert_eq!(ok.status, LimitStatus::Ok);
        assert!((ok.alpha - 0.01).abs() < 1e-15);
        assert_eq!(check_brownian_limit(&gas(1.0, 1.0, 1.0), 4.0).status, LimitStatus::Warn);
        let fail = check_brownian_limit(&gas(1.0, 1.0, 1.0), 1.0);
        assert_eq!(fail.status, LimitStatus::Fail);
        assert!(fail.enforce(false).is_err());
        assert!(fail.enforce(true).is_ok());
    }

    #[test]
    fn zero_scattering_gives_zero_diffusion() {
        let d = compute_dpp(
            &gas(1.0, 1.0, 1.0),
            &TMatrixModel::Constant { t0: 0.0 },
            &Default::default(),
            1.0,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn table_must_cover_support() {
        let g = gas(1.0, 1.0, 1.0);
        let short = Table::new((0..10).map(|k| (k as f64 * 0.1, 1.0)).collect()).unwrap();
        let err = compute_dpp(&g, &TMatrixModel::Tabulated(short), &Default::default(), 1.0);
        assert!(matches!(err, Err(Error::TableCoverage(_))));
        let offset = Table::new((1..200).map(|k| (k as f64 * 0.1, 1.0)).collect()).unwrap();
        let err = compute_dpp(&g, &TMatrixModel::Tabulated(offset), &Default::default(), 1.0);
        assert!(matches!(err, Err(Error::TableCoverage(_))));
    }

    #[test]
    fn non_convergent_quadrature_is_reported() {
        let quad = QuadratureConfig {
            initial_nodes: 4,
            max_nodes: 32,
            ..Default::default()
        };
        let wild = converged_integral(&[(0.0, 1.0)], &quad, |q| (500.0 * q).sin());
        assert!(matches!(wild, Err(Error::QuadratureNotConverged { nodes: 32, .. })));
        let smooth = converged_integral(&[(0.0, 1.0)], &quad, |q| q * q).unwrap();
        assert!((smooth - 1.0 / 3.0).abs() < 1e-15);
    }
}
