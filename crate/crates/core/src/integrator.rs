//! Fixed-step and step-doubling adaptive RK4 for density matrices.
//!
//! Neither the trace nor the spectrum is corrected during a run: trace drift
//! and negative eigenvalues are reported as observables.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{positive, Error};
use crate::gaussian::GaussianState;
use crate::hilbert::{
    build_momentum, build_position, expectation, min_eigenvalue, purity, DensityMatrix, OperatorMatrix, C64,
};
use crate::master_equation::{Generator, GeneratorForm, GeneratorSpec};

/// Fraction of the basis counted as its top levels by the health check.
pub const TRUNCATION_FRACTION: f64 = 0.1;
/// Top-level population above which a run aborts.
pub const TRUNCATION_LIMIT: f64 = 1e-3;
const SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepMode {
    Fixed,
    Adaptive { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hermitize {
    Off,
    SymmetrizeEachStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed step, or the initial step in adaptive mode.
    pub dt: f64,
    pub t_end: f64,
    pub mode: StepMode,
    /// Record every this many multiples of `dt`.
    pub record_every: usize,
    pub hermitize: Hermitize,
}

impl IntegratorConfig {
    pub fn fixed(dt: f64, t_end: f64, record_every: usize) -> Self {
        Self {
            dt,
            t_end,
            mode: StepMode::Fixed,
            record_every,
            hermitize: Hermitize::Off,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if self.dt >= self.t_end {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("dt = {} must be smaller than t_end = {}", self.dt, self.t_end),
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be at least 1".into(),
            });
        }
        if let StepMode::Adaptive { rel_tol, abs_tol } = self.mode {
            for (name, tol) in [("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
                if !(tol > 1e-14 && tol < 1e-2) {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: format!("must lie in (1e-14, 1e-2), got {tol}"),
                    });
                }
            }
        }
        Ok(())
    }

    fn record_times(&self) -> Vec<f64> {
        let interval = self.dt * self.record_every as f64;
        let mut times = Vec::new();
        let mut k = 0usize;
        loop {
            let t = k as f64 * interval;
            if t >= self.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
        times.push(self.t_end);
        times
    }
}

/// Observables extracted at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub energy: f64,
    pub purity: f64,
    pub trace_drift: f64,
    pub min_eig: f64,
    pub truncation_health: f64,
}

impl Observables {
    pub const NAMES: [&'static str; 10] = [
        "mean_x",
        "mean_p",
        "var_x",
        "var_p",
        "cov_xp",
        "energy",
        "purity",
        "trace_drift",
        "min_eig",
        "truncation_health",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.mean_x,
            self.mean_p,
            self.var_x,
            self.var_p,
            self.cov_xp,
            self.energy,
            self.purity,
            self.trace_drift,
            self.min_eig,
            self.truncation_health,
        ]
    }

    pub fn moments(&self) -> GaussianState {
        GaussianState {
            mean_x: self.mean_x,
            mean_p: self.mean_p,
            var_x: self.var_x,
            var_p: self.var_p,
            cov_xp: self.cov_xp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub rows: Vec<Observables>,
    pub final_state: OperatorMatrix,
    pub stats: StepStats,
}

impl TrajectoryRecord {
    /// Most negative eigenvalue seen at any recorded time.
    pub fn min_eig_overall(&self) -> f64 {
        self.rows.iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min)
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.trace_drift.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("truncation overflow at t = {t}: top-level population {health:e} exceeds {TRUNCATION_LIMIT:e}")]
    TruncationOverflow {
        t: f64,
        health: f64,
        partial: Box<TrajectoryRecord>,
    },
    #[error("non-finite state after step {step} at t = {t}")]
    NonFinite { t: f64, step: usize },
    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },
}

/// Population in the top `⌈fraction · dim⌉` levels.
pub fn truncation_health(rho: &OperatorMatrix, fraction: f64) -> f64 {
    let n = rho.dim();
    let top = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    (n - top..n).map(|k| rho.get(k, k).re).sum()
}

fn rk4_matrix(g: &Generator, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = g.rhs_matrix(rho);
    let k2 = g.rhs_matrix(&(rho + &k1 * half));
    let k3 = g.rhs_matrix(&(rho + &k2 * half));
    let k4 = g.rhs_matrix(&(rho + &k3 * C64::new(dt, 0.0)));
    rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn finite(m: &DMatrix<C64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// One classical RK4 step. The trace is not renormalized.
pub fn step_rk4(
    generator: &Generator,
    rho: &OperatorMatrix,
    dt: f64,
    hermitize: Hermitize,
) -> Result<OperatorMatrix, IntegrationError> {
    if rho.dim() != generator.dim() {
        return Err(Error::DimensionMismatch {
            expected: generator.dim(),
            got: rho.dim(),
        }
        .into());
    }
    let mut next = rk4_matrix(generator, rho.matrix(), dt);
    if hermitize == Hermitize::SymmetrizeEachStep {
        next = symmetrize(next);
    }
    if !finite(&next) {
        return Err(IntegrationError::NonFinite { t: dt, step: 1 });
    }
    Ok(OperatorMatrix::from_matrix_unchecked(next))
}

struct Probe {
    x: OperatorMatrix,
    p: OperatorMatrix,
    h: OperatorMatrix,
    trace0: f64,
}

impl Probe {
    fn new(spec: &GeneratorSpec, trace0: f64) -> Self {
        let h = match &spec.form {
            GeneratorForm::Generic { hamiltonian, .. } => hamiltonian.clone(),
            _ => spec.hamiltonian.build(&spec.basis),
        };
        Self {
            x: build_position(&spec.basis),
            p: build_momentum(&spec.basis),
            h,
            trace0,
        }
    }

    fn observe(&self, rho: &OperatorMatrix) -> Observables {
        let m = GaussianState::from_operators(rho, &self.x, &self.p).expect("dimensions checked");
        Observables {
            mean_x: m.mean_x,
            mean_p: m.mean_p,
            var_x: m.var_x,
            var_p: m.var_p,
            cov_xp: m.cov_xp,
            energy: expectation(rho, &self.h).expect("dimensions checked").re,
            purity: purity(rho),
            trace_drift: rho.trace().re - self.trace0,
            min_eig: min_eigenvalue(rho),
            truncation_health: truncation_health(rho, TRUNCATION_FRACTION),
        }
    }
}

/// Evolve `rho0` to `config.t_end`, recording observables on the grid
/// `k · record_every · dt` plus `t_end`.
pub fn integrate(
    spec: &GeneratorSpec,
    rho0: &DensityMatrix,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord, IntegrationError> {
    config.validate()?;
    let generator = spec.compile()?;
    if rho0.dim() != generator.dim() {
        return Err(Error::DimensionMismatch {
            expected: generator.dim(),
            got: rho0.dim(),
        }
        .into());
    }
    let probe = Probe::new(spec, rho0.op().trace().re);
    let record_times = config.record_times();

    let mut rho = rho0.op().matrix().clone();
    let mut t = 0.0;
    let mut stats = StepStats::default();
    let mut times = Vec::with_capacity(record_times.len());
    let mut rows = Vec::with_capacity(record_times.len());
    let mut h = config.dt;
    let (h_min, h_max) = (config.dt / 1000.0, config.dt * 100.0);

    for &target in &record_times {
        while target - t > 1e-12 * config.t_end {
            let remaining = target - t;
            let next = match config.mode {
                StepMode::Fixed => {
                    let step = config.dt.min(remaining);
                    let next = rk4_matrix(&generator, &rho, step);
                    t = if step == remaining { target } else { t + step };
                    next
                }
                StepMode::Adaptive { rel_tol, abs_tol } => loop {
                    let step = h.min(remaining);
                    let full = rk4_matrix(&generator, &rho, step);
                    let mid = rk4_matrix(&generator, &rho, 0.5 * step);
                    let two_half = rk4_matrix(&generator, &mid, 0.5 * step);
                    let err = (&two_half - &full).camax() / 15.0;
                    let scale = abs_tol + rel_tol * two_half.camax();
                    let ratio = err / scale;
                    let factor = if ratio > 0.0 {
                        (SAFETY * ratio.powf(-0.2)).clamp(0.2, 5.0)
                    } else {
                        5.0
                    };
                    if !ratio.is_finite() {
                        return Err(IntegrationError::NonFinite {
                            t,
                            step: stats.accepted + 1,
                        });
                    }
                    if ratio <= 1.0 {
                        t = if step == remaining { target } else { t + step };
                        // keep the controller's proposal when the step was shortened to hit a record time
                        if step == h {
                            h = (h * factor).clamp(h_min, h_max);
                        }
                        // local extrapolation: the accepted value is fifth order
                        break &two_half + (&two_half - &full) * C64::new(1.0 / 15.0, 0.0);
                    }
                    stats.rejected += 1;
                    if step <= h_min * (1.0 + 1e-12) {
                        return Err(IntegrationError::StepUnderflow { t, dt: step });
                    }
                    h = (step * factor).clamp(h_min, h_max);
                },
            };
            rho = if config.hermitize == Hermitize::SymmetrizeEachStep {
                symmetrize(next)
            } else {
                next
            };
            stats.accepted += 1;
            if !finite(&rho) {
                return Err(IntegrationError::NonFinite {
                    t,
                    step: stats.accepted,
                });
            }
            let op = OperatorMatrix::from_matrix_unchecked(rho.clone());
            let health = truncation_health(&op, TRUNCATION_FRACTION);
            if health > TRUNCATION_LIMIT {
                times.push(t);
                rows.push(probe.observe(&op));
                return Err(IntegrationError::TruncationOverflow {
                    t,
                    health,
                    partial: Box::new(TrajectoryRecord {
                        times,
                        rows,
                        final_state: op,
                        stats,
                    }),
                });
            }
        }
        let op = OperatorMatrix::from_matrix_unchecked(rho.clone());
        times.push(target);
        rows.push(probe.observe(&op));
    }

    Ok(TrajectoryRecord {
        times,
        rows,
        final_state: OperatorMatrix::from_matrix_unchecked(rho),
        stats,
    })
}
