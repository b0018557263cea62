use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use qbm_core::coefficients::{
    check_brownian_limit, compute_coefficients, BrownianLimitReport, CoefficientSet, QuadratureConfig,
};
use qbm_core::diagnostics::{choi_scan, cp_condition, CPReport};
use qbm_core::gaussian::{max_relative_deviation, propagate_moments, stationary_moments, StationaryMoments};
use qbm_core::hilbert::{dm_coherent, dm_fock, dm_squeezed, dm_thermal, BasisConfig, DensityMatrix};
use qbm_core::integrator::{integrate, IntegrationError, Observables, StepStats, TrajectoryRecord};
use qbm_core::master_equation::{GeneratorForm, GeneratorSpec};

use crate::config::{InitialState, Scenario};

pub const CSV_HEADER: &str = "t,mean_x,mean_p,var_x,var_p,cov_xp,energy,purity,trace_drift,min_eig,truncation_health";

const CHOI_DIM: usize = 6;
const CHOI_TIMES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario `{scenario}`: {source}")]
    Compute { scenario: String, source: qbm_core::Error },
    #[error("scenario `{scenario}`: {path}: {source}")]
    Io {
        scenario: String,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario `{scenario}`: non-finite value in {what}")]
    NonFinite { scenario: String, what: &'static str },
    #[error("scenario `{scenario}`: {source}")]
    Integration { scenario: String, source: IntegrationError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    TruncationOverflow,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub form: &'static str,
    pub status: RunStatus,
    pub coefficients: CoefficientSet,
    pub cp_report: CPReport,
    pub cp_report_text: String,
    pub brownian_limit: BrownianLimitReport,
    pub stationary: StationaryMoments,
    pub basis_dim: usize,
    pub records: usize,
    pub t_final: f64,
    pub oracle_max_rel_dev: f64,
    pub min_eig_overall: f64,
    pub max_trace_drift: f64,
    pub max_truncation_health: f64,
    pub final_observables: Observables,
    pub steps: StepStats,
    pub wall_time_s: f64,
    pub csv: PathBuf,
}

/// Everything a finished (or truncation-aborted) run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub record: TrajectoryRecord,
}

/// Coefficients as the chosen form sees them (`D_qq = 0` for Caldeira–Leggett).
pub fn scenario_coefficients(s: &Scenario) -> Result<CoefficientSet, qbm_core::Error> {
    let c = compute_coefficients(
        &s.gas,
        s.mass,
        &s.tmatrix,
        &QuadratureConfig::default(),
        s.basis.hbar,
        s.forward_amplitude,
    )?;
    Ok(match s.form {
        GeneratorForm::CaldeiraLeggett => c.caldeira_leggett(),
        _ => c,
    })
}

pub fn brownian_report(s: &Scenario) -> BrownianLimitReport {
    check_brownian_limit(&s.gas, s.mass)
}

fn initial_state(s: &Scenario) -> Result<DensityMatrix, qbm_core::Error> {
    match s.initial {
        InitialState::Fock(n) => dm_fock(&s.basis, n),
        InitialState::Coherent(alpha) => dm_coherent(&s.basis, alpha),
        InitialState::Thermal(b) => dm_thermal(&s.basis, b),
        InitialState::Squeezed(r) => dm_squeezed(&s.basis, r),
    }
}

pub fn oracle_deviation(record: &TrajectoryRecord, coeffs: &CoefficientSet, s: &Scenario) -> f64 {
    let Some(first) = record.rows.first() else { return 0.0 };
    let oracle = propagate_moments(&first.moments(), coeffs, &s.hamiltonian, &record.times);
    let simulated: Vec<_> = record.rows.iter().map(|r| r.moments()).collect();
    max_relative_deviation(&simulated, &oracle)
}

fn channel_report(spec: &GeneratorSpec, coeffs: &CoefficientSet, t_end: f64) -> Result<CPReport, qbm_core::Error> {
    let report = cp_condition(coeffs);
    let dim = spec.basis.dim.min(CHOI_DIM);
    let basis = BasisConfig { dim, ..spec.basis };
    let small = GeneratorSpec { basis, ..spec.clone() };
    let unit = if coeffs.gamma > 0.0 { 1.0 / coeffs.gamma } else { t_end };
    let times: Vec<f64> = CHOI_TIMES.iter().map(|f| f * unit).collect();
    let min = choi_scan(&small, &times)?.into_iter().fold(f64::INFINITY, f64::min);
    Ok(report.with_choi(min, dim))
}

fn resolve(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

pub fn write_csv(path: &Path, record: &TrajectoryRecord) -> std::io::Result<()> {
    let mut out = String::with_capacity(256 * (record.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, row) in record.times.iter().zip(&record.rows) {
        out.push_str(&format!("{t:.16e}"));
        for v in row.values() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

fn all_finite(record: &TrajectoryRecord) -> bool {
    record.times.iter().all(|t| t.is_finite()) && record.rows.iter().all(|r| r.values().iter().all(|v| v.is_finite()))
}

/// Compute coefficients, integrate, diagnose and write the scenario's CSV and
/// JSON files. A truncation overflow still writes the partial trajectory and
/// returns `status = TruncationOverflow`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let compute = |source| RunError::Compute {
        scenario: s.name.clone(),
        source,
    };
    let coeffs = scenario_coefficients(s).map_err(compute)?;
    let spec = GeneratorSpec::qbm(s.form.clone(), coeffs.clone(), s.hamiltonian, s.basis).map_err(compute)?;
    let rho0 = initial_state(s).map_err(compute)?;
    let cp_report = channel_report(&spec, &coeffs, s.integrator.t_end).map_err(compute)?;
    log::info!(
        "{}: D_pp = {:e}, D_qq = {:e}, gamma = {:e}",
        s.name,
        coeffs.d_pp,
        coeffs.d_qq,
        coeffs.gamma
    );

    let (record, status) = match integrate(&spec, &rho0, &s.integrator) {
        Ok(rec) => (rec, RunStatus::Completed),
        Err(IntegrationError::TruncationOverflow { t, health, partial }) => {
            log::error!(
                "{}: truncation overflow at t = {t} (top-level population {health:e})",
                s.name
            );
            (*partial, RunStatus::TruncationOverflow)
        }
        Err(e) => {
            return Err(RunError::Integration {
                scenario: s.name.clone(),
                source: e,
            })
        }
    };
    if !all_finite(&record) {
        return Err(RunError::NonFinite {
            scenario: s.name.clone(),
            what: "trajectory",
        });
    }

    let csv = resolve(out_dir, &s.outputs.csv);
    let json = resolve(out_dir, &s.outputs.json);
    let io = |path: &Path| {
        let (scenario, path) = (s.name.clone(), path.to_path_buf());
        move |source| RunError::Io { scenario, path, source }
    };
    for p in [&csv, &json] {
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
    }
    write_csv(&csv, &record).map_err(io(&csv))?;

    let summary = RunSummary {
        scenario: s.name.clone(),
        form: s.form.label(),
        status,
        cp_report_text: cp_report.to_string(),
        cp_report,
        brownian_limit: brownian_report(s),
        stationary: stationary_moments(&coeffs, &s.hamiltonian),
        basis_dim: s.basis.dim,
        records: record.rows.len(),
        t_final: record.times.last().copied().unwrap_or(0.0),
        oracle_max_rel_dev: oracle_deviation(&record, &coeffs, s),
        min_eig_overall: record.min_eig_overall(),
        max_trace_drift: record.max_trace_drift(),
        max_truncation_health: record.rows.iter().map(|r| r.truncation_health).fold(0.0, f64::max),
        final_observables: *record.rows.last().expect("at least the initial row is recorded"),
        steps: record.stats.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        coefficients: coeffs,
        csv,
    };
    let numbers = [
        summary.oracle_max_rel_dev,
        summary.min_eig_overall,
        summary.max_trace_drift,
        summary.coefficients.d_pp,
        summary.coefficients.d_qq,
        summary.coefficients.gamma,
        summary.coefficients.v_shift,
    ];
    if numbers.iter().any(|v| !v.is_finite()) {
        return Err(RunError::NonFinite {
            scenario: s.name.clone(),
            what: "summary",
        });
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&json, text + "\n").map_err(io(&json))?;
    Ok(RunOutput { summary, record })
}
