use std::fmt::Write;

use crate::config::Scenario;
use crate::run::RunOutput;

/// Scenarios can only be compared when they describe the same gas, particle,
/// basis and recording grid.
pub fn check_compatible(scenarios: &[Scenario]) -> Result<(), String> {
    if scenarios.len() < 2 {
        return Err(format!("compare needs at least 2 scenarios, got {}", scenarios.len()));
    }
    let first = &scenarios[0];
    for s in &scenarios[1..] {
        let mut clash = Vec::new();
        if s.gas != first.gas {
            clash.push("gas");
        }
        if s.mass != first.mass {
            clash.push("particle.mass");
        }
        if s.basis != first.basis {
            clash.push("basis");
        }
        if s.integrator.dt != first.integrator.dt
            || s.integrator.t_end != first.integrator.t_end
            || s.integrator.record_every != first.integrator.record_every
        {
            clash.push("integrator grid");
        }
        if !clash.is_empty() {
            return Err(format!(
                "scenario `{}` is incompatible with `{}`: {} differ",
                s.name,
                first.name,
                clash.join(", ")
            ));
        }
    }
    Ok(())
}

/// Largest absolute difference of any observable at any shared record time.
pub fn max_observable_difference(a: &RunOutput, b: &RunOutput) -> f64 {
    a.record
        .rows
        .iter()
        .zip(&b.record.rows)
        .flat_map(|(x, y)| x.values().into_iter().zip(y.values()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

pub fn comparison_table(runs: &[RunOutput]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<17} {:>12} {:>12} {:>12} {:>18} {:>14} {:>14} {:>12} {:>14}",
        "scenario",
        "form",
        "D_pp",
        "D_qq",
        "gamma",
        "cp_verdict",
        "var_p_eq",
        "var_p_final",
        "min_eig",
        "max_dobs_vs_1"
    );
    for run in runs {
        let s = &run.summary;
        let c = &s.coefficients;
        let var_p_eq = s.stationary.var_p.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let diff = max_observable_difference(run, &runs[0]);
        let _ = writeln!(
            out,
            "{:<24} {:<17} {:>12.5e} {:>12.5e} {:>12.5e} {:>18} {:>14} {:>14.6e} {:>12.3e} {:>14.3e}",
            s.scenario,
            s.form,
            c.d_pp,
            c.d_qq,
            c.gamma,
            format!("{:?}", s.cp_report.coefficient_check.verdict),
            var_p_eq,
            s.final_observables.var_p,
            s.min_eig_overall,
            diff
        );
    }
    out
}
