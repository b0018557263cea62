mod common;

use common::*;
use qbm_core::coefficients::CoefficientSet;
use qbm_core::diagnostics::*;
use qbm_core::hilbert::C64;
use qbm_core::master_equation::{GeneratorForm, GeneratorSpec, HamiltonianSpec};

fn spec(form: GeneratorForm, c: CoefficientSet, dim: usize) -> GeneratorSpec {
    GeneratorSpec::qbm(form, c, HamiltonianSpec::harmonic(1.0), basis(dim)).unwrap()
}

#[test]
fn choi_partial_trace_is_identity() {
    let s = spec(GeneratorForm::Qbm4, saturated(0.4, 2.0), 5);
    let choi = choi_matrix(&s, 0.7).unwrap();
    assert!((choi.trace() - C64::new(5.0, 0.0)).norm() < 1e-10);
    // Tracing out the output factor leaves the identity on the input factor.
    for i in 0..5 {
        for j in 0..5 {
            let block: C64 = (0..5).map(|a| choi.get(i * 5 + a, j * 5 + a)).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((block - C64::new(want, 0.0)).norm() < 1e-10, "({i},{j}) {block}");
        }
    }
    assert!(choi.hermiticity_defect() < 1e-10);
}

#[test]
fn saturated_generators_give_positive_choi() {
    for (d_pp, beta) in [(0.05, 0.5), (0.3, 3.0), (1.0, 10.0)] {
        let c = saturated(d_pp, beta);
        let s = spec(GeneratorForm::Qbm4, c.clone(), 6);
        let times: Vec<f64> = [0.1, 1.0, 3.0].iter().map(|f| f / c.gamma).collect();
        for (t, e) in times.iter().zip(choi_scan(&s, &times).unwrap()) {
            assert!(e >= -PSD_FLOOR, "t {t}: {e}");
        }
    }
}

#[test]
fn sub_saturated_generator_is_not_cp() {
    let c = saturated(0.3, 5.0);
    let weak = CoefficientSet::raw(c.d_pp, 0.2 * c.d_qq, c.gamma, 1.0, 5.0, 1.0).unwrap();
    assert_eq!(cp_condition(&weak).coefficient_check.verdict, Verdict::Violated);
    let s = spec(GeneratorForm::Qbm4, weak, 6);
    let worst = choi_scan(&s, &[0.05, 0.2, 1.0])
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    assert!(worst < -1e-6, "{worst}");
}

#[test]
fn caldeira_leggett_is_not_cp() {
    let s = spec(GeneratorForm::CaldeiraLeggett, saturated(0.1, 20.0), 6);
    let report = cp_condition(&s.coefficients.as_ref().unwrap().caldeira_leggett());
    assert_eq!(report.coefficient_check.verdict, Verdict::Violated);
    let worst = choi_scan(&s, &[0.1, 0.5])
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    assert!(worst < -1e-6);
}

#[test]
fn oversized_choi_is_refused() {
    let s = spec(GeneratorForm::Qbm4, saturated(0.1, 1.0), CHOI_DIM_LIMIT + 1);
    assert!(matches!(
        choi_matrix(&s, 1.0),
        Err(qbm_core::Error::DimensionTooLarge { .. })
    ));
    assert!(choi_matrix(&spec(GeneratorForm::Qbm4, saturated(0.1, 1.0), 4), -1.0).is_err());
}
