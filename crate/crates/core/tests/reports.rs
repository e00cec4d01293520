use treerep_core::calculus::build_pair;
use treerep_core::representation::SerializedCell;
use treerep_core::suites::{run_suites, suite_homomorphism, suite_prop22};
use treerep_core::{pi_apply, Letter, MatrixOperator, StepFunction, SuiteConfig, SuiteName, TreeAutomorphism, VerifyReport};

fn cfg(seed: u64) -> SuiteConfig {
    SuiteConfig {
        q: 3,
        depth_cap: 6,
        dim: 2,
        trials: 10,
        seed,
        tol: 1e-8,
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = serde_json::to_string(&run_suites(&cfg(9), &SuiteName::ALL).unwrap()).unwrap();
    let b = serde_json::to_string(&run_suites(&cfg(9), &SuiteName::ALL).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&run_suites(&cfg(10), &SuiteName::ALL).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn reports_round_trip_through_json() {
    let report = run_suites(&cfg(1), &[SuiteName::Prop21Replay, SuiteName::AdmissibilityTable]).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: VerifyReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert!(back.passed);
    assert_eq!(back.suites[0].suite_name, SuiteName::Prop21Replay);
}

#[test]
fn homomorphism_counterexamples_replay() {
    // An impossible tolerance turns every non-trivial trial into a counterexample.
    let c = SuiteConfig { tol: 1e-300, ..cfg(5) };
    let report = suite_homomorphism(&c).unwrap();
    assert!(!report.passed);
    assert_eq!(report.passed, report.failures.is_empty());
    let params = c.params().unwrap();
    for f in &report.failures {
        let input = &f.input;
        let word = |key: &str| {
            let letters: Vec<Letter> = serde_json::from_value(input[key]["word"].clone()).unwrap();
            TreeAutomorphism::from_letters(params, letters).unwrap()
        };
        let (g, h) = (word("g"), word("h"));
        let alpha: MatrixOperator = serde_json::from_value(input["alpha"].clone()).unwrap();
        let pair = build_pair(&alpha, c.q, 1e-9).unwrap();
        let cells: Vec<SerializedCell> = serde_json::from_value(input["v"].clone()).unwrap();
        let v = StepFunction::from_serialized(params, &cells).unwrap();
        let lhs = pi_apply(&g.compose(&h).unwrap(), &v, &pair).unwrap();
        let rhs = pi_apply(&g, &pi_apply(&h, &v, &pair).unwrap(), &pair).unwrap();
        let scale = pair.tau_norm.powi((g.displacement() + h.displacement()) as i32) * v.sup_norm();
        let residual = lhs.sub(&rhs).unwrap().sup_norm() / scale;
        assert!((residual - f.residual).abs() <= 1e-12, "trial {}: {residual} vs {}", f.trial, f.residual);
    }
}

#[test]
fn tolerance_is_respected() {
    let loose = suite_prop22(&cfg(2)).unwrap();
    assert!(loose.passed);
    let tight = suite_prop22(&SuiteConfig { tol: loose.max_residual / 2.0, ..cfg(2) }).unwrap();
    assert!(!tight.passed);
    assert!(tight.failures.iter().all(|f| f.residual > loose.max_residual / 2.0));
}
