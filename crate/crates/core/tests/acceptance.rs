//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use treerep_core::calculus::build_pair;
use treerep_core::rng::{random_alpha, trial_rng};
use treerep_core::suites::{
    admissibility_rows, replay_prop21, suite_homomorphism, suite_invariance_correspondence, suite_measure_cocycle,
    suite_prop21_replay, suite_prop22, suite_thm23_reach, SuiteReport,
};
use treerep_core::{guard_spectrum, verify, SuiteConfig, TreeAutomorphism, TreeParams};

const SEED: u64 = 20240601;
const QS: [u32; 2] = [2, 3];

struct Outcome {
    passed: bool,
    note: String,
}

impl Outcome {
    fn new(passed: bool, note: impl Into<String>) -> Self {
        Outcome {
            passed,
            note: note.into(),
        }
    }
}

fn cfg(q: u32, dim: usize, trials: usize, tol: f64) -> SuiteConfig {
    SuiteConfig {
        q,
        depth_cap: 8,
        dim,
        trials,
        seed: SEED,
        tol,
    }
}

fn suites_pass(reports: &[SuiteReport]) -> (bool, String) {
    let passed = reports.iter().all(|r| r.passed);
    let worst = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    (passed, format!("max residual {worst:.2e}, {failures} failing trials"))
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            out.passed = false;
            out.note = format!("{}; runtime {:.2?} over budget {:.0?}", out.note, elapsed, b);
        }
    }
    (out, elapsed)
}

fn measure_cocycle() -> Outcome {
    let reports: Vec<_> = QS.iter().map(|&q| suite_measure_cocycle(&cfg(q, 1, 100, 1e-8)).unwrap()).collect();
    let (passed, note) = suites_pass(&reports);
    Outcome::new(passed && reports.iter().all(|r| r.max_residual == 0.0), note)
}

/// 100 seeded `alpha` per `q`, dimensions cycling through 1..=6.
fn seeded_pairs(tag: u32) -> Vec<treerep_core::OperatorPair> {
    QS.iter()
        .flat_map(|&q| {
            (0..100u32).map(move |i| {
                let mut rng = trial_rng(SEED, tag, i);
                let d = 1 + (i as usize % 6);
                let alpha = random_alpha(&mut rng, q, d).unwrap();
                // Residual bounds are checked below, not inside the builder.
                build_pair(&alpha, q, f64::INFINITY).unwrap()
            })
        })
        .collect()
}

fn calculus_residuals() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for p in seeded_pairs(100) {
        let quad = p.residuals.quad / (1.0 + p.alpha_norm.powi(2));
        let sum = p.residuals.sum / (1.0 + p.alpha_norm);
        worst = worst.max(quad).max(sum);
        passed &= quad <= 1e-9 && sum <= 1e-9 && p.alpha_norm < 2.0 * f64::from(p.q).sqrt();
    }
    Outcome::new(passed, format!("200 pairs, worst scaled residual {worst:.2e}"))
}

fn spectral_guards() -> Outcome {
    let mut margin = f64::INFINITY;
    let mut sigma = f64::INFINITY;
    let mut passed = true;
    for p in seeded_pairs(101) {
        match guard_spectrum(&p) {
            Ok(g) => {
                margin = margin.min(g.margin_to_pm_q);
                sigma = sigma.min(g.sigma_min);
                passed &= g.margin_to_pm_q > 0.0 && g.sigma_min > 0.0;
            }
            Err(_) => passed = false,
        }
    }
    Outcome::new(passed, format!("min dist(spec tau, +-q) {margin:.3}, min sigma_min {sigma:.3}"))
}

fn homomorphism() -> Outcome {
    let reports: Vec<_> = QS
        .iter()
        .map(|&q| suite_homomorphism(&cfg(q, 2, 100, 1e-8)).unwrap())
        .collect();
    let (passed, note) = suites_pass(&reports);
    Outcome::new(passed, note)
}

fn alpha_through_rep() -> Outcome {
    let reports: Vec<_> = QS
        .iter()
        .flat_map(|&q| [1, 4, 6].map(|d| suite_prop22(&cfg(q, d, 100, 1e-9)).unwrap()))
        .collect();
    let (passed, note) = suites_pass(&reports);
    Outcome::new(passed, note)
}

fn pruning_replay() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    for q in QS {
        let params = TreeParams::new(q, 8).unwrap();
        let r = replay_prop21(params).unwrap();
        let id = TreeAutomorphism::identity(params);
        passed &= r.merged_count == q as usize && r.busemann_exponent == -1 && r.structural_errors(&id).is_empty();
        let suite = suite_prop21_replay(&cfg(q, 2, 100, 1e-8)).unwrap();
        passed &= suite.passed && suite.max_residual == 0.0;
        notes.push(format!(
            "q={q}: {} orbits merge into {}, exponent {}",
            r.merged_count, r.merged_cell, r.busemann_exponent
        ));
    }
    Outcome::new(passed, notes.join("; "))
}

fn half_half() -> Outcome {
    let reports: Vec<_> = QS
        .iter()
        .flat_map(|&q| [1, 3, 6].map(|d| suite_thm23_reach(&cfg(q, d, 100, 1e-9)).unwrap()))
        .collect();
    let (passed, note) = suites_pass(&reports);
    Outcome::new(passed, note)
}

fn invariance() -> Outcome {
    let reports: Vec<_> = QS
        .iter()
        .flat_map(|&q| [2, 4].map(|d| suite_invariance_correspondence(&cfg(q, d, 20, 1e-9)).unwrap()))
        .collect();
    let lines: u64 = reports
        .iter()
        .map(|r| r.details["non_invariant_lines"].as_u64().unwrap_or(0))
        .sum();
    let ratio = reports
        .iter()
        .filter_map(|r| r.details["min_lifted_to_direct_ratio"].as_f64())
        .fold(f64::INFINITY, f64::min);
    let (passed, note) = suites_pass(&reports);
    Outcome::new(
        passed && lines >= 20,
        format!("{note}, {lines} non-invariant lines, min lifted/direct {ratio:.3}"),
    )
}

fn admissibility() -> Outcome {
    let mut passed = true;
    let mut rows_checked = 0;
    for q in QS {
        let params = TreeParams::new(q, 6).unwrap();
        let rows = admissibility_rows(params, &[1, 2, 4]).unwrap();
        for row in &rows {
            let formula = row.d * (q as usize + 1) * (q as usize).pow(row.r as u32 - 1);
            passed &= row.constructive && row.fixed_dim == formula && row.fixed_dim == row.d * row.orbit_count;
            rows_checked += 1;
        }
        passed &= rows.iter().filter(|r| r.r <= 5).count() == 15;
    }
    Outcome::new(passed, format!("{rows_checked} rows, r = 1..5, d in {{1, 2, 4}}"))
}

fn full_verify() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    for q in QS {
        let start = Instant::now();
        let report = verify(&cfg(q, 2, 100, 1e-8)).unwrap();
        let elapsed = start.elapsed();
        passed &= report.passed && elapsed < Duration::from_secs(60);
        notes.push(format!("q={q}: {} in {elapsed:.2?}", if report.passed { "pass" } else { "fail" }));
    }
    Outcome::new(passed, notes.join(", "))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 10] = [
        ("1 measure cocycle, exact", secs(5), measure_cocycle),
        ("2 functional calculus residuals", secs(2), calculus_residuals),
        ("3 spectral guards", secs(2), spectral_guards),
        ("4 representation homomorphism", secs(20), homomorphism),
        ("5 alpha through the representation", None, alpha_through_rep),
        ("6 pruning replay", None, pruning_replay),
        ("7 half-tree two-path check", None, half_half),
        ("8 invariance correspondence", None, invariance),
        ("9 admissibility probe table", None, admissibility),
        ("10 full verify under 60 s", None, full_verify),
    ];
    let mut all = true;
    for (name, budget, check) in criteria {
        let (out, elapsed) = timed(budget, check);
        all &= out.passed;
        println!(
            "{} [{name}] {} ({elapsed:.2?})",
            if out.passed { "PASS" } else { "FAIL" },
            out.note
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
