//! Named, seeded verification suites with machine-readable reports.

mod admissibility;
mod cocycle;
mod operators;
mod replay;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rng::trial_rng;
use crate::tree::TreeParams;

pub use admissibility::{admissibility_csv, admissibility_rows, suite_admissibility_table, AdmissibilityRow};
pub use cocycle::suite_measure_cocycle;
pub use operators::{suite_homomorphism, suite_invariance_correspondence, suite_prop22, suite_thm23_reach};
pub use replay::{replay_prop21, suite_prop21_replay, Prop21Replay};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub q: u32,
    pub depth_cap: usize,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            q: 2,
            depth_cap: 8,
            dim: 2,
            trials: 100,
            seed: 42,
            tol: 1e-8,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidParams(format!("q must be at least 2, got {}", self.q)));
        }
        if self.depth_cap < 4 {
            return Err(Error::InvalidParams(format!(
                "depth cap must be at least 4, got {}",
                self.depth_cap
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParams(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.trials > u32::MAX as usize {
            return Err(Error::InvalidParams("too many trials".into()));
        }
        self.params().map(|_| ())
    }

    pub fn params(&self) -> Result<TreeParams> {
        TreeParams::new(self.q, self.depth_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    MeasureCocycle,
    Homomorphism,
    Prop21Replay,
    Prop22,
    Thm23Reach,
    InvarianceCorrespondence,
    AdmissibilityTable,
}

impl SuiteName {
    pub const ALL: [SuiteName; 7] = [
        SuiteName::MeasureCocycle,
        SuiteName::Homomorphism,
        SuiteName::Prop21Replay,
        SuiteName::Prop22,
        SuiteName::Thm23Reach,
        SuiteName::InvarianceCorrespondence,
        SuiteName::AdmissibilityTable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::MeasureCocycle => "measure_cocycle",
            SuiteName::Homomorphism => "homomorphism",
            SuiteName::Prop21Replay => "prop21_replay",
            SuiteName::Prop22 => "prop22",
            SuiteName::Thm23Reach => "thm23_reach",
            SuiteName::InvarianceCorrespondence => "invariance_correspondence",
            SuiteName::AdmissibilityTable => "admissibility_table",
        }
    }

    /// Stream tag for the per-trial generators.
    fn tag(self) -> u32 {
        self as u32 + 1
    }

    pub fn run(self, cfg: &SuiteConfig) -> Result<SuiteReport> {
        cfg.validate()?;
        match self {
            SuiteName::MeasureCocycle => suite_measure_cocycle(cfg),
            SuiteName::Homomorphism => suite_homomorphism(cfg),
            SuiteName::Prop21Replay => suite_prop21_replay(cfg),
            SuiteName::Prop22 => suite_prop22(cfg),
            SuiteName::Thm23Reach => suite_thm23_reach(cfg),
            SuiteName::InvarianceCorrespondence => suite_invariance_correspondence(cfg),
            SuiteName::AdmissibilityTable => suite_admissibility_table(cfg),
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == key)
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite {s:?}")))
    }
}

/// A failing trial with enough data to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub residual: f64,
    pub reason: String,
    pub input: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite_name: SuiteName,
    pub passed: bool,
    pub max_residual: f64,
    pub trial_count: usize,
    pub seed: u64,
    pub failures: Vec<Counterexample>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

/// Outcome of one trial. `residual` is relative to the scale of the
/// quantities compared, or 0/1 for exact checks.
#[derive(Debug, Clone)]
pub(crate) struct Trial {
    pub residual: f64,
    pub passed: bool,
    pub reason: String,
    pub input: Value,
    pub summary: Value,
}

impl Trial {
    pub fn within(residual: f64, bound: f64, input: impl FnOnce() -> Value) -> Trial {
        let passed = residual <= bound;
        Trial {
            residual,
            passed,
            reason: if passed {
                String::new()
            } else {
                format!("residual {residual:e} exceeds {bound:e}")
            },
            input: if passed { Value::Null } else { input() },
            summary: Value::Null,
        }
    }

    pub fn exact(failures: Vec<String>, input: impl FnOnce() -> Value) -> Trial {
        let passed = failures.is_empty();
        Trial {
            residual: if passed { 0.0 } else { 1.0 },
            passed,
            reason: failures.join("; "),
            input: if passed { Value::Null } else { input() },
            summary: Value::Null,
        }
    }

    pub fn and(mut self, other: Trial) -> Trial {
        self.residual = self.residual.max(other.residual);
        if !other.passed {
            self.passed = false;
            if !self.reason.is_empty() {
                self.reason.push_str("; ");
            }
            self.reason.push_str(&other.reason);
            if self.input.is_null() {
                self.input = other.input;
            }
        }
        self
    }

    pub fn with_summary(mut self, summary: Value) -> Trial {
        self.summary = summary;
        self
    }
}

/// Runs `trials` independent trials in parallel and collects them in order.
/// Numeric breakdowns abort the suite; any other error fails the trial.
pub(crate) fn run_trials<F>(cfg: &SuiteConfig, name: SuiteName, f: F) -> Result<Vec<Trial>>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Trial> + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, name.tag(), i as u32);
            match f(i, &mut rng) {
                Ok(t) => Ok(t),
                Err(e) if e.is_numeric() => Err(e),
                Err(e) => Ok(Trial {
                    residual: f64::INFINITY,
                    passed: false,
                    reason: e.to_string(),
                    input: Value::Null,
                    summary: Value::Null,
                }),
            }
        })
        .collect()
}

pub(crate) fn assemble(cfg: &SuiteConfig, name: SuiteName, trials: &[Trial], details: Value) -> SuiteReport {
    let failures: Vec<Counterexample> = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.passed)
        .map(|(i, t)| Counterexample {
            trial: i,
            residual: finite(t.residual),
            reason: t.reason.clone(),
            input: t.input.clone(),
        })
        .collect();
    SuiteReport {
        suite_name: name,
        passed: failures.is_empty(),
        max_residual: trials.iter().map(|t| finite(t.residual)).fold(0.0, f64::max),
        trial_count: trials.len(),
        seed: cfg.seed,
        failures,
        details,
    }
}

/// All suites for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: SuiteConfig,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn run_suites(cfg: &SuiteConfig, names: &[SuiteName]) -> Result<VerifyReport> {
    cfg.validate()?;
    let suites = names.iter().map(|n| n.run(cfg)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        config: *cfg,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

pub fn verify(cfg: &SuiteConfig) -> Result<VerifyReport> {
    run_suites(cfg, &SuiteName::ALL)
}

/// JSON has no infinities or NaN; those residuals are reported as `f64::MAX`.
fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::MAX
    }
}

/// `a / b`, with `0 / 0 = 0`.
pub(crate) fn relative(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}
