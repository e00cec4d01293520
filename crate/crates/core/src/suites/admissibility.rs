use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{assemble, SuiteConfig, SuiteName, SuiteReport, Trial};
use crate::error::Result;
use crate::measure::OrbitPartition;
use crate::representation::fixed_space_report;
use crate::tree::{closed_neighborhood, FiniteSubtree, TreeParams, Vertex};

/// Radii up to this one are also verified by averaging every basis vector.
pub const CONSTRUCTIVE_RADIUS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibilityRow {
    pub q: u32,
    pub r: usize,
    pub d: usize,
    pub orbit_count: usize,
    pub fixed_dim: usize,
    /// `d (q+1) q^{r-1}`.
    pub expected: usize,
    pub constructive: bool,
}

/// One row per `(r, d)` for the balls `S_r` of radius `r = 1..N-1`.
pub fn admissibility_rows(params: TreeParams, dims: &[usize]) -> Result<Vec<AdmissibilityRow>> {
    let q = params.q() as usize;
    let mut rows = Vec::new();
    for r in 1..params.depth_cap() {
        let ball = closed_neighborhood(&params, &FiniteSubtree::single(Vertex::root()), r)?;
        let constructive = r <= CONSTRUCTIVE_RADIUS;
        let orbit_count = OrbitPartition::new(&params, &ball)?.cells().len();
        for &d in dims {
            let fixed_dim = if constructive {
                let report = fixed_space_report(params, &ball, d)?;
                if report.verified {
                    report.fixed_dim
                } else {
                    0
                }
            } else {
                d * orbit_count
            };
            rows.push(AdmissibilityRow {
                q: params.q(),
                r,
                d,
                orbit_count,
                fixed_dim,
                expected: d * (q + 1) * q.pow(r as u32 - 1),
                constructive,
            });
        }
    }
    Ok(rows)
}

pub fn admissibility_csv(rows: &[AdmissibilityRow]) -> String {
    let mut out = String::from("q,r,d,orbit_count,fixed_dim\n");
    for row in rows {
        out.push_str(&format!("{},{},{},{},{}\n", row.q, row.r, row.d, row.orbit_count, row.fixed_dim));
    }
    out
}

/// The dimensions tabulated: 1, 2, 4 and the configured one.
fn table_dims(cfg: &SuiteConfig) -> Vec<usize> {
    let mut dims = vec![1, 2, 4, cfg.dim];
    dims.sort_unstable();
    dims.dedup();
    dims
}

pub fn suite_admissibility_table(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let rows = admissibility_rows(params, &table_dims(cfg))?;
    let mut trials = Vec::new();
    for row in &rows {
        let mut errors = Vec::new();
        if row.fixed_dim != row.expected {
            errors.push(format!(
                "r={} d={}: fixed_dim {} but d(q+1)q^(r-1) = {}",
                row.r, row.d, row.fixed_dim, row.expected
            ));
        }
        // Growth in r at fixed d, and linearity in d at fixed r.
        if let Some(prev) = rows.iter().find(|p| p.d == row.d && p.r + 1 == row.r) {
            if row.fixed_dim <= prev.fixed_dim {
                errors.push(format!("no growth from r={} to r={} at d={}", prev.r, row.r, row.d));
            }
        }
        if let Some(unit) = rows.iter().find(|p| p.d == 1 && p.r == row.r) {
            if row.fixed_dim != row.d * unit.fixed_dim {
                errors.push(format!("fixed_dim is not linear in d at r={}", row.r));
            }
        }
        trials.push(Trial::exact(errors, || json!(row)));
    }
    let details = json!({ "rows": rows, "constructive_radius": CONSTRUCTIVE_RADIUS });
    Ok(assemble(cfg, SuiteName::AdmissibilityTable, &trials, details))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        let params = TreeParams::new(2, 6).unwrap();
        let rows = admissibility_rows(params, &[1, 2]).unwrap();
        let find = |r: usize, d: usize| rows.iter().find(|x| x.r == r && x.d == d).unwrap().fixed_dim;
        assert_eq!(find(1, 1), 3);
        assert_eq!(find(3, 1), 12);
        for r in 1..6 {
            assert_eq!(find(r, 2), 2 * find(r, 1));
        }
        let csv = admissibility_csv(&rows);
        assert!(csv.starts_with("q,r,d,orbit_count,fixed_dim\n"));
        assert!(csv.contains("\n2,3,1,12,12\n"));
    }

    #[test]
    fn suite_passes() {
        for q in [2, 3] {
            let cfg = SuiteConfig {
                q,
                depth_cap: 6,
                ..SuiteConfig::default()
            };
            let r = suite_admissibility_table(&cfg).unwrap();
            assert!(r.passed, "{:?}", r.failures);
            assert_eq!(r.trial_count, 5 * 3);
        }
    }
}
