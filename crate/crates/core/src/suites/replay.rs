use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::{assemble, run_trials, SuiteConfig, SuiteName, SuiteReport, Trial};
use crate::automorphism::{random_rooted_with, TreeAutomorphism};
use crate::calculus::{build_pair, guard_spectrum, GuardReport};
use crate::error::{Error, Result};
use crate::measure::{orbit_merge_under_pruning, EndCell, Measure, OrbitPartition, PartitionMap};
use crate::representation::{average_over_partition, CellValue, QVector, StepFunction};
use crate::rng::random_alpha;
use crate::tree::{closed_neighborhood, prune_along, FiniteSubtree, TreeParams, Vertex};

/// The pruning step on the 1-neighbourhood of an edge, seen from a frame
/// moved by an element `k` of `K`.
#[derive(Debug, Clone, Serialize)]
pub struct Prop21Replay {
    pub q: u32,
    pub subtree: FiniteSubtree,
    pub pruned: FiniteSubtree,
    pub segment: Vec<Vertex>,
    pub pivot: Vertex,
    pub removed: Vec<Vertex>,
    pub orbits_before: usize,
    pub orbits_after: usize,
    pub merge: PartitionMap,
    pub merged_count: usize,
    pub merged_cell: EndCell,
    pub merged_measure: Measure,
    /// `g = k t^{-1} k^{-1}`, moving `x0` one step away from the merged cell.
    pub translation: TreeAutomorphism,
    pub busemann_exponent: i64,
    #[serde(skip)]
    before: OrbitPartition,
    #[serde(skip)]
    after: OrbitPartition,
}

/// Builds `S`, its pruning `S'` and the orbit merge, in the frame of `k`.
pub fn replay_prop21_in(params: TreeParams, k: &TreeAutomorphism) -> Result<Prop21Replay> {
    let map = |s: &str| -> Result<Vertex> { Ok(k.apply_unchecked(&s.parse()?)) };
    let core = FiniteSubtree::new([map("1")?, map("1.1")?])?;
    let subtree = closed_neighborhood(&params, &core, 1)?;
    let segment = ["", "1", "1.1", "1.1.1"]
        .iter()
        .map(|s| if s.is_empty() { Ok(Vertex::root()) } else { map(s) })
        .collect::<Result<Vec<_>>>()?;
    let pruning = prune_along(&params, &subtree, segment)?;
    let merge = orbit_merge_under_pruning(&params, &subtree, &pruning.pruned)?;
    let before = OrbitPartition::new(&params, &subtree)?;
    let after = OrbitPartition::new(&params, &pruning.pruned)?;
    let merged = after.cells()[merge.merged_into].clone();
    let translation = k
        .compose(&TreeAutomorphism::translation(params).inverse())?
        .compose(&k.inverse())?;
    let busemann_exponent = merged.cell.busemann(&Vertex::root(), translation.image_of_root())?;
    Ok(Prop21Replay {
        q: params.q(),
        orbits_before: before.cells().len(),
        orbits_after: after.cells().len(),
        merged_count: merge.merged_from.len(),
        merged_cell: merged.cell,
        merged_measure: merged.measure,
        subtree,
        pruned: pruning.pruned,
        segment: pruning.segment,
        pivot: pruning.pivot,
        removed: pruning.removed,
        merge,
        translation,
        busemann_exponent,
        before,
        after,
    })
}

pub fn replay_prop21(params: TreeParams) -> Result<Prop21Replay> {
    replay_prop21_in(params, &TreeAutomorphism::identity(params))
}

fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Prop21Replay {
    /// Structural checks: `q` orbits merge into the pivot's orbit, the merged
    /// cell is the pivot's cylinder, and the translation has exponent `-1` on it.
    pub fn structural_errors(&self, k: &TreeAutomorphism) -> Vec<String> {
        let mut errors = Vec::new();
        if self.merged_count != self.q as usize {
            errors.push(format!("{} orbits merge, expected {}", self.merged_count, self.q));
        }
        if self.orbits_after + self.q as usize - 1 != self.orbits_before {
            errors.push(format!("orbit counts {} -> {}", self.orbits_before, self.orbits_after));
        }
        let expected = EndCell::cylinder(k.apply_unchecked(&"1.1".parse().expect("valid address")));
        if self.merged_cell != expected {
            errors.push(format!("merged cell {} is not {expected}", self.merged_cell));
        }
        if self.busemann_exponent != -1 {
            errors.push(format!("Busemann exponent {} on the merged cell", self.busemann_exponent));
        }
        errors
    }

    /// Averages `v = sum w_i 1_{A_i}` over `Fix(S')` and compares with the
    /// closed form: the mean of the merged values on the merged cell and
    /// `w_i` elsewhere. Also checks that `v` is `Fix(S)`-fixed.
    pub fn averaging_errors(&self, params: TreeParams, weights: &[QVector]) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        let dim = weights[0].len();
        let cells: Vec<(EndCell, QVector)> = self
            .before
            .cells()
            .iter()
            .zip(weights)
            .map(|(c, w)| (c.cell.clone(), w.clone()))
            .collect();
        let v = StepFunction::from_cells(params, dim, &cells, false)?;
        let fixed = average_over_partition(&self.before, &v)?;
        if fixed != v.refine(fixed.depth())? {
            errors.push("v is not fixed by Fix(S)".into());
        }
        let avg = average_over_partition(&self.after, &v)?;
        let mut merged_mean = QVector::zeros(dim);
        for &i in &self.merge.merged_from {
            merged_mean.add_assign(&weights[i]);
        }
        merged_mean.scale(&(rational(1) / rational(self.q.into())));
        let mut expected: Vec<QVector> = vec![QVector::zeros(dim); self.after.cells().len()];
        for (i, &j) in self.merge.target.iter().enumerate() {
            expected[j] = if j == self.merge.merged_into {
                merged_mean.clone()
            } else {
                weights[i].clone()
            };
        }
        for (u, value) in avg.cells() {
            let j = self.after.orbit_of(&u);
            if *value != expected[j] {
                errors.push(format!("average on {u} differs from the closed form"));
                break;
            }
        }
        // The merged average vanishes exactly when w_1 + ... + w_q does.
        let vanishes = avg.value_at(&self.pivot_cell_probe()).iter().all(Zero::is_zero);
        if vanishes != merged_mean.iter().all(Zero::is_zero) {
            errors.push("vanishing of the merged average disagrees with the sum".into());
        }
        Ok(errors)
    }

    fn pivot_cell_probe(&self) -> Vertex {
        let base = match &self.merged_cell {
            EndCell::Cylinder { base } => base.clone(),
            EndCell::HalfTree { to, .. } => to.clone(),
        };
        let depth = self.before.resolution().max(self.after.resolution());
        let mut u = base;
        while u.depth() < depth {
            u = u.child(1);
        }
        u
    }
}

pub fn suite_prop21_replay(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let base = replay_prop21(params)?;
    let trials = run_trials(cfg, SuiteName::Prop21Replay, |i, rng| {
        let k = if i == 0 {
            TreeAutomorphism::identity(params)
        } else {
            random_rooted_with(params, 3, rng)?
        };
        let replay = replay_prop21_in(params, &k)?;
        let mut errors = replay.structural_errors(&k);
        let mut weights: Vec<QVector> = (0..replay.orbits_before)
            .map(|_| (0..cfg.dim).map(|_| rational(rng.random_range(-20..=20))).collect())
            .collect();
        if i % 2 == 1 {
            // Force w_1 + ... + w_q = 0 on the merged orbits.
            let (last, rest) = replay.merge.merged_from.split_last().expect("q >= 2");
            let mut sum = QVector::zeros(cfg.dim);
            for &j in rest {
                sum.add_assign(&weights[j]);
            }
            sum.scale(&rational(-1));
            weights[*last] = sum;
        }
        errors.extend(replay.averaging_errors(params, &weights)?);
        let exact = Trial::exact(errors, || {
            json!({ "k": k, "weights": weights.iter().map(|w| w.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>() })
        });
        // tau^2 w = q^2 w is impossible: +-q stay out of the spectrum of tau.
        let pair = build_pair(&random_alpha(rng, cfg.q, cfg.dim)?, cfg.q, 1e-9)?;
        let guard: std::result::Result<GuardReport, Error> = guard_spectrum(&pair);
        let guard_trial = match guard {
            Ok(g) => Trial::within(0.0, cfg.tol, || json!(null)).with_summary(json!(g.margin_to_pm_q)),
            Err(Error::SpectralGuard(reason)) => Trial::exact(vec![reason], || json!({ "alpha": pair.alpha })),
            Err(e) => return Err(e),
        };
        let margin = guard_trial.summary.clone();
        Ok(exact.and(guard_trial).with_summary(margin))
    })?;
    let min_margin = trials.iter().filter_map(|t| t.summary.as_f64()).reduce(f64::min);
    let details = json!({
        "subtree_size": base.subtree.len(),
        "orbits_before": base.orbits_before,
        "orbits_after": base.orbits_after,
        "merged_count": base.merged_count,
        "merged_cell": base.merged_cell,
        "merged_measure": base.merged_measure,
        "busemann_exponent": base.busemann_exponent,
        "min_spectral_margin": min_margin,
    });
    Ok(assemble(cfg, SuiteName::Prop21Replay, &trials, details))
}
