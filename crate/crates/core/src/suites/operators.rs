use num_complex::Complex64;
use rand::Rng;
use serde_json::json;

use super::{assemble, relative, run_trials, SuiteConfig, SuiteName, SuiteReport, Trial};
use crate::automorphism::{random_rooted_with, TreeAutomorphism};
use crate::calculus::{build_pair, schur, spectral_norm, vector_to_pairs, CMatrix, CVector, MatrixOperator, OperatorPair};
use crate::error::Result;
use crate::representation::{
    alpha_via_rep, direct_alpha_leakage, halftree_element, halftree_preimage, invariant_lift_check, pi_apply, StepFunction,
};
use crate::rng::{random_alpha, random_step, random_vector, random_word};
use crate::tree::{TreeParams, Vertex};

/// Tolerance for the residual checks inside `build_pair`.
const PAIR_TOL: f64 = 1e-9;

fn random_pair<R: Rng + ?Sized>(rng: &mut R, cfg: &SuiteConfig) -> Result<OperatorPair> {
    build_pair(&random_alpha(rng, cfg.q, cfg.dim)?, cfg.q, PAIR_TOL)
}

fn cells_json(v: &StepFunction) -> serde_json::Value {
    json!(v.to_cells())
}

/// `k t^a k'` with `k, k'` random in `K`, of displacement exactly `|a|`.
fn saturating<R: Rng + ?Sized>(rng: &mut R, params: TreeParams, a: i32) -> Result<TreeAutomorphism> {
    let depth = 2.min(params.depth_cap());
    random_rooted_with(params, depth, rng)?
        .compose(&TreeAutomorphism::translation(params).pow(a)?)?
        .compose(&random_rooted_with(params, depth, rng)?)
}

pub fn suite_homomorphism(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let n = params.depth_cap();
    let trials = run_trials(cfg, SuiteName::Homomorphism, |i, rng| {
        let pair = random_pair(rng, cfg)?;
        let m = rng.random_range(0..=2usize);
        let budget = n - m.max(1);
        let (g, h) = match i {
            0 => (TreeAutomorphism::identity(params), TreeAutomorphism::identity(params)),
            1 => (TreeAutomorphism::edge_inversion(params), TreeAutomorphism::edge_inversion(params)),
            _ if i % 3 == 2 => {
                // Uses the whole depth budget.
                let a = rng.random_range(0..=budget);
                (saturating(rng, params, a as i32)?, saturating(rng, params, -((budget - a) as i32))?)
            }
            _ => {
                let g = random_word(rng, params, 5, budget / 2)?;
                let h = random_word(rng, params, 5, budget - g.displacement())?;
                (g, h)
            }
        };
        let v = random_step(rng, params, m, cfg.dim)?;
        let gh = g.compose(&h)?;
        let lhs = pi_apply(&gh, &v, &pair)?;
        let rhs = pi_apply(&g, &pi_apply(&h, &v, &pair)?, &pair)?;
        let scale = pair.tau_norm.powi((g.displacement() + h.displacement()) as i32) * v.sup_norm();
        let mut residual = relative(lhs.sub(&rhs)?.sup_norm(), scale);
        if i == 1 {
            // pi(h)^2 = 1 through tau tau^{-1} = I.
            residual = residual.max(relative(rhs.sub(&v)?.sup_norm(), scale));
        }
        let trial = Trial::within(residual, cfg.tol, || {
            json!({ "g": g, "h": h, "alpha": pair.alpha, "v": cells_json(&v) })
        });
        Ok(trial.with_summary(json!(rhs.depth())))
    })?;
    let depths: Vec<u64> = trials.iter().filter_map(|t| t.summary.as_u64()).collect();
    let at_cap = depths.iter().filter(|&&d| d == n as u64).count();
    let details = json!({
        "pair_tol": PAIR_TOL,
        "max_output_depth": depths.iter().max(),
        "trials_at_depth_cap": at_cap,
    });
    Ok(assemble(cfg, SuiteName::Homomorphism, &trials, details))
}

pub fn suite_prop22(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let trials = run_trials(cfg, SuiteName::Prop22, |i, rng| {
        if i == 1 {
            // Diagonal alpha on basis vectors: a_i e_i.
            let diag: Vec<Complex64> = (0..cfg.dim)
                .map(|_| {
                    let r = rng.random_range(0.0..0.9) * 2.0 * f64::from(cfg.q).sqrt();
                    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
                })
                .collect();
            let pair = build_pair(&MatrixOperator::diagonal(&diag), cfg.q, PAIR_TOL)?;
            let mut residual: f64 = 0.0;
            for (k, a) in diag.iter().enumerate() {
                let mut e = CVector::zeros(cfg.dim);
                e[k] = Complex64::from(1.0);
                let got = alpha_via_rep(params, &e, &pair)?;
                residual = residual.max(relative((got - e * *a).norm(), pair.alpha_norm));
            }
            return Ok(Trial::within(residual, cfg.tol, || json!({ "alpha": pair.alpha })));
        }
        let pair = random_pair(rng, cfg)?;
        let w = if i == 0 { CVector::zeros(cfg.dim) } else { random_vector(rng, cfg.dim) };
        let got = alpha_via_rep(params, &w, &pair)?;
        let direct = pair.alpha() * &w;
        let residual = relative((got - direct).norm(), pair.alpha_norm * w.norm());
        Ok(Trial::within(residual, cfg.tol, || {
            json!({ "alpha": pair.alpha, "w": vector_to_pairs(&w) })
        }))
    })?;
    Ok(assemble(cfg, SuiteName::Prop22, &trials, serde_json::Value::Null))
}

pub fn suite_thm23_reach(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let trials = run_trials(cfg, SuiteName::Thm23Reach, |i, rng| {
        let y = Vertex::root().child(rng.random_range(1..=params.q() as u8 + 1));
        let pair = if i == 1 {
            build_pair(&MatrixOperator::zeros(cfg.dim), cfg.q, PAIR_TOL)?
        } else {
            random_pair(rng, cfg)?
        };
        let target = if i == 0 {
            CVector::zeros(cfg.dim)
        } else {
            let w = random_vector(rng, cfg.dim);
            let n = w.norm();
            w.unscale(n)
        };
        let w_prime = halftree_preimage(&pair, &target)?;
        let solve = (pair.tau() - pair.tau_inv()) * &w_prime - &target;
        let el = halftree_element(params, &w_prime, &y, &pair)?;
        let two_path = el.direct.sub(&el.closed_form)?.sup_norm();
        // The closed form must equal the target on C and vanish elsewhere.
        let reach = el.closed_form.sub(&StepFunction::indicator(params, &el.cell, target.clone())?)?.sup_norm();
        let scale = target.norm().max(f64::MIN_POSITIVE);
        let mut residual = relative(two_path.max(solve.norm()).max(reach), scale);
        if i == 0 {
            residual = two_path.max(solve.norm()).max(reach);
        }
        let mut trial = Trial::within(residual, cfg.tol, || {
            json!({ "alpha": pair.alpha, "target": vector_to_pairs(&target), "edge": [Vertex::root(), y] })
        });
        if i == 1 {
            // alpha = 0: tau = i sqrt(q), so tau - tau^{-1} = i (sqrt q + 1/sqrt q).
            let s = f64::from(cfg.q).sqrt();
            let expected = CMatrix::identity(cfg.dim, cfg.dim) * Complex64::new(0.0, s + 1.0 / s);
            let err = spectral_norm(&(pair.tau() - pair.tau_inv() - expected))?;
            trial = trial.and(Trial::within(err, cfg.tol, || json!({ "alpha": "zero" })));
        }
        Ok(trial)
    })?;
    Ok(assemble(cfg, SuiteName::Thm23Reach, &trials, serde_json::Value::Null))
}

fn probe_generators<R: Rng + ?Sized>(rng: &mut R, params: TreeParams) -> Result<Vec<TreeAutomorphism>> {
    let t = TreeAutomorphism::translation(params);
    Ok(vec![
        TreeAutomorphism::edge_inversion(params),
        t.inverse(),
        t,
        random_rooted_with(params, 2, rng)?,
    ])
}

pub fn suite_invariance_correspondence(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    const PROBES: usize = 2;
    let trials = run_trials(cfg, SuiteName::InvarianceCorrespondence, |_, rng| {
        let pair = random_pair(rng, cfg)?;
        let gens = probe_generators(rng, params)?;
        // Leading Schur vectors span alpha-invariant subspaces.
        let (qm, _) = schur(pair.alpha());
        let k = rng.random_range(1..=cfg.dim);
        let span: Vec<CVector> = (0..k).map(|j| qm.column(j).into_owned()).collect();
        let invariant = invariant_lift_check(params, &span, &pair, &gens, PROBES, rng)?;
        let mut trial = Trial::within(invariant.max_leakage, cfg.tol, || {
            json!({ "alpha": pair.alpha, "w0_dim": k, "leakage": invariant })
        });
        let mut ratio = None;
        if cfg.dim >= 2 {
            let line = random_vector(rng, cfg.dim);
            let direct = direct_alpha_leakage(&pair, &line)?;
            let lifted = invariant_lift_check(params, std::slice::from_ref(&line), &pair, &gens, PROBES, rng)?;
            ratio = Some(lifted.max_leakage / direct);
            let passed = lifted.max_leakage >= 0.5 * direct;
            trial = trial.and(Trial {
                residual: 0.0,
                passed,
                reason: if passed {
                    String::new()
                } else {
                    format!("lifted leakage {:e} below half of direct {direct:e}", lifted.max_leakage)
                },
                input: if passed {
                    serde_json::Value::Null
                } else {
                    json!({ "alpha": pair.alpha, "line": vector_to_pairs(&line) })
                },
                summary: serde_json::Value::Null,
            });
        }
        Ok(trial.with_summary(json!(ratio)))
    })?;
    let ratios: Vec<f64> = trials.iter().filter_map(|t| t.summary.as_f64()).collect();
    let details = json!({
        "non_invariant_lines": ratios.len(),
        "min_lifted_to_direct_ratio": ratios.iter().copied().reduce(f64::min),
    });
    Ok(assemble(cfg, SuiteName::InvarianceCorrespondence, &trials, details))
}
