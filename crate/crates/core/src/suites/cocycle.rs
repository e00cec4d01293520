use rand::Rng;
use serde_json::{json, Value};

use super::{assemble, run_trials, SuiteConfig, SuiteName, SuiteReport, Trial};
use crate::automorphism::TreeAutomorphism;
use crate::error::Result;
use crate::measure::{rn_cocycle, EndCell, Measure};
use crate::rng::random_word;
use crate::tree::{TreeParams, Vertex};

const CYLINDERS_PER_TRIAL: usize = 24;

fn random_cylinder<R: Rng + ?Sized>(rng: &mut R, params: &TreeParams, min_depth: usize) -> Vertex {
    let depth = rng.random_range(min_depth..=params.depth_cap());
    params.cylinder_at(depth, rng.random_range(0..params.cylinder_count(depth)))
}

/// `mu(g^{-1} c) = q^{B_c(x0, g x0)} mu(c)`, exactly.
fn check_change_of_variables(params: &TreeParams, g: &TreeAutomorphism, c: &EndCell, errors: &mut Vec<String>) -> Result<i64> {
    let r = rn_cocycle(params, g, c)?;
    let pulled = g.inverse().apply_cell(c).measure(params);
    let expected = &r.value * &c.measure(params);
    if pulled != expected {
        errors.push(format!("mu(g^-1 {c}) = {pulled}, expected {expected}"));
    }
    Ok(r.exponent)
}

/// `B_xi(x0, gh x0) = B_xi(x0, g x0) + B_{g^{-1} xi}(x0, h x0)` on the cell,
/// i.e. `r(gh, xi) = r(g, xi) r(h, g^{-1} xi)`.
fn check_cocycle_law(
    params: &TreeParams,
    g: &TreeAutomorphism,
    h: &TreeAutomorphism,
    c: &EndCell,
    errors: &mut Vec<String>,
) -> Result<()> {
    let gh = g.compose(h)?;
    let lhs = rn_cocycle(params, &gh, c)?;
    let first = rn_cocycle(params, g, c)?;
    let second = rn_cocycle(params, h, &g.inverse().apply_cell(c))?;
    let product = &first.value * &second.value;
    if lhs.value != product {
        errors.push(format!("cocycle law fails on {c}: {} vs {product}", lhs.value));
    }
    Ok(())
}

pub fn suite_measure_cocycle(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let params = cfg.params()?;
    let n = params.depth_cap();
    let half = (n - 1) / 2;
    let trials = run_trials(cfg, SuiteName::MeasureCocycle, |i, rng| {
        let (g, h) = if i == 0 {
            (TreeAutomorphism::identity(params), TreeAutomorphism::identity(params))
        } else if i == 1 {
            (TreeAutomorphism::edge_inversion(params), TreeAutomorphism::edge_inversion(params))
        } else {
            (random_word(rng, params, 4, half)?, random_word(rng, params, 4, half)?)
        };
        let mut errors = Vec::new();
        let mut exponents = Vec::new();
        // Deep enough that every Busemann value below is constant on the cell.
        let min_depth = (g.displacement() + h.displacement()).max(1);
        let mut cells: Vec<EndCell> = (0..CYLINDERS_PER_TRIAL)
            .map(|_| EndCell::cylinder(random_cylinder(rng, &params, min_depth)))
            .collect();
        if i == 1 {
            cells.extend(params.vertices_at_depth(2).map(EndCell::cylinder));
        }
        for c in &cells {
            let b = check_change_of_variables(&params, &g, c, &mut errors)?;
            exponents.push(b);
            check_cocycle_law(&params, &g, &h, c, &mut errors)?;
            if i == 0 && b != 0 {
                errors.push(format!("identity has exponent {b} on {c}"));
            }
            if i == 1 {
                let ratio = Measure::power_of(params.q(), b);
                if b.abs() != 1 {
                    errors.push(format!("edge inversion has ratio {ratio} on {c}"));
                }
            }
        }
        let input = || json!({ "g": g, "h": h, "cells": cells });
        Ok(Trial::exact(errors, input).with_summary(json!(exponents)))
    })?;
    let mut histogram = std::collections::BTreeMap::<i64, usize>::new();
    for t in &trials {
        if let Value::Array(bs) = &t.summary {
            for b in bs.iter().filter_map(Value::as_i64) {
                *histogram.entry(b).or_default() += 1;
            }
        }
    }
    let details = json!({
        "cells_per_trial": CYLINDERS_PER_TRIAL,
        "exponent_histogram": histogram.iter().map(|(b, n)| json!({ "exponent": b, "count": n })).collect::<Vec<_>>(),
    });
    Ok(assemble(cfg, SuiteName::MeasureCocycle, &trials, details))
}
