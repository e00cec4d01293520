//! The induced representation on step functions `dT -> C^d`:
//!
//! `(pi(g) v)(xi) = tau^{B_xi(x0, g x0)} v(g^{-1} xi)`,
//!
//! Haar averages over fixators as exact finite sums over orbit cells, and
//! the fixed-space and invariant-subspace probes built on top of them.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::automorphism::TreeAutomorphism;
use crate::calculus::{self, vector_from_pairs, vector_to_pairs, CMatrix, CVector, OperatorPair, PowerTable};
use crate::error::{Error, Result};
use crate::measure::{cylinder_measure, EndCell, Measure, OrbitCell, OrbitPartition};
use crate::tree::{busemann_on_cylinder, FiniteSubtree, TreeParams, Vertex};

/// Values a step function can carry: complex vectors for the operator
/// identities, exact rational vectors for the measure-level ones.
pub trait CellValue: Clone + PartialEq + Send + Sync {
    fn zeros(dim: usize) -> Self;
    fn dim(&self) -> usize;
    fn add_assign(&mut self, other: &Self);
    fn scale(&mut self, w: &BigRational);
    /// Euclidean norm, for reporting.
    fn norm(&self) -> f64;
}

impl CellValue for CVector {
    fn zeros(dim: usize) -> Self {
        CVector::zeros(dim)
    }

    fn dim(&self) -> usize {
        self.len()
    }

    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }

    fn scale(&mut self, w: &BigRational) {
        *self *= Complex64::from(w.to_f64().unwrap_or(f64::NAN));
    }

    fn norm(&self) -> f64 {
        CVector::norm(self)
    }
}

/// An exact rational vector.
pub type QVector = Vec<BigRational>;

impl CellValue for QVector {
    fn zeros(dim: usize) -> Self {
        vec![BigRational::zero(); dim]
    }

    fn dim(&self) -> usize {
        self.len()
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }

    fn scale(&mut self, w: &BigRational) {
        for a in self.iter_mut() {
            *a *= w;
        }
    }

    fn norm(&self) -> f64 {
        self.iter()
            .map(|a| a.to_f64().unwrap_or(f64::NAN).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn qvector(entries: &[i64]) -> QVector {
    entries.iter().map(|&a| BigRational::from_integer(BigInt::from(a))).collect()
}

/// A function on the boundary, constant on each cylinder of a fixed depth.
/// `values[i]` is the value on the `i`-th depth-`depth` cylinder in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<V = CVector> {
    params: TreeParams,
    depth: usize,
    dim: usize,
    values: Vec<V>,
}

impl<V: CellValue> StepFunction<V> {
    /// `w 1_{dT}`.
    pub fn constant(params: TreeParams, w: V) -> Self {
        StepFunction {
            params,
            depth: 0,
            dim: w.dim(),
            values: vec![w],
        }
    }

    pub fn zero(params: TreeParams, dim: usize) -> Self {
        Self::constant(params, V::zeros(dim))
    }

    /// `w 1_c`, zero off the cell.
    pub fn indicator(params: TreeParams, c: &EndCell, w: V) -> Result<Self> {
        Self::from_cells(params, w.dim(), &[(c.clone(), w)], true)
    }

    /// Builds a function from a list of cells. With `fill_zero`, ends not
    /// covered are set to zero; otherwise the cells must partition the
    /// boundary. Overlapping cells are always rejected.
    pub fn from_cells(params: TreeParams, dim: usize, cells: &[(EndCell, V)], fill_zero: bool) -> Result<Self> {
        let depth = cells.iter().map(|(c, _)| c.min_depth()).max().unwrap_or(0);
        if depth > params.depth_cap() {
            return Err(Error::DepthBudget {
                needed: depth,
                cap: params.depth_cap(),
            });
        }
        for (_, v) in cells {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        let mut values: Vec<Option<V>> = vec![None; params.cylinder_count(depth)];
        for (i, u) in params.vertices_at_depth(depth).enumerate() {
            for (c, v) in cells {
                if c.contains_cylinder(&u) {
                    if values[i].is_some() {
                        return Err(Error::NotAPartition(format!("cells overlap at {u}")));
                    }
                    values[i] = Some(v.clone());
                }
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| match v {
                Some(v) => Ok(v),
                None if fill_zero => Ok(V::zeros(dim)),
                None => Err(Error::NotAPartition(format!(
                    "cylinder {} is not covered",
                    params.cylinder_at(depth, i)
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StepFunction {
            params,
            depth,
            dim,
            values,
        })
    }

    /// From values listed per depth-`depth` cylinder in index order.
    pub fn from_values(params: TreeParams, depth: usize, values: Vec<V>) -> Result<Self> {
        if depth > params.depth_cap() {
            return Err(Error::DepthBudget {
                needed: depth,
                cap: params.depth_cap(),
            });
        }
        if values.len() != params.cylinder_count(depth) {
            return Err(Error::NotAPartition(format!(
                "{} values for {} cylinders",
                values.len(),
                params.cylinder_count(depth)
            )));
        }
        let dim = values[0].dim();
        if let Some(bad) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(StepFunction {
            params,
            depth,
            dim,
            values,
        })
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    /// Value on the cylinder of `u`; needs `|u| >= depth`.
    pub fn value_at(&self, u: &Vertex) -> &V {
        assert!(u.depth() >= self.depth, "vertex {u} is shallower than the step depth {}", self.depth);
        &self.values[self.params.cylinder_index(&u.prefix(self.depth))]
    }

    /// `(cylinder, value)` pairs at the current depth.
    pub fn cells(&self) -> impl Iterator<Item = (Vertex, &V)> + '_ {
        self.params.vertices_at_depth(self.depth).zip(self.values.iter())
    }

    /// The same function on the finer partition at depth `n`.
    pub fn refine(&self, n: usize) -> Result<Self> {
        if n < self.depth {
            return Err(Error::Refinement {
                depth: n,
                reason: format!("function already lives at depth {}", self.depth),
            });
        }
        if n > self.params.depth_cap() {
            return Err(Error::DepthBudget {
                needed: n,
                cap: self.params.depth_cap(),
            });
        }
        let count = self.params.cylinder_count(n);
        let values = if self.depth == 0 {
            vec![self.values[0].clone(); count]
        } else {
            let stride = (self.params.q() as usize).pow((n - self.depth) as u32);
            (0..count).map(|i| self.values[i / stride].clone()).collect()
        };
        Ok(StepFunction {
            params: self.params,
            depth: n,
            dim: self.dim,
            values,
        })
    }

    /// `integral v dmu`.
    pub fn integral(&self) -> V {
        let mut total = V::zeros(self.dim);
        for v in &self.values {
            total.add_assign(v);
        }
        total.scale(cylinder_measure(&self.params, self.depth).value());
        total
    }

    /// Entrywise combination on a common refinement.
    pub fn zip_with(&self, other: &Self, f: impl Fn(&V, &V) -> V) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let n = self.depth.max(other.depth);
        let (a, b) = (self.refine(n)?, other.refine(n)?);
        let values = a.values.iter().zip(&b.values).map(|(x, y)| f(x, y)).collect();
        Ok(StepFunction {
            params: self.params,
            depth: n,
            dim: self.dim,
            values,
        })
    }

    pub fn map<W: CellValue>(&self, f: impl Fn(&V) -> W) -> StepFunction<W> {
        let values: Vec<W> = self.values.iter().map(f).collect();
        StepFunction {
            params: self.params,
            depth: self.depth,
            dim: values[0].dim(),
            values,
        }
    }

    /// Largest value norm over cells.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(CellValue::norm).fold(0.0, f64::max)
    }

    /// `(sum mu(cell) |value|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let w = cylinder_measure(&self.params, self.depth).to_f64();
        self.values
            .iter()
            .map(|v| w * v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Same function, coarsened to the shallowest depth that represents it.
    pub fn coarsen(&self) -> Self {
        let mut out = self.clone();
        while out.depth > 0 {
            let q = self.params.q() as usize;
            let block = if out.depth == 1 { out.values.len() } else { q };
            let uniform = out
                .values
                .chunks(block)
                .all(|chunk| chunk.iter().all(|v| *v == chunk[0]));
            if !uniform {
                break;
            }
            out.values = out.values.chunks(block).map(|chunk| chunk[0].clone()).collect();
            out.depth -= 1;
        }
        out
    }
}

impl StepFunction<CVector> {
    /// Applies a matrix valuewise.
    pub fn apply_matrix(&self, m: &CMatrix) -> Self {
        self.map(|v| m * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn to_cells(&self) -> Vec<SerializedCell> {
        self.cells()
            .map(|(u, v)| SerializedCell {
                cell: EndCell::cylinder(u),
                value: vector_to_pairs(v),
            })
            .collect()
    }

    pub fn from_serialized(params: TreeParams, cells: &[SerializedCell]) -> Result<Self> {
        let dim = cells.first().map(|c| c.value.len()).unwrap_or(0);
        let parsed: Vec<(EndCell, CVector)> = cells
            .iter()
            .map(|c| (c.cell.clone(), vector_from_pairs(&c.value)))
            .collect();
        Self::from_cells(params, dim, &parsed, false)
    }
}

/// One `{cell, value}` entry of a serialized step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedCell {
    pub cell: EndCell,
    pub value: Vec<[f64; 2]>,
}

/// `pi(g) v`.
///
/// With `m = depth(v)` and `D = d(x0, g x0)`, the output lives at depth
/// `max(m + D, D + 1)`. On such a cylinder `u` the Busemann exponent is
/// constant and `g^{-1}` maps the whole cylinder into the depth-`m` cylinder
/// of the prefix of `g^{-1} u`.
pub fn pi_apply(g: &TreeAutomorphism, v: &StepFunction, pair: &OperatorPair) -> Result<StepFunction> {
    let params = *v.params();
    if pair.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: v.dim(),
        });
    }
    let m = v.depth();
    let reach = g.displacement();
    let out_depth = (m + reach).max(reach + 1);
    if out_depth > params.depth_cap() {
        return Err(Error::DepthBudget {
            needed: out_depth,
            cap: params.depth_cap(),
        });
    }
    if g.is_identity_word() {
        return Ok(v.clone());
    }
    let powers = PowerTable::new(pair, reach);
    let g_inv = g.inverse();
    let root = Vertex::root();
    let moved = g.image_of_root();
    let values = params
        .vertices_at_depth(out_depth)
        .map(|u| {
            let b = busemann_on_cylinder(&u, &root, moved)?;
            let pre = g_inv.apply_unchecked(&u);
            Ok(powers.get(b) * v.value_at(&pre))
        })
        .collect::<Result<Vec<_>>>()?;
    StepFunction::from_values(params, out_depth, values)
}

/// `integral_K pi(k) v dk`, i.e. the constant function `(integral v dmu) 1`.
pub fn haar_average_k<V: CellValue>(v: &StepFunction<V>) -> StepFunction<V> {
    StepFunction::constant(*v.params(), v.integral())
}

/// `integral_{Fix(S)} pi(k) v dk`: on each orbit cell, the conditional mean.
pub fn haar_average_fix<V: CellValue>(s: &FiniteSubtree, v: &StepFunction<V>) -> Result<StepFunction<V>> {
    let partition = OrbitPartition::new(v.params(), s)?;
    average_over_partition(&partition, v)
}

/// Same as [`haar_average_fix`] with a precomputed partition.
pub fn average_over_partition<V: CellValue>(partition: &OrbitPartition, v: &StepFunction<V>) -> Result<StepFunction<V>> {
    let params = *v.params();
    let n = v.depth().max(partition.resolution());
    if n > params.depth_cap() {
        return Err(Error::DepthBudget {
            needed: n,
            cap: params.depth_cap(),
        });
    }
    let fine = v.refine(n)?;
    let cells = partition.cells();
    let membership: Vec<usize> = params.vertices_at_depth(n).map(|u| partition.orbit_of(&u)).collect();
    let mut sums: Vec<V> = vec![V::zeros(v.dim()); cells.len()];
    for (value, &orbit) in fine.values.iter().zip(&membership) {
        sums[orbit].add_assign(value);
    }
    let sub = cylinder_measure(&params, n);
    for (sum, cell) in sums.iter_mut().zip(cells) {
        // mu(sub-cell) / mu(A)
        let ratio = &sub * &cell.measure.recip();
        sum.scale(ratio.value());
    }
    let values = membership.iter().map(|&o| sums[o].clone()).collect();
    StepFunction::from_values(params, n, values)
}

/// `(q+1)` times the `K`-average of `pi(h)(w 1)`, which equals `alpha w`.
pub fn alpha_via_rep(params: TreeParams, w: &CVector, pair: &OperatorPair) -> Result<CVector> {
    let h = TreeAutomorphism::edge_inversion(params);
    let image = pi_apply(&h, &StepFunction::constant(params, w.clone()), pair)?;
    let avg = haar_average_k(&image).values()[0].clone();
    Ok(avg * Complex64::from(f64::from(params.q()) + 1.0))
}

/// The two evaluations of the half-tree element for the edge `(x0, y)`.
#[derive(Debug, Clone)]
pub struct HalfTreeElement {
    pub cell: EndCell,
    /// `pi(g)(w' 1) - tau^{-1}(w') 1` with `g x0 = y`.
    pub direct: StepFunction,
    /// `(tau - tau^{-1})(w') 1_C`.
    pub closed_form: StepFunction,
}

/// Builds `(tau - tau^{-1})(w') 1_C` for the half-tree `C = {B_xi(x0, y) = 1}`
/// from a constant function, one group element and a subtraction.
pub fn halftree_element(params: TreeParams, w_prime: &CVector, y: &Vertex, pair: &OperatorPair) -> Result<HalfTreeElement> {
    let g = TreeAutomorphism::moving_root_to(params, y)?;
    let cell = EndCell::halftree(Vertex::root(), y.clone())?.canonical();
    let constant = StepFunction::constant(params, w_prime.clone());
    let moved = pi_apply(&g, &constant, pair)?;
    let direct = moved.sub(&StepFunction::constant(params, pair.tau_inv() * w_prime))?;
    let value = (pair.tau() - pair.tau_inv()) * w_prime;
    let closed_form = StepFunction::indicator(params, &cell, value)?;
    Ok(HalfTreeElement {
        cell,
        direct,
        closed_form,
    })
}

/// `w' = (tau - tau^{-1})^{-1} w`, so that `w 1_C` is reachable.
pub fn halftree_preimage(pair: &OperatorPair, w: &CVector) -> Result<CVector> {
    calculus::solve_tau_difference(pair, w)
}

/// Fixed vectors of `Fix(S)`: functions constant on each orbit cell.
#[derive(Debug, Clone, Serialize)]
pub struct FixedSpaceReport {
    pub subtree: FiniteSubtree,
    pub orbit_count: usize,
    pub dim: usize,
    pub fixed_dim: usize,
    pub per_orbit_cells: Vec<OrbitCell>,
    /// Every basis element `e_i 1_A` was checked to be averaged onto itself.
    pub verified: bool,
}

pub fn fixed_space_report(params: TreeParams, s: &FiniteSubtree, d: usize) -> Result<FixedSpaceReport> {
    let partition = OrbitPartition::new(&params, s)?;
    let cells = partition.cells().to_vec();
    let mut verified = true;
    for oc in &cells {
        for i in 0..d {
            let mut e = QVector::zeros(d);
            e[i] = BigRational::from_integer(1.into());
            let basis = StepFunction::indicator(params, &oc.cell, e)?;
            let averaged = average_over_partition(&partition, &basis)?;
            let n = averaged.depth();
            verified &= averaged == basis.refine(n)?;
        }
    }
    Ok(FixedSpaceReport {
        subtree: s.clone(),
        orbit_count: cells.len(),
        dim: d,
        fixed_dim: d * cells.len(),
        per_orbit_cells: cells,
        verified,
    })
}

/// Orthonormal basis of the span of the given vectors (modified Gram–Schmidt).
pub fn orthonormal_basis(vectors: &[CVector]) -> Result<CMatrix> {
    let d = vectors.first().map(|v| v.len()).unwrap_or(0);
    let mut basis: Vec<CVector> = Vec::new();
    for v in vectors {
        let mut u = v.clone();
        for b in &basis {
            let c = b.dotc(&u);
            u -= b * c;
        }
        let norm = u.norm();
        if norm <= 1e-10 * v.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParams("basis vectors are linearly dependent".into()));
        }
        basis.push(u.unscale(norm));
    }
    Ok(CMatrix::from_columns(&basis).resize(d, basis.len(), Complex64::from(0.0)))
}

/// Projection of `x` onto the orthogonal complement of the column span of `q`.
fn leak(q: &CMatrix, x: &CVector) -> CVector {
    x - q * (q.adjoint() * x)
}

/// Leakage of lifted vectors out of `L(dT, W0)`.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageReport {
    /// Largest valuewise leakage of `pi(g) v` over generators and probes,
    /// relative to `||v||_inf`.
    pub generator_leakage: f64,
    /// Leakage of `(q+1) Avg_K pi(h) (w 1)` for unit `w` in `W0`.
    pub averaged_leakage: f64,
    pub max_leakage: f64,
    pub probes: usize,
}

/// Measures how far `pi(g)` moves step functions with values in `W0` out of
/// `W0`, for each generator and `trials` random probes per generator.
pub fn invariant_lift_check<R: rand::Rng + ?Sized>(
    params: TreeParams,
    w0_basis: &[CVector],
    pair: &OperatorPair,
    generators: &[TreeAutomorphism],
    trials: usize,
    rng: &mut R,
) -> Result<LeakageReport> {
    let q = orthonormal_basis(w0_basis)?;
    let k = q.ncols();
    let random_in_w0 = |rng: &mut R| -> CVector {
        let coeffs = CVector::from_fn(k, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let v = &q * coeffs;
        let n = v.norm();
        v.unscale(n)
    };
    let mut generator_leakage: f64 = 0.0;
    let mut averaged_leakage: f64 = 0.0;
    let mut probes = 0;
    for _ in 0..trials {
        let w = random_in_w0(rng);
        let constant = StepFunction::constant(params, w.clone());
        // Haar-averaged probe, an element of the group algebra.
        let via_rep = alpha_via_rep(params, &w, pair)?;
        averaged_leakage = averaged_leakage.max(leak(&q, &via_rep).norm());
        let depth = rng.random_range(0..=2usize);
        let values: Vec<CVector> = (0..params.cylinder_count(depth)).map(|_| random_in_w0(rng)).collect();
        let patterned = StepFunction::from_values(params, depth, values)?;
        for g in generators {
            for v in [&constant, &patterned] {
                if v.depth() + g.displacement() + 1 > params.depth_cap() {
                    continue;
                }
                let image = pi_apply(g, v, pair)?;
                let worst = image.values().iter().map(|x| leak(&q, x).norm()).fold(0.0, f64::max);
                generator_leakage = generator_leakage.max(worst / v.sup_norm());
                probes += 1;
            }
        }
    }
    Ok(LeakageReport {
        generator_leakage,
        averaged_leakage,
        max_leakage: generator_leakage.max(averaged_leakage),
        probes,
    })
}

/// `||P_perp alpha w|| / ||w||` for the line spanned by `w`.
pub fn direct_alpha_leakage(pair: &OperatorPair, w: &CVector) -> Result<f64> {
    let q = orthonormal_basis(std::slice::from_ref(w))?;
    Ok(leak(&q, &(pair.alpha() * w)).norm() / w.norm())
}

/// Measure of a cell as a float, for reports.
pub fn cell_weight(params: &TreeParams, c: &EndCell) -> Measure {
    c.measure(params)
}
