//! Exact measure theory on the boundary: end cells, the basepoint measure,
//! orbit partitions of fixators and the Radon–Nikodým cocycle.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::automorphism::TreeAutomorphism;
use crate::error::{Error, Result};
use crate::tree::{self, boundary_vertices, is_complete, FiniteSubtree, TreeParams, Vertex};

/// An exact non-negative rational, serialized as `"num/den"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Measure(BigRational);

impl Measure {
    pub fn zero() -> Self {
        Measure(BigRational::zero())
    }

    pub fn one() -> Self {
        Measure(BigRational::one())
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Measure(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Measure(r)
    }

    /// `q^k` for any integer `k`.
    pub fn power_of(q: u32, k: i64) -> Self {
        let base = BigRational::from_integer(BigInt::from(q));
        let mag = num_traits::pow(base, k.unsigned_abs() as usize);
        Measure(if k >= 0 { mag } else { mag.recip() })
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn recip(&self) -> Self {
        Measure(self.0.recip())
    }
}

impl Add for &Measure {
    type Output = Measure;
    fn add(self, rhs: &Measure) -> Measure {
        Measure(&self.0 + &rhs.0)
    }
}

impl Sub for &Measure {
    type Output = Measure;
    fn sub(self, rhs: &Measure) -> Measure {
        Measure(&self.0 - &rhs.0)
    }
}

impl Mul for &Measure {
    type Output = Measure;
    fn mul(self, rhs: &Measure) -> Measure {
        Measure(&self.0 * &rhs.0)
    }
}

impl std::iter::Sum for Measure {
    fn sum<I: Iterator<Item = Measure>>(iter: I) -> Measure {
        Measure(iter.fold(BigRational::zero(), |acc, m| acc + m.0))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("not a rational: {s}"));
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        let r = BigRational::new(n, d);
        if r.is_negative() {
            return Err(bad());
        }
        Ok(Measure(r))
    }
}

impl Serialize for Measure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A measurable set of ends.
///
/// `Cylinder { base }` is every end whose ray from `x0` passes through
/// `base`; the empty base is all of the boundary. `HalfTree { from, to }` is
/// every end beyond `to` on the side away from the adjacent vertex `from`.
/// Half-trees are closed under automorphisms, which is why images of
/// cylinders are kept in that form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EndCell {
    Cylinder { base: Vertex },
    #[serde(rename = "halftree")]
    HalfTree { from: Vertex, to: Vertex },
}

impl EndCell {
    pub fn whole() -> Self {
        EndCell::Cylinder { base: Vertex::root() }
    }

    pub fn cylinder(base: Vertex) -> Self {
        EndCell::Cylinder { base }
    }

    pub fn halftree(from: Vertex, to: Vertex) -> Result<Self> {
        if !from.is_adjacent(&to) {
            return Err(Error::MalformedAddress(format!(
                "half-tree needs adjacent vertices, got {from} and {to}"
            )));
        }
        Ok(EndCell::HalfTree { from, to })
    }

    /// Rewrites a half-tree pointing away from `x0` as the cylinder it is.
    pub fn canonical(&self) -> EndCell {
        match self {
            EndCell::HalfTree { from, to } if from.is_strict_prefix_of(to) => {
                EndCell::Cylinder { base: to.clone() }
            }
            other => other.clone(),
        }
    }

    /// The vertex through which every ray of the cell passes last.
    fn edge(&self) -> Option<(Vertex, Vertex)> {
        match self {
            EndCell::Cylinder { base } => base.parent().map(|p| (p, base.clone())),
            EndCell::HalfTree { from, to } => Some((from.clone(), to.clone())),
        }
    }

    /// Smallest depth at which the cell is a union of cylinders.
    pub fn min_depth(&self) -> usize {
        match self {
            EndCell::Cylinder { base } => base.depth(),
            EndCell::HalfTree { from, to } => from.depth().max(to.depth()),
        }
    }

    /// Whether the cylinder of `u` lies in the cell; needs `|u| >= min_depth`.
    pub fn contains_cylinder(&self, u: &Vertex) -> bool {
        match self {
            EndCell::Cylinder { base } => base.is_prefix_of(u),
            EndCell::HalfTree { from, to } => {
                if from.is_strict_prefix_of(to) {
                    to.is_prefix_of(u)
                } else {
                    !from.is_prefix_of(u)
                }
            }
        }
    }

    pub fn measure(&self, params: &TreeParams) -> Measure {
        cell_measure(self, params)
    }

    /// Image of the cell under `g`.
    pub fn image(&self, g: &TreeAutomorphism) -> EndCell {
        match self.edge() {
            None => EndCell::whole(),
            Some((from, to)) => EndCell::HalfTree {
                from: g.apply_unchecked(&from),
                to: g.apply_unchecked(&to),
            }
            .canonical(),
        }
    }

    /// Constant value of `B_xi(x, y)` over the cell.
    pub fn busemann(&self, x: &Vertex, y: &Vertex) -> Result<i64> {
        match self.edge() {
            None if x == y => Ok(0),
            None => Err(Error::CylinderTooShallow("whole boundary".into())),
            Some((from, to)) => tree::busemann_beyond_edge(&from, &to, x, y),
        }
    }

    /// Exact set equality, decided on a common refinement.
    pub fn same_set(&self, other: &EndCell, params: &TreeParams) -> bool {
        let n = self.min_depth().max(other.min_depth());
        params
            .vertices_at_depth(n)
            .all(|u| self.contains_cylinder(&u) == other.contains_cylinder(&u))
    }
}

impl fmt::Display for EndCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndCell::Cylinder { base } => write!(f, "cyl({base})"),
            EndCell::HalfTree { from, to } => write!(f, "half({from}->{to})"),
        }
    }
}

/// `mu_x0` of a cell: a depth-k cylinder has mass `1 / ((q+1) q^(k-1))`.
pub fn cell_measure(c: &EndCell, params: &TreeParams) -> Measure {
    match c {
        EndCell::Cylinder { base } => cylinder_measure(params, base.depth()),
        EndCell::HalfTree { from, to } => {
            if from.is_strict_prefix_of(to) {
                cylinder_measure(params, to.depth())
            } else {
                &Measure::one() - &cylinder_measure(params, from.depth())
            }
        }
    }
}

pub fn cylinder_measure(params: &TreeParams, depth: usize) -> Measure {
    Measure::ratio(1, params.cylinder_count(depth) as i64)
}

/// The depth-`n` cylinders whose disjoint union is `c`.
pub fn refine_to_depth(c: &EndCell, params: &TreeParams, n: usize) -> Result<Vec<EndCell>> {
    Ok(refine_vertices(c, params, n)?
        .into_iter()
        .map(EndCell::cylinder)
        .collect())
}

pub(crate) fn refine_vertices(c: &EndCell, params: &TreeParams, n: usize) -> Result<Vec<Vertex>> {
    if n < c.min_depth() {
        return Err(Error::Refinement {
            depth: n,
            reason: format!("{c} needs depth {}", c.min_depth()),
        });
    }
    if n > params.depth_cap() {
        return Err(Error::DepthBudget {
            needed: n,
            cap: params.depth_cap(),
        });
    }
    Ok(params
        .vertices_at_depth(n)
        .filter(|u| c.contains_cylinder(u))
        .collect())
}

/// One `Fix(S)`-orbit on the boundary together with its boundary vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCell {
    pub vertex: Vertex,
    pub cell: EndCell,
    pub measure: Measure,
}

/// The `Fix(S)`-orbits: one per boundary vertex `b`, made of the ends whose
/// ray from `b` avoids every other vertex of `S`.
pub fn orbit_cells(params: &TreeParams, s: &FiniteSubtree) -> Result<Vec<OrbitCell>> {
    if !is_complete(params, s) {
        return Err(Error::NotComplete);
    }
    let cells = boundary_vertices(params, s)?
        .into_iter()
        .map(|b| {
            let cell = if s.len() == 1 {
                EndCell::whole()
            } else {
                // Complete and not a singleton: b is a leaf with one S-neighbour.
                let inner = params
                    .neighbours(&b)
                    .into_iter()
                    .find(|n| s.contains(n))
                    .expect("leaf has a neighbour in S");
                EndCell::HalfTree {
                    from: inner,
                    to: b.clone(),
                }
                .canonical()
            };
            let measure = cell_measure(&cell, params);
            OrbitCell {
                vertex: b,
                cell,
                measure,
            }
        })
        .collect();
    Ok(cells)
}

/// Orbit cells with a fast cylinder-to-orbit lookup.
#[derive(Debug, Clone)]
pub struct OrbitPartition {
    subtree: FiniteSubtree,
    cells: Vec<OrbitCell>,
    index: HashMap<Vertex, usize>,
}

impl OrbitPartition {
    pub fn new(params: &TreeParams, s: &FiniteSubtree) -> Result<Self> {
        let cells = orbit_cells(params, s)?;
        let index = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.vertex.clone(), i))
            .collect();
        Ok(OrbitPartition {
            subtree: s.clone(),
            cells,
            index,
        })
    }

    pub fn cells(&self) -> &[OrbitCell] {
        &self.cells
    }

    pub fn subtree(&self) -> &FiniteSubtree {
        &self.subtree
    }

    /// Smallest depth at which every orbit is a union of cylinders.
    pub fn resolution(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.cell.min_depth())
            .chain(std::iter::once(self.subtree.max_depth()))
            .max()
            .unwrap_or(0)
    }

    /// Orbit containing the cylinder of `u`; needs `|u| >= resolution()`.
    pub fn orbit_of(&self, u: &Vertex) -> usize {
        // The orbit is the projection of the cylinder onto S: the deepest
        // prefix of u inside S, or the top of S when no prefix is inside.
        let deepest = (0..=u.depth())
            .rev()
            .map(|n| u.prefix(n))
            .find(|p| self.subtree.contains(p))
            .unwrap_or_else(|| self.subtree.top().clone());
        self.index[&deepest]
    }
}

/// How the orbits of `S` regroup into the orbits of a pruning `S'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionMap {
    /// For each orbit of `S`, the index of the orbit of `S'` containing it.
    pub target: Vec<usize>,
    /// Orbit of `S'` receiving the merged cells.
    pub merged_into: usize,
    /// Orbits of `S` that merge.
    pub merged_from: Vec<usize>,
}

/// Checks that `S'` is `S` minus all neighbours but one of some full-valency
/// vertex, and maps the orbits of `S` onto those of `S'`.
pub fn orbit_merge_under_pruning(
    params: &TreeParams,
    s: &FiniteSubtree,
    s_pruned: &FiniteSubtree,
) -> Result<PartitionMap> {
    if !s_pruned.vertices().is_subset(s.vertices()) {
        return Err(Error::InvalidPruning("S' is not contained in S".into()));
    }
    let removed: Vec<&Vertex> = s.vertices().difference(s_pruned.vertices()).collect();
    if removed.len() != params.q() as usize {
        return Err(Error::InvalidPruning(format!(
            "expected {} removed vertices, found {}",
            params.q(),
            removed.len()
        )));
    }
    let pivot = s_pruned
        .vertices()
        .iter()
        .find(|p| removed.iter().all(|r| r.is_adjacent(p)))
        .ok_or_else(|| Error::InvalidPruning("removed vertices share no neighbour".into()))?;
    if s.valency_in(params, pivot) != params.valency() {
        return Err(Error::InvalidPruning(format!("{pivot} is not of full valency in S")));
    }
    let before = OrbitPartition::new(params, s)?;
    let after = OrbitPartition::new(params, s_pruned)?;
    let n = before.resolution().max(after.resolution());
    let mut target = vec![usize::MAX; before.cells.len()];
    for u in params.vertices_at_depth(n) {
        let (i, j) = (before.orbit_of(&u), after.orbit_of(&u));
        if target[i] == usize::MAX {
            target[i] = j;
        } else if target[i] != j {
            return Err(Error::InvalidPruning("orbit of S splits in S'".into()));
        }
    }
    let merged_into = after.index[pivot];
    let merged_from: Vec<usize> = (0..target.len()).filter(|&i| target[i] == merged_into).collect();
    Ok(PartitionMap {
        target,
        merged_into,
        merged_from,
    })
}

/// The density `q^B` of `g mu` against `mu` on a cell, with its exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RnRatio {
    pub exponent: i64,
    pub value: Measure,
}

/// Radon–Nikodým cocycle `d(g mu)/d mu = q^{B_xi(x0, g x0)}` on a cell
/// where the Busemann value is constant.
pub fn rn_cocycle(params: &TreeParams, g: &TreeAutomorphism, c: &EndCell) -> Result<RnRatio> {
    let exponent = c.busemann(&Vertex::root(), g.image_of_root())?;
    Ok(RnRatio {
        exponent,
        value: Measure::power_of(params.q(), exponent),
    })
}
