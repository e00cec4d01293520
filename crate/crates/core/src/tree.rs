//! Combinatorics of the (q+1)-regular tree in the rooted word model.
//!
//! A vertex is a finite word over the alphabet of neighbour choices, read
//! from the basepoint `x0` (the empty word). The first letter ranges over
//! `1..=q+1`, every later letter over `1..=q`: at depth k >= 1 the parent is
//! never offered as a choice. Two vertices are adjacent iff one extends the
//! other by a single letter.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Branching parameter `q` and the depth cap `N` for cylinder resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    q: u32,
    depth_cap: usize,
}

impl TreeParams {
    pub const DEFAULT_DEPTH_CAP: usize = 8;

    pub fn new(q: u32, depth_cap: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParams(format!(
                "q must be at least 2 (valency >= 3), got {q}"
            )));
        }
        if q > 254 {
            return Err(Error::InvalidParams(format!("q = {q} exceeds 254")));
        }
        if depth_cap == 0 {
            return Err(Error::InvalidParams("depth cap must be positive".into()));
        }
        Ok(TreeParams { q, depth_cap })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn valency(&self) -> usize {
        self.q as usize + 1
    }

    /// Checks letter ranges and the depth cap.
    pub fn validate(&self, v: &Vertex) -> Result<()> {
        self.validate_letters(v)?;
        if v.depth() > self.depth_cap {
            return Err(Error::DepthBudget {
                needed: v.depth(),
                cap: self.depth_cap,
            });
        }
        Ok(())
    }

    pub(crate) fn validate_letters(&self, v: &Vertex) -> Result<()> {
        for (i, &a) in v.0.iter().enumerate() {
            let hi = if i == 0 { self.q + 1 } else { self.q };
            if a == 0 || u32::from(a) > hi {
                return Err(Error::MalformedAddress(format!(
                    "letter {a} at position {} of {v} not in 1..={hi}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Parses and validates an address.
    pub fn vertex(&self, letters: &[u8]) -> Result<Vertex> {
        let v = Vertex(letters.to_vec());
        self.validate(&v)?;
        Ok(v)
    }

    /// Number of letters available after `v`.
    pub fn child_count(&self, v: &Vertex) -> u8 {
        if v.is_root() {
            self.q as u8 + 1
        } else {
            self.q as u8
        }
    }

    pub fn children(&self, v: &Vertex) -> Vec<Vertex> {
        (1..=self.child_count(v)).map(|a| v.child(a)).collect()
    }

    pub fn neighbours(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.valency());
        if let Some(p) = v.parent() {
            out.push(p);
        }
        out.extend(self.children(v));
        out
    }

    /// Number of cylinders at depth `n`, i.e. `(q+1) q^(n-1)` (1 at depth 0).
    pub fn cylinder_count(&self, n: usize) -> usize {
        if n == 0 {
            1
        } else {
            (self.q as usize + 1) * (self.q as usize).pow(n as u32 - 1)
        }
    }

    /// Lexicographic index of `v` among the vertices of its depth.
    pub fn cylinder_index(&self, v: &Vertex) -> usize {
        let q = self.q as usize;
        v.0.iter()
            .enumerate()
            .fold(0usize, |acc, (i, &a)| {
                if i == 0 {
                    usize::from(a) - 1
                } else {
                    acc * q + usize::from(a) - 1
                }
            })
    }

    /// Inverse of [`cylinder_index`](Self::cylinder_index).
    pub fn cylinder_at(&self, depth: usize, mut index: usize) -> Vertex {
        let q = self.q as usize;
        let mut letters = vec![0u8; depth];
        for slot in letters.iter_mut().skip(1).rev() {
            *slot = (index % q + 1) as u8;
            index /= q;
        }
        if depth > 0 {
            letters[0] = (index + 1) as u8;
        }
        Vertex(letters)
    }

    /// All vertices at depth `n`, in index order.
    pub fn vertices_at_depth(&self, n: usize) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.cylinder_count(n)).map(move |i| self.cylinder_at(n, i))
    }

    /// The closed ball of radius `r` around `x0`.
    pub fn ball(&self, r: usize) -> Vec<Vertex> {
        (0..=r).flat_map(|n| self.vertices_at_depth(n)).collect()
    }

    pub fn distance(&self, u: &Vertex, v: &Vertex) -> Result<usize> {
        self.validate_letters(u)?;
        self.validate_letters(v)?;
        Ok(distance(u, v))
    }
}

/// A vertex of the tree, addressed from `x0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Vertex(Vec<u8>);

impl Vertex {
    pub fn root() -> Self {
        Vertex(Vec::new())
    }

    /// Builds an address without range checks; see [`TreeParams::vertex`].
    pub fn from_letters(letters: impl Into<Vec<u8>>) -> Self {
        Vertex(letters.into())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Vertex> {
        if self.0.is_empty() {
            None
        } else {
            Some(Vertex(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, a: u8) -> Vertex {
        let mut letters = Vec::with_capacity(self.0.len() + 1);
        letters.extend_from_slice(&self.0);
        letters.push(a);
        Vertex(letters)
    }

    pub fn prefix(&self, n: usize) -> Vertex {
        Vertex(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `self` is an ancestor of `other` or equal to it.
    pub fn is_prefix_of(&self, other: &Vertex) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_strict_prefix_of(&self, other: &Vertex) -> bool {
        self.0.len() < other.0.len() && self.is_prefix_of(other)
    }

    pub fn common_prefix_len(&self, other: &Vertex) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count()
    }

    pub fn is_adjacent(&self, other: &Vertex) -> bool {
        self.0.len().abs_diff(other.0.len()) == 1 && self.common_prefix_len(other) == self.0.len().min(other.0.len())
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" || s.is_empty() {
            return Ok(Vertex::root());
        }
        s.split('.')
            .map(|part| {
                part.parse::<u8>()
                    .ok()
                    .filter(|&a| a > 0)
                    .ok_or_else(|| Error::MalformedAddress(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Vertex)
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Graph distance: `|u| + |v| - 2 |lcp(u, v)|`.
pub fn distance(u: &Vertex, v: &Vertex) -> usize {
    u.depth() + v.depth() - 2 * u.common_prefix_len(v)
}

/// The unique vertex lying on all three pairwise geodesics.
pub fn median(u: &Vertex, v: &Vertex, w: &Vertex) -> Vertex {
    // Of the three pairwise meets, two coincide and the third is the deepest.
    let uv = u.common_prefix_len(v);
    let vw = v.common_prefix_len(w);
    let uw = u.common_prefix_len(w);
    if uv >= vw && uv >= uw {
        u.prefix(uv)
    } else if vw >= uw {
        v.prefix(vw)
    } else {
        u.prefix(uw)
    }
}

/// The geodesic from `u` to `v`, endpoints included.
pub fn geodesic(u: &Vertex, v: &Vertex) -> Vec<Vertex> {
    let k = u.common_prefix_len(v);
    let mut path: Vec<Vertex> = (k..=u.depth()).rev().map(|n| u.prefix(n)).collect();
    path.extend((k + 1..=v.depth()).map(|n| v.prefix(n)));
    path
}

/// Constant value of the Busemann kernel `B_xi(x, y)` over the ends lying
/// beyond `head` on the far side of the edge `(tail, head)`.
///
/// Fails when `x` or `y` sits strictly on that side, since then the limit
/// depends on the end.
pub(crate) fn busemann_beyond_edge(tail: &Vertex, head: &Vertex, x: &Vertex, y: &Vertex) -> Result<i64> {
    let beyond = |z: &Vertex| z != head && distance(tail, z) == distance(head, z) + 1;
    if beyond(x) || beyond(y) {
        return Err(Error::CylinderTooShallow(format!("{tail}->{head}")));
    }
    let m = median(x, y, head);
    Ok(distance(x, &m) as i64 - distance(y, &m) as i64)
}

/// `B_xi(x, y)` for every end `xi` in the cylinder of `u` (ends whose ray
/// from `x0` passes through `u`).
pub fn busemann_on_cylinder(u: &Vertex, x: &Vertex, y: &Vertex) -> Result<i64> {
    if x == y {
        return Ok(0);
    }
    if u.is_strict_prefix_of(x) || u.is_strict_prefix_of(y) {
        return Err(Error::CylinderTooShallow(u.to_string()));
    }
    let m = median(x, y, u);
    Ok(distance(x, &m) as i64 - distance(y, &m) as i64)
}

/// A finite connected vertex set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FiniteSubtree {
    vertices: BTreeSet<Vertex>,
}

impl FiniteSubtree {
    pub fn new(vertices: impl IntoIterator<Item = Vertex>) -> Result<Self> {
        let vertices: BTreeSet<Vertex> = vertices.into_iter().collect();
        let top_depth = vertices
            .iter()
            .map(Vertex::depth)
            .min()
            .ok_or(Error::EmptySubtree)?;
        // Connected iff there is a single topmost vertex and every other
        // vertex has its parent in the set.
        let tops = vertices.iter().filter(|v| v.depth() == top_depth).count();
        let closed = vertices.iter().filter(|v| v.depth() > top_depth).all(|v| {
            v.parent()
                .map(|p| vertices.contains(&p))
                .unwrap_or(false)
        });
        if tops != 1 || !closed {
            return Err(Error::NotConnected);
        }
        Ok(FiniteSubtree { vertices })
    }

    pub fn single(v: Vertex) -> Self {
        FiniteSubtree {
            vertices: BTreeSet::from([v]),
        }
    }

    /// Validates every member against `params`.
    pub fn checked(self, params: &TreeParams) -> Result<Self> {
        for v in &self.vertices {
            params.validate(v)?;
        }
        Ok(self)
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.vertices.contains(v)
    }

    /// The vertex of minimal depth (closest to `x0`).
    pub fn top(&self) -> &Vertex {
        self.vertices
            .iter()
            .min_by_key(|v| v.depth())
            .expect("subtree is non-empty")
    }

    pub fn max_depth(&self) -> usize {
        self.vertices.iter().map(Vertex::depth).max().unwrap_or(0)
    }

    pub fn valency_in(&self, params: &TreeParams, v: &Vertex) -> usize {
        params
            .neighbours(v)
            .iter()
            .filter(|n| self.vertices.contains(n))
            .count()
    }

    pub fn diameter(&self) -> usize {
        self.diametral_path().len() - 1
    }

    /// A longest geodesic inside the subtree.
    pub fn diametral_path(&self) -> Vec<Vertex> {
        // Two sweeps: the farthest vertex from anything is an endpoint.
        let far = |from: &Vertex| {
            self.vertices
                .iter()
                .max_by(|a, b| distance(from, a).cmp(&distance(from, b)).then(b.cmp(a)))
                .cloned()
                .expect("subtree is non-empty")
        };
        let a = far(self.top());
        let b = far(&a);
        geodesic(&a, &b)
    }
}

/// Vertices of `S` with fewer than `q+1` neighbours inside `S`.
pub fn boundary_vertices(params: &TreeParams, s: &FiniteSubtree) -> Result<Vec<Vertex>> {
    if s.is_empty() {
        return Err(Error::EmptySubtree);
    }
    Ok(s.vertices
        .iter()
        .filter(|v| s.valency_in(params, v) < params.valency())
        .cloned()
        .collect())
}

/// Every vertex is a leaf of `S` or has full valency `q+1` in `S`
/// (a single vertex counts as complete).
pub fn is_complete(params: &TreeParams, s: &FiniteSubtree) -> bool {
    if s.len() == 1 {
        return true;
    }
    s.vertices.iter().all(|v| {
        let k = s.valency_in(params, v);
        k == 1 || k == params.valency()
    })
}

/// All vertices within distance `r` of `S`.
pub fn closed_neighborhood(params: &TreeParams, s: &FiniteSubtree, r: usize) -> Result<FiniteSubtree> {
    if s.is_empty() {
        return Err(Error::EmptySubtree);
    }
    let mut seen: HashSet<Vertex> = s.vertices.iter().cloned().collect();
    let mut queue: VecDeque<(Vertex, usize)> = s.vertices.iter().map(|v| (v.clone(), 0)).collect();
    while let Some((v, d)) = queue.pop_front() {
        if d == r {
            continue;
        }
        for n in params.neighbours(&v) {
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    let out = FiniteSubtree::new(seen)?;
    if out.max_depth() > params.depth_cap() {
        return Err(Error::DepthBudget {
            needed: out.max_depth(),
            cap: params.depth_cap(),
        });
    }
    Ok(out)
}

/// The result of removing the far leaves of a diametral segment.
#[derive(Debug, Clone)]
pub struct Pruning {
    pub pruned: FiniteSubtree,
    /// The diametral segment `x_0, ..., x_D` used for the pruning.
    pub segment: Vec<Vertex>,
    /// `x_{D-1}`, which becomes a leaf of the pruned tree.
    pub pivot: Vertex,
    pub removed: Vec<Vertex>,
}

/// Removes every neighbour of `x_{D-1}` except `x_{D-2}` along a diametral
/// segment of `S`. Requires `diam(S) >= 2`.
pub fn prune(params: &TreeParams, s: &FiniteSubtree) -> Result<Pruning> {
    let segment = s.diametral_path();
    prune_along(params, s, segment)
}

/// Same as [`prune`] with a caller-chosen diametral segment.
pub fn prune_along(params: &TreeParams, s: &FiniteSubtree, segment: Vec<Vertex>) -> Result<Pruning> {
    let d = segment.len().saturating_sub(1);
    if d < 2 || d != s.diameter() {
        return Err(Error::InvalidPruning(format!(
            "segment of length {d} is not diametral of length >= 2"
        )));
    }
    if !segment.iter().all(|v| s.contains(v)) {
        return Err(Error::InvalidPruning("segment leaves the subtree".into()));
    }
    let pivot = segment[d - 1].clone();
    let keep = segment[d - 2].clone();
    let removed: Vec<Vertex> = params
        .neighbours(&pivot)
        .into_iter()
        .filter(|n| *n != keep && s.contains(n))
        .collect();
    let pruned = FiniteSubtree::new(s.vertices.iter().filter(|v| !removed.contains(v)).cloned())?;
    Ok(Pruning {
        pruned,
        segment,
        pivot,
        removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Vertex {
        s.parse().unwrap()
    }

    fn p(q: u32) -> TreeParams {
        TreeParams::new(q, 8).unwrap()
    }

    /// BFS distances over the explicit ball, independent of the prefix formula.
    fn bfs_distances(params: &TreeParams, radius: usize, from: &Vertex) -> std::collections::HashMap<Vertex, usize> {
        let ball: HashSet<Vertex> = params.ball(radius).into_iter().collect();
        let mut dist = std::collections::HashMap::new();
        dist.insert(from.clone(), 0usize);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(x) = queue.pop_front() {
            let dx = dist[&x];
            for n in params.neighbours(&x) {
                if ball.contains(&n) && !dist.contains_key(&n) {
                    dist.insert(n.clone(), dx + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&Vertex::root(), &Vertex::root()), 0);
        assert_eq!(distance(&Vertex::root(), &v("1")), 1);
        assert_eq!(distance(&v("1"), &v("2")), 2);
    }

    #[test]
    fn distance_agrees_with_bfs_on_ball_of_radius_4() {
        for q in [2, 3] {
            let params = p(q);
            let ball = params.ball(4);
            for from in &ball {
                let dist = bfs_distances(&params, 4, from);
                for to in &ball {
                    assert_eq!(distance(from, to), dist[to], "q={q} {from} {to}");
                }
            }
        }
    }

    #[test]
    fn median_matches_brute_force_on_depth_2_ball() {
        let params = p(2);
        let ball = params.ball(2);
        assert_eq!(median(&v("1"), &v("1"), &v("2.1")), v("1"));
        assert_eq!(median(&Vertex::root(), &v("1"), &v("1.1")), v("1"));
        assert_eq!(median(&v("1"), &v("2"), &v("1.1")), v("1"));
        assert_eq!(median(&v("1.2"), &v("2"), &v("1.1")), v("1"));
        assert_eq!(median(&v("1.2"), &v("2"), &v("3")), Vertex::root());
        for a in &ball {
            for b in &ball {
                for c in &ball {
                    let on_all: Vec<&Vertex> = ball
                        .iter()
                        .filter(|m| {
                            distance(a, m) + distance(m, b) == distance(a, b)
                                && distance(b, m) + distance(m, c) == distance(b, c)
                                && distance(a, m) + distance(m, c) == distance(a, c)
                        })
                        .collect();
                    assert_eq!(on_all, vec![&median(a, b, c)]);
                }
            }
        }
    }

    #[test]
    fn geodesic_examples() {
        let u = v("1.2");
        assert_eq!(geodesic(&u, &u), vec![u.clone()]);
        assert_eq!(geodesic(&Vertex::root(), &v("1.2")), vec![Vertex::root(), v("1"), v("1.2")]);
        assert_eq!(geodesic(&v("1"), &v("2")), vec![v("1"), Vertex::root(), v("2")]);
        let params = p(3);
        for a in params.ball(3) {
            for b in params.ball(3) {
                let path = geodesic(&a, &b);
                assert_eq!(path.len(), distance(&a, &b) + 1);
                assert!(path.windows(2).all(|w| w[0].is_adjacent(&w[1])));
            }
        }
    }

    #[test]
    fn address_parsing_and_validation() {
        let params = p(2);
        assert_eq!(v("-"), Vertex::root());
        assert_eq!(v("3.1.2").to_string(), "3.1.2");
        assert!(params.validate(&v("3.2")).is_ok());
        assert!(matches!(params.validate(&v("4")), Err(Error::MalformedAddress(_))));
        assert!(matches!(params.validate(&v("1.3")), Err(Error::MalformedAddress(_))));
        assert!(matches!(params.distance(&v("1.3"), &v("1")), Err(Error::MalformedAddress(_))));
        assert!("1.x".parse::<Vertex>().is_err());
        assert!("0".parse::<Vertex>().is_err());
        assert!(TreeParams::new(1, 8).is_err());
    }

    #[test]
    fn cylinder_index_round_trip() {
        let params = p(3);
        for n in 0..5 {
            for (i, u) in params.vertices_at_depth(n).enumerate() {
                assert_eq!(params.cylinder_index(&u), i);
                assert!(params.validate(&u).is_ok());
            }
        }
    }

    #[test]
    fn boundary_vertex_examples() {
        let params = p(2);
        let single = FiniteSubtree::single(Vertex::root());
        assert_eq!(boundary_vertices(&params, &single).unwrap(), vec![Vertex::root()]);
        let edge = FiniteSubtree::new([Vertex::root(), v("1")]).unwrap();
        assert_eq!(boundary_vertices(&params, &edge).unwrap(), vec![Vertex::root(), v("1")]);
        let ball = closed_neighborhood(&params, &single, 1).unwrap();
        assert_eq!(boundary_vertices(&params, &ball).unwrap(), vec![v("1"), v("2"), v("3")]);
    }

    #[test]
    fn completeness_examples() {
        let params = p(2);
        assert!(is_complete(&params, &FiniteSubtree::single(Vertex::root())));
        assert!(is_complete(&params, &FiniteSubtree::new([Vertex::root(), v("1")]).unwrap()));
        let path = FiniteSubtree::new([Vertex::root(), v("1"), v("1.1")]).unwrap();
        // "1" has valency 2 in the path: neither a leaf nor full.
        assert_eq!(path.valency_in(&params, &v("1")), 2);
        assert!(!is_complete(&params, &path));
    }

    #[test]
    fn neighbourhood_examples() {
        let params = p(2);
        let ball = closed_neighborhood(&params, &FiniteSubtree::single(Vertex::root()), 1).unwrap();
        assert_eq!(
            ball.vertices().iter().cloned().collect::<Vec<_>>(),
            vec![Vertex::root(), v("1"), v("2"), v("3")]
        );
        for q in [2u32, 3, 4] {
            let params = p(q);
            let edge = FiniteSubtree::new([Vertex::root(), v("1")]).unwrap();
            let around = closed_neighborhood(&params, &edge, 1).unwrap();
            assert_eq!(around.len(), 2 + 2 * q as usize);
            assert!(is_complete(&params, &around));
        }
    }

    #[test]
    fn connectivity_is_enforced() {
        assert!(matches!(FiniteSubtree::new([v("1"), v("2")]), Err(Error::NotConnected)));
        assert!(matches!(FiniteSubtree::new([Vertex::root(), v("1.1")]), Err(Error::NotConnected)));
        assert!(matches!(FiniteSubtree::new(Vec::<Vertex>::new()), Err(Error::EmptySubtree)));
        assert!(FiniteSubtree::new([v("1"), v("1.1"), v("1.2")]).is_ok());
    }

    #[test]
    fn busemann_examples() {
        let x1 = v("1");
        let x0 = Vertex::root();
        assert_eq!(busemann_on_cylinder(&v("2.1"), &x1, &x1).unwrap(), 0);
        assert_eq!(busemann_on_cylinder(&v("1.1"), &x0, &x1).unwrap(), 1);
        assert_eq!(busemann_on_cylinder(&v("1"), &x0, &x1).unwrap(), 1);
        assert_eq!(busemann_on_cylinder(&v("2"), &x0, &x1).unwrap(), -1);
        assert_eq!(busemann_on_cylinder(&v("3.2"), &x0, &x1).unwrap(), -1);
        assert!(matches!(
            busemann_on_cylinder(&x0, &x0, &x1),
            Err(Error::CylinderTooShallow(_))
        ));
    }

    #[test]
    fn busemann_matches_stabilised_limit() {
        // Oracle: follow the ray down the cylinder and watch d(x,z) - d(y,z).
        let params = p(2);
        let ball = params.ball(3);
        for u in params.vertices_at_depth(4) {
            for x in &ball {
                for y in &ball {
                    let mut z = u.clone();
                    for _ in 0..8 {
                        z = z.child(1);
                    }
                    let limit = distance(x, &z) as i64 - distance(y, &z) as i64;
                    assert_eq!(busemann_on_cylinder(&u, x, y).unwrap(), limit);
                }
            }
        }
    }

    #[test]
    fn pruning_the_edge_neighbourhood() {
        let params = p(3);
        let core = FiniteSubtree::new([v("1"), v("1.1")]).unwrap();
        let s = closed_neighborhood(&params, &core, 1).unwrap();
        assert_eq!(s.diameter(), 3);
        let segment = vec![Vertex::root(), v("1"), v("1.1"), v("1.1.1")];
        let pr = prune_along(&params, &s, segment).unwrap();
        assert_eq!(pr.pivot, v("1.1"));
        assert_eq!(pr.removed.len(), 3);
        assert!(is_complete(&params, &pr.pruned));
        assert!(is_complete(&params, &prune(&params, &s).unwrap().pruned));
    }
}
