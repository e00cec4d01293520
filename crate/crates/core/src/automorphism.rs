//! Tree automorphisms as words in three kinds of generators: rooted
//! portraits (elements of `K = Fix(x0)`), the edge inversion `h` swapping
//! `x0` and `x1 = "1"`, and the unit translation `t` along the standard line
//! `x_k = "1"^k`, `x_{-k} = "2" "1"^(k-1)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::EndCell;
use crate::tree::{TreeParams, Vertex};

/// A rooted automorphism given by local permutations.
///
/// `root` permutes `1..=q+1`; `nodes[v]` permutes `1..=q` below `v`.
/// Unlisted nodes act as the identity. The image of `(a1, a2, ...)` is
/// `(root(a1), nodes[a1](a2), nodes[a1 a2](a3), ...)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portrait {
    root: Vec<u8>,
    #[serde(default)]
    nodes: BTreeMap<Vertex, Vec<u8>>,
    #[serde(skip)]
    inverse: Option<Box<Inverses>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Inverses {
    root: Vec<u8>,
    nodes: BTreeMap<Vertex, Vec<u8>>,
}

fn check_perm(perm: &[u8], n: usize, at: &str) -> Result<Vec<u8>> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::MalformedPermutation(format!(
            "{at}: expected {n} entries, got {}",
            perm.len()
        )));
    }
    for &a in perm {
        let i = usize::from(a).wrapping_sub(1);
        if i >= n || seen[i] {
            return Err(Error::MalformedPermutation(format!("{at}: {perm:?}")));
        }
        seen[i] = true;
    }
    let mut inv = vec![0u8; n];
    for (i, &a) in perm.iter().enumerate() {
        inv[usize::from(a) - 1] = (i + 1) as u8;
    }
    Ok(inv)
}

impl Portrait {
    pub fn identity(params: &TreeParams) -> Self {
        Portrait::new(params, (1..=params.q() as u8 + 1).collect(), BTreeMap::new())
            .expect("identity is a permutation")
    }

    pub fn new(params: &TreeParams, root: Vec<u8>, nodes: BTreeMap<Vertex, Vec<u8>>) -> Result<Self> {
        let mut p = Portrait {
            root,
            nodes,
            inverse: None,
        };
        p.finish(params)?;
        Ok(p)
    }

    /// Validates permutations and caches their inverses.
    pub fn finish(&mut self, params: &TreeParams) -> Result<()> {
        let q = params.q() as usize;
        let root = check_perm(&self.root, q + 1, "root")?;
        let mut nodes = BTreeMap::new();
        for (v, perm) in &self.nodes {
            if v.is_root() {
                return Err(Error::MalformedPermutation("node map at the root".into()));
            }
            params.validate_letters(v)?;
            nodes.insert(v.clone(), check_perm(perm, q, &v.to_string())?);
        }
        self.inverse = Some(Box::new(Inverses { root, nodes }));
        Ok(())
    }

    /// Swaps two root directions, identity elsewhere.
    pub fn root_swap(params: &TreeParams, a: u8, b: u8) -> Result<Self> {
        let mut root: Vec<u8> = (1..=params.q() as u8 + 1).collect();
        let (ia, ib) = (usize::from(a).wrapping_sub(1), usize::from(b).wrapping_sub(1));
        if ia >= root.len() || ib >= root.len() {
            return Err(Error::MalformedPermutation(format!("swap({a},{b})")));
        }
        root.swap(ia, ib);
        Portrait::new(params, root, BTreeMap::new())
    }

    pub fn apply(&self, u: &Vertex) -> Vertex {
        let letters = u.letters();
        let mut out = Vec::with_capacity(letters.len());
        for (i, &a) in letters.iter().enumerate() {
            let image = if i == 0 {
                self.root[usize::from(a) - 1]
            } else {
                match self.nodes.get(&Vertex::from_letters(&letters[..i])) {
                    Some(perm) => perm[usize::from(a) - 1],
                    None => a,
                }
            };
            out.push(image);
        }
        Vertex::from_letters(out)
    }

    pub fn apply_inverse(&self, u: &Vertex) -> Vertex {
        let inv = self.inverse.as_ref().expect("portrait validated");
        let mut pre: Vec<u8> = Vec::with_capacity(u.depth());
        for (i, &b) in u.letters().iter().enumerate() {
            let a = if i == 0 {
                inv.root[usize::from(b) - 1]
            } else {
                match inv.nodes.get(&Vertex::from_letters(pre.as_slice())) {
                    Some(perm) => perm[usize::from(b) - 1],
                    None => b,
                }
            };
            pre.push(a);
        }
        Vertex::from_letters(pre)
    }
}

/// Edge inversion: `(1, a2, a3, ...) -> (a2+1, a3, ...)` and
/// `(a1, a2, ...) -> (1, a1-1, a2, ...)` for `a1 >= 2`. An involution.
fn invert_edge(u: &Vertex) -> Vertex {
    let l = u.letters();
    match l.first() {
        None => Vertex::from_letters(vec![1]),
        Some(1) => {
            let mut out = l[1..].to_vec();
            if let Some(first) = out.first_mut() {
                *first += 1;
            }
            Vertex::from_letters(out)
        }
        Some(&a) => {
            let mut out = Vec::with_capacity(l.len() + 1);
            out.push(1);
            out.push(a - 1);
            out.extend_from_slice(&l[1..]);
            Vertex::from_letters(out)
        }
    }
}

/// Swap of root directions 1 and 2.
fn swap12(u: &Vertex) -> Vertex {
    let mut l = u.letters().to_vec();
    if let Some(first) = l.first_mut() {
        *first = match *first {
            1 => 2,
            2 => 1,
            a => a,
        };
    }
    Vertex::from_letters(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gen", rename_all = "snake_case")]
pub enum Generator {
    Portrait { portrait: Arc<Portrait> },
    EdgeInversion,
    /// `t = h o swap(1,2)`, shifting the standard line by `x_k -> x_{k+1}`.
    Translation,
}

/// A generator or its formal inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    #[serde(flatten)]
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inverse: bool,
}

impl Letter {
    fn apply(&self, u: &Vertex) -> Vertex {
        match (&self.generator, self.inverse) {
            (Generator::Portrait { portrait }, false) => portrait.apply(u),
            (Generator::Portrait { portrait }, true) => portrait.apply_inverse(u),
            (Generator::EdgeInversion, _) => invert_edge(u),
            (Generator::Translation, false) => invert_edge(&swap12(u)),
            (Generator::Translation, true) => swap12(&invert_edge(u)),
        }
    }

    fn inverted(&self) -> Letter {
        Letter {
            generator: self.generator.clone(),
            inverse: !self.inverse,
        }
    }
}

/// A word `g = l_1 l_2 ... l_n` acting by `g u = l_1(l_2(... l_n(u)))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeAutomorphism {
    #[serde(skip)]
    params: TreeParams,
    word: Vec<Letter>,
    image_of_root: Vertex,
    displacement: usize,
}

impl TreeAutomorphism {
    fn from_word(params: TreeParams, word: Vec<Letter>) -> Self {
        let mut g = TreeAutomorphism {
            params,
            word,
            image_of_root: Vertex::root(),
            displacement: 0,
        };
        g.image_of_root = g.apply_unchecked(&Vertex::root());
        g.displacement = g.image_of_root.depth();
        g
    }

    /// Rebuilds from a serialized generator word.
    pub fn from_letters(params: TreeParams, mut word: Vec<Letter>) -> Result<Self> {
        for letter in &mut word {
            if let Generator::Portrait { portrait } = &mut letter.generator {
                Arc::make_mut(portrait).finish(&params)?;
            }
        }
        let g = Self::from_word(params, word);
        g.check_budget()?;
        Ok(g)
    }

    pub fn identity(params: TreeParams) -> Self {
        Self::from_word(params, Vec::new())
    }

    pub fn from_portrait(params: TreeParams, p: Portrait) -> Self {
        Self::from_word(
            params,
            vec![Letter {
                generator: Generator::Portrait { portrait: Arc::new(p) },
                inverse: false,
            }],
        )
    }

    pub fn edge_inversion(params: TreeParams) -> Self {
        Self::from_word(
            params,
            vec![Letter {
                generator: Generator::EdgeInversion,
                inverse: false,
            }],
        )
    }

    /// `t x_k = x_{k+1}` on the standard line.
    pub fn translation(params: TreeParams) -> Self {
        Self::from_word(
            params,
            vec![Letter {
                generator: Generator::Translation,
                inverse: false,
            }],
        )
    }

    /// Some automorphism moving `x0` to the neighbour `y`.
    pub fn moving_root_to(params: TreeParams, y: &Vertex) -> Result<Self> {
        params.validate(y)?;
        if y.depth() != 1 {
            return Err(Error::MalformedAddress(format!("{y} is not a neighbour of x0")));
        }
        let h = Self::edge_inversion(params);
        let a = y.letters()[0];
        if a == 1 {
            return Ok(h);
        }
        let swap = Self::from_portrait(params, Portrait::root_swap(&params, 1, a)?);
        swap.compose(&h)
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    pub fn image_of_root(&self) -> &Vertex {
        &self.image_of_root
    }

    /// `d(x0, g x0)`.
    pub fn displacement(&self) -> usize {
        self.displacement
    }

    pub fn is_identity_word(&self) -> bool {
        self.word.is_empty()
    }

    fn check_budget(&self) -> Result<()> {
        if self.displacement > self.params.depth_cap() {
            return Err(Error::DepthBudget {
                needed: self.displacement,
                cap: self.params.depth_cap(),
            });
        }
        Ok(())
    }

    /// `(self o other) u = self(other(u))`.
    pub fn compose(&self, other: &TreeAutomorphism) -> Result<Self> {
        let mut word = self.word.clone();
        word.extend(other.word.iter().cloned());
        let g = Self::from_word(self.params, word);
        g.check_budget()?;
        Ok(g)
    }

    pub fn inverse(&self) -> Self {
        let word = self.word.iter().rev().map(Letter::inverted).collect();
        Self::from_word(self.params, word)
    }

    pub fn pow(&self, k: i32) -> Result<Self> {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Self::identity(self.params);
        for _ in 0..k.unsigned_abs() {
            out = out.compose(&base)?;
        }
        Ok(out)
    }

    /// Image of a vertex. Inputs deeper than the depth cap are rejected.
    pub fn apply_vertex(&self, u: &Vertex) -> Result<Vertex> {
        self.params.validate(u)?;
        Ok(self.apply_unchecked(u))
    }

    /// Image of a vertex without address validation. The word model is
    /// exact at every depth, so no truncation can occur.
    pub fn apply_unchecked(&self, u: &Vertex) -> Vertex {
        let mut out = u.clone();
        for letter in self.word.iter().rev() {
            out = letter.apply(&out);
        }
        out
    }

    pub fn apply_cell(&self, c: &EndCell) -> EndCell {
        c.image(self)
    }
}

/// A uniformly random element of `K` acting down to `depth`, identity below.
pub fn random_rooted(params: TreeParams, depth: usize, seed: u64) -> Result<TreeAutomorphism> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_rooted_with(params, depth, &mut rng)
}

pub fn random_rooted_with<R: rand::Rng + ?Sized>(
    params: TreeParams,
    depth: usize,
    rng: &mut R,
) -> Result<TreeAutomorphism> {
    if depth > params.depth_cap() {
        return Err(Error::DepthBudget {
            needed: depth,
            cap: params.depth_cap(),
        });
    }
    let q = params.q() as u8;
    let mut root: Vec<u8> = (1..=q + 1).collect();
    if depth >= 1 {
        root.shuffle(rng);
    }
    let mut nodes = BTreeMap::new();
    for n in 1..depth {
        for v in params.vertices_at_depth(n) {
            let mut perm: Vec<u8> = (1..=q).collect();
            perm.shuffle(rng);
            nodes.insert(v, perm);
        }
    }
    Ok(TreeAutomorphism::from_portrait(
        params,
        Portrait::new(&params, root, nodes)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{busemann_on_cylinder, distance};
    use rand::Rng;

    fn v(s: &str) -> Vertex {
        s.parse().unwrap()
    }

    fn p(q: u32) -> TreeParams {
        TreeParams::new(q, 8).unwrap()
    }

    fn standard_line(k: i32) -> Vertex {
        match k {
            0 => Vertex::root(),
            k if k > 0 => Vertex::from_letters(vec![1; k as usize]),
            k => {
                let mut l = vec![2];
                l.extend(std::iter::repeat_n(1, (-k - 1) as usize));
                Vertex::from_letters(l)
            }
        }
    }

    #[test]
    fn portrait_examples() {
        let params = p(2);
        let id = TreeAutomorphism::from_portrait(params, Portrait::identity(&params));
        for u in params.ball(3) {
            assert_eq!(id.apply_vertex(&u).unwrap(), u);
        }
        let swap = TreeAutomorphism::from_portrait(params, Portrait::root_swap(&params, 1, 2).unwrap());
        assert_eq!(swap.apply_vertex(&v("1")).unwrap(), v("2"));
        let bad = Portrait::new(&params, vec![1, 1, 2], BTreeMap::new());
        assert!(matches!(bad, Err(Error::MalformedPermutation(_))));
    }

    #[test]
    fn random_portraits_preserve_depth_and_fix_root() {
        let params = p(3);
        for seed in 0..20 {
            let g = random_rooted(params, 4, seed).unwrap();
            assert_eq!(g.image_of_root(), &Vertex::root());
            for u in params.ball(4) {
                assert_eq!(g.apply_vertex(&u).unwrap().depth(), u.depth());
                assert_eq!(g.inverse().apply_vertex(&g.apply_vertex(&u).unwrap()).unwrap(), u);
            }
        }
        assert_eq!(random_rooted(params, 3, 7).unwrap(), random_rooted(params, 3, 7).unwrap());
    }

    #[test]
    fn random_rooted_orbits_are_uniform() {
        // 10^4 samples of the image of one depth-3 cylinder, chi-like 3-sigma check per bin.
        let params = p(2);
        let target = v("1.1.1");
        let bins = params.cylinder_count(3);
        let mut counts = vec![0usize; bins];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 10_000;
        for _ in 0..samples {
            let g = random_rooted_with(params, 3, &mut rng).unwrap();
            counts[params.cylinder_index(&g.apply_unchecked(&target))] += 1;
        }
        let pr = 1.0 / bins as f64;
        let mean = samples as f64 * pr;
        let sigma = (samples as f64 * pr * (1.0 - pr)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma + 1.0, "{c} vs {mean}");
        }
    }

    #[test]
    fn edge_inversion_examples() {
        let params = p(2);
        let h = TreeAutomorphism::edge_inversion(params);
        assert_eq!(h.apply_vertex(&Vertex::root()).unwrap(), v("1"));
        assert_eq!(h.apply_vertex(&v("1")).unwrap(), Vertex::root());
        assert_eq!(h.apply_vertex(&v("2")).unwrap(), v("1.1"));
        let hh = h.compose(&h).unwrap();
        for u in params.ball(params.depth_cap() - 1) {
            assert_eq!(hh.apply_vertex(&u).unwrap(), u);
            assert_eq!(h.inverse().apply_unchecked(&u), h.apply_unchecked(&u));
        }
    }

    #[test]
    fn generators_preserve_adjacency_to_depth_4() {
        for q in [2, 3] {
            let params = p(q);
            let gens = [
                TreeAutomorphism::edge_inversion(params),
                TreeAutomorphism::translation(params),
                TreeAutomorphism::translation(params).inverse(),
                random_rooted(params, 3, 5).unwrap(),
            ];
            let ball = params.ball(4);
            for g in &gens {
                for u in &ball {
                    let gu = g.apply_vertex(u).unwrap();
                    params.validate_letters(&gu).unwrap();
                    for c in params.children(u) {
                        assert!(gu.is_adjacent(&g.apply_unchecked(&c)));
                    }
                }
            }
        }
    }

    #[test]
    fn translation_shifts_the_line() {
        let params = p(3);
        let t = TreeAutomorphism::translation(params);
        assert_eq!(t.apply_vertex(&Vertex::root()).unwrap(), v("1"));
        assert_eq!(t.apply_vertex(&v("2")).unwrap(), Vertex::root());
        for k in -6..6 {
            assert_eq!(t.apply_unchecked(&standard_line(k)), standard_line(k + 1));
        }
        for k in -4i32..=4 {
            let tk = t.pow(k).unwrap();
            assert_eq!(tk.displacement(), k.unsigned_abs() as usize);
            assert_eq!(distance(&Vertex::root(), &tk.apply_unchecked(&Vertex::root())), k.unsigned_abs() as usize);
        }
    }

    #[test]
    fn moving_root_to_neighbours() {
        let params = p(3);
        for y in params.vertices_at_depth(1) {
            let g = TreeAutomorphism::moving_root_to(params, &y).unwrap();
            assert_eq!(g.image_of_root(), &y);
        }
        assert!(TreeAutomorphism::moving_root_to(params, &v("1.1")).is_err());
    }

    fn random_word(params: TreeParams, rng: &mut ChaCha8Rng, len: usize) -> TreeAutomorphism {
        let mut g = TreeAutomorphism::identity(params);
        for _ in 0..len {
            let next = match rng.random_range(0..4) {
                0 => TreeAutomorphism::edge_inversion(params),
                1 => TreeAutomorphism::translation(params),
                2 => TreeAutomorphism::translation(params).inverse(),
                _ => random_rooted_with(params, 2, rng).unwrap(),
            };
            g = g.compose(&next).unwrap();
        }
        g
    }

    #[test]
    fn group_laws_and_isometry() {
        let params = p(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ball = params.ball(4);
        for _ in 0..30 {
            let (a, b, c) = (
                random_word(params, &mut rng, 2),
                random_word(params, &mut rng, 2),
                random_word(params, &mut rng, 2),
            );
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            let ai = a.inverse().compose(&a).unwrap();
            for u in &ball {
                assert_eq!(left.apply_unchecked(u), right.apply_unchecked(u));
                assert_eq!(ai.apply_unchecked(u), *u);
                assert_eq!(a.compose(&TreeAutomorphism::identity(params)).unwrap().apply_unchecked(u), a.apply_unchecked(u));
            }
            for _ in 0..50 {
                let u = &ball[rng.random_range(0..ball.len())];
                let w = &ball[rng.random_range(0..ball.len())];
                assert_eq!(distance(&a.apply_unchecked(u), &a.apply_unchecked(w)), distance(u, w));
            }
            assert_eq!(a.displacement(), a.image_of_root().depth());
        }
    }

    #[test]
    fn busemann_equivariance() {
        let params = p(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let g = random_word(params, &mut rng, 3);
            let x = params.cylinder_at(1, rng.random_range(0..3));
            let y = params.cylinder_at(2, rng.random_range(0..6));
            for u in params.vertices_at_depth(6) {
                let before = busemann_on_cylinder(&u, &x, &y).unwrap();
                let image = EndCell::cylinder(u).image(&g);
                let after = image.busemann(&g.apply_unchecked(&x), &g.apply_unchecked(&y)).unwrap();
                assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn depth_budget_is_enforced() {
        let params = TreeParams::new(2, 4).unwrap();
        let t = TreeAutomorphism::translation(params);
        assert!(t.pow(4).is_ok());
        assert!(matches!(t.pow(5), Err(Error::DepthBudget { .. })));
        assert!(matches!(
            t.apply_vertex(&v("1.1.1.1.1")),
            Err(Error::DepthBudget { .. })
        ));
    }

    #[test]
    fn words_serialize_as_tagged_records() {
        let params = p(2);
        let g = TreeAutomorphism::translation(params)
            .inverse()
            .compose(&TreeAutomorphism::from_portrait(params, Portrait::root_swap(&params, 1, 3).unwrap()))
            .unwrap();
        let json = serde_json::to_value(g.word()).unwrap();
        assert_eq!(json[0], serde_json::json!({"gen": "translation", "inverse": true}));
        assert_eq!(json[1]["gen"], "portrait");
        let letters: Vec<Letter> = serde_json::from_value(json).unwrap();
        let back = TreeAutomorphism::from_letters(params, letters).unwrap();
        for u in params.ball(3) {
            assert_eq!(back.apply_unchecked(&u), g.apply_unchecked(&u));
        }
    }
}
