//! Seeded randomness. Every trial draws from its own ChaCha stream selected
//! by `(suite, trial)`, so results do not depend on scheduling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::automorphism::{random_rooted_with, TreeAutomorphism};
use crate::calculus::{spectral_norm, CMatrix, CVector, MatrixOperator};
use crate::error::Result;
use crate::representation::StepFunction;
use crate::tree::TreeParams;

/// The generator for trial `trial` of the suite with tag `stream`.
pub fn trial_rng(seed: u64, stream: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(stream) << 32) | u64::from(trial));
    rng
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    CVector::from_fn(d, |_, _| random_complex(rng))
}

/// A random `d x d` matrix rescaled to spectral norm `s 2 sqrt(q)` with
/// `s` uniform in `[0.05, 0.9]`.
pub fn random_alpha<R: Rng + ?Sized>(rng: &mut R, q: u32, d: usize) -> Result<MatrixOperator> {
    let m = CMatrix::from_fn(d, d, |_, _| random_complex(rng));
    let s = rng.random_range(0.05..0.9);
    let norm = spectral_norm(&m)?;
    let target = s * 2.0 * f64::from(q).sqrt();
    MatrixOperator::new(m * Complex64::from(target / norm))
}

/// A random word of at most `max_len` letters among the edge inversion,
/// the translation and its inverse, and depth-2 elements of `K`, keeping
/// the displacement at most `max_disp`.
pub fn random_word<R: Rng + ?Sized>(
    rng: &mut R,
    params: TreeParams,
    max_len: usize,
    max_disp: usize,
) -> Result<TreeAutomorphism> {
    let len = rng.random_range(0..=max_len);
    let mut g = TreeAutomorphism::identity(params);
    for _ in 0..len {
        let letter = match rng.random_range(0..4) {
            0 => TreeAutomorphism::edge_inversion(params),
            1 => TreeAutomorphism::translation(params),
            2 => TreeAutomorphism::translation(params).inverse(),
            _ => random_rooted_with(params, 2.min(params.depth_cap()), rng)?,
        };
        let next = g.compose(&letter)?;
        if next.displacement() <= max_disp {
            g = next;
        }
    }
    Ok(g)
}

/// A step function at depth `depth` with independent random values.
pub fn random_step<R: Rng + ?Sized>(rng: &mut R, params: TreeParams, depth: usize, d: usize) -> Result<StepFunction> {
    let values = (0..params.cylinder_count(depth)).map(|_| random_vector(rng, d)).collect();
    StepFunction::from_values(params, depth, values)
}
