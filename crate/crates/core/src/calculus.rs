//! Matrix stand-ins for the coefficient operators: spectral norms, the
//! scalar map `phi(z) = (z + sqrt(z^2 - 4q)) / 2` with its cut along the
//! non-negative reals, `tau = phi(alpha)` by functional calculus, and the
//! spectral guards on `tau`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A `d x d` complex matrix, serialized row-major as rows of `[re, im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOperator(pub CMatrix);

impl MatrixOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows().max(1),
                got: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("matrix has non-finite entries".into()));
        }
        Ok(MatrixOperator(m))
    }

    pub fn zeros(d: usize) -> Self {
        MatrixOperator(CMatrix::zeros(d, d))
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        MatrixOperator(CMatrix::from_diagonal(&CVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

impl Serialize for MatrixOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.0;
        let mut rows = serializer.serialize_seq(Some(m.nrows()))?;
        for i in 0..m.nrows() {
            let row: Vec<[f64; 2]> = (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl<'de> Deserialize<'de> for MatrixOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(serde::de::Error::custom("matrix must be square"));
        }
        let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        MatrixOperator::new(m).map_err(serde::de::Error::custom)
    }
}

/// Serializes a vector as an array of `[re, im]`.
pub fn vector_to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_pairs(pairs: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(pairs.len(), pairs.iter().map(|p| Complex64::new(p[0], p[1])))
}

/// Largest singular value by power iteration on `a* a`.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    const MAX_ITER: usize = 200_000;
    let gram = a.adjoint() * a;
    let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let gram = gram.unscale(scale);
    let n = gram.nrows();
    // Start from the heaviest column, nudged off any accidental symmetry.
    let heaviest = (0..n)
        .max_by(|&i, &j| gram.column(i).norm().total_cmp(&gram.column(j).norm()))
        .unwrap_or(0);
    let mut x: CVector = gram.column(heaviest).into_owned();
    for (k, z) in x.iter_mut().enumerate() {
        *z += Complex64::new(1e-3 * (1.0 + k as f64).sqrt(), 1e-3 / (2.0 + k as f64));
    }
    x.normalize_mut();
    let mut lambda = 0.0;
    let mut stalled = 0;
    for _ in 0..MAX_ITER {
        let y = &gram * &x;
        let next = x.dotc(&y).re;
        let residual = (&y - &x * Complex64::from(next)).norm();
        let ynorm = y.norm();
        if ynorm == 0.0 {
            return Ok(0.0);
        }
        if residual <= 1e-9 * next.abs() {
            return Ok((next.max(0.0) * scale).sqrt());
        }
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            stalled += 1;
            if stalled >= 64 {
                return Ok((next.max(0.0) * scale).sqrt());
            }
        } else {
            stalled = 0;
        }
        lambda = next;
        x = y.unscale(ynorm);
    }
    Err(Error::NonConvergence(format!(
        "power iteration for the spectral norm after {MAX_ITER} steps"
    )))
}

/// Square root with the cut along the non-negative reals:
/// `sqrt(r e^{i theta}) = sqrt(r) e^{i theta / 2}` for `theta` in `(0, 2 pi)`.
pub fn sqrt_cut(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::BranchCut(format!("{z}")));
    }
    Ok(I * (-z).sqrt())
}

/// `phi(z) = (z + sqrt(z^2 - 4q)) / 2` on the cut domain.
pub fn phi_scalar(z: Complex64, q: u32) -> Result<Complex64> {
    let q = f64::from(q);
    Ok((z + sqrt_cut(z * z - 4.0 * q)?) / 2.0)
}

/// `1 / phi(z) = (z - sqrt(z^2 - 4q)) / (2q)`.
pub fn phi_inv_scalar(z: Complex64, q: u32) -> Result<Complex64> {
    let q = f64::from(q);
    Ok((z - sqrt_cut(z * z - 4.0 * q)?) / (2.0 * q))
}

/// Complex Schur form `a = Q T Q*` with `T` upper triangular.
pub fn schur(a: &CMatrix) -> (CMatrix, CMatrix) {
    let (q, mut t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
    for j in 0..t.ncols() {
        for i in j + 1..t.nrows() {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    (q, t)
}

/// Principal square root of an upper-triangular matrix whose diagonal avoids
/// the closed negative real axis.
fn sqrt_upper(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    let mut r = CMatrix::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)];
        if d.im == 0.0 && d.re <= 0.0 {
            return Err(Error::BranchCut(format!("eigenvalue {d} of 4q - alpha^2")));
        }
        r[(j, j)] = d.sqrt();
        for i in (0..j).rev() {
            let mut s = m[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let denom = r[(i, i)] + r[(j, j)];
            if denom.norm() == 0.0 {
                return Err(Error::IllConditioned("vanishing pivot in square-root recurrence".into()));
            }
            r[(i, j)] = s / denom;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||tau^2 - alpha tau + q I||`
    pub quad: f64,
    /// `||tau + q tau^{-1} - alpha||`
    pub sum: f64,
    /// `||tau tau^{-1} - I||`
    pub inv: f64,
}

/// `alpha` together with `tau = phi(alpha)` and its inverse.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorPair {
    pub q: u32,
    pub alpha: MatrixOperator,
    pub tau: MatrixOperator,
    pub tau_inv: MatrixOperator,
    pub alpha_norm: f64,
    pub tau_norm: f64,
    pub tau_inv_norm: f64,
    pub residuals: Residuals,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    pub fn tau(&self) -> &CMatrix {
        &self.tau.0
    }

    pub fn tau_inv(&self) -> &CMatrix {
        &self.tau_inv.0
    }

    pub fn alpha(&self) -> &CMatrix {
        &self.alpha.0
    }
}

/// Builds `tau = phi(alpha)` through the Schur form: with `alpha = Q T Q*`
/// and `R` the principal root of `4q - T^2`, `tau = Q (T + iR)/2 Q*` and
/// `tau^{-1} = Q (T - iR)/(2q) Q*`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the checks
pub fn build_pair(alpha: &MatrixOperator, q: u32, tol: f64) -> Result<OperatorPair> {
    let a = alpha.matrix();
    let d = a.nrows();
    let qf = f64::from(q);
    let radius = 2.0 * qf.sqrt();
    let alpha_norm = spectral_norm(a)?;
    if alpha_norm >= radius {
        return Err(Error::Domain {
            norm: alpha_norm,
            radius,
        });
    }
    let (qm, t) = schur(a);
    let shifted = CMatrix::identity(d, d) * Complex64::from(4.0 * qf) - &t * &t;
    let r = sqrt_upper(&shifted)?;
    let ir = r * I;
    let q_adj = qm.adjoint();
    let tau = &qm * ((&t + &ir) / Complex64::from(2.0)) * &q_adj;
    let tau_inv = &qm * ((&t - &ir) / Complex64::from(2.0 * qf)) * &q_adj;

    let id = CMatrix::identity(d, d);
    let residuals = Residuals {
        quad: spectral_norm(&(&tau * &tau - a * &tau + &id * Complex64::from(qf)))?,
        sum: spectral_norm(&(&tau + &tau_inv * Complex64::from(qf) - a))?,
        inv: spectral_norm(&(&tau * &tau_inv - &id))?,
    };
    let tau_norm = spectral_norm(&tau)?;
    let tau_inv_norm = spectral_norm(&tau_inv)?;
    let bounds = [
        ("quad", residuals.quad, tol * (1.0 + alpha_norm * alpha_norm)),
        ("sum", residuals.sum, tol * (1.0 + alpha_norm)),
        ("inv", residuals.inv, tol * (1.0 + tau_norm * tau_inv_norm)),
    ];
    for (name, value, bound) in bounds {
        if !(value <= bound) {
            return Err(Error::IllConditioned(format!(
                "{name} residual {value:e} exceeds {bound:e}"
            )));
        }
    }
    Ok(OperatorPair {
        q,
        alpha: alpha.clone(),
        tau: MatrixOperator(tau),
        tau_inv: MatrixOperator(tau_inv),
        alpha_norm,
        tau_norm,
        tau_inv_norm,
        residuals,
    })
}

/// Outcome of the spectral guards on a pair.
#[derive(Debug, Clone, Serialize)]
pub struct GuardReport {
    pub q: u32,
    pub alpha_norm: f64,
    pub radius: f64,
    /// Eigenvalues of `tau`, as `[re, im]`.
    pub tau_spectrum: Vec<[f64; 2]>,
    /// `min |lambda -+ q|` over the spectrum of `tau`.
    pub margin_to_pm_q: f64,
    /// Singular values of `tau - tau^{-1}` at the extremes.
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition: f64,
    pub residuals: Residuals,
}

/// Checks that `+-q` is not an eigenvalue of `tau` and that `tau - tau^{-1}`
/// is invertible.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn guard_spectrum(pair: &OperatorPair) -> Result<GuardReport> {
    let qf = f64::from(pair.q);
    let (_, t) = schur(pair.tau());
    let spectrum: Vec<Complex64> = t.diagonal().iter().copied().collect();
    let margin = spectrum
        .iter()
        .map(|l| (l - qf).norm().min((l + qf).norm()))
        .fold(f64::INFINITY, f64::min);
    let diff = pair.tau() - pair.tau_inv();
    let sv = diff.singular_values();
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    let report = GuardReport {
        q: pair.q,
        alpha_norm: pair.alpha_norm,
        radius: 2.0 * qf.sqrt(),
        tau_spectrum: spectrum.iter().map(|z| [z.re, z.im]).collect(),
        margin_to_pm_q: margin,
        sigma_min,
        sigma_max,
        condition: sigma_max / sigma_min,
        residuals: pair.residuals,
    };
    if !(margin > 1e-10 * qf) {
        return Err(Error::SpectralGuard(format!(
            "spectrum of tau within {margin:e} of +-q"
        )));
    }
    if !(sigma_min > 1e-12 * sigma_max.max(1.0)) {
        return Err(Error::SpectralGuard(format!(
            "tau - tau^-1 is numerically singular (sigma_min = {sigma_min:e})"
        )));
    }
    Ok(report)
}

/// `tau^k`, with negative powers through `tau^{-1}`.
pub fn power(pair: &OperatorPair, k: i64) -> CMatrix {
    let base = if k >= 0 { pair.tau() } else { pair.tau_inv() };
    let mut out = CMatrix::identity(pair.dim(), pair.dim());
    for _ in 0..k.unsigned_abs() {
        out = &out * base;
    }
    out
}

/// Precomputed `tau^k` for `|k| <= reach`.
#[derive(Debug, Clone)]
pub struct PowerTable {
    reach: i64,
    powers: Vec<CMatrix>,
}

impl PowerTable {
    pub fn new(pair: &OperatorPair, reach: usize) -> Self {
        let reach = reach as i64;
        let d = pair.dim();
        let mut powers = vec![CMatrix::identity(d, d); 2 * reach as usize + 1];
        for k in 1..=reach {
            let up = &powers[(reach + k - 1) as usize] * pair.tau();
            let down = &powers[(reach - k + 1) as usize] * pair.tau_inv();
            powers[(reach + k) as usize] = up;
            powers[(reach - k) as usize] = down;
        }
        PowerTable { reach, powers }
    }

    pub fn get(&self, k: i64) -> &CMatrix {
        assert!(k.abs() <= self.reach, "power {k} outside table of reach {}", self.reach);
        &self.powers[(self.reach + k) as usize]
    }
}

/// Solves `(tau - tau^{-1}) w' = w`.
pub fn solve_tau_difference(pair: &OperatorPair, w: &CVector) -> Result<CVector> {
    if w.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: w.len(),
        });
    }
    let diff = pair.tau() - pair.tau_inv();
    diff.lu()
        .solve(w)
        .ok_or_else(|| Error::SpectralGuard("tau - tau^-1 is singular".into()))
}
