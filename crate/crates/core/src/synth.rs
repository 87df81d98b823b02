//! Synthetic sparse concentration matrices and Gaussian samples from them.
//!
//! Randomness comes from ChaCha20 seeded with `SynthSpec::seed`. The sparsity
//! pattern, the nonzero values and the samples are drawn from separate
//! streams (0, 1 and 2) of that generator, so changing `n` leaves the true
//! matrix untouched.

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certificates::lambda_max;
use crate::linalg::{cholesky, solve_lower_transpose};
use crate::model::{ConcentrationMatrix, CovarianceMatrix, DataMatrix, OffDiagonal};
use crate::{Error, Result};

const PATTERN_STREAM: u64 = 0;
const VALUE_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    /// Number of nonzero unordered off-diagonal pairs.
    pub pairs: usize,
    pub n: usize,
    pub seed: u64,
    /// Magnitude range of the nonzero off-diagonal entries; signs are
    /// drawn independently.
    pub magnitude: (f64, f64),
}

impl SynthSpec {
    pub fn new(p: usize, pairs: usize, n: usize, seed: u64) -> Self {
        SynthSpec {
            p,
            pairs,
            n,
            seed,
            magnitude: (0.4, 0.8),
        }
    }

    pub fn capacity(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs > self.capacity() {
            return Err(Error::CapacityExceeded {
                requested: self.pairs,
                capacity: self.capacity(),
            });
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        let (lo, hi) = self.magnitude;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid magnitude range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Maps a linear index over the strict upper triangle (row-major) to `(i, j)`.
fn pair_of(mut idx: usize, p: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let len = p - 1 - i;
        if idx < len {
            return (i, i + 1 + idx);
        }
        idx -= len;
        i += 1;
    }
}

/// Sparse positive definite matrix with exactly `spec.pairs` nonzero pairs.
///
/// The diagonal is the row absolute sum plus one, so the matrix is strictly
/// diagonally dominant.
pub fn generate_sparse_concentration(spec: &SynthSpec) -> Result<ConcentrationMatrix> {
    spec.validate()?;
    let p = spec.p;
    let mut picked = index::sample(&mut rng(spec.seed, PATTERN_STREAM), spec.capacity(), spec.pairs).into_vec();
    picked.sort_unstable();

    let mut values = rng(spec.seed, VALUE_STREAM);
    let (lo, hi) = spec.magnitude;
    let mut diag = vec![1.0; p];
    let mut entries = Vec::with_capacity(picked.len());
    // pair_of walks rows; picked is sorted so walk incrementally
    let (mut row, mut offset) = (0usize, 0usize);
    for idx in picked {
        while idx >= offset + (p - 1 - row) {
            offset += p - 1 - row;
            row += 1;
        }
        let col = row + 1 + (idx - offset);
        debug_assert_eq!((row, col), pair_of(idx, p));
        let magnitude = if lo == hi { lo } else { values.random_range(lo..hi) };
        let value = if values.random_bool(0.5) { magnitude } else { -magnitude };
        diag[row] += magnitude;
        diag[col] += magnitude;
        entries.push(OffDiagonal { row, col, value });
    }
    Ok(ConcentrationMatrix::from_sorted(diag, entries))
}

/// `n` i.i.d. rows from `N(0, Ω⁻¹)`: with `Ω = LLᵀ`, each row solves
/// `Lᵀx = z` for standard normal `z`.
pub fn sample_gaussian(omega: &ConcentrationMatrix, n: usize, seed: u64) -> Result<DataMatrix> {
    let p = omega.p();
    let l = cholesky(&omega.to_dense())?;
    let mut r = rng(seed, SAMPLE_STREAM);
    let mut y = Array2::<f64>::zeros((n, p));
    for mut row in y.rows_mut() {
        let z: ndarray::Array1<f64> = (0..p).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        row.assign(&solve_lower_transpose(&l, z.view()));
    }
    DataMatrix::new(y)
}

/// `count` log-spaced penalties from `1.05·λ_max` down to `0.05·λ_max`.
pub fn lambda_grid(s: &CovarianceMatrix, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput(format!(
            "grid needs at least 2 points, got {count}"
        )));
    }
    let lmax = lambda_max(s)?;
    if lmax == 0.0 {
        return Err(Error::NothingToRegularize);
    }
    Ok(log_grid(1.05 * lmax, 0.05 * lmax, count))
}

pub(crate) fn log_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..count)
        .map(|k| match k {
            0 => hi,
            k if k == count - 1 => lo,
            k => (lh + (ll - lh) * k as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

/// Matthews correlation between the off-diagonal supports of two matrices.
/// Returns 0 when any confusion-matrix margin is empty.
pub fn matthews_correlation(estimate: &ConcentrationMatrix, truth: &ConcentrationMatrix) -> f64 {
    let p = truth.p();
    let total = (p * p.saturating_sub(1) / 2) as f64;
    let est: std::collections::HashSet<(usize, usize)> = estimate.offdiag().iter().map(|e| (e.row, e.col)).collect();
    let tp = truth.offdiag().iter().filter(|e| est.contains(&(e.row, e.col))).count() as f64;
    let fp = est.len() as f64 - tp;
    let fn_ = truth.nnz_offdiag() as f64 - tp;
    let tn = total - tp - fp - fn_;
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom
    }
}
