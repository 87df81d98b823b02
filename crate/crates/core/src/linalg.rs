//! Small dense factorizations used by the certificates and the generator.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Pivots at or above this value are accepted as nonnegative.
pub const PSD_PIVOT_TOLERANCE: f64 = -1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular `L` with `a = L Lᵀ`. Fails on the first nonpositive pivot.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let row_j = l.row(j).to_owned();
        let head = &row_j.as_slice().unwrap()[..j];
        let d = a[[j, j]] - dot(head, head);
        if !(d > 0.0) {
            return Err(Error::NotPositiveSemidefinite { index: j, value: d });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..p {
            let s = {
                let li = l.row(i);
                dot(&li.as_slice().unwrap()[..j], head)
            };
            l[[i, j]] = (a[[i, j]] - s) / d;
        }
    }
    Ok(l)
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut x = b.to_owned();
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in (i + 1)..p {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Complete-pivoting Cholesky of a symmetric positive semidefinite matrix.
///
/// `Pᵀ A P = Rᵀ R` with `R` upper trapezoidal (`rank × p`) and
/// `perm[k]` the original index of the `k`-th pivot.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    pub r: Array2<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl PivotedCholesky {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: a.ncols(),
            });
        }
        let scale = (0..p).map(|i| a[[i, i]].abs()).fold(0.0, f64::max);
        let zero_pivot = f64::EPSILON * p.max(1) as f64 * scale;

        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut r = Array2::<f64>::zeros((p, p));
        let mut rank = 0;
        for k in 0..p {
            // pivot on the largest remaining diagonal
            let (best, d) = (k..p)
                .map(|i| (i, work[[i, i]]))
                .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if d < PSD_PIVOT_TOLERANCE {
                return Err(Error::NotPositiveSemidefinite {
                    index: perm[best],
                    value: d,
                });
            }
            if d <= zero_pivot {
                // remaining Schur complement is numerically zero
                for i in k..p {
                    for j in k..p {
                        let v = work[[i, j]];
                        if i != j && v.abs() > 1e-8 * scale.max(1.0) {
                            return Err(Error::NotPositiveSemidefinite {
                                index: perm[i],
                                value: v,
                            });
                        }
                    }
                }
                break;
            }
            if best != k {
                perm.swap(k, best);
                swap_sym(&mut work, k, best);
                for row in 0..k {
                    let t = r[[row, k]];
                    r[[row, k]] = r[[row, best]];
                    r[[row, best]] = t;
                }
            }
            let piv = d.sqrt();
            r[[k, k]] = piv;
            for j in (k + 1)..p {
                r[[k, j]] = work[[k, j]] / piv;
            }
            for i in (k + 1)..p {
                let rki = r[[k, i]];
                if rki == 0.0 {
                    continue;
                }
                for j in (k + 1)..p {
                    work[[i, j]] -= rki * r[[k, j]];
                }
            }
            rank += 1;
        }
        let r = r.slice(ndarray::s![..rank, ..]).to_owned();
        Ok(PivotedCholesky { r, perm, rank })
    }

    /// Rows of `F` with `A = Fᵀ F`, columns in the original ordering.
    pub fn factor(&self) -> Array2<f64> {
        let p = self.perm.len();
        let mut f = Array2::<f64>::zeros((self.rank, p));
        for k in 0..self.rank {
            for b in 0..p {
                f[[k, self.perm[b]]] = self.r[[k, b]];
            }
        }
        f
    }
}

fn swap_sym(a: &mut Array2<f64>, i: usize, j: usize) {
    let p = a.nrows();
    for c in 0..p {
        a.swap([i, c], [j, c]);
    }
    for r in 0..p {
        a.swap([r, i], [r, j]);
    }
}

/// Spectral norm of a symmetric matrix by power iteration.
///
/// Start vector is drawn from a fixed-seed generator; stops when the
/// Rayleigh estimate changes by less than `1e-10` relative, or after 1000
/// iterations.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    const MAX_ITER: usize = 1000;
    const TOL: f64 = 1e-10;
    let p = a.nrows();
    if p == 0 {
        return 0.0;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut v: Array1<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..MAX_ITER {
        let w = a.dot(&v);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let converged = (wn - estimate).abs() <= TOL * wn;
        estimate = wn;
        v = w / wn;
        if converged {
            break;
        }
    }
    estimate
}
