//! Element-wise soft-thresholding and the proximal gradient step.

use ndarray::Array2;

use crate::model::{ConcentrationMatrix, OffDiagonal, PenaltyMatrix};
use crate::{Error, Result};

/// `sign(x)·max(|x| − t, 0)`.
#[inline]
pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Applies `S_T` to the upper triangle of a symmetric `x`. The diagonal of
/// `T` is zero, so diagonal entries pass through unchanged.
pub fn soft_threshold(x: &Array2<f64>, thresholds: &PenaltyMatrix) -> Result<ConcentrationMatrix> {
    let p = x.nrows();
    if x.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.ncols(),
        });
    }
    thresholds.check_dim(p)?;
    Ok(threshold_upper(p, 1.0, thresholds, |i, j| x[[i, j]]))
}

/// `S_{τΛ}(Ω − τG)`.
///
/// The output diagonal may be nonpositive; callers reject such candidates
/// through the `+∞` branch of the smooth value.
pub fn prox_step(
    omega: &ConcentrationMatrix,
    grad: &Array2<f64>,
    tau: f64,
    penalty: &PenaltyMatrix,
) -> Result<ConcentrationMatrix> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositiveStep(tau));
    }
    let p = omega.p();
    if grad.dim() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: grad.nrows(),
        });
    }
    penalty.check_dim(p)?;
    Ok(prox_step_unchecked(omega, grad, tau, penalty))
}

pub(crate) fn prox_step_unchecked(
    omega: &ConcentrationMatrix,
    grad: &Array2<f64>,
    tau: f64,
    penalty: &PenaltyMatrix,
) -> ConcentrationMatrix {
    let p = omega.p();
    let diag = omega.diagonal();
    let mut entries = omega.offdiag().iter().peekable();
    // walk the sparse upper triangle in lockstep with the dense sweep
    let mut current = |i: usize, j: usize| -> f64 {
        match entries.peek() {
            Some(e) if e.row == i && e.col == j => {
                let v = e.value;
                entries.next();
                v
            }
            _ => 0.0,
        }
    };
    let new_diag = (0..p).map(|i| diag[i] - tau * grad[[i, i]]).collect();
    let mut out = Vec::new();
    for i in 0..p {
        let g = grad.row(i);
        for j in (i + 1)..p {
            let x = current(i, j) - tau * g[j];
            let v = soft_threshold_scalar(x, tau * penalty.get(i, j));
            if v != 0.0 {
                out.push(OffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    ConcentrationMatrix::from_sorted(new_diag, out)
}

fn threshold_upper(
    p: usize,
    scale: f64,
    thresholds: &PenaltyMatrix,
    x: impl Fn(usize, usize) -> f64,
) -> ConcentrationMatrix {
    let diag = (0..p).map(|i| x(i, i)).collect();
    let mut out = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = soft_threshold_scalar(x(i, j), scale * thresholds.get(i, j));
            if v != 0.0 {
                out.push(OffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    ConcentrationMatrix::from_sorted(diag, out)
}
