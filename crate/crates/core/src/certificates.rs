//! Optimality certificates and the constants behind the convergence theory.

use ndarray::Array2;
use serde::Serialize;

use crate::linalg::{dot, PivotedCholesky};
use crate::model::{
    for_each_upper, objective, smooth_gradient, ConcentrationMatrix, CovarianceMatrix, DataMatrix, PenaltyMatrix,
};
use crate::{Error, Result};

/// Bisection tolerance for the diagonal upper bound.
const ROOT_TOLERANCE: f64 = 1e-10;

/// Entries of the factor `U` below this fraction of its largest entry are
/// treated as zero.
const FACTOR_ZERO: f64 = 1e-12;

/// Diagonal bounds valid on the level set `{Ω : F(Ω) ≤ M}`.
///
/// `a` is stored together with its logarithm: for moderate `p` the lower
/// bound underflows and `lipschitz` becomes infinite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSetBounds {
    pub m: f64,
    pub a: f64,
    pub log_a: f64,
    pub b: f64,
    /// `a⁻² + ‖S‖₂`.
    pub lipschitz: f64,
}

impl LevelSetBounds {
    pub fn contains_diagonal(&self, min: f64, max: f64) -> bool {
        min >= self.a && max <= self.b
    }
}

/// Upper and lower bounds on every diagonal entry of any `Ω` with
/// `F(Ω) ≤ m` under a uniform off-diagonal penalty `lambda`.
///
/// With `S = 2UᵀU`, column `i`, and a row `k` with `u_ki ≠ 0`, put
/// `ū = max_{j≠i} |u_kj|`, `λ̄ = λ/(2ū)` and `M̄ = M + λ̄² − p·ln|u_ki|`.
/// The largest diagonal entry `ω_ii` then satisfies `z = |u_ki|ω_ii ≤ z̄`
/// where `z̄` is the larger of the upper roots of
/// `−p·ln z + z² = M̄` and `−p·ln z + 2λ̄z = M̄`. The bound is maximized over
/// all `(k, i)`. When `ū = 0` only the first branch applies (with `λ̄ = 0`);
/// when `λ = 0` and `ū > 0` the second branch has no root and `b = ∞`.
pub fn level_set_bounds(s: &CovarianceMatrix, lambda: f64, m: f64) -> Result<LevelSetBounds> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "penalty must be finite and nonnegative, got {lambda}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput(format!("level value must be finite, got {m}")));
    }
    s.require_positive_diagonal()?;
    let p = s.p();
    let pf = p as f64;
    // S = FᵀF = 2UᵀU
    let u = PivotedCholesky::new(s.values())?.factor() / std::f64::consts::SQRT_2;
    let umax = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut b = 0.0f64;
    for k in 0..u.nrows() {
        let row = u.row(k);
        for i in 0..p {
            let uki = row[i].abs();
            if uki <= FACTOR_ZERO * umax {
                continue;
            }
            let ubar = (0..p)
                .filter(|&j| j != i)
                .map(|j| row[j].abs())
                .filter(|&v| v > FACTOR_ZERO * umax)
                .fold(0.0f64, f64::max);
            let z = if ubar == 0.0 {
                upper_root(|z| -pf * z.ln() + z * z, (pf / 2.0).sqrt(), m - pf * uki.ln())
            } else if lambda == 0.0 {
                Some(f64::INFINITY)
            } else {
                let lbar = lambda / (2.0 * ubar);
                let mbar = m + lbar * lbar - pf * uki.ln();
                let quad = upper_root(|z| -pf * z.ln() + z * z, (pf / 2.0).sqrt(), mbar);
                let lin = upper_root(|z| -pf * z.ln() + 2.0 * lbar * z, pf / (2.0 * lbar), mbar);
                match (quad, lin) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            };
            if let Some(z) = z {
                b = b.max(z / uki);
            }
        }
    }
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("level set F ≤ {m} is empty")));
    }

    let log_a = -m - (pf - 1.0) * b.ln();
    let a = log_a.exp();
    let lipschitz = (-2.0 * log_a).exp() + s.spectral_norm();
    Ok(LevelSetBounds {
        m,
        a,
        log_a,
        b,
        lipschitz,
    })
}

/// Bounds for the level set through `start`.
pub fn level_set_bounds_at(
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    start: &ConcentrationMatrix,
) -> Result<LevelSetBounds> {
    let m = objective(start, s, penalty)?;
    level_set_bounds(s, penalty.min_offdiag(), m)
}

/// Largest `z ≥ zmin` with `f(z) = level` for `f` increasing on
/// `[zmin, ∞)`; `None` if `f(zmin) > level`.
fn upper_root(f: impl Fn(f64) -> f64, zmin: f64, level: f64) -> Option<f64> {
    if f(zmin) > level {
        return None;
    }
    let mut lo = zmin;
    let mut hi = zmin.max(1.0) * 2.0;
    while f(hi) <= level {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Some(f64::INFINITY);
        }
    }
    while hi - lo > ROOT_TOLERANCE * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// `αL‖Ω⁰ − Ω*‖²_F / (2k)`.
pub fn ista_envelope(alpha: f64, lipschitz: f64, dist_sq: f64, k: usize) -> f64 {
    alpha * lipschitz * dist_sq / (2.0 * k as f64)
}

/// `2αL‖Ω⁰ − Ω*‖²_F / (k + 1)²`.
pub fn fista_envelope(alpha: f64, lipschitz: f64, dist_sq: f64, k: usize) -> f64 {
    let k1 = (k + 1) as f64;
    2.0 * alpha * lipschitz * dist_sq / (k1 * k1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktReport {
    /// `max_i |G_ii|`.
    pub diagonal: f64,
    /// `max |G_ij + Λ_ij sign(ω_ij)|` over nonzero off-diagonals.
    pub nonzero: f64,
    /// `max (|G_ij| − Λ_ij)₊` over zero off-diagonals.
    pub zero_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Entrywise first-order optimality conditions at `omega`.
pub fn kkt_check(
    omega: &ConcentrationMatrix,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    tol: f64,
) -> Result<KktReport> {
    penalty.check_dim(s.p())?;
    let g = smooth_gradient(omega, s)?;
    let diagonal = (0..s.p()).map(|i| g[[i, i]].abs()).fold(0.0, f64::max);
    let mut nonzero = 0.0f64;
    let mut zero_excess = 0.0f64;
    for_each_upper(omega, |i, j, w| {
        let lambda = penalty.get(i, j);
        for gij in [g[[i, j]], g[[j, i]]] {
            if w != 0.0 {
                nonzero = nonzero.max((gij + lambda * w.signum()).abs());
            } else {
                zero_excess = zero_excess.max(gij.abs() - lambda);
            }
        }
    });
    Ok(KktReport {
        diagonal,
        nonzero,
        zero_excess,
        tolerance: tol,
        pass: diagonal <= tol && nonzero <= tol && zero_excess <= tol,
    })
}

/// Dual-feasibility excess computed from the data without forming `S`.
///
/// With residual columns `z_i = Y ω_i`, the vector-form constraint reads
/// `|Y_jᵀz_i + Y_iᵀz_j| ≤ 2nΛ_ij`; dividing by `n` gives
/// `|(SΩ)_ij + (SΩ)_ji| = 2|G_ij|` against `2Λ_ij`. The result is the largest
/// `(|Y_jᵀz_i + Y_iᵀz_j|/n − 2Λ_ij)₊` over off-diagonal pairs where `ω_ij = 0`,
/// which equals twice the zero-entry excess of [`kkt_check`] when `S` is the
/// sample covariance of `y`. `y` is used as given; center it first if `S`
/// was centered.
pub fn dual_feasibility_from_data(y: &DataMatrix, omega: &ConcentrationMatrix, penalty: &PenaltyMatrix) -> Result<f64> {
    let p = y.p();
    if omega.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: omega.p(),
        });
    }
    penalty.check_dim(p)?;
    let n = y.n();
    let cols = y.columns_as_rows();
    let yc = cols.as_slice().expect("standard layout");
    let mut z = Array2::<f64>::zeros((p, n));
    for (c, col) in omega.columns().iter().enumerate() {
        let mut zc = z.row_mut(c);
        for &(l, v) in col {
            for (o, yv) in zc.iter_mut().zip(&yc[l * n..(l + 1) * n]) {
                *o += v * yv;
            }
        }
    }
    let zs = z.as_slice().expect("standard layout");
    let span = |i: usize| i * n..(i + 1) * n;
    let mut excess = 0.0f64;
    for_each_upper(omega, |i, j, w| {
        if w != 0.0 {
            return;
        }
        let t = dot(&yc[span(j)], &zs[span(i)]) + dot(&yc[span(i)], &zs[span(j)]);
        excess = excess.max(t.abs() / n as f64 - 2.0 * penalty.get(i, j));
    });
    Ok(excess)
}

/// Smallest uniform penalty at which `diag(1/√s_ii)` is optimal:
/// `max_{i<j} ½|s_ij|(1/√s_ii + 1/√s_jj)`.
pub fn lambda_max(s: &CovarianceMatrix) -> Result<f64> {
    s.require_positive_diagonal()?;
    let inv: Vec<f64> = s.diagonal().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = 0.0f64;
    for i in 0..s.p() {
        for j in (i + 1)..s.p() {
            out = out.max(0.5 * s.get(i, j).abs() * (inv[i] + inv[j]));
        }
    }
    Ok(out)
}
