//! Problem representation and the smooth/non-smooth parts of the objective.
//!
//! The objective is kept in per-sample form
//! `F(Ω) = h1(Ω) + h2(Ω)` with
//! `h1(Ω) = -Σ log ω_ii + ½ tr(ΩSΩ)` and `h2(Ω) = Σ_{i≠j} Λ_ij |ω_ij|`
//! (each unordered pair counted twice).

mod concentration;
mod data;
mod penalty;

use ndarray::Array2;

pub(crate) use concentration::Columns;
pub use concentration::{ConcentrationMatrix, OffDiagonal};
pub(crate) use data::gram_of_rows;
pub use data::{sample_covariance, sample_covariance_with, CovarianceMatrix, DataMatrix};
pub use penalty::PenaltyMatrix;

use crate::{Error, Exec, Result};

fn check_dims(omega: &ConcentrationMatrix, s: &CovarianceMatrix) -> Result<()> {
    if omega.p() != s.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: omega.p(),
        });
    }
    Ok(())
}

fn require_positive_diagonal(omega: &ConcentrationMatrix) -> Result<()> {
    match omega.first_nonpositive_diagonal() {
        Some((index, value)) => Err(Error::NonPositiveDiagonal { index, value }),
        None => Ok(()),
    }
}

/// `tr(D S D) = Σ_c d_cᵀ S d_c` over the sparse columns of a symmetric `D`.
pub(crate) fn sparse_trace_quadratic(cols: &Columns, s: &CovarianceMatrix, exec: Exec) -> f64 {
    exec.sum(cols.len(), |c| {
        let col = &cols[c];
        let mut acc = 0.0;
        for &(r, v) in col {
            let srow = s.row(r);
            let inner: f64 = col.iter().map(|&(r2, v2)| srow[r2] * v2).sum();
            acc += v * inner;
        }
        acc
    })
}

/// `h1(Ω) = -Σ log ω_ii + ½ tr(ΩSΩ)`; `+∞` when any `ω_ii ≤ 0`.
pub fn smooth_value(omega: &ConcentrationMatrix, s: &CovarianceMatrix) -> Result<f64> {
    smooth_value_with(omega, s, Exec::default())
}

pub fn smooth_value_with(omega: &ConcentrationMatrix, s: &CovarianceMatrix, exec: Exec) -> Result<f64> {
    check_dims(omega, s)?;
    if !omega.has_positive_diagonal() {
        return Ok(f64::INFINITY);
    }
    let log_det: f64 = omega.diagonal().iter().map(|d| d.ln()).sum();
    let trace = sparse_trace_quadratic(&omega.columns(), s, exec);
    Ok(-log_det + 0.5 * trace)
}

/// `h2(Ω) = Σ_{i≠j} Λ_ij |ω_ij|`.
pub fn penalty_value(omega: &ConcentrationMatrix, penalty: &PenaltyMatrix) -> f64 {
    2.0 * omega
        .offdiag()
        .iter()
        .map(|e| penalty.get(e.row, e.col) * e.value.abs())
        .sum::<f64>()
}

/// `F(Ω) = h1(Ω) + h2(Ω)`.
pub fn objective(omega: &ConcentrationMatrix, s: &CovarianceMatrix, penalty: &PenaltyMatrix) -> Result<f64> {
    objective_with(omega, s, penalty, Exec::default())
}

pub fn objective_with(
    omega: &ConcentrationMatrix,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    exec: Exec,
) -> Result<f64> {
    penalty.check_dim(s.p())?;
    let h1 = smooth_value_with(omega, s, exec)?;
    Ok(h1 + penalty_value(omega, penalty))
}

/// Dense `ΩS`, one row per sparse column of `Ω`.
pub(crate) fn omega_times_s(omega: &ConcentrationMatrix, s: &CovarianceMatrix, exec: Exec) -> Array2<f64> {
    let p = s.p();
    let cols = omega.columns();
    let mut out = Array2::<f64>::zeros((p, p));
    exec.for_each_row(out.as_slice_mut().unwrap(), p, |j, row| {
        for &(i, v) in &cols[j] {
            for (o, sv) in row.iter_mut().zip(s.row(i)) {
                *o += v * sv;
            }
        }
    });
    out
}

/// `G = -Ω_D⁻¹ + ½(SΩ + ΩS)` from a precomputed `ΩS`.
pub(crate) fn gradient_from_product(omega: &ConcentrationMatrix, omega_s: &Array2<f64>) -> Array2<f64> {
    let p = omega.p();
    let mut g = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            g[[i, j]] = 0.5 * (omega_s[[i, j]] + omega_s[[j, i]]);
        }
        g[[i, i]] -= 1.0 / omega.diagonal()[i];
    }
    g
}

/// Gradient of the smooth part, `G = -Ω_D⁻¹ + ½(SΩ + ΩS)`.
pub fn smooth_gradient(omega: &ConcentrationMatrix, s: &CovarianceMatrix) -> Result<Array2<f64>> {
    smooth_gradient_with(omega, s, Exec::default())
}

pub fn smooth_gradient_with(omega: &ConcentrationMatrix, s: &CovarianceMatrix, exec: Exec) -> Result<Array2<f64>> {
    check_dims(omega, s)?;
    require_positive_diagonal(omega)?;
    Ok(gradient_from_product(omega, &omega_times_s(omega, s, exec)))
}

/// `vec(W)ᵀ ∇²h1(Ω) vec(W) = Σ_i ω_ii⁻² w_ii² + tr(WSW)` for symmetric `W`.
pub fn hessian_quadratic_form(omega: &ConcentrationMatrix, s: &CovarianceMatrix, w: &Array2<f64>) -> Result<f64> {
    check_dims(omega, s)?;
    if w.dim() != (s.p(), s.p()) {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: w.nrows(),
        });
    }
    require_positive_diagonal(omega)?;
    let diag: f64 = omega
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, d)| w[[i, i]] * w[[i, i]] / (d * d))
        .sum();
    let sw = s.values().dot(w);
    let trace: f64 = (0..s.p())
        .map(|i| (0..s.p()).map(|j| w[[i, j]] * sw[[j, i]]).sum::<f64>())
        .sum();
    Ok(diag + trace)
}

/// Visits every `i < j` with the stored value of `ω_ij` (zero when absent).
pub(crate) fn for_each_upper(omega: &ConcentrationMatrix, mut f: impl FnMut(usize, usize, f64)) {
    let p = omega.p();
    let mut it = omega.offdiag().iter().peekable();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = match it.peek() {
                Some(e) if e.row == i && e.col == j => {
                    let v = e.value;
                    it.next();
                    v
                }
                _ => 0.0,
            };
            f(i, j, w);
        }
    }
}

/// Minimal-norm element of `∇h1(Ω) + ∂h2(Ω)`, entrywise.
#[inline]
pub(crate) fn residual_entry(g: f64, omega: f64, lambda: f64) -> f64 {
    if omega != 0.0 {
        g + lambda * omega.signum()
    } else {
        g.signum() * (g.abs() - lambda).max(0.0)
    }
}

/// `‖R‖_F / ‖Ω‖_F` for the minimal-norm subgradient `R`, given `G = ∇h1(Ω)`.
pub(crate) fn residual_from_gradient(omega: &ConcentrationMatrix, g: &Array2<f64>, penalty: &PenaltyMatrix) -> f64 {
    let mut sq: f64 = (0..omega.p()).map(|i| g[[i, i]] * g[[i, i]]).sum();
    for_each_upper(omega, |i, j, w| {
        let lambda = penalty.get(i, j);
        let a = residual_entry(g[[i, j]], w, lambda);
        let b = residual_entry(g[[j, i]], w, lambda);
        sq += a * a + b * b;
    });
    sq.sqrt() / omega.frobenius_norm()
}

/// Relative subgradient residual `Δ_subg = ‖∇h1(Ω) + ∂h2(Ω)‖_F / ‖Ω‖_F`
/// with the minimal-norm choice from `∂h2`.
pub fn subgradient_residual(omega: &ConcentrationMatrix, s: &CovarianceMatrix, penalty: &PenaltyMatrix) -> Result<f64> {
    penalty.check_dim(s.p())?;
    let g = smooth_gradient(omega, s)?;
    Ok(residual_from_gradient(omega, &g, penalty))
}
