use ndarray::Array2;

use crate::linalg::dot;
use crate::model::{
    gradient_from_product, omega_times_s, penalty_value, residual_from_gradient, ConcentrationMatrix, CovarianceMatrix,
    PenaltyMatrix,
};
use crate::prox::soft_threshold_scalar;
use crate::{Error, Exec, Result};

use super::{Problem, SolverConfig, SolverResult, Tracker, Variant};

/// Exact minimizer of `F` over the pair `ω_ij = ω_ji` with all other entries
/// fixed.
///
/// With `b = Σ_{l≠j} ω_il s_jl + Σ_{l≠i} ω_lj s_il` the restriction is
/// `½(s_ii + s_jj)x² + bx + 2Λ_ij|x|`, minimized at
/// `S_{2Λ_ij}(−b) / (s_ii + s_jj)`.
pub fn coordinate_update_offdiag(
    omega: &ConcentrationMatrix,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    i: usize,
    j: usize,
) -> Result<f64> {
    let p = check(omega, s)?;
    penalty.check_dim(p)?;
    if i >= j || j >= p {
        return Err(Error::InvalidInput(format!(
            "need i < j < p, got ({i}, {j}) with p = {p}"
        )));
    }
    let a = s.get(i, i) + s.get(j, j);
    if !(a > 0.0) {
        return Err(Error::NonPositiveDiagonal { index: i, value: a });
    }
    let b: f64 = (0..p)
        .map(|l| {
            let mut t = 0.0;
            if l != j {
                t += omega.get(i, l) * s.get(j, l);
            }
            if l != i {
                t += omega.get(l, j) * s.get(i, l);
            }
            t
        })
        .sum();
    Ok(offdiag_minimizer(b, a, penalty.get(i, j)))
}

/// Exact minimizer of `F` over `ω_ii`:
/// `(−b + √(b² + 4s_ii)) / (2s_ii)` with `b = Σ_{j≠i} ω_ij s_ij`.
pub fn coordinate_update_diag(omega: &ConcentrationMatrix, s: &CovarianceMatrix, i: usize) -> Result<f64> {
    let p = check(omega, s)?;
    if i >= p {
        return Err(Error::InvalidInput(format!("index {i} out of range for p = {p}")));
    }
    let sii = s.get(i, i);
    if !(sii > 0.0) {
        return Err(Error::NonPositiveDiagonal { index: i, value: sii });
    }
    let b: f64 = (0..p).filter(|&j| j != i).map(|j| omega.get(i, j) * s.get(i, j)).sum();
    Ok(diag_minimizer(b, sii))
}

fn check(omega: &ConcentrationMatrix, s: &CovarianceMatrix) -> Result<usize> {
    if omega.p() != s.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: omega.p(),
        });
    }
    Ok(s.p())
}

#[inline]
fn offdiag_minimizer(b: f64, a: f64, lambda: f64) -> f64 {
    soft_threshold_scalar(-b, 2.0 * lambda) / a
}

#[inline]
fn diag_minimizer(b: f64, sii: f64) -> f64 {
    // the two forms are algebraically equal; pick the one without cancellation
    let root = (b * b + 4.0 * sii).sqrt();
    if b <= 0.0 {
        (root - b) / (2.0 * sii)
    } else {
        2.0 / (root + b)
    }
}

/// Cached products that make each coordinate update cheap.
enum State<'a> {
    /// `m = ΩS`, row `c` holds `(S ω_c)ᵀ`. `O(1)` per pair, `O(p)` per change.
    Covariance { s: &'a CovarianceMatrix, m: Array2<f64> },
    /// Residual columns `r_c = Y ω_c`, stored as rows of a `p × n` array.
    /// `O(n)` per pair.
    Data {
        y: &'a Array2<f64>,
        r: Array2<f64>,
        inv_n: f64,
    },
}

impl State<'_> {
    /// `(SΩ)_{ij}`.
    #[inline]
    fn s_omega(&self, i: usize, j: usize) -> f64 {
        match self {
            State::Covariance { m, .. } => m[[j, i]],
            State::Data { y, r, inv_n } => {
                let n = y.ncols();
                let ys = y.as_slice().unwrap();
                let rs = r.as_slice().unwrap();
                dot(&ys[i * n..(i + 1) * n], &rs[j * n..(j + 1) * n]) * inv_n
            }
        }
    }

    /// Adds `delta` to column `col` of `Ω` at row `row`.
    #[inline]
    fn shift(&mut self, row: usize, col: usize, delta: f64) {
        match self {
            State::Covariance { s, m } => {
                for (o, sv) in m.row_mut(col).iter_mut().zip(s.row(row)) {
                    *o += delta * sv;
                }
            }
            State::Data { y, r, .. } => {
                for (o, yv) in r.row_mut(col).iter_mut().zip(y.row(row)) {
                    *o += delta * yv;
                }
            }
        }
    }

    /// Rebuilds the cache from `omega` and returns `(ΩS, h1(Ω))`.
    fn refresh(&mut self, omega: &ConcentrationMatrix, exec: Exec) -> (Array2<f64>, f64) {
        let log_det: f64 = omega.diagonal().iter().map(|d| d.ln()).sum();
        match self {
            State::Covariance { s, m } => {
                *m = omega_times_s(omega, s, exec);
                let trace: f64 = (0..omega.p()).map(|c| m[[c, c]] * omega.diagonal()[c]).sum::<f64>()
                    + omega
                        .offdiag()
                        .iter()
                        .map(|e| e.value * (m[[e.col, e.row]] + m[[e.row, e.col]]))
                        .sum::<f64>();
                (m.clone(), -log_det + 0.5 * trace)
            }
            State::Data { y, r, inv_n } => {
                let (p, n) = y.dim();
                let cols = omega.columns();
                let ys = y.as_slice().unwrap();
                exec.for_each_row(r.as_slice_mut().unwrap(), n, |c, out| {
                    out.fill(0.0);
                    for &(l, v) in &cols[c] {
                        for (o, yv) in out.iter_mut().zip(&ys[l * n..(l + 1) * n]) {
                            *o += v * yv;
                        }
                    }
                });
                let rs = r.as_slice().unwrap();
                let scale = *inv_n;
                let mut product = Array2::<f64>::zeros((p, p));
                exec.for_each_row(product.as_slice_mut().unwrap(), p, |c, out| {
                    let rc = &rs[c * n..(c + 1) * n];
                    for (l, o) in out.iter_mut().enumerate() {
                        *o = dot(&ys[l * n..(l + 1) * n], rc) * scale;
                    }
                });
                let trace = exec.sum(p, |c| {
                    let rc = &rs[c * n..(c + 1) * n];
                    dot(rc, rc)
                }) * scale;
                (product, -log_det + 0.5 * trace)
            }
        }
    }
}

/// Cyclic coordinate-wise descent. One iteration is a sweep over all pairs
/// `i < j` in row-major order followed by all diagonals.
///
/// When the problem carries data, updates are computed from residuals of the
/// data (`O(np²)` per sweep) instead of from `S`.
pub fn solve_coordinatewise(problem: &Problem, penalty: &PenaltyMatrix, config: &SolverConfig) -> Result<SolverResult> {
    if config.variant != Variant::Concord {
        return Err(Error::InvalidInput(format!(
            "{} is not the coordinate-wise variant",
            config.variant
        )));
    }
    config.validate()?;
    let p = problem.p();
    penalty.check_dim(p)?;
    let exec = config.exec;
    let initial = problem.initial_point(config)?;
    let s_diag = problem.covariance_diagonal();

    let covariance;
    let mut state = match problem.data_rows() {
        Some(y) => State::Data {
            y,
            r: Array2::zeros(y.dim()),
            inv_n: 1.0 / y.ncols() as f64,
        },
        None => {
            covariance = problem.covariance(exec);
            State::Covariance {
                s: &covariance,
                m: Array2::zeros((p, p)),
            }
        }
    };

    let mut omega = initial.clone();
    let (product, smooth) = state.refresh(&omega, exec);
    let mut value = smooth + penalty_value(&omega, penalty);
    let mut residual = residual_from_gradient(&omega, &gradient_from_product(&omega, &product), penalty);
    let mut tracker = Tracker::new(config, value);
    let mut w = omega.to_dense();
    let mut converged = false;

    for _ in 0..config.max_iter {
        for i in 0..p {
            for j in (i + 1)..p {
                let x = w[[i, j]];
                let a = s_diag[i] + s_diag[j];
                let b = state.s_omega(i, j) + state.s_omega(j, i) - a * x;
                let next = offdiag_minimizer(b, a, penalty.get(i, j));
                let delta = next - x;
                if delta != 0.0 {
                    w[[i, j]] = next;
                    w[[j, i]] = next;
                    state.shift(i, j, delta);
                    state.shift(j, i, delta);
                }
            }
        }
        for i in 0..p {
            let x = w[[i, i]];
            let b = state.s_omega(i, i) - s_diag[i] * x;
            let next = diag_minimizer(b, s_diag[i]);
            let delta = next - x;
            if delta != 0.0 {
                w[[i, i]] = next;
                state.shift(i, i, delta);
            }
        }

        omega = ConcentrationMatrix::from_dense(&w);
        let (product, smooth) = state.refresh(&omega, exec);
        value = smooth + penalty_value(&omega, penalty);
        residual = residual_from_gradient(&omega, &gradient_from_product(&omega, &product), penalty);
        if tracker.record(&omega, value, residual, 1.0, 0) {
            converged = true;
            break;
        }
    }
    Ok(tracker.finish(config.variant, initial, omega, converged, value, residual))
}
