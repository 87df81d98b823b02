use ndarray::Array2;

use crate::model::{
    objective_with, residual_from_gradient, smooth_gradient_with, ConcentrationMatrix, CovarianceMatrix, PenaltyMatrix,
};
use crate::prox::soft_threshold_scalar;
use crate::{Error, Exec, Result};

use super::line_search::{smooth_excess, MAX_BACKTRACKS};
use super::{Problem, SolverConfig, SolverResult, Tracker, Variant};

/// Largest coordinate change accepted as converged in the Newton subproblem.
/// Inside the solver the tolerance shrinks further with the outer residual.
pub const INNER_TOLERANCE: f64 = 1e-8;

/// Inner tolerance relative to the absolute subgradient residual `‖R‖_F`.
const FORCING: f64 = 1e-2;
const INNER_FLOOR: f64 = 1e-15;

/// Sweep budget of the subproblem is `10p²`, but never below this.
pub const MIN_SWEEPS: usize = 1000;

/// Proximal Newton direction: the minimizer over symmetric `W` of
///
/// ```text
/// ⟨G, W⟩ + ½ Σ_i w_ii²/ω_ii² + ½ tr(WSW) + Σ_{i≠j} Λ_ij |ω_ij + w_ij|
/// ```
///
/// found by cyclic coordinate descent, first over the entries that are
/// nonzero in `Ω` or violate the zero-subgradient condition, then verified
/// with a sweep over all entries.
pub fn pnopt_direction(
    omega: &ConcentrationMatrix,
    grad: &Array2<f64>,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
) -> Result<ConcentrationMatrix> {
    let p = s.p();
    if omega.p() != p || grad.dim() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: omega.p(),
        });
    }
    penalty.check_dim(p)?;
    if let Some((index, value)) = omega.first_nonpositive_diagonal() {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    direction(omega, grad, s, penalty, INNER_TOLERANCE)
}

fn direction(
    omega: &ConcentrationMatrix,
    grad: &Array2<f64>,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    tol: f64,
) -> Result<ConcentrationMatrix> {
    let p = s.p();
    let om = omega.to_dense();
    let curv: Vec<f64> = omega.diagonal().iter().map(|w| 1.0 / (w * w)).collect();
    let mut w = Array2::<f64>::zeros((p, p));
    // row c holds (S w_c)ᵀ, so (SW)_ij = vt[j, i]
    let mut vt = Array2::<f64>::zeros((p, p));

    let mut in_active = vec![false; p * p];
    let mut active = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let g = 0.5 * (grad[[i, j]] + grad[[j, i]]);
            if om[[i, j]] != 0.0 || g.abs() > penalty.get(i, j) {
                in_active[i * p + j] = true;
                active.push((i, j));
            }
        }
    }

    let shift = |vt: &mut Array2<f64>, row: usize, col: usize, delta: f64| {
        for (o, sv) in vt.row_mut(col).iter_mut().zip(s.row(row)) {
            *o += delta * sv;
        }
    };

    let cap = (10 * p * p).max(MIN_SWEEPS);
    let mut full = false;
    for _ in 0..cap {
        let mut max_delta: f64 = 0.0;
        let mut newly = Vec::new();
        let visit = |i: usize, j: usize, w: &mut Array2<f64>, vt: &mut Array2<f64>| -> f64 {
            let a = s.get(i, i) + s.get(j, j);
            if !(a > 0.0) {
                return 0.0;
            }
            let x = w[[i, j]];
            let g = grad[[i, j]] + grad[[j, i]] + vt[[j, i]] + vt[[i, j]];
            let u = soft_threshold_scalar(om[[i, j]] + x - g / a, 2.0 * penalty.get(i, j) / a);
            let next = u - om[[i, j]];
            let delta = next - x;
            if delta != 0.0 {
                w[[i, j]] = next;
                w[[j, i]] = next;
                shift(vt, i, j, delta);
                shift(vt, j, i, delta);
            }
            delta.abs()
        };
        if full {
            for i in 0..p {
                for j in (i + 1)..p {
                    let d = visit(i, j, &mut w, &mut vt);
                    if d > 0.0 && !in_active[i * p + j] {
                        newly.push((i, j));
                    }
                    max_delta = max_delta.max(d);
                }
            }
        } else {
            for &(i, j) in &active {
                max_delta = max_delta.max(visit(i, j, &mut w, &mut vt));
            }
        }
        for i in 0..p {
            let x = w[[i, i]];
            let delta = -(grad[[i, i]] + curv[i] * x + vt[[i, i]]) / (curv[i] + s.get(i, i));
            if delta != 0.0 {
                w[[i, i]] = x + delta;
                shift(&mut vt, i, i, delta);
            }
            max_delta = max_delta.max(delta.abs());
        }
        for (i, j) in newly {
            in_active[i * p + j] = true;
            active.push((i, j));
        }

        if max_delta <= tol {
            if full {
                return Ok(ConcentrationMatrix::from_dense(&w));
            }
            full = true;
        } else {
            full = false;
        }
    }
    Err(Error::InnerSolverCap { sweeps: cap })
}

/// Proximal Newton with Armijo backtracking on the full objective.
pub fn solve_pnopt(problem: &Problem, penalty: &PenaltyMatrix, config: &SolverConfig) -> Result<SolverResult> {
    if config.variant != Variant::Pnopt {
        return Err(Error::InvalidInput(format!(
            "{} is not the proximal Newton variant",
            config.variant
        )));
    }
    config.validate()?;
    penalty.check_dim(problem.p())?;
    let exec = config.exec;
    let initial = problem.initial_point(config)?;
    let s = problem.covariance(exec);

    let mut omega = initial.clone();
    let mut grad = smooth_gradient_with(&omega, &s, exec)?;
    let mut value = objective_with(&omega, &s, penalty, exec)?;
    let mut residual = residual_from_gradient(&omega, &grad, penalty);
    let mut tracker = Tracker::new(config, value);
    let mut converged = false;

    for k in 1..=config.max_iter {
        let tol = (FORCING * residual * omega.frobenius_norm()).clamp(INNER_FLOOR, INNER_TOLERANCE);
        let dir = direction(&omega, &grad, &s, penalty, tol)?;
        let om = omega.to_dense();
        let predicted = first_order_change(&om, &dir.to_dense(), &grad, penalty);
        if dir.frobenius_sq() == 0.0 || !(predicted < 0.0) {
            // no descent left at working precision
            converged = tracker.record(&omega, value, residual, 0.0, 0);
            break;
        }
        let (t, backtracks, next) = armijo(&omega, &om, &dir, &grad, &s, penalty, predicted, config, exec, k)?;
        omega = next;
        grad = smooth_gradient_with(&omega, &s, exec)?;
        value = objective_with(&omega, &s, penalty, exec)?;
        residual = residual_from_gradient(&omega, &grad, penalty);
        if tracker.record(&omega, value, residual, t, backtracks) {
            converged = true;
            break;
        }
    }
    Ok(tracker.finish(config.variant, initial, omega, converged, value, residual))
}

/// `⟨G, E⟩ + Σ_{i≠j} Λ_ij(|ω_ij + e_ij| − |ω_ij|)`, summed entrywise.
///
/// Where an entry keeps its sign the penalty change is exactly
/// `Λ sign(ω) e`, so the term is formed as `e (G + Λ sign ω)` without
/// cancellation between the two large sums.
fn first_order_change(om: &Array2<f64>, e: &Array2<f64>, grad: &Array2<f64>, penalty: &PenaltyMatrix) -> f64 {
    let p = om.nrows();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            let (w, d, g) = (om[[i, j]], e[[i, j]], grad[[i, j]]);
            if d == 0.0 {
                continue;
            }
            total += if i == j {
                g * d
            } else {
                let lambda = penalty.get(i, j);
                let next = w + d;
                if w != 0.0 && next.signum() == w.signum() && next != 0.0 {
                    d * (g + lambda * w.signum())
                } else {
                    g * d + lambda * (next.abs() - w.abs())
                }
            };
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn armijo(
    omega: &ConcentrationMatrix,
    om: &Array2<f64>,
    dir: &ConcentrationMatrix,
    grad: &Array2<f64>,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    predicted: f64,
    config: &SolverConfig,
    exec: Exec,
    iteration: usize,
) -> Result<(f64, usize, ConcentrationMatrix)> {
    let mut t = 1.0;
    for j in 0..=MAX_BACKTRACKS {
        let candidate = omega.combine(1.0, dir, t);
        if candidate.has_positive_diagonal() {
            // the step actually taken, after rounding of the candidate
            let step = candidate.sub(omega);
            let change = first_order_change(om, &step.to_dense(), grad, penalty) + smooth_excess(omega, &step, s, exec);
            if change <= config.armijo_alpha * t * predicted {
                return Ok((t, j, candidate));
            }
        }
        if j < MAX_BACKTRACKS {
            t *= config.c;
        }
    }
    Err(Error::StepUnderflow {
        iteration,
        backtracks: MAX_BACKTRACKS,
        last_step: t,
        objective: objective_with(omega, s, penalty, exec).unwrap_or(f64::NAN),
    })
}
