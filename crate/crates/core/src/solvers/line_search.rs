use ndarray::Array2;

use crate::model::{sparse_trace_quadratic, ConcentrationMatrix, CovarianceMatrix, PenaltyMatrix};
use crate::prox::prox_step_unchecked;
use crate::{Error, Exec, Result};

/// Largest `j` tried in `τ = cʲ·τ_init` before giving up.
pub const MAX_BACKTRACKS: usize = 60;

/// Upper clamp for Barzilai-Borwein steps.
pub const BB_STEP_CAP: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub tau: f64,
    pub candidate: ConcentrationMatrix,
    pub backtracks: usize,
}

/// Backtracks from `tau_init` until the proximal candidate satisfies the
/// sufficient-descent condition
///
/// ```text
/// h1(Ω⁺) ≤ h1(Θ) + ⟨Ω⁺ − Θ, G⟩ + ‖Ω⁺ − Θ‖²_F / (2τ)
/// ```
///
/// `grad` must be the gradient of the smooth part at `theta`.
pub fn line_search(
    theta: &ConcentrationMatrix,
    grad: &Array2<f64>,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    tau_init: f64,
    c: f64,
) -> Result<LineSearchOutcome> {
    let p = s.p();
    if theta.p() != p || grad.dim() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: theta.p(),
        });
    }
    penalty.check_dim(p)?;
    if let Some((index, value)) = theta.first_nonpositive_diagonal() {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    if !(tau_init > 0.0) || !tau_init.is_finite() {
        return Err(Error::NonPositiveStep(tau_init));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidInput(format!(
            "backtracking factor must lie in (0, 1), got {c}"
        )));
    }
    search(theta, grad, s, penalty, tau_init, c, Exec::default(), 0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn search(
    theta: &ConcentrationMatrix,
    grad: &Array2<f64>,
    s: &CovarianceMatrix,
    penalty: &PenaltyMatrix,
    tau_init: f64,
    c: f64,
    exec: Exec,
    iteration: usize,
) -> Result<LineSearchOutcome> {
    let mut tau = tau_init;
    for j in 0..=MAX_BACKTRACKS {
        let candidate = prox_step_unchecked(theta, grad, tau, penalty);
        let d = candidate.sub(theta);
        let excess = smooth_excess(theta, &d, s, exec);
        if excess <= d.frobenius_sq() / (2.0 * tau) {
            return Ok(LineSearchOutcome {
                tau,
                candidate,
                backtracks: j,
            });
        }
        if j < MAX_BACKTRACKS {
            tau *= c;
        }
    }
    Err(Error::StepUnderflow {
        iteration,
        backtracks: MAX_BACKTRACKS,
        last_step: tau,
        objective: crate::model::smooth_value_with(theta, s, exec).unwrap_or(f64::NAN),
    })
}

/// `x − ln(1 + x)` without cancellation near zero.
pub(crate) fn log_barrier_excess(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // x²/2 − x³/3 + x⁴/4 − x⁵/5
        x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * 0.2)))
    } else {
        x - x.ln_1p()
    }
}

/// `h1(Θ + D) − h1(Θ) − ⟨∇h1(Θ), D⟩`, evaluated term by term so that small
/// steps do not lose the comparison to rounding. `+∞` if `Θ + D` leaves the
/// domain.
pub(crate) fn smooth_excess(
    theta: &ConcentrationMatrix,
    d: &ConcentrationMatrix,
    s: &CovarianceMatrix,
    exec: Exec,
) -> f64 {
    let mut log_part = 0.0;
    for (&t, &di) in theta.diagonal().iter().zip(d.diagonal()) {
        let x = di / t;
        if !(1.0 + x > 0.0) {
            return f64::INFINITY;
        }
        log_part += log_barrier_excess(x);
    }
    log_part + 0.5 * sparse_trace_quadratic(&d.columns(), s, exec)
}

/// `‖ΔΩ‖²_F / ⟨ΔΩ, ΔG⟩`, falling back to `fallback` when the curvature
/// estimate is not positive and finite, clamped to `(0, BB_STEP_CAP]`.
pub fn bb_initial_step(d_omega: &Array2<f64>, d_grad: &Array2<f64>, fallback: f64) -> f64 {
    let ss: f64 = d_omega.iter().map(|v| v * v).sum();
    let sy: f64 = d_omega.iter().zip(d_grad).map(|(a, b)| a * b).sum();
    bb_from_products(ss, sy, fallback)
}

pub(crate) fn bb_from_products(ss: f64, sy: f64, fallback: f64) -> f64 {
    let tau = ss / sy;
    if sy > 0.0 && ss > 0.0 && tau.is_finite() && tau > 0.0 {
        tau.min(BB_STEP_CAP)
    } else {
        fallback.min(BB_STEP_CAP)
    }
}
