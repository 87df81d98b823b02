use crate::model::{objective_with, residual_from_gradient, smooth_gradient_with, PenaltyMatrix};
use crate::{Error, Result};

use super::line_search::search;
use super::{Problem, SolverConfig, SolverResult, Tracker, Variant, DIAGONAL_FLOOR};

/// `α_{k+1} = (1 + √(1 + 4α_k²)) / 2`.
pub fn momentum_next(alpha: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt())
}

/// Accelerated proximal gradient. The gradient and line search use the
/// extrapolated point; termination is tested at the accepted iterate.
/// `ccfista_0` starts every line search from `tau0`, `ccfista_1` from the
/// previous accepted step.
pub fn solve_fista(problem: &Problem, penalty: &PenaltyMatrix, config: &SolverConfig) -> Result<SolverResult> {
    if !matches!(config.variant, Variant::CcFista0 | Variant::CcFista1) {
        return Err(Error::InvalidInput(format!(
            "{} is not a FISTA variant",
            config.variant
        )));
    }
    config.validate()?;
    penalty.check_dim(problem.p())?;
    let exec = config.exec;
    let initial = problem.initial_point(config)?;
    let s = problem.covariance(exec);

    let mut omega = initial.clone();
    let mut theta = initial.clone();
    let mut alpha = 1.0;
    let mut value = objective_with(&omega, &s, penalty, exec)?;
    let mut residual = residual_from_gradient(&omega, &smooth_gradient_with(&omega, &s, exec)?, penalty);
    let mut tracker = Tracker::new(config, value);
    let mut tau_prev = config.tau0;
    let mut converged = false;

    for k in 1..=config.max_iter {
        let grad = smooth_gradient_with(&theta, &s, exec)?;
        let tau_init = match config.variant {
            Variant::CcFista1 => tau_prev,
            _ => config.tau0,
        };
        let step = search(&theta, &grad, &s, penalty, tau_init, config.c, exec, k)?;
        tau_prev = step.tau;
        let next = step.candidate;
        value = objective_with(&next, &s, penalty, exec)?;
        residual = residual_from_gradient(&next, &smooth_gradient_with(&next, &s, exec)?, penalty);

        let alpha_next = momentum_next(alpha);
        let extrapolated = next.combine(1.0, &next.sub(&omega), (alpha - 1.0) / alpha_next);
        if extrapolated.min_diagonal() <= DIAGONAL_FLOOR {
            alpha = 1.0;
            theta = next.clone();
        } else {
            alpha = alpha_next;
            theta = extrapolated;
        }
        omega = next;
        if tracker.record(&omega, value, residual, step.tau, step.backtracks) {
            converged = true;
            break;
        }
    }
    Ok(tracker.finish(config.variant, initial, omega, converged, value, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConcentrationMatrix, CovarianceMatrix};
    use ndarray::array;

    #[test]
    fn momentum_sequence() {
        let a2 = momentum_next(1.0);
        assert!((a2 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let a3 = momentum_next(a2);
        assert!((a3 - 2.193_527_085_331_054).abs() < 1e-12);
    }

    #[test]
    fn identity_is_a_fixed_point() {
        for variant in [Variant::CcFista0, Variant::CcFista1] {
            let l = PenaltyMatrix::uniform(4, 0.2).unwrap();
            let p = Problem::from_covariance(CovarianceMatrix::identity(4));
            let r = solve_fista(&p, &l, &SolverConfig::new(variant)).unwrap();
            assert!(r.converged);
            assert_eq!(r.iterations, 1);
            assert_eq!(r.estimate, ConcentrationMatrix::identity(4));
        }
    }

    #[test]
    fn matches_known_diagonal_solution() {
        let s = CovarianceMatrix::new(array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let l = PenaltyMatrix::uniform(2, 0.6).unwrap();
        let r = solve_fista(&Problem::from_covariance(s), &l, &SolverConfig::new(Variant::CcFista1)).unwrap();
        assert!(r.converged);
        assert!(r.estimate.sub(&ConcentrationMatrix::identity(2)).frobenius_norm() <= 1e-6);
    }
}
