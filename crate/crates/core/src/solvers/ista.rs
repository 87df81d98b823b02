use crate::model::{objective_with, residual_from_gradient, smooth_gradient_with, PenaltyMatrix};
use crate::{Error, Result};

use super::line_search::{bb_from_products, search};
use super::{Problem, SolverConfig, SolverResult, Tracker, Variant};

/// Proximal gradient descent with backtracking. `ccista_0` starts every line
/// search from `tau0`; `ccista_1` starts from the Barzilai-Borwein step of
/// the last move.
pub fn solve_ista(problem: &Problem, penalty: &PenaltyMatrix, config: &SolverConfig) -> Result<SolverResult> {
    if !matches!(config.variant, Variant::CcIsta0 | Variant::CcIsta1) {
        return Err(Error::InvalidInput(format!(
            "{} is not an ISTA variant",
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
    let mut tau_init = config.tau0;
    let mut converged = false;

    for k in 1..=config.max_iter {
        let step = search(&omega, &grad, &s, penalty, tau_init, config.c, exec, k)?;
        let next = step.candidate;
        let next_grad = smooth_gradient_with(&next, &s, exec)?;
        value = objective_with(&next, &s, penalty, exec)?;
        residual = residual_from_gradient(&next, &next_grad, penalty);

        if config.variant == Variant::CcIsta1 {
            let d = next.sub(&omega);
            let sy = d.inner_dense(&(&next_grad - &grad));
            tau_init = bb_from_products(d.frobenius_sq(), sy, step.tau);
        }
        omega = next;
        grad = next_grad;
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

    fn run(variant: Variant, s: CovarianceMatrix, lambda: f64) -> SolverResult {
        let l = PenaltyMatrix::uniform(s.p(), lambda).unwrap();
        solve_ista(&Problem::from_covariance(s), &l, &SolverConfig::new(variant)).unwrap()
    }

    #[test]
    fn identity_is_a_fixed_point() {
        for variant in [Variant::CcIsta0, Variant::CcIsta1] {
            let r = run(variant, CovarianceMatrix::identity(7), 0.3);
            assert!(r.converged);
            assert!(r.iterations <= 2);
            assert_eq!(r.estimate, ConcentrationMatrix::identity(7));
            assert_eq!(r.delta_subg, 0.0);
        }
    }

    #[test]
    fn penalty_above_lambda_max_gives_diagonal() {
        let s = CovarianceMatrix::new(array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        for variant in [Variant::CcIsta0, Variant::CcIsta1] {
            let r = run(variant, s.clone(), 0.6);
            assert!(r.converged);
            let d = r.estimate.sub(&ConcentrationMatrix::identity(2)).frobenius_norm();
            assert!(d <= 1e-6, "{d}");
        }
    }

    #[test]
    fn objective_is_monotone() {
        let s = CovarianceMatrix::new(array![[2.0, 0.8, 0.3], [0.8, 1.0, -0.2], [0.3, -0.2, 1.5]]).unwrap();
        let r = run(Variant::CcIsta0, s, 0.05);
        assert!(r.converged);
        for w in r.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
        assert_eq!(r.trace.len(), r.diag_envelope.len());
    }

    #[test]
    fn rejects_other_variants() {
        let l = PenaltyMatrix::uniform(2, 0.1).unwrap();
        let p = Problem::from_covariance(CovarianceMatrix::identity(2));
        assert!(solve_ista(&p, &l, &SolverConfig::new(Variant::Pnopt)).is_err());
    }
}
