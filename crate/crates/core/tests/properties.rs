mod common;

use concord::certificates::{dual_feasibility_from_data, kkt_check, lambda_max, level_set_bounds_at};
use concord::io::{format_float, format_triplets, read_sparse_triplets, write_sparse_triplets};
use concord::model::{
    hessian_quadratic_form, objective, sample_covariance, smooth_gradient, smooth_value, subgradient_residual,
    ConcentrationMatrix, PenaltyMatrix,
};
use concord::prox::{prox_step, soft_threshold_scalar};
use concord::solvers::{coordinate_update_offdiag, line_search, solve, Problem, SolverConfig, Variant};
use concord::synth::{generate_sparse_concentration, SynthSpec};
use ndarray::Array2;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, u64, f64)> {
    (3usize..9, any::<u64>(), 0.1f64..0.8)
}

fn dense_objective(omega: &ConcentrationMatrix, s: &Array2<f64>, lambda: f64) -> f64 {
    let m = omega.to_dense();
    let p = m.nrows();
    let quad = m.dot(s).dot(&m).diag().sum();
    let mut value = 0.5 * quad;
    for i in 0..p {
        value -= m[[i, i]].ln();
        for j in 0..p {
            if i != j {
                value += lambda * m[[i, j]].abs();
            }
        }
    }
    value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn soft_threshold_is_nonexpansive(a in -10.0f64..10.0, b in -10.0f64..10.0, t in 0.0f64..5.0) {
        let d = (soft_threshold_scalar(a, t) - soft_threshold_scalar(b, t)).abs();
        prop_assert!(d <= (a - b).abs() + 1e-15);
        prop_assert!(soft_threshold_scalar(a, t).abs() <= a.abs());
    }

    #[test]
    fn float_format_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back: f64 = format_float(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn triplets_round_trip_exactly((p, seed, density) in instance()) {
        let omega = common::random_concentration(p, density, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        write_sparse_triplets(&omega, &path).unwrap();
        let back = read_sparse_triplets(&path).unwrap();
        prop_assert_eq!(&back, &omega);
        prop_assert_eq!(format_triplets(&back), format_triplets(&omega));
    }

    #[test]
    fn objective_matches_dense_evaluation((p, seed, density) in instance(), lambda in 0.0f64..1.0) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, 2 * p, seed ^ 1);
        let penalty = PenaltyMatrix::uniform(p, lambda).unwrap();
        let sparse = objective(&omega, &s, &penalty).unwrap();
        let dense = dense_objective(&omega, s.values(), lambda);
        prop_assert!((sparse - dense).abs() <= 1e-12 * dense.abs().max(1.0));
    }

    #[test]
    fn storage_order_does_not_change_objective((p, seed, density) in instance()) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, 2 * p, seed ^ 2);
        let penalty = PenaltyMatrix::uniform(p, 0.3).unwrap();
        // lower-triangle triplets in reverse order describe the same matrix
        let reversed = ConcentrationMatrix::from_parts(
            omega.diagonal().to_vec(),
            omega.offdiag().iter().rev().map(|e| (e.col, e.row, e.value)),
        ).unwrap();
        prop_assert_eq!(objective(&omega, &s, &penalty).unwrap(), objective(&reversed, &s, &penalty).unwrap());
    }

    #[test]
    fn hessian_form_dominates_diagonal_part((p, seed, density) in instance()) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, p / 2 + 1, seed ^ 3);
        let w = common::random_concentration(p, 0.5, seed ^ 4).to_dense();
        let q = hessian_quadratic_form(&omega, &s, &w).unwrap();
        let diag: f64 = (0..p).map(|i| w[[i, i]].powi(2) / omega.diagonal()[i].powi(2)).sum();
        prop_assert!(q >= diag - 1e-12 * diag.max(1.0));
    }

    #[test]
    fn prox_support_bound((p, seed, density) in instance(), tau in 0.01f64..1.0, lambda in 0.0f64..0.5) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, 2 * p, seed ^ 5);
        let g = smooth_gradient(&omega, &s).unwrap();
        let penalty = PenaltyMatrix::uniform(p, lambda).unwrap();
        let next = prox_step(&omega, &g, tau, &penalty).unwrap();
        let g_support = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).filter(|&(i, j)| g[[i, j]] != 0.0).count();
        prop_assert!(next.nnz_offdiag() <= omega.nnz_offdiag() + g_support);
        prop_assert!(next == ConcentrationMatrix::from_dense(&next.to_dense()));
    }

    #[test]
    fn coordinate_update_zeroes_partial_subgradient((p, seed, density) in instance(), lambda in 0.0f64..0.5) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, 2 * p, seed ^ 6);
        let penalty = PenaltyMatrix::uniform(p, lambda).unwrap();
        let (a, b) = ((seed % p as u64) as usize, ((seed / 7 + 1) % p as u64) as usize);
        prop_assume!(a != b);
        let (i, j) = (a.min(b), a.max(b));
        let v = coordinate_update_offdiag(&omega, &s, &penalty, i, j).unwrap();
        let mut m = omega.to_dense();
        m[[i, j]] = v;
        m[[j, i]] = v;
        let updated = ConcentrationMatrix::from_dense(&m);
        // ∂F/∂ω_ij counts both (i, j) and (j, i)
        let g = smooth_gradient(&updated, &s).unwrap();
        let d = g[[i, j]] + g[[j, i]];
        let dist = if v != 0.0 { (d + 2.0 * lambda * v.signum()).abs() } else { (d.abs() - 2.0 * lambda).max(0.0) };
        prop_assert!(dist <= 1e-10, "distance {}", dist);
        prop_assert!(objective(&updated, &s, &penalty).unwrap() <= objective(&omega, &s, &penalty).unwrap() + 1e-12);
    }

    #[test]
    fn line_search_step_satisfies_descent((p, seed, density) in instance(), lambda in 0.0f64..0.5) {
        let omega = common::random_concentration(p, density, seed);
        let s = common::random_covariance(p, 2 * p, seed ^ 7);
        let penalty = PenaltyMatrix::uniform(p, lambda).unwrap();
        let g = smooth_gradient(&omega, &s).unwrap();
        let out = line_search(&omega, &g, &s, &penalty, 1.0, 0.5).unwrap();
        let d = out.candidate.to_dense() - omega.to_dense();
        let bound = smooth_value(&omega, &s).unwrap() + (&g * &d).sum() + (&d * &d).sum() / (2.0 * out.tau);
        let f = smooth_value(&out.candidate, &s).unwrap();
        prop_assert!(f <= bound + 1e-10 * bound.abs().max(1.0));
        prop_assert!(objective(&out.candidate, &s, &penalty).unwrap() <= objective(&omega, &s, &penalty).unwrap() + 1e-12);
    }

    #[test]
    fn fixed_point_iff_zero_residual((p, seed, _d) in instance(), tau in 0.05f64..1.0) {
        let y = common::random_data(p, 3 * p, seed);
        let s = sample_covariance(&y, false).unwrap();
        let penalty = PenaltyMatrix::uniform(p, 0.3 * lambda_max(&s).unwrap()).unwrap();
        let config = SolverConfig::new(Variant::Pnopt).with_tolerances(1e-13, 1e-15).with_max_iter(200);
        let r = solve(&Problem::from_covariance(s.clone()), &penalty, &config).unwrap();
        let g = smooth_gradient(&r.estimate, &s).unwrap();
        let moved = prox_step(&r.estimate, &g, tau, &penalty).unwrap();
        let dist = common::frobenius_distance(&moved, &r.estimate);
        prop_assert!(subgradient_residual(&r.estimate, &s, &penalty).unwrap() <= 1e-10);
        prop_assert!(dist <= 1e-10);
        // and away from the optimum neither holds
        let start = r.initial.clone();
        let g0 = smooth_gradient(&start, &s).unwrap();
        let moved0 = prox_step(&start, &g0, tau, &penalty).unwrap();
        prop_assert!(subgradient_residual(&start, &s, &penalty).unwrap() > 1e-10);
        prop_assert!(common::frobenius_distance(&moved0, &start) > 1e-10);
    }

    #[test]
    fn converged_results_pass_kkt((p, seed, _d) in instance(), variant in proptest::sample::select(Variant::ALL.to_vec())) {
        let y = common::random_data(p, 2 * p, seed);
        let s = sample_covariance(&y, false).unwrap();
        let penalty = PenaltyMatrix::uniform(p, 0.4 * lambda_max(&s).unwrap()).unwrap();
        let eps = 1e-7;
        let r = solve(&Problem::from_data(&y, false).unwrap(), &penalty, &SolverConfig::new(variant).with_tolerances(eps, 1e-8)).unwrap();
        prop_assert!(r.converged);
        let tol = 10.0 * eps * r.estimate.frobenius_norm() / p as f64;
        let kkt = kkt_check(&r.estimate, &s, &penalty, tol).unwrap();
        prop_assert!(kkt.pass, "{:?}", kkt);
        let bounds = level_set_bounds_at(&s, &penalty, &r.initial).unwrap();
        for &(lo, hi) in &r.diag_envelope {
            prop_assert!(lo > 0.0 && bounds.contains_diagonal(lo, hi));
        }
        let dual = dual_feasibility_from_data(&y, &r.estimate, &penalty).unwrap();
        prop_assert!((dual - 2.0 * kkt.zero_excess).abs() <= 1e-10);
    }

    #[test]
    fn runs_are_bit_identical((p, seed, _d) in instance(), variant in proptest::sample::select(Variant::ALL.to_vec())) {
        let y = common::random_data(p, 2 * p, seed);
        let problem = Problem::from_data(&y, true).unwrap();
        let penalty = PenaltyMatrix::uniform(p, 0.05).unwrap();
        let config = SolverConfig::new(variant);
        let a = solve(&problem, &penalty, &config).unwrap();
        let b = solve(&problem, &penalty, &config.clone().with_exec(concord::Exec::Sequential)).unwrap();
        prop_assert_eq!(&a.estimate, &b.estimate);
        let key = |r: &concord::solvers::SolverResult| r.trace.iter().map(|t| (t.objective.to_bits(), t.delta_subg.to_bits(), t.step_size.to_bits())).collect::<Vec<_>>();
        prop_assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn generated_matrices_are_exact_and_positive_definite(p in 2usize..40, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let capacity = p * (p - 1) / 2;
        let pairs = (frac * capacity as f64) as usize;
        let omega = generate_sparse_concentration(&SynthSpec::new(p, pairs, 1, seed)).unwrap();
        prop_assert_eq!(omega.nnz_offdiag(), pairs);
        prop_assert!(concord::linalg::cholesky(&omega.to_dense()).is_ok());
        prop_assert_eq!(format_triplets(&omega), format_triplets(&generate_sparse_concentration(&SynthSpec::new(p, pairs, 1, seed)).unwrap()));
    }
}
