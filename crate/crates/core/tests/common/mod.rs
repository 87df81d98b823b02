#![allow(dead_code)]

use concord::model::{sample_covariance, ConcentrationMatrix, CovarianceMatrix, DataMatrix};
use concord::synth::{generate_sparse_concentration, sample_gaussian, SynthSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Centered Gaussian sample from a sparse truth with about `p` edges.
pub fn random_data(p: usize, n: usize, seed: u64) -> DataMatrix {
    let pairs = p.min(p * (p - 1) / 2);
    let truth = generate_sparse_concentration(&SynthSpec::new(p, pairs, n, seed)).unwrap();
    sample_gaussian(&truth, n, seed).unwrap().centered().unwrap()
}

pub fn random_covariance(p: usize, n: usize, seed: u64) -> CovarianceMatrix {
    sample_covariance(&random_data(p, n, seed), false).unwrap()
}

/// Symmetric matrix with positive diagonal in `[0.5, 2]` and a fraction
/// `density` of nonzero off-diagonal pairs in `[-0.5, 0.5]`.
pub fn random_concentration(p: usize, density: f64, seed: u64) -> ConcentrationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut triplets = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(density) {
                triplets.push((i, j, rng.random_range(-0.5..0.5)));
            }
        }
    }
    ConcentrationMatrix::from_parts(diag, triplets).unwrap()
}

pub fn frobenius_distance(a: &ConcentrationMatrix, b: &ConcentrationMatrix) -> f64 {
    let d: Array2<f64> = a.to_dense() - b.to_dense();
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}
