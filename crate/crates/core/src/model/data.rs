use ndarray::Array2;

use crate::linalg::{self, PivotedCholesky};
use crate::{Error, Exec, Result};

/// `n × p` observation matrix (rows are observations).
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    centered: bool,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be non-empty, got {n}×{p}"
            )));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {v} at row {r}, column {c}"
            )));
        }
        Ok(DataMatrix {
            values: values.as_standard_layout().into_owned(),
            centered: false,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Copy with every column shifted to mean zero.
    pub fn centered(&self) -> Result<DataMatrix> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput("centering needs at least two observations".into()));
        }
        let mut values = self.values.clone();
        for mut col in values.columns_mut() {
            let mean = col.sum() / n as f64;
            col.mapv_inplace(|v| v - mean);
        }
        Ok(DataMatrix { values, centered: true })
    }

    /// `p × n` copy whose rows are the columns of the data.
    pub(crate) fn columns_as_rows(&self) -> Array2<f64> {
        self.values.t().as_standard_layout().into_owned()
    }
}

/// Dense symmetric `p × p` sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    values: Array2<f64>,
}

impl CovarianceMatrix {
    /// Validates squareness, exact symmetry, finiteness and positive
    /// semidefiniteness (pivoted Cholesky, pivots ≥ -1e-10).
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let s = Self::new_unchecked_psd(values)?;
        PivotedCholesky::new(&s.values)?;
        Ok(s)
    }

    fn new_unchecked_psd(values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        if r == 0 {
            return Err(Error::InvalidInput("covariance must be non-empty".into()));
        }
        for i in 0..r {
            for j in 0..=i {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if !a.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite covariance entry at ({i}, {j})"
                    )));
                }
                if a != b {
                    return Err(Error::InvalidInput(format!(
                        "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(CovarianceMatrix {
            values: values.as_standard_layout().into_owned(),
        })
    }

    pub(crate) fn from_gram(values: Array2<f64>) -> Self {
        CovarianceMatrix { values }
    }

    pub fn identity(p: usize) -> Self {
        CovarianceMatrix { values: Array2::eye(p) }
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Contiguous row `i` (equal to column `i`).
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values.as_slice().expect("standard layout")[i * p..(i + 1) * p]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.p()).map(|i| self.values[[i, i]]).collect()
    }

    /// Indices of columns with zero variance; these must be dropped before
    /// solving.
    pub fn zero_variance_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&i| self.values[[i, i]] <= 0.0).collect()
    }

    pub fn require_positive_diagonal(&self) -> Result<()> {
        match (0..self.p()).find(|&i| !(self.values[[i, i]] > 0.0)) {
            Some(index) => Err(Error::NonPositiveDiagonal {
                index,
                value: self.values[[index, index]],
            }),
            None => Ok(()),
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        linalg::spectral_norm(&self.values)
    }
}

/// `S = YᵀY / n`, after column centering when `center` is set.
///
/// The divisor is `n`, not `n - 1`.
pub fn sample_covariance(y: &DataMatrix, center: bool) -> Result<CovarianceMatrix> {
    sample_covariance_with(y, center, Exec::default())
}

pub fn sample_covariance_with(y: &DataMatrix, center: bool, exec: Exec) -> Result<CovarianceMatrix> {
    let centered;
    let y = if center && !y.is_centered() {
        centered = y.centered()?;
        &centered
    } else {
        y
    };
    Ok(gram_of_rows(&y.columns_as_rows(), exec))
}

/// `(1/n) X Xᵀ` for a `p × n` matrix `X`, symmetric by construction.
pub(crate) fn gram_of_rows(xt: &Array2<f64>, exec: Exec) -> CovarianceMatrix {
    let (p, n) = xt.dim();
    let data = xt.as_slice().expect("standard layout");
    let inv_n = 1.0 / n as f64;
    let mut upper = Array2::<f64>::zeros((p, p));
    exec.for_each_row(upper.as_slice_mut().unwrap(), p, |i, out| {
        let yi = &data[i * n..(i + 1) * n];
        for j in i..p {
            out[j] = linalg::dot(yi, &data[j * n..(j + 1) * n]) * inv_n;
        }
    });
    for i in 0..p {
        for j in 0..i {
            upper[[i, j]] = upper[[j, i]];
        }
    }
    CovarianceMatrix::from_gram(upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_centered_column() {
        let y = DataMatrix::new(array![[2.0], [0.0]]).unwrap();
        let s = sample_covariance(&y, true).unwrap();
        assert_eq!(s.values(), &array![[1.0]]);
    }

    #[test]
    fn uncentered_divides_by_n() {
        let y = DataMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let s = sample_covariance(&y, false).unwrap();
        assert_eq!(s.values(), &array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn matches_outer_product_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = Array2::from_shape_fn((5, 3), |_| rng.random_range(-2.0..2.0));
        let data = DataMatrix::new(y.clone()).unwrap();
        let s = sample_covariance(&data, false).unwrap();
        // oracle: (1/n) Σ_k y_k y_kᵀ
        let mut oracle = Array2::<f64>::zeros((3, 3));
        for row in y.rows() {
            for i in 0..3 {
                for j in 0..3 {
                    oracle[[i, j]] += row[i] * row[j] / 5.0;
                }
            }
        }
        for (a, b) in s.values().iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn centering_zeroes_column_sums() {
        let y = DataMatrix::new(array![[1.0, 5.0], [2.0, 7.0], [6.0, -1.0]]).unwrap();
        let c = y.centered().unwrap();
        assert!(c.is_centered());
        for col in c.values().columns() {
            assert!(col.sum().abs() <= 1e-10 * 3.0 * 7.0);
        }
        assert!(DataMatrix::new(array![[1.0, 2.0]]).unwrap().centered().is_err());
    }

    #[test]
    fn zero_variance_columns_reported() {
        let y = DataMatrix::new(array![[1.0, 3.0], [2.0, 3.0]]).unwrap();
        let s = sample_covariance(&y, true).unwrap();
        assert_eq!(s.zero_variance_columns(), vec![1]);
        assert!(s.require_positive_diagonal().is_err());
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceMatrix::new(array![[1.0, 0.1], [0.2, 1.0]]).is_err());
        assert!(CovarianceMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(CovarianceMatrix::new(array![[1.0, 0.5], [0.5, 1.0]]).is_ok());
    }
}
