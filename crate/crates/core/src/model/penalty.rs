use ndarray::Array2;

use crate::{Error, Result};

/// Symmetric nonnegative penalty weights with zero diagonal.
///
/// Either a uniform off-diagonal `λ` or an explicit weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyMatrix {
    p: usize,
    lambda: f64,
    weights: Option<Array2<f64>>,
}

impl PenaltyMatrix {
    pub fn uniform(p: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "penalty must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(PenaltyMatrix {
            p,
            lambda,
            weights: None,
        })
    }

    /// Per-entry weights; must be symmetric, nonnegative, and zero on the
    /// diagonal.
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        let (p, c) = weights.dim();
        if p != c {
            return Err(Error::DimensionMismatch { expected: p, found: c });
        }
        for i in 0..p {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "penalty diagonal must be zero, found {} at {i}",
                    weights[[i, i]]
                )));
            }
            for j in (i + 1)..p {
                let w = weights[[i, j]];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::NegativeThreshold {
                        row: i,
                        col: j,
                        value: w,
                    });
                }
                if w != weights[[j, i]] {
                    return Err(Error::InvalidInput(format!("penalty is not symmetric at ({i}, {j})")));
                }
            }
        }
        let lambda = weights.iter().copied().fold(0.0, f64::max);
        Ok(PenaltyMatrix {
            p,
            lambda,
            weights: Some(weights),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Uniform off-diagonal value, or the largest weight when per-entry.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Smallest off-diagonal weight.
    pub fn min_offdiag(&self) -> f64 {
        match &self.weights {
            None => self.lambda,
            Some(w) => {
                let mut m = f64::INFINITY;
                for i in 0..self.p {
                    for j in (i + 1)..self.p {
                        m = m.min(w[[i, j]]);
                    }
                }
                if m.is_finite() {
                    m
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.weights {
            None => self.lambda,
            Some(w) => w[[i, j]],
        }
    }

    pub(crate) fn check_dim(&self, p: usize) -> Result<()> {
        if self.p != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.p,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_has_zero_diagonal() {
        let l = PenaltyMatrix::uniform(3, 0.2).unwrap();
        assert_eq!(l.get(1, 1), 0.0);
        assert_eq!(l.get(0, 2), 0.2);
        assert!(PenaltyMatrix::uniform(3, -0.1).is_err());
    }

    #[test]
    fn weight_validation() {
        assert!(PenaltyMatrix::from_weights(array![[0.0, 0.1], [0.1, 0.0]]).is_ok());
        assert!(PenaltyMatrix::from_weights(array![[0.1, 0.1], [0.1, 0.0]]).is_err());
        assert!(PenaltyMatrix::from_weights(array![[0.0, -0.1], [-0.1, 0.0]]).is_err());
        assert!(PenaltyMatrix::from_weights(array![[0.0, 0.1], [0.2, 0.0]]).is_err());
        let l = PenaltyMatrix::from_weights(array![[0.0, 0.1, 0.3], [0.1, 0.0, 0.2], [0.3, 0.2, 0.0]]).unwrap();
        assert_eq!(l.min_offdiag(), 0.1);
        assert_eq!(l.lambda(), 0.3);
    }
}
