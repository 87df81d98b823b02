use ndarray::Array2;

use crate::{Error, Result};

/// One stored upper-triangle entry (`row < col`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffDiagonal {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Symmetric `p × p` matrix with dense diagonal and sparse off-diagonal part.
///
/// Only the strict upper triangle is stored, sorted row-major, without
/// explicit zeros. Solver iterates additionally have a strictly positive
/// diagonal; the type itself also carries search directions and differences,
/// whose diagonal may have any sign.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationMatrix {
    diag: Vec<f64>,
    entries: Vec<OffDiagonal>,
}

/// Per-column adjacency `(row, value)` including the diagonal, rows ascending.
pub(crate) type Columns = Vec<Vec<(usize, f64)>>;

impl ConcentrationMatrix {
    pub fn identity(p: usize) -> Self {
        Self::from_diagonal(vec![1.0; p])
    }

    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        ConcentrationMatrix {
            diag,
            entries: Vec::new(),
        }
    }

    /// Builds from a diagonal and off-diagonal triplets in any order and
    /// either triangle. Zeros are dropped; duplicates are an error.
    pub fn from_parts(diag: Vec<f64>, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let p = diag.len();
        let mut entries = Vec::new();
        for (i, j, value) in triplets {
            if i >= p || j >= p {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) out of range for p = {p}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry ({i}, {i}) given as off-diagonal triplet"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at ({i}, {j})")));
            }
            if value != 0.0 {
                let (row, col) = if i < j { (i, j) } else { (j, i) };
                entries.push(OffDiagonal { row, col, value });
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col))
        {
            return Err(Error::InvalidInput(format!(
                "duplicate entry ({}, {})",
                w[0].row, w[0].col
            )));
        }
        Ok(ConcentrationMatrix { diag, entries })
    }

    /// From the upper triangle of a dense matrix.
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let p = m.nrows();
        let diag = (0..p).map(|i| m[[i, i]]).collect();
        let mut entries = Vec::new();
        for row in 0..p {
            for col in (row + 1)..p {
                let value = m[[row, col]];
                if value != 0.0 {
                    entries.push(OffDiagonal { row, col, value });
                }
            }
        }
        ConcentrationMatrix { diag, entries }
    }

    pub(crate) fn from_sorted(diag: Vec<f64>, entries: Vec<OffDiagonal>) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].row, w[0].col) < (w[1].row, w[1].col)));
        debug_assert!(entries.iter().all(|e| e.row < e.col && e.value != 0.0));
        ConcentrationMatrix { diag, entries }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let p = self.p();
        let mut m = Array2::zeros((p, p));
        for (i, &d) in self.diag.iter().enumerate() {
            m[[i, i]] = d;
        }
        for e in &self.entries {
            m[[e.row, e.col]] = e.value;
            m[[e.col, e.row]] = e.value;
        }
        m
    }

    pub fn p(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[OffDiagonal] {
        &self.entries
    }

    /// Number of stored unordered off-diagonal pairs.
    pub fn nnz_offdiag(&self) -> usize {
        self.entries.len()
    }

    /// Percentage of off-diagonal slots that are nonzero: `2·nnz / (p² − p) · 100`.
    pub fn nz_percent(&self) -> f64 {
        let p = self.p();
        if p < 2 {
            return 0.0;
        }
        200.0 * self.entries.len() as f64 / (p * p - p) as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by_key(&key, |e| (e.row, e.col))
            .map(|k| self.entries[k].value)
            .unwrap_or(0.0)
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn has_positive_diagonal(&self) -> bool {
        self.diag.iter().all(|&d| d > 0.0)
    }

    pub(crate) fn first_nonpositive_diagonal(&self) -> Option<(usize, f64)> {
        self.diag.iter().copied().enumerate().find(|&(_, d)| !(d > 0.0))
    }

    /// Squared Frobenius norm over the full matrix (off-diagonals twice).
    pub fn frobenius_sq(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|v| v * v).sum();
        let o: f64 = self.entries.iter().map(|e| e.value * e.value).sum();
        d + 2.0 * o
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Full-matrix inner product `⟨self, g⟩ = Σ_ij self_ij g_ij`.
    pub fn inner_dense(&self, g: &Array2<f64>) -> f64 {
        let d: f64 = self.diag.iter().enumerate().map(|(i, v)| v * g[[i, i]]).sum();
        let o: f64 = self
            .entries
            .iter()
            .map(|e| e.value * (g[[e.row, e.col]] + g[[e.col, e.row]]))
            .sum();
        d + o
    }

    /// Full-matrix inner product of two sparse symmetric matrices.
    pub fn inner(&self, other: &ConcentrationMatrix) -> f64 {
        let d: f64 = self.diag.iter().zip(&other.diag).map(|(a, b)| a * b).sum();
        let mut o = 0.0;
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match (x.row, x.col).cmp(&(y.row, y.col)) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    o += x.value * y.value;
                    a.next();
                    b.next();
                }
            }
        }
        d + 2.0 * o
    }

    /// `alpha·self + beta·other`; off-diagonal cancellations are dropped.
    pub fn combine(&self, alpha: f64, other: &ConcentrationMatrix, beta: f64) -> ConcentrationMatrix {
        assert_eq!(self.p(), other.p(), "dimension mismatch");
        let diag = self
            .diag
            .iter()
            .zip(&other.diag)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let mut entries = Vec::with_capacity(self.entries.len().max(other.entries.len()));
        let mut push = |row, col, value: f64| {
            if value != 0.0 {
                entries.push(OffDiagonal { row, col, value });
            }
        };
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => match (x.row, x.col).cmp(&(y.row, y.col)) {
                    std::cmp::Ordering::Less => {
                        push(x.row, x.col, alpha * x.value);
                        a.next();
                    }
                    std::cmp::Ordering::Greater => {
                        push(y.row, y.col, beta * y.value);
                        b.next();
                    }
                    std::cmp::Ordering::Equal => {
                        push(x.row, x.col, alpha * x.value + beta * y.value);
                        a.next();
                        b.next();
                    }
                },
                (Some(x), None) => {
                    push(x.row, x.col, alpha * x.value);
                    a.next();
                }
                (None, Some(y)) => {
                    push(y.row, y.col, beta * y.value);
                    b.next();
                }
                (None, None) => break,
            }
        }
        ConcentrationMatrix { diag, entries }
    }

    pub fn sub(&self, other: &ConcentrationMatrix) -> ConcentrationMatrix {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, alpha: f64) -> ConcentrationMatrix {
        self.combine(alpha, &ConcentrationMatrix::from_diagonal(vec![0.0; self.p()]), 0.0)
    }

    pub(crate) fn columns(&self) -> Columns {
        let p = self.p();
        let mut cols: Columns = vec![Vec::new(); p];
        for e in &self.entries {
            cols[e.col].push((e.row, e.value));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.push((c, self.diag[c]));
        }
        for e in &self.entries {
            cols[e.row].push((e.col, e.value));
        }
        cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_are_canonicalized() {
        let a =
            ConcentrationMatrix::from_parts(vec![1.0, 2.0, 3.0], [(2, 0, 0.5), (0, 1, -0.25), (1, 2, 0.0)]).unwrap();
        assert_eq!(a.nnz_offdiag(), 2);
        assert_eq!(
            a.offdiag()[0],
            OffDiagonal {
                row: 0,
                col: 1,
                value: -0.25
            }
        );
        assert_eq!(a.get(2, 0), 0.5);
        assert_eq!(a.get(0, 2), 0.5);
        assert_eq!(a.get(1, 2), 0.0);
        assert!(ConcentrationMatrix::from_parts(vec![1.0; 2], [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(ConcentrationMatrix::from_parts(vec![1.0; 2], [(0, 2, 1.0)]).is_err());
        assert!(ConcentrationMatrix::from_parts(vec![1.0; 2], [(1, 1, 1.0)]).is_err());
    }

    #[test]
    fn dense_round_trip_and_norms() {
        let m = array![[2.0, 0.5, 0.0], [0.5, 1.0, -1.0], [0.0, -1.0, 3.0]];
        let a = ConcentrationMatrix::from_dense(&m);
        assert_eq!(a.to_dense(), m);
        let f: f64 = m.iter().map(|v| v * v).sum();
        assert_eq!(a.frobenius_sq(), f);
        assert_eq!(a.inner_dense(&m), f);
        assert_eq!(a.inner(&a), f);
        assert!((a.nz_percent() - 200.0 * 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn combine_merges_supports() {
        let a = ConcentrationMatrix::from_parts(vec![1.0, 1.0, 1.0], [(0, 1, 1.0)]).unwrap();
        let b = ConcentrationMatrix::from_parts(vec![1.0, 2.0, 0.0], [(0, 1, 1.0), (1, 2, 4.0)]).unwrap();
        let d = a.sub(&b);
        assert_eq!(d.diagonal(), &[0.0, -1.0, 1.0]);
        assert_eq!(d.nnz_offdiag(), 1);
        assert_eq!(d.get(1, 2), -4.0);
        assert_eq!(a.combine(2.0, &b, 1.0).to_dense(), &a.to_dense() * 2.0 + &b.to_dense());
    }

    #[test]
    fn columns_sorted_with_diagonal() {
        let a = ConcentrationMatrix::from_parts(vec![1.0, 2.0, 3.0], [(0, 1, 0.1), (0, 2, 0.2), (1, 2, 0.3)]).unwrap();
        let cols = a.columns();
        assert_eq!(cols[0], vec![(0, 1.0), (1, 0.1), (2, 0.2)]);
        assert_eq!(cols[1], vec![(0, 0.1), (1, 2.0), (2, 0.3)]);
        assert_eq!(cols[2], vec![(0, 0.2), (1, 0.3), (2, 3.0)]);
    }
}
