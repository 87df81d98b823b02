//! Sequential / data-parallel execution of the dense kernels.
//!
//! Every parallel kernel splits work by output row (or column) and keeps the
//! summation order inside each unit fixed, so `Exec::Parallel` and
//! `Exec::Sequential` produce bit-identical results. Without the `parallel`
//! crate feature, `Exec::Parallel` runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether this mode actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Calls `f(row_index, row)` for each `row_len`-sized chunk of `data`.
    pub fn for_each_row<F>(self, data: &mut [f64], row_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Send + Sync,
    {
        if row_len == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            data.par_chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
            return;
        }
        data.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
    }

    /// Evaluates `f(0..len)` and collects the results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Sum of `f(0..len)`, accumulated in index order regardless of mode.
    pub fn sum<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Send + Sync,
    {
        self.map(len, f).into_iter().sum()
    }
}
