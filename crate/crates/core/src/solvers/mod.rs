//! CONCORD solvers.
//!
//! | variant     | method                    | initial step per iteration |
//! |-------------|---------------------------|----------------------------|
//! | `concord`   | cyclic coordinate descent | –                          |
//! | `ccista_0`  | ISTA                      | constant                   |
//! | `ccista_1`  | ISTA                      | Barzilai-Borwein           |
//! | `ccfista_0` | FISTA                     | constant                   |
//! | `ccfista_1` | FISTA                     | previous accepted step     |
//! | `pnopt`     | proximal Newton           | 1 (Armijo backtracking)    |
//!
//! All variants stop when both `Δ_subg ≤ eps_subg` and `Δ_func ≤ eps_func`.

mod coordinate;
mod fista;
mod ista;
mod line_search;
mod pnopt;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::{gram_of_rows, ConcentrationMatrix, CovarianceMatrix, DataMatrix, PenaltyMatrix};
use crate::{Error, Exec, Result};

pub use coordinate::{coordinate_update_diag, coordinate_update_offdiag, solve_coordinatewise};
pub use fista::{momentum_next, solve_fista};
pub use ista::solve_ista;
pub use line_search::{bb_initial_step, line_search, LineSearchOutcome, BB_STEP_CAP, MAX_BACKTRACKS};
pub use pnopt::{pnopt_direction, solve_pnopt, INNER_TOLERANCE};

/// Extrapolated FISTA points with a diagonal at or below this value trigger a
/// momentum restart.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Variant {
    #[serde(rename = "concord")]
    #[value(name = "concord")]
    Concord,
    #[serde(rename = "ccista_0")]
    #[value(name = "ccista_0")]
    CcIsta0,
    #[serde(rename = "ccista_1")]
    #[value(name = "ccista_1")]
    CcIsta1,
    #[serde(rename = "ccfista_0")]
    #[value(name = "ccfista_0")]
    CcFista0,
    #[serde(rename = "ccfista_1")]
    #[value(name = "ccfista_1")]
    CcFista1,
    #[serde(rename = "pnopt")]
    #[value(name = "pnopt")]
    Pnopt,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Concord,
        Variant::CcIsta0,
        Variant::CcIsta1,
        Variant::CcFista0,
        Variant::CcFista1,
        Variant::Pnopt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Concord => "concord",
            Variant::CcIsta0 => "ccista_0",
            Variant::CcIsta1 => "ccista_1",
            Variant::CcFista0 => "ccfista_0",
            Variant::CcFista1 => "ccfista_1",
            Variant::Pnopt => "pnopt",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            Error::InvalidInput(format!("unknown variant `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Initial step size `τ_(0,0)`, at most 1.
    pub tau0: f64,
    /// Backtracking factor in `(0, 1)`.
    pub c: f64,
    pub eps_subg: f64,
    pub eps_func: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant for the proximal Newton line search.
    pub armijo_alpha: f64,
    /// Starting point; `diag(1/√s_ii)` when unset.
    pub initial: Option<ConcentrationMatrix>,
    pub exec: Exec,
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        SolverConfig {
            variant,
            tau0: 1.0,
            c: 0.5,
            eps_subg: 1e-5,
            eps_func: 1e-8,
            max_iter: 1000,
            armijo_alpha: 1e-4,
            initial: None,
            exec: Exec::default(),
        }
    }

    pub fn with_tolerances(mut self, eps_subg: f64, eps_func: f64) -> Self {
        self.eps_subg = eps_subg;
        self.eps_func = eps_func;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_initial(mut self, initial: ConcentrationMatrix) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("backtracking factor must lie in (0, 1), got {}", self.c));
        }
        if !(self.tau0 > 0.0 && self.tau0 <= 1.0) {
            return bad(format!("initial step must lie in (0, 1], got {}", self.tau0));
        }
        if !(self.eps_subg > 0.0) || !(self.eps_func > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.armijo_alpha > 0.0 && self.armijo_alpha < 1.0) {
            return bad(format!("Armijo constant must lie in (0, 1), got {}", self.armijo_alpha));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub delta_subg: f64,
    pub delta_func: f64,
    pub step_size: f64,
    pub backtracks: usize,
    pub nnz: usize,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub variant: Variant,
    pub estimate: ConcentrationMatrix,
    pub initial: ConcentrationMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub delta_subg: f64,
    pub trace: Vec<IterationRecord>,
    /// `(min ω_ii, max ω_ii)` of every accepted iterate, aligned with `trace`.
    pub diag_envelope: Vec<(f64, f64)>,
    pub wall_time: Duration,
}

enum Source {
    Covariance(CovarianceMatrix),
    /// Centered data stored column-wise (`p × n`).
    Data {
        rows: Array2<f64>,
    },
}

/// Solver input: a covariance matrix, or the data it is computed from.
///
/// With data, `S` is formed inside each solve; the coordinate-wise solver
/// instead works on residuals of the data directly.
pub struct Problem {
    source: Source,
}

impl Problem {
    pub fn from_covariance(s: CovarianceMatrix) -> Self {
        Problem {
            source: Source::Covariance(s),
        }
    }

    pub fn from_data(y: &DataMatrix, center: bool) -> Result<Self> {
        let y = if center && !y.is_centered() {
            Cow::Owned(y.centered()?)
        } else {
            Cow::Borrowed(y)
        };
        Ok(Problem {
            source: Source::Data {
                rows: y.columns_as_rows(),
            },
        })
    }

    pub fn p(&self) -> usize {
        match &self.source {
            Source::Covariance(s) => s.p(),
            Source::Data { rows } => rows.nrows(),
        }
    }

    pub fn covariance(&self, exec: Exec) -> Cow<'_, CovarianceMatrix> {
        match &self.source {
            Source::Covariance(s) => Cow::Borrowed(s),
            Source::Data { rows } => Cow::Owned(gram_of_rows(rows, exec)),
        }
    }

    pub(crate) fn data_rows(&self) -> Option<&Array2<f64>> {
        match &self.source {
            Source::Covariance(_) => None,
            Source::Data { rows } => Some(rows),
        }
    }

    /// `s_ii` without forming the full covariance.
    pub fn covariance_diagonal(&self) -> Vec<f64> {
        match &self.source {
            Source::Covariance(s) => s.diagonal(),
            Source::Data { rows } => {
                let n = rows.ncols() as f64;
                rows.rows().into_iter().map(|r| r.dot(&r) / n).collect()
            }
        }
    }

    /// `diag(1/√s_ii)`, the default starting point.
    pub fn default_initial(&self) -> Result<ConcentrationMatrix> {
        let diag = self.covariance_diagonal();
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        Ok(ConcentrationMatrix::from_diagonal(
            diag.iter().map(|v| 1.0 / v.sqrt()).collect(),
        ))
    }

    pub(crate) fn initial_point(&self, config: &SolverConfig) -> Result<ConcentrationMatrix> {
        let default = self.default_initial()?;
        match &config.initial {
            None => Ok(default),
            Some(init) => {
                if init.p() != self.p() {
                    return Err(Error::DimensionMismatch {
                        expected: self.p(),
                        found: init.p(),
                    });
                }
                if let Some((index, value)) = init.first_nonpositive_diagonal() {
                    return Err(Error::NonPositiveDiagonal { index, value });
                }
                Ok(init.clone())
            }
        }
    }
}

/// Runs the configured variant.
pub fn solve(problem: &Problem, penalty: &PenaltyMatrix, config: &SolverConfig) -> Result<SolverResult> {
    match config.variant {
        Variant::Concord => solve_coordinatewise(problem, penalty, config),
        Variant::CcIsta0 | Variant::CcIsta1 => solve_ista(problem, penalty, config),
        Variant::CcFista0 | Variant::CcFista1 => solve_fista(problem, penalty, config),
        Variant::Pnopt => solve_pnopt(problem, penalty, config),
    }
}

pub(crate) fn relative_change(current: f64, previous: f64) -> f64 {
    (current - previous).abs() / previous.abs().max(1.0)
}

/// Accumulates trace rows and decides termination.
pub(crate) struct Tracker {
    start: Instant,
    eps_subg: f64,
    eps_func: f64,
    previous: f64,
    trace: Vec<IterationRecord>,
    envelope: Vec<(f64, f64)>,
}

impl Tracker {
    pub(crate) fn new(config: &SolverConfig, initial_objective: f64) -> Self {
        Tracker {
            start: Instant::now(),
            eps_subg: config.eps_subg,
            eps_func: config.eps_func,
            previous: initial_objective,
            trace: Vec::new(),
            envelope: Vec::new(),
        }
    }

    /// Records iterate `k` and returns whether both criteria hold.
    pub(crate) fn record(
        &mut self,
        omega: &ConcentrationMatrix,
        objective: f64,
        delta_subg: f64,
        step_size: f64,
        backtracks: usize,
    ) -> bool {
        let delta_func = relative_change(objective, self.previous);
        self.previous = objective;
        self.trace.push(IterationRecord {
            iter: self.trace.len() + 1,
            objective,
            delta_subg,
            delta_func,
            step_size,
            backtracks,
            nnz: omega.nnz_offdiag(),
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        self.envelope.push((omega.min_diagonal(), omega.max_diagonal()));
        delta_subg <= self.eps_subg && delta_func <= self.eps_func
    }

    pub(crate) fn finish(
        self,
        variant: Variant,
        initial: ConcentrationMatrix,
        estimate: ConcentrationMatrix,
        converged: bool,
        objective: f64,
        delta_subg: f64,
    ) -> SolverResult {
        SolverResult {
            variant,
            initial,
            converged,
            iterations: self.trace.len(),
            objective,
            delta_subg,
            wall_time: self.start.elapsed(),
            trace: self.trace,
            diag_envelope: self.envelope,
            estimate,
        }
    }
}
