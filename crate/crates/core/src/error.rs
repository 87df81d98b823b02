use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("threshold at ({row}, {col}) is negative ({value})")]
    NegativeThreshold { row: usize, col: usize, value: f64 },

    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error(
        "step size underflow at iteration {iteration}: no step in {backtracks} backtracks \
         (last tried {last_step:e}) satisfied the descent condition; objective {objective}"
    )]
    StepUnderflow {
        iteration: usize,
        backtracks: usize,
        last_step: f64,
        objective: f64,
    },

    #[error("proximal Newton subproblem did not converge within {sweeps} sweeps")]
    InnerSolverCap { sweeps: usize },

    #[error("matrix is not positive semidefinite: pivot {index} is {value}")]
    NotPositiveSemidefinite { index: usize, value: f64 },

    #[error("lambda_max is zero: the covariance is diagonal, nothing to regularize")]
    NothingToRegularize,

    #[error("requested {requested} off-diagonal pairs but only {capacity} exist")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}
