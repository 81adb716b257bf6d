use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid tabulated function: {0}")]
    InvalidTable(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("generator has a vanishing moment integral (I1 = {i1}, I2 = {i2})")]
    ZeroGenerator { i1: f64, i2: f64 },
    #[error("output grid too short: {lost_fraction:.3e} of the mass falls beyond the rescaled grid")]
    GridTooShort { lost_fraction: f64 },
    #[error("normalization residuals ({0:.3e}, {1:.3e}) exceed tolerance {2:.1e}")]
    NormalizationResidual(f64, f64, f64),
    #[error("argument out of domain: {0}")]
    OutOfDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    FactorizationFailure { min_eigenvalue: f64 },
    #[error("correlation matrix is singular (min eigenvalue {min_eigenvalue:.3e})")]
    SingularSigma { min_eigenvalue: f64 },
    #[error("conditioning block is singular")]
    SingularBlock,
    #[error("invalid data matrix: {0}")]
    InvalidData(String),
    #[error("column {column} is constant")]
    DegenerateColumn { column: usize },
    #[error("columns {0} and {1} share fewer than two complete rows")]
    InsufficientPairs(usize, usize),
    #[error("inadmissible parameter for family {family}: {reason}")]
    InadmissibleTheta { family: String, reason: String },
    #[error("grids differ")]
    GridMismatch,
    #[error("too many missing rows requested: {requested} > {available}")]
    TooManyMissing { requested: usize, available: usize },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
