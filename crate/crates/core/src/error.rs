use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot/eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("cholesky factor is singular (diagonal entry {0:e})")]
    SingularFactor(f64),
    #[error("unit-triangular input has diagonal entry {0} != 1")]
    BadDiagonal(f64),
    #[error("covariance has non-positive diagonal entry {0:e}")]
    NonPositiveDiagonal(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("damped newton step failed to find an admissible step length")]
    DampingFailure,
    #[error("H0 matrix is numerically singular (condition estimate {0:e})")]
    SingularH0(f64),
    #[error("singular linear system")]
    SingularSystem,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("not a valid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("operation not supported for metric {0}")]
    Unsupported(String),
    #[error("anchors could not reach separation {0} within the attempt budget")]
    InfeasibleSeparation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training { epoch: usize, batch: usize, source: Box<Error> },
}

impl Error {
    pub fn is_config(&self) -> bool {
        match self {
            Error::Training { source, .. } => source.is_config(),
            _ => matches!(self, Error::Config(_) | Error::Unsupported(_)),
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Training { source, .. } => source.is_io(),
            _ => matches!(self, Error::Io(_) | Error::Format(_)),
        }
    }

    /// Numerical failures map to exit status 2 in the CLI.
    pub fn is_numerical(&self) -> bool {
        if let Error::Training { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::NotSymmetric(_)
                | Error::NotPositiveDefinite(_)
                | Error::SingularFactor(_)
                | Error::BadDiagonal(_)
                | Error::NonPositiveDiagonal(_)
                | Error::NoConvergence { .. }
                | Error::DampingFailure
                | Error::SingularH0(_)
                | Error::SingularSystem
                | Error::InvalidCorrelation(_)
                | Error::InfeasibleSeparation(_)
                | Error::NonFinite(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
