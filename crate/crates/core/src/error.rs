use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("design is rank deficient (singular values below {tolerance:e} x largest){}", fold_suffix(*fold))]
    RankDeficient { tolerance: f64, fold: Option<usize> },

    #[error("penalty must be a finite nonnegative number, got {0}")]
    InvalidPenalty(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is asymmetric beyond tolerance (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e}, trace {trace:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, trace: f64 },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("penalty system I + lambda * Lambda is singular")]
    SingularPenaltySystem,

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("bootstrap degenerate: {redraws} redraws of rank-deficient resamples exceeded the limit")]
    BootstrapDegenerate { redraws: usize },

    #[error("prior covariance undefined: crude covariance has nonpositive trace")]
    DegeneratePrior,

    #[error("normalization undefined: tr(X'X C) = {0:e} is not positive")]
    DegenerateNormalization(f64),

    #[error("shrinkage selection failed on fold {fold}: {source}")]
    SelectionFoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    #[error("ticker not found: {0}")]
    TickerNotFound(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("r2 undefined: test response has zero sum of squares")]
    DegenerateR2,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn fold_suffix(fold: Option<usize>) -> String {
    match fold {
        Some(f) => format!(" when leaving out fold {f}"),
        None => String::new(),
    }
}

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidPenalty(_) | DimensionMismatch(_) | InvalidParameter(_) | UnsupportedConfig(_) => {
                ErrorClass::Validation
            }
            TickerNotFound(_) | Parse { .. } | InsufficientData(_) | FileNotFound(_) | Io(_) => ErrorClass::Data,
            SelectionFoldFailure { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }

    /// Stable snake_case identifier for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            RankDeficient { .. } => "rank_deficient",
            InvalidPenalty(_) => "invalid_penalty",
            DimensionMismatch(_) => "dimension_mismatch",
            Asymmetric(_) => "asymmetric",
            NotPositiveSemidefinite { .. } => "not_positive_semidefinite",
            SingularCovariance => "singular_covariance",
            SingularPenaltySystem => "singular_penalty_system",
            SingularSystem => "singular_system",
            BootstrapDegenerate { .. } => "bootstrap_degenerate",
            DegeneratePrior => "degenerate_prior",
            DegenerateNormalization(_) => "degenerate_normalization",
            SelectionFoldFailure { .. } => "selection_fold_failure",
            InvalidParameter(_) => "invalid_parameter",
            UnsupportedConfig(_) => "unsupported_config",
            TickerNotFound(_) => "ticker_not_found",
            Parse { .. } => "parse_error",
            InsufficientData(_) => "insufficient_data",
            DegenerateR2 => "degenerate_r2",
            NonFinite(_) => "non_finite",
            FileNotFound(_) => "file_not_found",
            Io(_) => "io",
        }
    }
}
