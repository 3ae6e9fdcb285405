use thiserror::Error;

/// Errors raised by the forecasting library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series is constant (variance {variance:e})")]
    ConstantSeries { variance: f64 },

    #[error("regressor has (near) zero sum of squares")]
    DegenerateRegressor,

    #[error("cross-product matrix is singular (pivot {pivot:e})")]
    RankDeficient { pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("log transform needs strictly positive values (index {index}, value {value})")]
    NonPositiveForLog { index: usize, value: f64 },

    #[error("growth-rate transform divides by zero at index {index}")]
    DivisionByZero { index: usize },

    #[error("series too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("dates are not strictly increasing monthly: {0}")]
    NonMonotoneDates(String),

    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("horizon {h} too large for {t} observations")]
    HorizonTooLarge { h: usize, t: usize },

    #[error("requested {requested} factors but numerical rank is {rank}")]
    RankTooHigh { requested: usize, rank: usize },

    #[error("eigenvalue spectrum is empty or unusable")]
    EmptySpectrum,

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ConstantSeries { .. } => "ConstantSeries",
            Error::DegenerateRegressor => "DegenerateRegressor",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonPositiveForLog { .. } => "NonPositiveForLog",
            Error::DivisionByZero { .. } => "DivisionByZero",
            Error::TooShort { .. } => "TooShort",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::ParseError(_) => "ParseError",
            Error::NonMonotoneDates(_) => "NonMonotoneDates",
            Error::UnknownSeries(_) => "UnknownSeries",
            Error::HorizonTooLarge { .. } => "HorizonTooLarge",
            Error::RankTooHigh { .. } => "RankTooHigh",
            Error::EmptySpectrum => "EmptySpectrum",
            Error::NotConverged { .. } => "NotConverged",
            Error::InsufficientData(_) => "InsufficientData",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
