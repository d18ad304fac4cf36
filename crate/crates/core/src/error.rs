use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed decay envelope: {0}")]
    MalformedEnvelope(String),

    #[error("index out of range: n = {n}, j = {j} (need 1 <= j <= n - 1)")]
    IndexOutOfRange { n: usize, j: usize },

    #[error("negative weight w[{n},{j}] = {value:e}")]
    NegativeWeight { n: usize, j: usize, value: f64 },

    #[error("negative kernel sample w(t = {t}, s = {s}) = {value:e}")]
    NegativeKernel { t: f64, s: f64, value: f64 },

    #[error("no spectral point: {0}")]
    NoSpectralPoint(String),

    #[error("degenerate mean: {0:e}")]
    DegenerateMean(f64),

    #[error("exact rational mode unavailable: {0}")]
    ExactModeUnavailable(String),

    #[error("floating point overflow at n = {n}; rerun with extended precision (RENEWAL_ASYM_PRECISION=106)")]
    Overflow { n: usize },

    #[error("implicit diagonal breakdown at t = {t}: 1 - h w(t,0)/2 = {denominator:e}; reduce the step")]
    DiagonalBreakdown { t: f64, denominator: f64 },

    #[error("need at least {needed} nodes, found {found}")]
    InsufficientNodes { found: usize, needed: usize },

    #[error("non-positive sample g({t}) = {value:e}")]
    NonPositiveSample { t: f64, value: f64 },

    #[error("estimation window is empty")]
    WindowEmpty,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("1 - A(s) = {0:e} too close to zero; evaluate at larger s")]
    NearSingular(f64),

    #[error("perturbation kernel is nonzero; a solved trace is required for C(s)")]
    MissingTrace,

    #[error("trace horizon {horizon} too short for s = {s} (need s*T >= 5)")]
    HorizonTooShort { horizon: f64, s: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot parse rational {0:?}")]
    ParseRational(String),

    #[error("unknown corpus entry {0:?}")]
    UnknownEntry(String),
}

pub type Result<T> = std::result::Result<T, Error>;
