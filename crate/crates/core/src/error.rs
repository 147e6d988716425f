use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input coordinate was NaN or infinite.
    #[error("non-finite input at coordinate {0}")]
    NonFiniteInput(usize),

    /// A point had the wrong dimension for the objective.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A constructor argument was out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Multiplicative noise level below the representable floor.
    #[error("multiplicative level must satisfy b >= 1/3 (got {0}): the draw interval half-width sqrt(3b-1) is undefined below it")]
    NoiseLevelTooSmall(f64),

    /// The objective gap `F(x) - F_min` handed to an oracle was negative.
    #[error("negative objective gap {0}: F(x) - F_min must be >= 0")]
    NegativeGap(f64),

    /// An empty sampling domain was given to a checker.
    #[error("empty domain: lo {lo} must be strictly below hi {hi}")]
    EmptyDomain { lo: f64, hi: f64 },

    /// The stepsize/bound combination fails the positivity condition; the
    /// engine refuses to run it unless the override flag is set.
    #[error("schedule rejected: min_k alpha_k (1 - alpha_k b_k beta / 2) = {min_value} is not strictly positive; set the force flag to run anyway")]
    ScheduleRejected { min_value: f64 },

    /// The monotone-ratio condition is undefined when some `b_k` vanishes.
    #[error("monotone ratio undefined at k = {k}: b_k = 0; use a positive floor for the b sequence")]
    UndefinedRatio { k: u64 },

    /// Exponent estimation found no sample with a usable objective gap.
    #[error("no exponent data: every sampled gap |F(x) - F*| vanished; sample closer to the component boundary, outside any flat region")]
    NoExponentData,

    /// A probe asked for an iteration the trajectory record does not store.
    #[error("iteration {0} is not stored in the trajectory record")]
    MissingProbeState(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
