use thiserror::Error;

pub type Result<T, E = SteppError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteppError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter vector: {0}")]
    InvalidParams(String),

    #[error("actor `{0}` is not present in the previous wave")]
    NotPersistent(String),

    #[error("covariate {covariate} level {level} is outside its declared support")]
    OutOfSupport { covariate: usize, level: usize },

    #[error("degenerate transition distribution: total weight is zero")]
    DegenerateEtd,

    #[error("every covariate configuration has zero probability")]
    ZeroMass,

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("need at least two waves")]
    TooFewWaves,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("alignment of wave {wave} failed: {reason}")]
    Alignment { wave: usize, reason: String },

    #[error("deviance {0} is negative: fitted parameters are not a maximizer")]
    NegativeDeviance(f64),

    #[error("rescaling needs a positive total of spatial coefficients")]
    ZeroScale,
}
