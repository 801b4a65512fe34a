use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("duplicate mode label `{0}`")]
    DuplicateMode(String),

    #[error("mode `{label}` has dimension {dim}; at least 2 levels are required")]
    BadDimension { label: String, dim: usize },

    #[error("operator spaces differ: [{left}] vs [{right}]")]
    SpaceMismatch { left: String, right: String },

    #[error("level {level} out of range for mode `{mode}` (dimension {dim})")]
    LevelOutOfRange { mode: String, level: usize, dim: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unphysical circuit parameters: {0}")]
    Unphysical(String),

    #[error("mode `{mode}` is unstable at flux {flux} rad (inverse inductance {value:e})")]
    UnstableMode { mode: String, flux: f64, value: f64 },

    #[error("degenerate modes: {0}")]
    DegenerateModes(String),

    #[error("unsupported drive configuration: {0}")]
    UnsupportedDrives(String),

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {0} exhausted")]
    StepBudget(usize),

    #[error("steady state is not unique (null space dimension {0})")]
    NonUniqueSteadyState(usize),

    #[error("steady state requires {0}")]
    SteadyStatePrecondition(&'static str),

    #[error("port mismatch: {0}")]
    PortMismatch(String),

    #[error("singular feedback loop: |1 - S| = {0:e}")]
    SingularFeedback(f64),

    #[error("scattering matrix is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("operator is not representable in the supplied basis (residual {0:e})")]
    NotInBasis(f64),

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("records are not uniformly sampled")]
    NonUniformSampling,

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
