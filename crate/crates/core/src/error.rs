use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed monomial: {0}")]
    MalformedMonomial(String),
    #[error("index {index} outside cutoff {cutoff}")]
    OutOfRange { index: String, cutoff: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("envelope undefined for resonant tuple {0}")]
    ResonantTuple(String),
    #[error("enumeration too large: {estimate} tuples exceeds limit {limit}")]
    EnumerationTooLarge { estimate: u64, limit: u64 },
    #[error("classification failed for term {0}")]
    Classification(String),
    #[error("bad potential: {failures} divisor(s) below envelope, first {first}")]
    BadPotential { failures: usize, first: String },
    #[error("lie series diverged at order {order}: term norms {norms:?}")]
    LieDivergence { order: usize, norms: Vec<f64> },
    #[error("induction bound violated after {stage}: worst ratio {worst_ratio} at {term}")]
    InductionViolation {
        stage: String,
        worst_ratio: f64,
        term: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
