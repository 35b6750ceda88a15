use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("flat space excluded: every Killing constant vanishes")]
    Flat,
    #[error("non-positive coordinate")]
    NonPositive,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("infeasible constraint: {0}")]
    Infeasible(String),
    #[error("stratum {0} is not a subalgebra stratum")]
    NotSubalgebra(String),
    #[error("invalid base partition for stratum {stratum}: {reason}")]
    BadPartition { stratum: String, reason: String },
    #[error("constraint violated: tr_g T = {0}")]
    ConstraintViolated(f64),
    #[error("point is not critical: gradient norm {0:e}")]
    NotCritical(f64),
    #[error("unknown catalog space: {0}")]
    UnknownSpace(String),
    #[error("hypotheses not satisfied: {0}")]
    Hypothesis(String),
    #[error("parameter {value} outside ({lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("candidate tensor is not positive definite")]
    Indefinite,
    #[error("continuation failed: {0}")]
    Continuation(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
