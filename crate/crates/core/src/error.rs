use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot parse sequence spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },

    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("sequence is not non-increasing and positive at n = {n} (mu_n = {value})")]
    Monotonicity { n: u64, value: f64 },

    #[error("index {index} is outside the safe evaluation domain of `{family}`")]
    IndexTooLarge { family: String, index: String },

    #[error("index {n} is beyond the end of an explicit list of length {len}")]
    BeyondList { n: u64, len: u64 },

    #[error("summability class of `{0}` is undetermined; S_n is unavailable")]
    UndeterminedSummability(String),

    #[error("integral sequence vanishes at n = {0}; ratio is undefined")]
    DegenerateIntegral(String),

    #[error("underflow of mu_n(T) at n = {0}")]
    Underflow(u64),

    #[error("matrix is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix dimension {0} exceeds the supported maximum of 64")]
    DimensionTooLarge(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("no witnesses p_k found up to horizon {0}")]
    NoWitness(u64),

    #[error("horizon {horizon} too small to evaluate n = {n}")]
    HorizonExceeded { horizon: u64, n: u64 },

    #[error("index overflow: {0}")]
    Overflow(String),

    #[error("invalid window or set: {0}")]
    InvalidWindow(String),

    #[error("i/o error: {0}")]
    Io(String),
}
