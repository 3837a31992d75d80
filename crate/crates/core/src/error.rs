use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty pattern: matrix has no positive entry")]
    EmptyPattern,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid entry at ({row}, {col}): {reason}")]
    InvalidEntry { row: usize, col: usize, reason: String },
    #[error("Sinkhorn may diverge: no perfect matching")]
    NoSupport,
    #[error("infeasible reduced problem")]
    Infeasible,
    #[error("oracle size limit: n = {0} exceeds 10")]
    OracleSizeLimit(usize),
    #[error("matrix too large for {what}: n = {n} exceeds {limit}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("exponent range {exponent:.3} exceeds the floating-point range {limit:.3}; use the log-domain iteration")]
    ExponentRange { exponent: f64, limit: f64 },
    #[error("matrix is not square: {rows} x {cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("unknown instance family `{0}`")]
    UnknownFamily(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
