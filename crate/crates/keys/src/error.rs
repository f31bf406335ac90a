use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyError {
    #[error("parameter-estimation radicand {0:e} is negative")]
    FormulaDomain(f64),
    #[error("infeasible degree sequence: {0}")]
    Construction(String),
    #[error("error rate {qber} outside the reconciliation range [{lo}, {hi}]")]
    Range { qber: f64, lo: f64, hi: f64 },
    #[error("requested {requested} bits from a {available}-bit key")]
    Length { requested: usize, available: usize },
    #[error("block length {got} does not match the code length {expected}")]
    BlockLength { got: usize, expected: usize },
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] qlink_core::Error),
}

pub type Result<T> = std::result::Result<T, KeyError>;
