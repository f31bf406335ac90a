use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CryptoError {
    #[error("key underrun: {needed} bits needed, {available} available")]
    KeyUnderrun { needed: usize, available: usize },
    #[error("image must be square with side >= 2, got {width}x{height}")]
    Shape { width: usize, height: usize },
    #[error("rectangle ({x}, {y}, {w}, {h}) outside a {n}x{n} image")]
    Bounds { x: usize, y: usize, w: usize, h: usize, n: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("malformed PGM: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CryptoError>;
