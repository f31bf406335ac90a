//! Key distillation: finite-key length optimization, LDPC reconciliation
//! and Toeplitz privacy amplification.

pub mod amplify;
pub mod bp;
pub mod error;
pub mod finite_key;
pub mod keyfile;
pub mod ldpc;
pub mod reconcile;

pub use error::{KeyError, Result};
pub use finite_key::{is_secure, optimize_key_length, FiniteKeyParams, Formulas};
pub use ldpc::LdpcCode;
pub use reconcile::Reconciler;
