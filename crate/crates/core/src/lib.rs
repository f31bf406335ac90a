//! Physical models for a coexistence entanglement-distribution link: the
//! chip photon-pair source, waveguide modes, Raman and qubit noise, and
//! frequency-subspace bookkeeping.

pub mod coexist_noise;
pub mod error;
pub mod key_block;
pub mod optics_modes;
pub mod rng;
pub mod spdc_source;
pub mod state;
pub mod subspace_coding;
pub mod units;

pub use error::{Error, Result};
pub use key_block::{KeyBlock, KeyStatus};
pub use state::TwoQubitState;
