//! Fully connected multiuser entanglement distribution at time-tag level:
//! channel allocation, delay-slot polarization encoding, coincidence
//! histograms, sifting and multi-interval sessions.

pub mod delay;
pub mod error;
pub mod histogram;
pub mod plan;
pub mod session;
pub mod sift;
pub mod timetag;

pub use error::{NetError, Result};
