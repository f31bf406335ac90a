//! Applications that consume distributed keys: a confusion–diffusion image
//! cipher with a cropping-attack harness, and XOR secret sharing among
//! three users.

pub mod attack;
pub mod cipher;
pub mod error;
pub mod image;
pub mod keystream;
pub mod qss;

pub use error::{CryptoError, Result};
pub use image::GrayImage;
pub use keystream::KeyStream;
