//! A block of key bits moving through sifting, reconciliation,
//! verification and amplification.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyStatus {
    Sifted,
    Reconciled,
    Verified,
    Amplified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyBlock {
    /// One bit per byte, each 0 or 1.
    pub bits: Vec<u8>,
    pub qber: f64,
    /// Bits disclosed over the public channel so far.
    pub leakage_bits: u64,
    pub status: KeyStatus,
}

impl KeyBlock {
    pub fn sifted(bits: Vec<u8>, qber: f64) -> Self {
        Self {
            bits,
            qber,
            leakage_bits: 0,
            status: KeyStatus::Sifted,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn advance(&mut self, next: KeyStatus) -> Result<()> {
        if next <= self.status {
            return Err(Error::Parameter {
                name: "status",
                reason: format!("cannot move from {:?} to {:?}", self.status, next),
            });
        }
        self.status = next;
        Ok(())
    }

    pub fn leak(&mut self, bits: u64) -> Result<()> {
        let total = self.leakage_bits + bits;
        if total > self.bits.len() as u64 && self.status < KeyStatus::Amplified {
            return Err(Error::Parameter {
                name: "leakage_bits",
                reason: format!("{total} disclosed bits exceed the block length {}", self.bits.len()),
            });
        }
        self.leakage_bits = total;
        Ok(())
    }
}
