use crate::error::{CryptoError, Result};

/// Key bits consumed front to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyStream {
    bits: Vec<u8>,
    cursor: usize,
}

impl KeyStream {
    /// One bit per byte; only the low bit of each entry is used.
    pub fn new(bits: Vec<u8>) -> Self {
        Self {
            bits: bits.into_iter().map(|b| b & 1).collect(),
            cursor: 0,
        }
    }

    /// Bits of `bytes`, most significant first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::new(bytes.iter().flat_map(|&b| (0..8).rev().map(move |k| (b >> k) & 1)).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn position(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn seek(&mut self, pos: usize) -> Result<()> {
        if pos > self.bits.len() {
            return Err(CryptoError::KeyUnderrun {
                needed: pos,
                available: self.bits.len(),
            });
        }
        self.cursor = pos;
        Ok(())
    }

    pub fn require(&self, bits: usize) -> Result<()> {
        if bits > self.remaining() {
            return Err(CryptoError::KeyUnderrun {
                needed: bits,
                available: self.remaining(),
            });
        }
        Ok(())
    }

    /// Next `bits` (at most 32) as an unsigned integer, first bit most
    /// significant.
    pub fn fetch(&mut self, bits: usize) -> Result<u32> {
        assert!(bits <= 32);
        self.require(bits)?;
        let v = self.bits[self.cursor..self.cursor + bits].iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
        self.cursor += bits;
        Ok(v)
    }

    pub fn fetch_byte(&mut self) -> Result<u8> {
        self.fetch(8).map(|v| v as u8)
    }
}
