//! Syndrome-based error correction with a bank of rate-matched PEG codes,
//! followed by hash verification.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qlink_core::{KeyBlock, KeyStatus};

use crate::amplify::verification_tag;
use crate::bp::{bp_decode_syndrome, DEFAULT_MAX_ITER};
use crate::error::{KeyError, Result};
use crate::finite_key::binary_entropy;
use crate::ldpc::{degree_sequence, peg_construct, LdpcCode};

pub const QBER_MIN: f64 = 0.04955;
pub const QBER_MAX: f64 = 0.10;
/// Upper edge and rate of the lowest bucket.
pub const FIRST_EDGE: f64 = 0.053655;
pub const FIRST_RATE: f64 = 0.67;
/// Efficiency the remaining rates are designed for.
pub const DESIGN_EFFICIENCY: f64 = 1.10;
pub const BUCKETS: usize = 8;
pub const TAG_BITS: u64 = 64;

/// Node-perspective variable degree profile shared by every rate.
pub const DEGREE_PROFILE: [(usize, f64); 4] = [(2, 0.33), (3, 0.45), (11, 0.12), (20, 0.1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub rate: f64,
}

/// The lowest bucket is fixed; the rest of the range is split evenly and
/// each rate leaves `DESIGN_EFFICIENCY` times the Shannon leakage at the
/// bucket's upper edge.
pub fn buckets() -> [Bucket; BUCKETS] {
    let width = (QBER_MAX - FIRST_EDGE) / (BUCKETS - 1) as f64;
    std::array::from_fn(|k| {
        if k == 0 {
            Bucket {
                lo: QBER_MIN,
                hi: FIRST_EDGE,
                rate: FIRST_RATE,
            }
        } else {
            let hi = if k == BUCKETS - 1 { QBER_MAX } else { FIRST_EDGE + k as f64 * width };
            Bucket {
                lo: FIRST_EDGE + (k - 1) as f64 * width,
                hi,
                rate: 1.0 - DESIGN_EFFICIENCY * binary_entropy(hi),
            }
        }
    })
}

pub fn bucket_index(qber: f64) -> Result<usize> {
    if !(QBER_MIN..=QBER_MAX).contains(&qber) {
        return Err(KeyError::Range {
            qber,
            lo: QBER_MIN,
            hi: QBER_MAX,
        });
    }
    Ok(buckets().iter().position(|b| qber <= b.hi).unwrap_or(BUCKETS - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Verified,
    /// Decoder stopped without matching the syndrome.
    NotConverged,
    /// Syndrome matched but the verification tags differ.
    TagMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub index: usize,
    pub status: BlockStatus,
    pub iterations: usize,
    /// Bits corrected on side b.
    pub flips: usize,
    /// Syndrome bits over n·h2 of the corrected error fraction.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    /// Verified blocks only, on both sides.
    pub key_a: KeyBlock,
    pub key_b: KeyBlock,
    pub bucket: usize,
    /// Syndrome bits sent for all attempted blocks.
    pub leakage_bits: u64,
    pub tag_bits: u64,
    /// leakage / (attempted bits · h2(Ē)).
    pub f_measured: f64,
    pub blocks: Vec<BlockReport>,
}

impl Reconciled {
    pub fn frame_success(&self) -> f64 {
        if self.blocks.is_empty() {
            return 0.0;
        }
        self.blocks.iter().filter(|b| b.status == BlockStatus::Verified).count() as f64 / self.blocks.len() as f64
    }
}

/// A bank of codes, one per bucket, built on first use.
pub struct Reconciler {
    pub n_v: usize,
    pub seed: u64,
    pub max_iter: usize,
    codes: Vec<OnceLock<LdpcCode>>,
}

impl Reconciler {
    pub fn new(n_v: usize, seed: u64) -> Self {
        Self {
            n_v,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            codes: (0..BUCKETS).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn checks(&self, bucket: usize) -> usize {
        ((1.0 - buckets()[bucket].rate) * self.n_v as f64).round() as usize
    }

    pub fn code(&self, bucket: usize) -> Result<&LdpcCode> {
        if let Some(c) = self.codes[bucket].get() {
            return Ok(c);
        }
        let deg = degree_sequence(self.n_v, &DEGREE_PROFILE);
        let code = peg_construct(self.n_v, self.checks(bucket), &deg, self.seed.wrapping_add(bucket as u64))?;
        Ok(self.codes[bucket].get_or_init(|| code))
    }

    /// Corrects `b` toward `a` block by block. Trailing bits that do not
    /// fill a block are dropped; blocks that fail are discarded.
    pub fn reconcile(&self, a: &KeyBlock, b: &KeyBlock, qber: f64) -> Result<Reconciled> {
        if a.len() != b.len() {
            return Err(KeyError::BlockLength {
                got: b.len(),
                expected: a.len(),
            });
        }
        let bucket = bucket_index(qber)?;
        let code = self.code(bucket)?;
        let n = self.n_v;
        let n_blocks = a.len() / n;
        let reports: Vec<(BlockReport, Option<Vec<u8>>)> = (0..n_blocks)
            .into_par_iter()
            .map(|k| -> Result<_> {
                let (xa, xb) = (&a.bits[k * n..(k + 1) * n], &b.bits[k * n..(k + 1) * n]);
                let d = bp_decode_syndrome(code, xb, &code.syndrome(xa), qber, self.max_iter)?;
                let flips = d.bits.iter().zip(xb).filter(|(x, y)| x != y).count();
                let tag_seed = self.seed ^ (k as u64).rotate_left(32);
                let status = if !d.converged {
                    BlockStatus::NotConverged
                } else if verification_tag(xa, tag_seed) != verification_tag(&d.bits, tag_seed) {
                    BlockStatus::TagMismatch
                } else {
                    BlockStatus::Verified
                };
                let h = binary_entropy(flips as f64 / n as f64);
                let report = BlockReport {
                    index: k,
                    status,
                    iterations: d.iterations,
                    flips,
                    efficiency: (status == BlockStatus::Verified && h > 0.0).then(|| code.n_c as f64 / (n as f64 * h)),
                };
                Ok((report, (status == BlockStatus::Verified).then_some(d.bits)))
            })
            .collect::<Result<_>>()?;
        let mut bits_a = Vec::new();
        let mut bits_b = Vec::new();
        for (r, corrected) in &reports {
            if let Some(c) = corrected {
                bits_a.extend_from_slice(&a.bits[r.index * n..(r.index + 1) * n]);
                bits_b.extend_from_slice(c);
            }
        }
        let leakage_bits = (n_blocks * code.n_c) as u64;
        let tag_bits = n_blocks as u64 * TAG_BITS;
        let mut key_a = KeyBlock::sifted(bits_a, qber);
        let mut key_b = KeyBlock::sifted(bits_b, qber);
        let kept = (key_a.len() / n) as u64;
        for key in [&mut key_a, &mut key_b] {
            key.leak(kept * (code.n_c as u64 + TAG_BITS))?;
            key.advance(KeyStatus::Reconciled)?;
            key.advance(KeyStatus::Verified)?;
        }
        let attempted = (n_blocks * n) as f64;
        Ok(Reconciled {
            key_a,
            key_b,
            bucket,
            leakage_bits,
            tag_bits,
            f_measured: if attempted > 0.0 { leakage_bits as f64 / (attempted * binary_entropy(qber)) } else { f64::NAN },
            blocks: reports.into_iter().map(|r| r.0).collect(),
        })
    }
}
