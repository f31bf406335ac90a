//! Toeplitz hashing over GF(2), used for privacy amplification and for
//! the short verification tags exchanged after error correction.

use rand::Rng;

use crate::error::{KeyError, Result};

fn pack(bits: &[u8]) -> Vec<u64> {
    let mut w = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        w[i / 64] |= ((b & 1) as u64) << (i % 64);
    }
    w
}

/// Bits `start..start+len` of a packed vector, repacked from bit 0.
fn window(words: &[u64], start: usize, len: usize) -> Vec<u64> {
    let (q, r) = (start / 64, start % 64);
    (0..len.div_ceil(64))
        .map(|k| {
            let lo = words.get(q + k).copied().unwrap_or(0) >> r;
            let hi = if r == 0 { 0 } else { words.get(q + k + 1).copied().unwrap_or(0) << (64 - r) };
            lo | hi
        })
        .collect()
}

/// y = T·x for the `out_len`×n Toeplitz matrix whose diagonals are the
/// n + out_len − 1 bits of `diag`: T[i][j] = diag[out_len − 1 − i + j].
pub fn toeplitz_multiply(bits: &[u8], diag: &[u8], out_len: usize) -> Vec<u8> {
    let n = bits.len();
    if out_len == 0 || n == 0 {
        return vec![0; out_len];
    }
    assert_eq!(diag.len(), n + out_len - 1, "diagonal length");
    let x = pack(bits);
    let d = pack(diag);
    let tail_mask = if n % 64 == 0 { u64::MAX } else { (1u64 << (n % 64)) - 1 };
    (0..out_len)
        .map(|i| {
            let row = window(&d, out_len - 1 - i, n);
            let last = row.len() - 1;
            let ones: u32 = row
                .iter()
                .zip(&x)
                .enumerate()
                .map(|(k, (r, xw))| (if k == last { r & tail_mask } else { *r } & xw).count_ones())
                .sum();
            (ones & 1) as u8
        })
        .collect()
}

fn seeded_diagonal(n: usize, out_len: usize, seed: u64, label: &str) -> Vec<u8> {
    let mut rng = qlink_core::rng::stream(seed, label);
    (0..(n + out_len).saturating_sub(1)).map(|_| rng.random_range(0..2u8)).collect()
}

/// Compresses `key` to `l` bits with a seeded random Toeplitz matrix.
pub fn privacy_amplify(key: &[u8], l: usize, seed: u64) -> Result<Vec<u8>> {
    if l > key.len() {
        return Err(KeyError::Length {
            requested: l,
            available: key.len(),
        });
    }
    if l == 0 {
        return Ok(Vec::new());
    }
    Ok(toeplitz_multiply(key, &seeded_diagonal(key.len(), l, seed, "toeplitz"), l))
}

/// 64-bit tag from a seeded Toeplitz family; two different inputs collide
/// with probability 2^−64 over the seed.
pub fn verification_tag(bits: &[u8], seed: u64) -> u64 {
    toeplitz_multiply(bits, &seeded_diagonal(bits.len(), 64, seed, "verify"), 64)
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i)
}
