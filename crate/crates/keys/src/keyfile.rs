//! Binary key files: a 16-byte header followed by the bits packed
//! most-significant first.
//!
//! Header: magic "QKEY", u16 version, u8 status, u8 reserved, u64 bit
//! length, all little-endian.

use std::io::{Read, Write};

use qlink_core::{KeyBlock, KeyStatus};

use crate::error::{KeyError, Result};

pub const MAGIC: [u8; 4] = *b"QKEY";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

fn status_code(s: KeyStatus) -> u8 {
    match s {
        KeyStatus::Sifted => 0,
        KeyStatus::Reconciled => 1,
        KeyStatus::Verified => 2,
        KeyStatus::Amplified => 3,
    }
}

fn status_from(code: u8) -> Result<KeyStatus> {
    Ok(match code {
        0 => KeyStatus::Sifted,
        1 => KeyStatus::Reconciled,
        2 => KeyStatus::Verified,
        3 => KeyStatus::Amplified,
        c => {
            return Err(KeyError::Format {
                what: "key file",
                reason: format!("unknown status {c}"),
            })
        }
    })
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (7 - i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

pub fn encode(key: &KeyBlock) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + key.len().div_ceil(8));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(status_code(key.status));
    out.push(0);
    out.extend_from_slice(&(key.len() as u64).to_le_bytes());
    out.extend_from_slice(&pack_bits(&key.bits));
    out
}

/// The QBER and leakage are not stored; the block comes back with QBER 0
/// and no recorded leakage.
pub fn decode(bytes: &[u8]) -> Result<KeyBlock> {
    let bad = |reason: String| KeyError::Format {
        what: "key file",
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes, shorter than the header", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let status = status_from(bytes[6])?;
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != len.div_ceil(8) {
        return Err(bad(format!("{len} bits need {} bytes, found {}", len.div_ceil(8), body.len())));
    }
    Ok(KeyBlock {
        bits: unpack_bits(body, len),
        qber: 0.0,
        leakage_bits: 0,
        status,
    })
}

pub fn write_key<W: Write>(mut w: W, key: &KeyBlock) -> std::io::Result<()> {
    w.write_all(&encode(key))
}

pub fn read_key<R: Read>(mut r: R) -> Result<KeyBlock> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| KeyError::Format {
        what: "key file",
        reason: e.to_string(),
    })?;
    decode(&buf)
}
