//! Sum-product decoding on log-likelihood ratios.

use crate::error::{KeyError, Result};
use crate::ldpc::LdpcCode;

pub const DEFAULT_MAX_ITER: usize = 50;
const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

/// Edges numbered in check order.
struct Layout {
    chk_start: Vec<usize>,
    edge_var: Vec<u32>,
}

impl Layout {
    fn new(code: &LdpcCode) -> Self {
        let mut chk_start = Vec::with_capacity(code.n_c + 1);
        let mut edge_var = Vec::new();
        chk_start.push(0);
        for vs in &code.chk_adj {
            for &v in vs {
                edge_var.push(v);
            }
            chk_start.push(edge_var.len());
        }
        Self { chk_start, edge_var }
    }
}

fn matches(code: &LdpcCode, bits: &[u8], target: &[u8]) -> bool {
    code.chk_adj
        .iter()
        .zip(target)
        .all(|(vs, &s)| vs.iter().fold(0u8, |x, &v| x ^ bits[v as usize]) == s & 1)
}

/// Decodes `bits` as a noisy copy of a word whose syndrome is `target`,
/// with each bit flipped independently with probability `q`.
pub fn bp_decode_syndrome(code: &LdpcCode, bits: &[u8], target: &[u8], q: f64, max_iter: usize) -> Result<Decoded> {
    if bits.len() != code.n_v {
        return Err(KeyError::BlockLength {
            got: bits.len(),
            expected: code.n_v,
        });
    }
    if target.len() != code.n_c {
        return Err(KeyError::BlockLength {
            got: target.len(),
            expected: code.n_c,
        });
    }
    if !(q > 0.0 && q < 0.5) {
        return Err(qlink_core::Error::Domain {
            what: "crossover probability",
            value: q,
            lo: 0.0,
            hi: 0.5,
        }
        .into());
    }
    let mut hard: Vec<u8> = bits.iter().map(|b| b & 1).collect();
    if matches(code, &hard, target) {
        return Ok(Decoded {
            bits: hard,
            converged: true,
            iterations: 0,
        });
    }
    let lay = Layout::new(code);
    let l0 = ((1.0 - q) / q).ln();
    // Layered schedule: checks are updated one after another against the
    // running posterior, so each sweep propagates information further than
    // a flooding iteration.
    let mut post: Vec<f64> = hard.iter().map(|&b| if b == 0 { l0 } else { -l0 }).collect();
    let mut c2v = vec![0.0; lay.edge_var.len()];
    let mut v2c = Vec::new();
    let mut fwd = Vec::new();
    for it in 1..=max_iter {
        for c in 0..code.n_c {
            let (s, e) = (lay.chk_start[c], lay.chk_start[c + 1]);
            let sign = if target[c] & 1 == 1 { -1.0 } else { 1.0 };
            v2c.clear();
            fwd.clear();
            let mut acc = 1.0;
            for k in s..e {
                let m = (post[lay.edge_var[k] as usize] - c2v[k]).clamp(-LLR_CLAMP, LLR_CLAMP);
                v2c.push(m);
                fwd.push(acc);
                acc *= (m / 2.0).tanh();
            }
            let mut back = 1.0;
            for k in (s..e).rev() {
                let t = (sign * fwd[k - s] * back).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                let msg = (2.0 * t.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                back *= (v2c[k - s] / 2.0).tanh();
                post[lay.edge_var[k] as usize] = v2c[k - s] + msg;
                c2v[k] = msg;
            }
        }
        for (h, p) in hard.iter_mut().zip(&post) {
            *h = (*p < 0.0) as u8;
        }
        if matches(code, &hard, target) {
            return Ok(Decoded {
                bits: hard,
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(Decoded {
        bits: hard,
        converged: false,
        iterations: max_iter,
    })
}

/// Decodes toward the all-zero syndrome, i.e. a codeword.
pub fn bp_decode(code: &LdpcCode, bits: &[u8], q: f64, max_iter: usize) -> Result<Decoded> {
    bp_decode_syndrome(code, bits, &vec![0; code.n_c], q, max_iter)
}
