//! Coincidence classification by delay slot and basis sifting.

use qlink_core::KeyBlock;

use crate::delay::{DelayMap, Pol};
use crate::error::Result;
use crate::timetag::check_sorted;

/// The sixteen expected positions of t_b − t_a, one per joint outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTable {
    /// Sorted by position.
    pub slots: Vec<(i64, Pol, Pol)>,
}

impl PeakTable {
    pub fn from_maps(a: &DelayMap, channel_a: usize, b: &DelayMap, channel_b: usize, base_ps: i64) -> Self {
        let mut slots: Vec<(i64, Pol, Pol)> = Pol::ALL
            .iter()
            .flat_map(|&pa| {
                Pol::ALL
                    .iter()
                    .map(move |&pb| (base_ps + b.encode(pb, channel_b) - a.encode(pa, channel_a), pa, pb))
            })
            .collect();
        slots.sort_by_key(|s| s.0);
        Self { slots }
    }

    pub fn positions(&self) -> Vec<i64> {
        self.slots.iter().map(|s| s.0).collect()
    }

    pub fn range(&self) -> (i64, i64) {
        (self.slots[0].0, self.slots[self.slots.len() - 1].0)
    }

    /// Slot whose centre lies within ±half_window of `dt`.
    pub fn classify(&self, dt: i64, half_window: i64) -> Option<(Pol, Pol)> {
        let i = self.slots.partition_point(|s| s.0 < dt);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|k| self.slots.get(k))
            .filter(|s| (s.0 - dt).abs() <= half_window)
            .min_by_key(|s| (s.0 - dt).abs())
            .map(|s| (s.1, s.2))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftCounts {
    pub coincidences: u64,
    pub basis_mismatch: u64,
    pub z_total: u64,
    pub z_errors: u64,
    pub x_total: u64,
    pub x_errors: u64,
}

impl SiftCounts {
    pub fn sifted(&self) -> u64 {
        self.z_total + self.x_total
    }

    pub fn qber_z(&self) -> Option<f64> {
        (self.z_total > 0).then(|| self.z_errors as f64 / self.z_total as f64)
    }

    pub fn qber_x(&self) -> Option<f64> {
        (self.x_total > 0).then(|| self.x_errors as f64 / self.x_total as f64)
    }

    pub fn qber(&self) -> Option<f64> {
        (self.sifted() > 0).then(|| (self.z_errors + self.x_errors) as f64 / self.sifted() as f64)
    }

    pub fn add(&mut self, o: &SiftCounts) {
        self.coincidences += o.coincidences;
        self.basis_mismatch += o.basis_mismatch;
        self.z_total += o.z_total;
        self.z_errors += o.z_errors;
        self.x_total += o.x_total;
        self.x_errors += o.x_errors;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sifted {
    pub a_bits: Vec<u8>,
    pub b_bits: Vec<u8>,
    pub counts: SiftCounts,
}

impl Sifted {
    pub fn key_blocks(&self) -> (KeyBlock, KeyBlock) {
        let q = self.counts.qber().unwrap_or(0.5);
        (KeyBlock::sifted(self.a_bits.clone(), q), KeyBlock::sifted(self.b_bits.clone(), q))
    }
}

/// Pairs every detection on side a with every detection on side b whose
/// time difference falls within half a window of a peak, then keeps the
/// events where both sides measured in the same basis. The target state
/// is anticorrelated in Z, so b's Z bit is flipped.
pub fn sift(a: &[u64], b: &[u64], table: &PeakTable, window_ps: i64) -> Result<Sifted> {
    check_sorted(a)?;
    check_sorted(b)?;
    let half = window_ps / 2;
    let (lo, hi) = table.range();
    let (lo, hi) = (lo - half, hi + half);
    let mut out = Sifted {
        a_bits: Vec::new(),
        b_bits: Vec::new(),
        counts: SiftCounts::default(),
    };
    let mut start = 0usize;
    for &ta in a {
        let ta = ta as i64;
        while start < b.len() && (b[start] as i64) - ta < lo {
            start += 1;
        }
        for &tb in &b[start..] {
            let dt = tb as i64 - ta;
            if dt > hi {
                break;
            }
            let Some((pa, pb)) = table.classify(dt, half) else {
                continue;
            };
            let c = &mut out.counts;
            c.coincidences += 1;
            if pa.is_x() != pb.is_x() {
                c.basis_mismatch += 1;
                continue;
            }
            let bit_a = pa.bit();
            let bit_b = if pa.is_x() { pb.bit() } else { 1 - pb.bit() };
            let err = (bit_a != bit_b) as u64;
            if pa.is_x() {
                c.x_total += 1;
                c.x_errors += err;
            } else {
                c.z_total += 1;
                c.z_errors += err;
            }
            out.a_bits.push(bit_a);
            out.b_bits.push(bit_b);
        }
    }
    Ok(out)
}
