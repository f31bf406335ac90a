//! Polarization, basis and channel to arrival-time encoding at a receiver.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
    D,
    A,
}

impl Pol {
    pub const ALL: [Pol; 4] = [Pol::H, Pol::V, Pol::D, Pol::A];

    pub fn from_parts(x_basis: bool, bit: bool) -> Self {
        match (x_basis, bit) {
            (false, false) => Pol::H,
            (false, true) => Pol::V,
            (true, false) => Pol::D,
            (true, true) => Pol::A,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Pol::D | Pol::A)
    }

    pub fn bit(self) -> u8 {
        matches!(self, Pol::V | Pol::A) as u8
    }

    pub fn index(self) -> usize {
        2 * self.is_x() as usize + self.bit() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayMap {
    pub pol_ps: i64,
    pub basis_ps: i64,
    pub channel_ps: i64,
    pub channels: usize,
}

impl DelayMap {
    /// Builds a map whose composite offsets are pairwise more than
    /// `min_separation_ps` apart.
    pub fn new(pol_ps: i64, basis_ps: i64, channel_ps: i64, channels: usize, min_separation_ps: i64) -> Result<Self> {
        let m = Self {
            pol_ps,
            basis_ps,
            channel_ps,
            channels,
        };
        let mut offs: Vec<i64> = m.slots().map(|s| s.2).collect();
        offs.sort();
        for w in offs.windows(2) {
            if w[1] - w[0] <= min_separation_ps {
                return Err(NetError::SlotCollision {
                    a: w[0],
                    b: w[1],
                    min: min_separation_ps,
                });
            }
        }
        Ok(m)
    }

    /// Maps for several users laid out in base 4 so that the difference of
    /// any two users' offsets identifies all four slots on each side.
    pub fn for_user(index: usize, users: usize, unit_ps: i64, channels: usize, min_separation_ps: i64) -> Result<Self> {
        let scale = 4i64.pow(index as u32);
        Self::new(
            unit_ps * scale,
            2 * unit_ps * scale,
            unit_ps * 4i64.pow(users as u32),
            channels,
            min_separation_ps,
        )
    }

    pub fn encode(&self, pol: Pol, channel: usize) -> i64 {
        self.pol_ps * pol.bit() as i64 + self.basis_ps * pol.is_x() as i64 + self.channel_ps * channel as i64
    }

    pub fn slots(&self) -> impl Iterator<Item = (Pol, usize, i64)> + '_ {
        (0..self.channels).flat_map(move |ch| Pol::ALL.into_iter().map(move |p| (p, ch, self.encode(p, ch))))
    }

    /// Nearest slot within `tolerance_ps` of an offset.
    pub fn decode(&self, offset_ps: i64, tolerance_ps: i64) -> Option<(Pol, usize)> {
        self.slots()
            .map(|(p, c, o)| ((o - offset_ps).abs(), p, c))
            .filter(|(d, _, _)| *d <= tolerance_ps)
            .min_by_key(|(d, _, _)| *d)
            .map(|(_, p, c)| (p, c))
    }

    pub fn span_ps(&self) -> i64 {
        self.slots().map(|s| s.2).max().unwrap_or(0)
    }
}
