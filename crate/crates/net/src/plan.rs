//! DWDM channel allocation for a fully connected network: every pair of
//! users shares one energy-conjugate channel pair.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// ITU DWDM channel number on the 100 GHz grid, f = 190 THz + n·100 GHz.
pub fn channel_thz(ch: u32) -> f64 {
    190.0 + 0.1 * ch as f64
}

pub fn channel_nm(ch: u32) -> f64 {
    qlink_core::units::LIGHT_SPEED_NM_PER_PS / channel_thz(ch)
}

/// Degenerate wavelength of the source.
pub const DEGENERATE_NM: f64 = 1560.16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelPair {
    /// Goes to the first user of the pair.
    pub first: u32,
    pub second: u32,
}

impl ChannelPair {
    pub const fn new(first: u32, second: u32) -> Self {
        Self { first, second }
    }

    /// |1/λ_1 + 1/λ_2 − 2/λ_deg| expressed in GHz.
    pub fn conjugacy_error_ghz(&self, degenerate_nm: f64) -> f64 {
        let c = qlink_core::units::LIGHT_SPEED_NM_PER_PS;
        (channel_thz(self.first) + channel_thz(self.second) - 2.0 * c / degenerate_nm).abs() * 1e3
    }
}

/// Conjugate pairs of the three-user demonstration, ordered so that the
/// first channel of each goes to the lower-indexed user.
pub fn reference_pairs() -> Vec<ChannelPair> {
    vec![ChannelPair::new(32, 11), ChannelPair::new(13, 30), ChannelPair::new(9, 34)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAssignment {
    pub a: usize,
    pub b: usize,
    pub pair: ChannelPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthPlan {
    pub users: Vec<String>,
    pub links: Vec<LinkAssignment>,
}

impl WavelengthPlan {
    /// Channels received by a user, in link order.
    pub fn user_channels(&self, user: usize) -> Vec<u32> {
        self.links
            .iter()
            .filter_map(|l| {
                if l.a == user {
                    Some(l.pair.first)
                } else if l.b == user {
                    Some(l.pair.second)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn link(&self, a: usize, b: usize) -> Option<&LinkAssignment> {
        self.links.iter().find(|l| (l.a, l.b) == (a.min(b), a.max(b)))
    }

    /// Position of a channel within its user's channel list.
    pub fn channel_slot(&self, user: usize, ch: u32) -> Option<usize> {
        self.user_channels(user).iter().position(|c| *c == ch)
    }
}

/// Assigns the k-th user pair, in lexicographic order, to the k-th
/// conjugate channel pair.
pub fn allocate_channels(users: &[String], pairs: &[ChannelPair], degenerate_nm: f64) -> Result<WavelengthPlan> {
    let n = users.len();
    let needed = n * n.saturating_sub(1) / 2;
    if pairs.len() < needed {
        return Err(NetError::Capacity {
            users: n,
            needed,
            available: pairs.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut links = Vec::with_capacity(needed);
    let mut k = 0;
    for a in 0..n {
        for b in a + 1..n {
            let pair = pairs[k];
            k += 1;
            if pair.conjugacy_error_ghz(degenerate_nm) > 100.0 {
                return Err(NetError::NotConjugate(pair.first, pair.second));
            }
            for ch in [pair.first, pair.second] {
                if !seen.insert(ch) {
                    return Err(NetError::ChannelReuse(ch));
                }
            }
            links.push(LinkAssignment { a, b, pair });
        }
    }
    Ok(WavelengthPlan {
        users: users.to_vec(),
        links,
    })
}

/// All conjugate pairs on the 100 GHz grid between two channel numbers,
/// innermost first.
pub fn conjugate_pairs(lo: u32, hi: u32, degenerate_nm: f64) -> Vec<ChannelPair> {
    let c = qlink_core::units::LIGHT_SPEED_NM_PER_PS;
    let center = (c / degenerate_nm - 190.0) * 10.0;
    let mut out = Vec::new();
    for upper in lo..=hi {
        let lower_f = 2.0 * center - upper as f64;
        let lower = lower_f.round();
        if lower < lo as f64 || lower >= upper as f64 || (lower - lower_f).abs() > 0.5 {
            continue;
        }
        out.push(ChannelPair::new(upper, lower as u32));
    }
    out.sort_by(|a, b| (a.first - a.second).cmp(&(b.first - b.second)));
    out
}
