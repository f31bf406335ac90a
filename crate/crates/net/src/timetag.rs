//! Time-tag generation for one two-user link: Poisson pair arrivals,
//! passive basis choice, Born-rule outcomes, loss thinning, background
//! singles, delay encoding, jitter and detector dead time.

use std::io::{Read, Write};

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};

use qlink_core::TwoQubitState;

use crate::delay::{DelayMap, Pol};
use crate::error::{NetError, Result};

pub const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub t_ps: u64,
    pub detector: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    pub events: Vec<TimeTag>,
    pub duration_s: f64,
    pub seed: u64,
}

impl TimeTagStream {
    pub fn timestamps(&self) -> Vec<u64> {
        self.events.iter().map(|e| e.t_ps).collect()
    }

    pub fn check_sorted(&self) -> Result<()> {
        check_sorted(&self.timestamps())
    }

    /// Little-endian records of (u64 timestamp_ps, u16 detector).
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            w.write_all(&e.t_ps.to_le_bytes())?;
            w.write_all(&e.detector.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, duration_s: f64, seed: u64) -> std::io::Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() % 10 != 0 {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated record"));
        }
        let events = buf
            .chunks_exact(10)
            .map(|c| TimeTag {
                t_ps: u64::from_le_bytes(c[..8].try_into().unwrap()),
                detector: u16::from_le_bytes(c[8..].try_into().unwrap()),
            })
            .collect();
        Ok(Self {
            events,
            duration_s,
            seed,
        })
    }
}

pub fn check_sorted(t: &[u64]) -> Result<()> {
    match t.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(NetError::Ordering(i + 1)),
        None => Ok(()),
    }
}

/// One receiver as seen by the link simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub detector: u16,
    /// Probability that a link photon is registered (before dead time).
    pub efficiency: f64,
    /// Channel index of the link photon within this user's delay map.
    pub channel: usize,
    /// Uncorrelated detected photons per second on each channel index
    /// (Raman and unpartnered source photons), before dead time.
    pub background_hz: Vec<f64>,
    pub dark_hz: f64,
    pub jitter_ps: f64,
    pub dead_time_ps: u64,
    pub propagation_ps: u64,
    pub delays: DelayMap,
}

impl Endpoint {
    /// Detected singles before dead time.
    pub fn incident_rate(&self, pair_rate_hz: f64) -> f64 {
        pair_rate_hz * self.efficiency + self.background_hz.iter().sum::<f64>() + self.dark_hz
    }
}

fn pol_vector(p: Pol) -> Vector2<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    match p {
        Pol::H => Vector2::new(c(1.0), c(0.0)),
        Pol::V => Vector2::new(c(0.0), c(1.0)),
        Pol::D => Vector2::new(c(s), c(s)),
        Pol::A => Vector2::new(c(s), c(-s)),
    }
}

/// Joint outcome probabilities for each of the four basis combinations,
/// indexed [2·x_a + x_b][2·bit_a + bit_b].
pub fn outcome_table(state: &TwoQubitState) -> [[f64; 4]; 4] {
    let mut t = [[0.0; 4]; 4];
    for (k, row) in t.iter_mut().enumerate() {
        let (xa, xb) = (k & 2 != 0, k & 1 != 0);
        let mut total = 0.0;
        for (o, cell) in row.iter_mut().enumerate() {
            let pa = Pol::from_parts(xa, o & 2 != 0);
            let pb = Pol::from_parts(xb, o & 1 != 0);
            *cell = state.outcome_weight(&pol_vector(pa), &pol_vector(pb)).max(0.0);
            total += *cell;
        }
        row.iter_mut().for_each(|c| *c /= total);
    }
    t
}

fn sample_index(rng: &mut ChaCha20Rng, probs: &[f64; 4]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    3
}

fn poisson(rng: &mut ChaCha20Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

struct Emitter<'a> {
    end: &'a Endpoint,
    jitter: Option<Normal<f64>>,
    horizon: u64,
    out: Vec<u64>,
}

impl<'a> Emitter<'a> {
    fn new(end: &'a Endpoint, horizon: u64, capacity: usize) -> Self {
        Self {
            end,
            jitter: (end.jitter_ps > 0.0).then(|| Normal::new(0.0, end.jitter_ps).unwrap()),
            horizon,
            out: Vec::with_capacity(capacity),
        }
    }

    fn push(&mut self, rng: &mut ChaCha20Rng, t: u64, offset: i64) {
        let j = self.jitter.map(|n| n.sample(rng).round() as i64).unwrap_or(0);
        let t = t as i64 + offset + j;
        if t >= 0 && (t as u64) < self.horizon {
            self.out.push(t as u64);
        }
    }

    fn background(&mut self, rng: &mut ChaCha20Rng, duration_s: f64) {
        let span = (duration_s * PS_PER_S) as u64;
        for (ch, &rate) in self.end.background_hz.iter().enumerate() {
            for _ in 0..poisson(rng, rate * duration_s) {
                let t = rng.random_range(0..span.max(1));
                let pol = Pol::ALL[rng.random_range(0..4)];
                let off = self.end.propagation_ps as i64 + self.end.delays.encode(pol, ch);
                self.push(rng, t, off);
            }
        }
        for _ in 0..poisson(rng, self.end.dark_hz * duration_s) {
            let t = rng.random_range(0..span.max(1));
            self.out.push(t);
        }
    }

    fn finish(mut self) -> Vec<u64> {
        self.out.sort_unstable();
        let dead = self.end.dead_time_ps;
        let mut kept = Vec::with_capacity(self.out.len());
        let mut next_live = 0u64;
        for t in self.out {
            if t >= next_live {
                kept.push(t);
                next_live = t + dead;
            }
        }
        kept
    }
}

/// Simulates both receivers of a link for `duration_s` seconds.
pub fn simulate_timetags(
    pair_rate_hz: f64,
    state: &TwoQubitState,
    a: &Endpoint,
    b: &Endpoint,
    duration_s: f64,
    seed: u64,
    label: &str,
) -> (TimeTagStream, TimeTagStream) {
    let wrap = |events: Vec<u64>, det: u16| TimeTagStream {
        events: events.into_iter().map(|t_ps| TimeTag { t_ps, detector: det }).collect(),
        duration_s,
        seed,
    };
    if !(duration_s > 0.0) {
        return (wrap(Vec::new(), a.detector), wrap(Vec::new(), b.detector));
    }
    let mut rng = qlink_core::rng::stream(seed, label);
    let span = (duration_s * PS_PER_S) as u64;
    let table = outcome_table(state);
    let cap = |e: &Endpoint| (e.incident_rate(pair_rate_hz) * duration_s * 1.1) as usize + 16;
    let mut ea = Emitter::new(a, span, cap(a));
    let mut eb = Emitter::new(b, span, cap(b));
    // Independent thinning of a Poisson process: the pairs seen by both,
    // by one side only, and by neither are independent Poisson processes.
    let (ha, hb) = (a.efficiency.clamp(0.0, 1.0), b.efficiency.clamp(0.0, 1.0));
    let classes = [(true, true, ha * hb), (true, false, ha * (1.0 - hb)), (false, true, (1.0 - ha) * hb)];
    for (seen_a, seen_b, p) in classes {
        for _ in 0..poisson(&mut rng, pair_rate_hz * p * duration_s) {
            let t = rng.random_range(0..span);
            let (xa, xb) = (rng.random::<bool>(), rng.random::<bool>());
            let o = sample_index(&mut rng, &table[2 * xa as usize + xb as usize]);
            if seen_a {
                let pa = Pol::from_parts(xa, o & 2 != 0);
                let off = a.propagation_ps as i64 + a.delays.encode(pa, a.channel);
                ea.push(&mut rng, t, off);
            }
            if seen_b {
                let pb = Pol::from_parts(xb, o & 1 != 0);
                let off = b.propagation_ps as i64 + b.delays.encode(pb, b.channel);
                eb.push(&mut rng, t, off);
            }
        }
    }
    ea.background(&mut rng, duration_s);
    eb.background(&mut rng, duration_s);
    (wrap(ea.finish(), a.detector), wrap(eb.finish(), b.detector))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn endpoint(index: usize, eff: f64, bg: f64) -> Endpoint {
        Endpoint {
            detector: index as u16,
            efficiency: eff,
            channel: 0,
            background_hz: vec![bg, bg],
            dark_hz: 100.0,
            jitter_ps: 100.0,
            dead_time_ps: 1_000_000,
            propagation_ps: 20_000_000,
            delays: DelayMap::for_user(index, 3, 1200, 2, 1100).unwrap(),
        }
    }

    #[test]
    fn zero_duration_is_empty() {
        let (a, b) = simulate_timetags(1e6, &TwoQubitState::bell_psi_plus(), &endpoint(0, 0.1, 1e3), &endpoint(1, 0.1, 1e3), 0.0, 1, "x");
        assert!(a.events.is_empty() && b.events.is_empty());
    }

    #[test]
    fn deterministic_and_sorted() {
        let run = || {
            simulate_timetags(2e5, &TwoQubitState::werner(0.9).unwrap(), &endpoint(0, 0.05, 2e3), &endpoint(1, 0.04, 2e3), 0.2, 9, "link")
        };
        let (a1, b1) = run();
        let (a2, b2) = run();
        let bytes = |s: &TimeTagStream| {
            let mut v = Vec::new();
            s.write_binary(&mut v).unwrap();
            v
        };
        assert_eq!(bytes(&a1), bytes(&a2));
        assert_eq!(bytes(&b1), bytes(&b2));
        for s in [&a1, &b1] {
            s.check_sorted().unwrap();
            assert!(s.events.iter().all(|e| e.t_ps < 200_000_000_000));
            assert!(s.events.windows(2).all(|w| w[1].t_ps - w[0].t_ps >= 1_000_000));
        }
        let back = TimeTagStream::read_binary(&bytes(&a1)[..], 0.2, 9).unwrap();
        assert_eq!(back, a1);
    }

    #[test]
    fn werner_outcome_table() {
        let t = outcome_table(&TwoQubitState::werner(0.9).unwrap());
        // Z/Z: HH and VV are the errors
        assert!((t[0][0] - 0.025).abs() < 1e-12 && (t[0][1] - 0.475).abs() < 1e-12);
        // X/X: DA and AD are the errors
        assert!((t[3][1] - 0.025).abs() < 1e-12 && (t[3][0] - 0.475).abs() < 1e-12);
        // mixed bases are uniform
        assert!(t[1].iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn unsorted_detected() {
        assert_eq!(check_sorted(&[1, 5, 3]), Err(NetError::Ordering(2)));
    }
}
