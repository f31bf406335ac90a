//! Multiuser session: each user pair is simulated as an independent link
//! over a sequence of acquisition intervals, then sifted per interval.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qlink_core::coexist_noise::{raman_photon_rate, CoexistenceLink, RamanTable};
use qlink_core::units::{db_to_transmission, LIGHT_SPEED_NM_PER_PS};
use qlink_core::{KeyBlock, TwoQubitState};

use crate::delay::DelayMap;
use crate::error::{NetError, Result};
use crate::histogram::{coincidence_histogram, Histogram};
use crate::plan::{allocate_channels, channel_nm, reference_pairs, ChannelPair, WavelengthPlan};
use crate::sift::{sift, PeakTable, SiftCounts};
use crate::timetag::{simulate_timetags, Endpoint};

const FIBER_GROUP_INDEX: f64 = 1.468;
const HISTOGRAM_BIN_PS: i64 = 50;
const HISTOGRAM_MARGIN_PS: i64 = 8000;

/// One user's connection to the source node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub name: String,
    pub length_km: f64,
    pub loss_db: f64,
    pub detector_efficiency: f64,
    pub dark_hz: f64,
    pub dead_time_us: f64,
    pub jitter_ps: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(NetError::Config(format!("user {}: {what}", self.name)));
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return bad("length_km must be finite and nonnegative");
        }
        if !(self.loss_db >= 0.0 && self.loss_db.is_finite()) {
            return bad("loss_db must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return bad("detector_efficiency must lie in [0, 1]");
        }
        if !(self.dark_hz >= 0.0 && self.dead_time_us >= 0.0) {
            return bad("dark_hz and dead_time_us must be nonnegative");
        }
        if !(self.jitter_ps >= 0.0 && self.jitter_ps.is_finite()) {
            return bad("jitter_ps must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn propagation_ps(&self) -> u64 {
        (self.length_km * 1e12 * FIBER_GROUP_INDEX / LIGHT_SPEED_NM_PER_PS).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterSpacing {
    #[serde(rename = "100GHz")]
    Ghz100,
    #[serde(rename = "200GHz")]
    Ghz200,
}

impl FilterSpacing {
    /// Flat-top passband of one demultiplexer port.
    pub fn passband_nm(self) -> f64 {
        match self {
            FilterSpacing::Ghz100 => 0.4,
            FilterSpacing::Ghz200 => 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibilities {
    /// Werner visibility of each link's state, in plan order.
    Fixed(Vec<f64>),
    /// Choose each link's visibility so the model QBER hits the target.
    TargetQber(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub users: Vec<LinkConfig>,
    pub channel_pairs: Vec<ChannelPair>,
    pub pump_mw: f64,
    /// Pair brightness in MHz/mW/nm.
    pub brightness: f64,
    /// Uncorrelated source photoluminescence ζ in MHz/mW^α/nm.
    pub pl_coefficient: f64,
    pub pl_exponent: f64,
    pub source_loss_db: f64,
    /// Demultiplexer, polarization analyzer and combiner.
    pub receiver_loss_db: f64,
    pub launch_dbm: f64,
    pub classical_nm: f64,
    pub filter: FilterSpacing,
    pub window_ps: i64,
    pub delay_unit_ps: i64,
    pub interval_s: f64,
    pub intervals: usize,
    pub visibilities: Visibilities,
    #[serde(default)]
    pub drift: Option<Drift>,
    pub seed: u64,
}

/// Intervals in which a thermal disturbance lowers the link visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drift {
    /// Chance that a given interval is disturbed.
    pub probability: f64,
    /// Fractional visibility loss during a disturbance.
    pub depth: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let user = |name: &str, length_km, loss_db, detector_efficiency| LinkConfig {
            name: name.into(),
            length_km,
            loss_db,
            detector_efficiency,
            dark_hz: 800.0,
            dead_time_us: 17.0,
            jitter_ps: 100.0,
        };
        Self {
            users: vec![
                user("Alice", 4.075, 1.9, 0.10),
                user("Bob", 4.072, 1.8, 0.085),
                user("Charlie", 3.054, 1.2, 0.10),
            ],
            channel_pairs: reference_pairs(),
            pump_mw: DEFAULT_PUMP_MW,
            brightness: 0.14,
            pl_coefficient: 0.0,
            pl_exponent: 0.6,
            source_loss_db: 3.0,
            receiver_loss_db: 4.0,
            launch_dbm: -23.0,
            classical_nm: 1591.26,
            filter: FilterSpacing::Ghz100,
            window_ps: 500,
            delay_unit_ps: 1200,
            interval_s: 60.0,
            intervals: 30,
            visibilities: Visibilities::TargetQber(vec![0.0563, 0.0658, 0.0721]),
            drift: None,
            seed: 2024,
        }
    }
}

/// Pump power leaving every link's accidental ratio near 0.063 under the
/// default 100 GHz configuration, so that part of each target QBER comes
/// from the state and the error slots stand clear of the floor.
pub const DEFAULT_PUMP_MW: f64 = 25.0;

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users.len() < 2 {
            return Err(NetError::Config("a session needs at least two users".into()));
        }
        for u in &self.users {
            u.validate()?;
        }
        let nonneg = [
            ("pump_mw", self.pump_mw),
            ("brightness", self.brightness),
            ("pl_coefficient", self.pl_coefficient),
            ("pl_exponent", self.pl_exponent),
            ("source_loss_db", self.source_loss_db),
            ("receiver_loss_db", self.receiver_loss_db),
            ("interval_s", self.interval_s),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NetError::Config(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.window_ps <= 0 || self.delay_unit_ps <= 0 {
            return Err(NetError::Config("window_ps and delay_unit_ps must be positive".into()));
        }
        let links = self.users.len() * (self.users.len() - 1) / 2;
        let n = match &self.visibilities {
            Visibilities::Fixed(v) => {
                if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(NetError::Config("visibilities must lie in [0, 1]".into()));
                }
                v.len()
            }
            Visibilities::TargetQber(q) => {
                if q.iter().any(|x| !(0.0..0.5).contains(x)) {
                    return Err(NetError::Config("target QBERs must lie in [0, 0.5)".into()));
                }
                q.len()
            }
        };
        if let Some(d) = &self.drift {
            if !(0.0..=1.0).contains(&d.probability) || !(0.0..=1.0).contains(&d.depth) {
                return Err(NetError::Config("drift probability and depth must lie in [0, 1]".into()));
            }
        }
        if n != links {
            return Err(NetError::Config(format!("{n} link visibilities given for {links} links")));
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<WavelengthPlan> {
        let names: Vec<String> = self.users.iter().map(|u| u.name.clone()).collect();
        allocate_channels(&names, &self.channel_pairs, crate::plan::DEGENERATE_NM)
    }

    pub fn delay_map(&self, user: usize) -> Result<DelayMap> {
        let sigma = self.users.iter().map(|u| u.jitter_ps).fold(0.0, f64::max);
        let min_sep = (6.0 * sigma).ceil() as i64 + self.window_ps;
        DelayMap::for_user(user, self.users.len(), self.delay_unit_ps, self.users.len() - 1, min_sep)
    }

    /// Pairs per second into one conjugate channel pair.
    pub fn pair_rate_hz(&self) -> f64 {
        self.brightness * 1e6 * self.filter.passband_nm() * self.pump_mw
    }

    /// Uncorrelated source photons per second into one channel.
    pub fn pl_rate_hz(&self) -> f64 {
        self.pl_coefficient * 1e6 * self.pump_mw.powf(self.pl_exponent) * self.filter.passband_nm()
    }

    /// End-to-end detection probability of a source photon at a user.
    pub fn user_efficiency(&self, user: usize) -> f64 {
        let u = &self.users[user];
        db_to_transmission(self.source_loss_db + u.loss_db + self.receiver_loss_db) * u.detector_efficiency
    }

    /// Detected Raman photons per second in one of a user's channels.
    pub fn raman_detected_hz(&self, user: usize, channel: u32, table: &RamanTable) -> Result<f64> {
        let u = &self.users[user];
        if u.length_km == 0.0 {
            return Ok(0.0);
        }
        let link = CoexistenceLink {
            length_km: u.length_km,
            atten_db_per_km: u.loss_db / u.length_km,
            launch_dbm: self.launch_dbm,
            classical_nm: self.classical_nm,
            bandwidth_nm: self.filter.passband_nm(),
        };
        let emitted = raman_photon_rate(&link, channel_nm(channel), table)?;
        Ok(emitted * db_to_transmission(self.receiver_loss_db) * u.detector_efficiency)
    }
}

/// Expected rates of one link and the visibility chosen for it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkModel {
    pub a: usize,
    pub b: usize,
    pub pair_hz: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    /// Detected singles before dead time, per detector.
    pub singles_a_hz: f64,
    pub singles_b_hz: f64,
    /// Uncorrelated rate per channel slot of each user.
    pub background_a_hz: Vec<f64>,
    pub background_b_hz: Vec<f64>,
    pub channel_a: usize,
    pub channel_b: usize,
    /// Fraction of true coincidences whose jittered delay stays in the window.
    pub window_capture: f64,
    /// Accidental over true coincidences in the sifted slots.
    pub accidental_ratio: f64,
    pub visibility: f64,
    pub model_qber: f64,
}

impl LinkModel {
    /// Sifted-key QBER for a Werner visibility.
    pub fn qber_for(&self, visibility: f64) -> f64 {
        let e = (1.0 - visibility) / 2.0;
        (e + self.accidental_ratio / 2.0) / (1.0 + self.accidental_ratio)
    }

    /// Inverse of `qber_for`.
    pub fn visibility_for(&self, qber: f64) -> Result<f64> {
        let r = self.accidental_ratio;
        let e = qber * (1.0 + r) - r / 2.0;
        if !(0.0..=0.5).contains(&e) {
            return Err(NetError::Config(format!(
                "target QBER {qber} unreachable with accidental ratio {r:.4} (needs polarization error {e:.4})"
            )));
        }
        Ok(1.0 - 2.0 * e)
    }
}

fn user_background(cfg: &SessionConfig, plan: &WavelengthPlan, user: usize, link_slot: usize, table: &RamanTable) -> Result<Vec<f64>> {
    let eta = cfg.user_efficiency(user);
    plan.user_channels(user)
        .iter()
        .enumerate()
        .map(|(k, &ch)| {
            let raman = cfg.raman_detected_hz(user, ch, table)?;
            let unpartnered = if k == link_slot { 0.0 } else { cfg.pair_rate_hz() * eta };
            Ok(raman + cfg.pl_rate_hz() * eta + unpartnered)
        })
        .collect()
}

/// Rates for link `index` of the plan with visibility left at 1.
pub fn link_rates(cfg: &SessionConfig, plan: &WavelengthPlan, index: usize, table: &RamanTable) -> Result<LinkModel> {
    let l = &plan.links[index];
    let slot = |user: usize, ch: u32| plan.channel_slot(user, ch).expect("channel belongs to the user");
    let (channel_a, channel_b) = (slot(l.a, l.pair.first), slot(l.b, l.pair.second));
    let background_a_hz = user_background(cfg, plan, l.a, channel_a, table)?;
    let background_b_hz = user_background(cfg, plan, l.b, channel_b, table)?;
    let pair_hz = cfg.pair_rate_hz();
    let (eta_a, eta_b) = (cfg.user_efficiency(l.a), cfg.user_efficiency(l.b));
    let singles_a_hz = pair_hz * eta_a + background_a_hz.iter().sum::<f64>() + cfg.users[l.a].dark_hz;
    let singles_b_hz = pair_hz * eta_b + background_b_hz.iter().sum::<f64>() + cfg.users[l.b].dark_hz;
    let (ja, jb) = (cfg.users[l.a].jitter_ps, cfg.users[l.b].jitter_ps);
    let sigma = (ja * ja + jb * jb).sqrt();
    let half = (cfg.window_ps / 2) as f64;
    let window_capture = if sigma > 0.0 {
        statrs::function::erf::erf(half / (sigma * std::f64::consts::SQRT_2))
    } else {
        1.0
    };
    // Eight sifted slots each collect singles_a·singles_b·window accidentals,
    // against half of the captured true coincidences.
    let true_sifted = 0.5 * pair_hz * eta_a * eta_b * window_capture;
    let acc_sifted = 8.0 * singles_a_hz * singles_b_hz * cfg.window_ps as f64 * 1e-12;
    let accidental_ratio = if true_sifted > 0.0 { acc_sifted / true_sifted } else { f64::INFINITY };
    let mut m = LinkModel {
        a: l.a,
        b: l.b,
        pair_hz,
        eta_a,
        eta_b,
        singles_a_hz,
        singles_b_hz,
        background_a_hz,
        background_b_hz,
        channel_a,
        channel_b,
        window_capture,
        accidental_ratio,
        visibility: 1.0,
        model_qber: 0.0,
    };
    m.model_qber = m.qber_for(1.0);
    Ok(m)
}

/// Models for every link with visibilities resolved.
pub fn link_models(cfg: &SessionConfig, plan: &WavelengthPlan, table: &RamanTable) -> Result<Vec<LinkModel>> {
    (0..plan.links.len())
        .map(|k| {
            let mut m = link_rates(cfg, plan, k, table)?;
            m.visibility = match &cfg.visibilities {
                Visibilities::Fixed(v) => v[k],
                Visibilities::TargetQber(q) => m.visibility_for(q[k])?,
            };
            m.model_qber = m.qber_for(m.visibility);
            Ok(m)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub interval: usize,
    pub counts: SiftCounts,
    pub detected_a: usize,
    pub detected_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub label: String,
    pub model: LinkModel,
    pub peak_table: PeakTable,
    pub histogram: Histogram,
    pub intervals: Vec<IntervalRecord>,
    pub key_a: KeyBlock,
    pub key_b: KeyBlock,
}

impl LinkReport {
    pub fn pooled(&self) -> SiftCounts {
        let mut c = SiftCounts::default();
        self.intervals.iter().for_each(|r| c.add(&r.counts));
        c
    }

    /// Mean of the per-interval QBERs, skipping empty intervals.
    pub fn mean_qber(&self) -> Option<f64> {
        let q: Vec<f64> = self.intervals.iter().filter_map(|r| r.counts.qber()).collect();
        (!q.is_empty()).then(|| q.iter().sum::<f64>() / q.len() as f64)
    }

    /// Excess of each slot's window count over the accidental floor, in
    /// Poisson standard deviations. The floor is the mean window count in
    /// the histogram margins, well clear of every slot's jitter tail.
    pub fn slot_significance(&self, window_ps: i64) -> Vec<f64> {
        let half = window_ps / 2;
        let pos = self.peak_table.positions();
        let (lo, hi) = self.peak_table.range();
        let clear = 4 * window_ps;
        let h = &self.histogram;
        let end = h.bin_start(h.counts.len());
        let mut centres = Vec::new();
        let mut c = h.start_ps + half;
        while c + half <= lo - clear {
            centres.push(c);
            c += window_ps;
        }
        let mut c = hi + clear + half;
        while c + half <= end {
            centres.push(c);
            c += window_ps;
        }
        let floor = centres.iter().map(|&c| h.window_sum(c, half) as f64).sum::<f64>() / centres.len().max(1) as f64;
        pos.iter()
            .map(|&p| (self.histogram.window_sum(p, half) as f64 - floor) / floor.max(1.0).sqrt())
            .collect()
    }

    /// Slots standing at least `sigmas` above the accidental floor.
    pub fn resolved_peaks(&self, window_ps: i64, sigmas: f64) -> usize {
        self.slot_significance(window_ps).iter().filter(|z| **z >= sigmas).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub plan: WavelengthPlan,
    pub links: Vec<LinkReport>,
}

impl SessionReport {
    /// One row per (link, interval); `t_min` is the end of the interval.
    pub fn series_csv(&self, interval_s: f64) -> String {
        let mut s = String::from("t_min,pair,qber,sifted_bits,qber_z,qber_x,coincidences\n");
        let f = |q: Option<f64>| q.map(|v| format!("{v:.6}")).unwrap_or_default();
        for l in &self.links {
            for r in &l.intervals {
                let c = &r.counts;
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    (r.interval + 1) as f64 * interval_s / 60.0,
                    l.label,
                    f(c.qber()),
                    c.sifted(),
                    f(c.qber_z()),
                    f(c.qber_x()),
                    c.coincidences
                ));
            }
        }
        s
    }
}

struct LinkSetup {
    model: LinkModel,
    a: Endpoint,
    b: Endpoint,
    table: PeakTable,
}

fn setup_link(cfg: &SessionConfig, model: LinkModel) -> Result<LinkSetup> {
    let endpoint = |user: usize, channel: usize, background: &[f64], eta: f64| -> Result<Endpoint> {
        let u = &cfg.users[user];
        Ok(Endpoint {
            detector: user as u16,
            efficiency: eta,
            channel,
            background_hz: background.to_vec(),
            dark_hz: u.dark_hz,
            jitter_ps: u.jitter_ps,
            dead_time_ps: (u.dead_time_us * 1e6).round() as u64,
            propagation_ps: u.propagation_ps(),
            delays: cfg.delay_map(user)?,
        })
    };
    let a = endpoint(model.a, model.channel_a, &model.background_a_hz, model.eta_a)?;
    let b = endpoint(model.b, model.channel_b, &model.background_b_hz, model.eta_b)?;
    let base = b.propagation_ps as i64 - a.propagation_ps as i64;
    let table = PeakTable::from_maps(&a.delays, a.channel, &b.delays, b.channel, base);
    Ok(LinkSetup {
        model,
        a,
        b,
        table,
    })
}

fn run_interval(cfg: &SessionConfig, link: usize, setup: &LinkSetup, interval: usize) -> Result<(IntervalRecord, Histogram, Vec<u8>, Vec<u8>)> {
    let label = format!("session/link{link}/interval{interval}");
    let mut visibility = setup.model.visibility;
    if let Some(d) = cfg.drift {
        let u: f64 = qlink_core::rng::stream(cfg.seed, &format!("{label}/drift")).random();
        if u < d.probability {
            visibility *= 1.0 - d.depth;
        }
    }
    let state = TwoQubitState::werner(visibility)?;
    let (sa, sb) = simulate_timetags(setup.model.pair_hz, &state, &setup.a, &setup.b, cfg.interval_s, cfg.seed, &label);
    let (ta, tb) = (sa.timestamps(), sb.timestamps());
    let (lo, hi) = setup.table.range();
    let hist = coincidence_histogram(&ta, &tb, lo - HISTOGRAM_MARGIN_PS, hi + HISTOGRAM_MARGIN_PS, HISTOGRAM_BIN_PS)?;
    let s = sift(&ta, &tb, &setup.table, cfg.window_ps)?;
    let rec = IntervalRecord {
        interval,
        counts: s.counts,
        detected_a: ta.len(),
        detected_b: tb.len(),
    };
    Ok((rec, hist, s.a_bits, s.b_bits))
}

/// Runs every link over `cfg.intervals` intervals. Links and intervals
/// draw from independent seeded streams, so the result does not depend
/// on thread scheduling.
pub fn run_session(cfg: &SessionConfig, table: &RamanTable) -> Result<SessionReport> {
    cfg.validate()?;
    let plan = cfg.plan()?;
    let models = link_models(cfg, &plan, table)?;
    let setups: Vec<LinkSetup> = models.into_iter().map(|m| setup_link(cfg, m)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..setups.len()).flat_map(|l| (0..cfg.intervals).map(move |i| (l, i))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(l, i)| run_interval(cfg, l, &setups[l], i))
        .collect::<Result<_>>()?;
    let mut links = Vec::with_capacity(setups.len());
    let mut it = results.into_iter();
    for setup in setups {
        let (lo, hi) = setup.table.range();
        let mut histogram = coincidence_histogram(&[], &[], lo - HISTOGRAM_MARGIN_PS, hi + HISTOGRAM_MARGIN_PS, HISTOGRAM_BIN_PS)?;
        let mut intervals = Vec::with_capacity(cfg.intervals);
        let (mut bits_a, mut bits_b) = (Vec::new(), Vec::new());
        for (rec, h, a, b) in it.by_ref().take(cfg.intervals) {
            histogram.merge(&h);
            intervals.push(rec);
            bits_a.extend(a);
            bits_b.extend(b);
        }
        let pooled_q = {
            let mut c = SiftCounts::default();
            intervals.iter().for_each(|r| c.add(&r.counts));
            c.qber().unwrap_or(0.5)
        };
        let label = format!("{}-{}", cfg.users[setup.model.a].name, cfg.users[setup.model.b].name);
        links.push(LinkReport {
            label,
            model: setup.model,
            peak_table: setup.table,
            histogram,
            intervals,
            key_a: KeyBlock::sifted(bits_a, pooled_q),
            key_b: KeyBlock::sifted(bits_b, pooled_q),
        });
    }
    Ok(SessionReport { plan, links })
}
