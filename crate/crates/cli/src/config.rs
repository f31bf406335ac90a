//! Experiment configuration files (TOML). Unknown keys are rejected and
//! every physical quantity carries its unit in the key name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use qlink_core::coexist_noise::CoexistenceLink;
use qlink_core::spdc_source::SourceParams;
use qlink_core::subspace_coding::Accidentals;
use qlink_crypto::attack::Rect;
use qlink_keys::finite_key::Formulas;
use qlink_keys::reconcile::{QBER_MAX, QBER_MIN};
use qlink_net::session::SessionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "fig1b_negativity")]
    Negativity,
    #[serde(rename = "fig2_qber_sweep")]
    QberSweep,
    #[serde(rename = "figS6_snr")]
    Snr,
    #[serde(rename = "fig4_session")]
    Session,
    #[serde(rename = "key_distill")]
    KeyDistill,
    #[serde(rename = "crypto_demo")]
    CryptoDemo,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Negativity,
        Scenario::QberSweep,
        Scenario::Snr,
        Scenario::Session,
        Scenario::KeyDistill,
        Scenario::CryptoDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Negativity => "fig1b_negativity",
            Scenario::QberSweep => "fig2_qber_sweep",
            Scenario::Snr => "figS6_snr",
            Scenario::Session => "fig4_session",
            Scenario::KeyDistill => "key_distill",
            Scenario::CryptoDemo => "crypto_demo",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|x| x.name()).collect();
            format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
        })
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Root of every random stream.
    #[serde(default)]
    pub seed: u64,
    /// Where artifacts go. Not part of the experiment, so it is left out of
    /// the canonical text and the manifest.
    #[serde(default = "default_out_dir", skip_serializing)]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub negativity: NegativityGrid,
    #[serde(default)]
    pub coexistence: CoexistenceSweep,
    /// Its `seed` key is always replaced by one derived from the global
    /// seed; see `resolved`.
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub crypto: CryptoDemoConfig,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            out_dir: default_out_dir(),
            negativity: NegativityGrid::default(),
            coexistence: CoexistenceSweep::default(),
            session: SessionConfig::default(),
            distill: DistillConfig::default(),
            crypto: CryptoDemoConfig::default(),
        }
        .resolved()
    }

    /// Fills in values derived from the global seed.
    pub fn resolved(mut self) -> Self {
        self.session.seed = derive_seed(self.seed, "session");
        self
    }
}

/// A 64-bit seed for one named consumer of the global seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let k = qlink_core::rng::subkey(seed, label);
    u64::from_le_bytes(k[..8].try_into().expect("eight bytes"))
}

/// White-noise fraction × equal damping on both photons × pair count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NegativityGrid {
    pub white_noise: Vec<f64>,
    pub damping: Vec<f64>,
    pub pairs: Vec<usize>,
}

impl Default for NegativityGrid {
    fn default() -> Self {
        Self {
            white_noise: (0..10).map(|k| k as f64 / 10.0).collect(),
            damping: vec![0.1, 0.2, 0.3],
            pairs: vec![1, 2, 3],
        }
    }
}

/// Classical launch-power sweep against subspace count for one
/// fiber span shared with a classical channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoexistenceSweep {
    pub source: SourceParams,
    pub pump_mw: f64,
    pub fiber_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub classical_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub launch_dbm: Vec<f64>,
    pub subspaces: Vec<usize>,
    pub visibility: f64,
    pub accidentals: Accidentals,
    /// Raman cross-section table (CSV); the built-in placeholder curve
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raman_table: Option<PathBuf>,
}

impl Default for CoexistenceSweep {
    fn default() -> Self {
        Self {
            source: SourceParams::default(),
            pump_mw: 0.02,
            fiber_length_km: 15.0,
            attenuation_db_per_km: 0.2,
            classical_nm: 1591.26,
            signal_nm: 1556.0,
            idler_nm: 1564.3,
            launch_dbm: vec![-30.0, -26.0, -23.0, -20.0],
            subspaces: vec![1, 2, 3, 6],
            visibility: 0.98,
            accidentals: Accidentals::Matched,
            raman_table: None,
        }
    }
}

impl CoexistenceSweep {
    pub fn link(&self, launch_dbm: f64) -> CoexistenceLink {
        CoexistenceLink {
            length_km: self.fiber_length_km,
            atten_db_per_km: self.attenuation_db_per_km,
            launch_dbm,
            classical_nm: self.classical_nm,
            bandwidth_nm: self.source.bandwidth_nm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    /// Sifted block length m.
    pub sifted_bits: u64,
    pub qber: f64,
    /// Correctness exponent s.
    pub security_exponent: f64,
    /// LDPC block length.
    pub block_bits: usize,
    pub formulas: Formulas,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            sifted_bits: 1_000_000,
            qber: 0.05,
            security_exponent: 9.0,
            block_bits: 10_000,
            formulas: Formulas::regrouped(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropRect {
    pub x_px: usize,
    pub y_px: usize,
    pub width_px: usize,
    pub height_px: usize,
}

impl From<CropRect> for Rect {
    fn from(c: CropRect) -> Rect {
        Rect {
            x: c.x_px,
            y: c.y_px,
            w: c.width_px,
            h: c.height_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoDemoConfig {
    /// P5 input; a synthetic scene of `image_px` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub image_px: usize,
    pub crop: CropRect,
    pub fill: u8,
    pub share_bits: usize,
}

impl Default for CryptoDemoConfig {
    fn default() -> Self {
        Self {
            image: None,
            image_px: 128,
            crop: CropRect {
                x_px: 44,
                y_px: 30,
                width_px: 40,
                height_px: 41,
            },
            fill: 0,
            share_bits: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Raised for anything wrong with the configuration itself; maps to exit
/// status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<Violation>);

impl ConfigError {
    pub fn single(path: &str, message: impl Into<String>) -> Self {
        ConfigError(vec![Violation {
            path: path.into(),
            message: message.into(),
        }])
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid configuration: {}", lines.join("; "))
    }
}

impl std::error::Error for ConfigError {}

struct Checker(Vec<Violation>);

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn nonneg(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("must be a finite nonnegative number, got {v}"));
        }
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be positive, got {v}"));
        }
    }

    fn unit(&mut self, path: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.push(path, format!("must lie in [0, 1], got {v}"));
        }
    }

    fn nonempty<T>(&mut self, path: &str, v: &[T]) {
        if v.is_empty() {
            self.push(path, "must not be empty");
        }
    }
}

/// Schema and unit checks beyond what parsing enforces. Empty when the
/// configuration is usable.
pub fn violations(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    if cfg.out_dir.as_os_str().is_empty() {
        c.push("out_dir", "must not be empty");
    }

    let g = &cfg.negativity;
    c.nonempty("negativity.white_noise", &g.white_noise);
    c.nonempty("negativity.damping", &g.damping);
    c.nonempty("negativity.pairs", &g.pairs);
    g.white_noise.iter().for_each(|&p| c.unit("negativity.white_noise", p));
    g.damping.iter().for_each(|&p| c.unit("negativity.damping", p));
    if g.pairs.contains(&0) {
        c.push("negativity.pairs", "pair counts start at 1");
    }

    let s = &cfg.coexistence;
    c.nonneg("coexistence.pump_mw", s.pump_mw);
    c.nonneg("coexistence.fiber_length_km", s.fiber_length_km);
    c.nonneg("coexistence.attenuation_db_per_km", s.attenuation_db_per_km);
    c.positive("coexistence.classical_nm", s.classical_nm);
    c.positive("coexistence.signal_nm", s.signal_nm);
    c.positive("coexistence.idler_nm", s.idler_nm);
    c.unit("coexistence.visibility", s.visibility);
    c.nonempty("coexistence.launch_dbm", &s.launch_dbm);
    c.nonempty("coexistence.subspaces", &s.subspaces);
    if s.subspaces.contains(&0) {
        c.push("coexistence.subspaces", "subspace counts start at 1");
    }
    if s.launch_dbm.iter().any(|p| p.is_nan() || *p == f64::INFINITY) {
        c.push("coexistence.launch_dbm", "must be finite or -inf");
    }
    if let Err(e) = s.source.validate() {
        c.push("coexistence.source", e.to_string());
    }

    if let Err(e) = cfg.session.validate() {
        c.push("session", e.to_string());
    }

    let d = &cfg.distill;
    if d.sifted_bits == 0 {
        c.push("distill.sifted_bits", "must be positive");
    }
    if !(QBER_MIN..=QBER_MAX).contains(&d.qber) {
        c.push("distill.qber", format!("must lie in the reconciliation range [{QBER_MIN}, {QBER_MAX}], got {}", d.qber));
    }
    c.positive("distill.security_exponent", d.security_exponent);
    if d.block_bits < 64 {
        c.push("distill.block_bits", format!("must be at least 64, got {}", d.block_bits));
    } else if d.sifted_bits < d.block_bits as u64 {
        c.push("distill.sifted_bits", "shorter than one reconciliation block");
    }

    let k = &cfg.crypto;
    if k.image.is_none() && k.image_px < 2 {
        c.push("crypto.image_px", format!("must be at least 2, got {}", k.image_px));
    }
    if k.image.is_none() && (k.crop.x_px + k.crop.width_px > k.image_px || k.crop.y_px + k.crop.height_px > k.image_px) {
        c.push("crypto.crop", format!("does not fit a {0}×{0} image", k.image_px));
    }
    if k.share_bits == 0 {
        c.push("crypto.share_bits", "must be positive");
    }
    c.0
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str::<ExperimentConfig>(text)
        .map_err(|e| ConfigError::single("", e.to_string().trim_end()))?
        .resolved();
    let v = violations(&cfg);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(v))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::single("", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Every problem found in the file, parse errors included; empty when valid.
pub fn validate_config(path: &Path) -> Vec<Violation> {
    match load_config(path) {
        Ok(_) => Vec::new(),
        Err(ConfigError(v)) => v,
    }
}

/// Canonical text of a configuration, defaults filled in.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configuration serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let c = parse_config("scenario = \"fig2_qber_sweep\"\nseed = 3\n").unwrap();
        assert_eq!(c.scenario, Scenario::QberSweep);
        assert_eq!(c.coexistence, CoexistenceSweep::default());
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn canonical_text_round_trips() {
        for s in Scenario::ALL {
            let c = ExperimentConfig::new(s);
            assert_eq!(parse_config(&to_toml(&c)).unwrap(), c, "{s}");
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let e = parse_config("scenario = \"crypto_demo\"\n[crypto]\nimage_pixels = 64\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("image_pixels") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn negative_length_names_the_field() {
        let e = parse_config("scenario = \"fig2_qber_sweep\"\n[coexistence]\nfiber_length_km = -1.0\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].path, "coexistence.fiber_length_km");
    }

    #[test]
    fn scenario_names_parse() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("fig3".parse::<Scenario>().is_err());
    }
}
