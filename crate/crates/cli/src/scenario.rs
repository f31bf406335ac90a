//! The canned scenarios. Each one computes its rows in memory, then hands
//! the serialized artifacts to `output::emit`.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use qlink_core::coexist_noise::{amplitude_damp, negativity_closed, negativity_numeric, raman_photon_rate, white_noise_state, RamanTable};
use qlink_core::spdc_source::{coincidence_rates, RamanPhotons};
use qlink_core::subspace_coding::model_qber;
use qlink_core::{KeyBlock, KeyStatus};
use qlink_crypto::attack::{crop_attack, dispersion_metric};
use qlink_crypto::cipher::{decrypt, encrypt, key_budget, xor_cipher};
use qlink_crypto::image::synthetic_scene;
use qlink_crypto::qss::{qss_encrypt, qss_reconstruct, single_share_view};
use qlink_crypto::{GrayImage, KeyStream};
use qlink_keys::amplify::privacy_amplify;
use qlink_keys::finite_key::{binary_entropy, optimize_key_length, Optimum};
use qlink_keys::keyfile;
use qlink_keys::reconcile::{bucket_index, buckets, Reconciler};
use qlink_net::session::{run_session, SessionConfig, SessionReport};

use crate::config::{derive_seed, CoexistenceSweep, CryptoDemoConfig, DistillConfig, ExperimentConfig, NegativityGrid, Scenario};
use crate::output::{emit, Artifact};

/// Slots must stand this many standard deviations above the floor to
/// count as resolved.
pub const PEAK_SIGMAS: f64 = 3.0;

pub fn random_bits(seed: u64, label: &str, len: usize) -> Vec<u8> {
    let mut rng = qlink_core::rng::stream(seed, label);
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

pub fn load_raman_table(path: Option<&Path>) -> Result<RamanTable> {
    match path {
        None => Ok(RamanTable::synthetic()),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(RamanTable::from_csv(f)?)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityRow {
    pub white_noise: f64,
    pub damping: f64,
    pub pairs: usize,
    /// None where the closed form leaves the real branch.
    pub closed: Option<f64>,
    /// Negativity of the normalized damped state.
    pub numeric: f64,
}

pub fn negativity_rows(g: &NegativityGrid) -> Vec<NegativityRow> {
    let mut pts = Vec::new();
    for &pairs in &g.pairs {
        for &damping in &g.damping {
            for &p in &g.white_noise {
                pts.push((p, damping, pairs));
            }
        }
    }
    pts.par_iter()
        .map(|&(p, damping, pairs)| NegativityRow {
            white_noise: p,
            damping,
            pairs,
            closed: negativity_closed(p, damping, damping, pairs).ok(),
            numeric: negativity_numeric(&amplitude_damp(&white_noise_state(p, pairs), damping, damping).normalized()),
        })
        .collect()
}

fn negativity_csv(rows: &[NegativityRow]) -> String {
    let mut s = String::from("white_noise,damping,pairs,closed,numeric\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{:.10}", r.white_noise, r.damping, r.pairs, fmt_opt(r.closed), r.numeric);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspacePoint {
    pub subspaces: usize,
    pub qber: f64,
    pub true_hz: f64,
    pub accidental_matched_hz: f64,
    pub accidental_full_hz: f64,
    pub snr_matched: f64,
    pub snr_full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub launch_dbm: f64,
    /// Raman photons per second at each receiver, before detection.
    pub raman_signal_hz: f64,
    pub raman_idler_hz: f64,
    pub by_subspaces: Vec<SubspacePoint>,
}

pub fn coexistence_points(s: &CoexistenceSweep) -> Result<Vec<PowerPoint>> {
    let table = load_raman_table(s.raman_table.as_deref())?;
    s.launch_dbm
        .par_iter()
        .map(|&dbm| {
            let link = s.link(dbm);
            let raman = RamanPhotons {
                signal_hz: raman_photon_rate(&link, s.signal_nm, &table)?,
                idler_hz: raman_photon_rate(&link, s.idler_nm, &table)?,
            };
            let by_subspaces = s
                .subspaces
                .iter()
                .map(|&n| {
                    let c = coincidence_rates(&s.source, s.pump_mw, n, raman);
                    SubspacePoint {
                        subspaces: n,
                        qber: model_qber(&s.source, s.pump_mw, raman, n, s.visibility, s.accidentals),
                        true_hz: c.true_hz,
                        accidental_matched_hz: c.acc_matched_hz,
                        accidental_full_hz: c.acc_full_hz,
                        snr_matched: c.true_hz / c.acc_matched_hz,
                        snr_full: c.true_hz / c.acc_full_hz,
                    }
                })
                .collect();
            Ok(PowerPoint {
                launch_dbm: dbm,
                raman_signal_hz: raman.signal_hz,
                raman_idler_hz: raman.idler_hz,
                by_subspaces,
            })
        })
        .collect::<Result<_>>()
}

/// One row per launch power, one QBER column per subspace count.
fn qber_csv(s: &CoexistenceSweep, pts: &[PowerPoint]) -> String {
    let mut out = String::from("launch_dbm,raman_signal_hz,raman_idler_hz");
    for n in &s.subspaces {
        let _ = write!(out, ",qber_n{n}");
    }
    out.push('\n');
    for p in pts {
        let _ = write!(out, "{},{:.6},{:.6}", p.launch_dbm, p.raman_signal_hz, p.raman_idler_hz);
        for q in &p.by_subspaces {
            let _ = write!(out, ",{:.10}", q.qber);
        }
        out.push('\n');
    }
    out
}

fn snr_csv(pts: &[PowerPoint]) -> String {
    let mut out = String::from("launch_dbm,subspaces,true_hz,accidental_matched_hz,accidental_full_hz,snr_matched,snr_full,qber\n");
    for p in pts {
        for q in &p.by_subspaces {
            let _ = writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10}",
                p.launch_dbm, q.subspaces, q.true_hz, q.accidental_matched_hz, q.accidental_full_hz, q.snr_matched, q.snr_full, q.qber
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSummary {
    pub pair: String,
    pub mean_qber: Option<f64>,
    pub pooled_qber: Option<f64>,
    pub qber_z: Option<f64>,
    pub qber_x: Option<f64>,
    pub model_qber: f64,
    pub visibility: f64,
    pub accidental_ratio: f64,
    pub coincidences: u64,
    pub sifted_bits: u64,
    pub resolved_peaks: usize,
    pub slots: usize,
}

pub fn session_config(cfg: &ExperimentConfig) -> SessionConfig {
    cfg.clone().resolved().session
}

pub fn session_summary(cfg: &SessionConfig, report: &SessionReport) -> Vec<LinkSummary> {
    report
        .links
        .iter()
        .map(|l| {
            let pooled = l.pooled();
            LinkSummary {
                pair: l.label.clone(),
                mean_qber: l.mean_qber(),
                pooled_qber: pooled.qber(),
                qber_z: pooled.qber_z(),
                qber_x: pooled.qber_x(),
                model_qber: l.model.model_qber,
                visibility: l.model.visibility,
                accidental_ratio: l.model.accidental_ratio,
                coincidences: pooled.coincidences,
                sifted_bits: pooled.sifted(),
                resolved_peaks: l.resolved_peaks(cfg.window_ps, PEAK_SIGMAS),
                slots: l.peak_table.positions().len(),
            }
        })
        .collect()
}

fn session_artifacts(cfg: &SessionConfig, report: &SessionReport) -> Result<Vec<Artifact>> {
    let mut out = vec![
        Artifact::new("series.csv", report.series_csv(cfg.interval_s)),
        Artifact::json_lines("links.jsonl", &session_summary(cfg, report))?,
        Artifact::new("plan.json", serde_json::to_string_pretty(&report.plan)? + "\n"),
    ];
    for l in &report.links {
        out.push(Artifact::new(format!("histogram_{}.csv", l.label), l.histogram.to_csv()));
        out.push(Artifact::new(format!("sifted_{}_a.qkey", l.label), keyfile::encode(&l.key_a)));
        out.push(Artifact::new(format!("sifted_{}_b.qkey", l.label), keyfile::encode(&l.key_b)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillReport {
    pub sifted_bits: u64,
    pub qber: f64,
    pub bucket: usize,
    pub design_efficiency: f64,
    pub optimum: Optimum,
    pub estimation_bits: u64,
    pub estimated_qber: f64,
    pub reconciled_blocks: usize,
    pub verified_blocks: usize,
    pub measured_efficiency: f64,
    pub leakage_bits: u64,
    pub verified_bits: usize,
    pub final_bits: usize,
    pub keys_match: bool,
}

pub struct Distilled {
    pub report: DistillReport,
    pub key_a: KeyBlock,
    pub key_b: KeyBlock,
}

/// Simulated sifted pair → parameter estimation → reconciliation →
/// amplification, sized by the finite-key optimizer.
pub fn distill(d: &DistillConfig, seed: u64) -> Result<Distilled> {
    let m = d.sifted_bits as usize;
    let mut rng = qlink_core::rng::stream(seed, "distill/channel");
    let a: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8)).collect();
    let b: Vec<u8> = a.iter().map(|&x| x ^ (rng.random::<f64>() < d.qber) as u8).collect();

    let bucket = bucket_index(d.qber)?;
    let design_f = (1.0 - buckets()[bucket].rate) / binary_entropy(d.qber);
    let optimum = optimize_key_length(d.sifted_bits, d.qber, design_f, d.security_exponent, d.formulas);

    let pe = ((optimum.params.beta * m as f64).round() as usize).min(m);
    let pe_errors = a[..pe].iter().zip(&b[..pe]).filter(|(x, y)| x != y).count();
    let estimated_qber = if pe > 0 { pe_errors as f64 / pe as f64 } else { f64::NAN };

    let reconciler = Reconciler::new(d.block_bits, derive_seed(seed, "distill/codes"));
    let rec = reconciler.reconcile(&KeyBlock::sifted(a[pe..].to_vec(), d.qber), &KeyBlock::sifted(b[pe..].to_vec(), d.qber), d.qber)?;
    let attempted = rec.blocks.len() * d.block_bits;
    let verified = rec.key_a.len();
    let final_bits = if attempted == 0 {
        0
    } else {
        ((optimum.l as f64 * verified as f64 / attempted as f64).floor() as usize).min(verified)
    };
    let pa_seed = derive_seed(seed, "distill/amplify");
    let finish = |k: &KeyBlock| -> Result<KeyBlock> {
        let mut out = KeyBlock::sifted(privacy_amplify(&k.bits, final_bits, pa_seed)?, k.qber);
        out.leakage_bits = k.leakage_bits;
        out.advance(KeyStatus::Amplified)?;
        Ok(out)
    };
    let key_a = finish(&rec.key_a)?;
    let key_b = finish(&rec.key_b)?;
    let report = DistillReport {
        sifted_bits: d.sifted_bits,
        qber: d.qber,
        bucket,
        design_efficiency: design_f,
        estimation_bits: pe as u64,
        estimated_qber,
        reconciled_blocks: rec.blocks.len(),
        verified_blocks: verified / d.block_bits,
        measured_efficiency: rec.f_measured,
        leakage_bits: rec.leakage_bits + rec.tag_bits,
        verified_bits: verified,
        final_bits,
        keys_match: key_a.bits == key_b.bits,
        optimum,
    };
    Ok(Distilled { report, key_a, key_b })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CryptoReport {
    pub image_px: usize,
    pub key_bits: usize,
    pub roundtrip_exact: bool,
    pub plain_correlation: f64,
    pub cipher_correlation: f64,
    pub crop_fraction: f64,
    pub crop_metric_scda: f64,
    pub crop_metric_xor: f64,
    pub share_bits: usize,
    pub share_roundtrip: bool,
    /// Fraction of ones in what one share holder sees alone.
    pub single_share_ones: f64,
}

pub struct CryptoOutputs {
    pub report: CryptoReport,
    pub images: Vec<(String, GrayImage)>,
}

pub fn crypto_demo(c: &CryptoDemoConfig, seed: u64) -> Result<CryptoOutputs> {
    let img = match &c.image {
        Some(p) => GrayImage::read_pgm(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => synthetic_scene(c.image_px, derive_seed(seed, "crypto/scene"))?,
    };
    let n = img.n;
    let key = random_bits(seed, "crypto/scda", key_budget(n));
    let xor_key = random_bits(seed, "crypto/xor", 8 * n * n);
    let rect = c.crop.into();

    let enc = encrypt(&img, &mut KeyStream::new(key.clone()))?;
    let dec = decrypt(&enc, &mut KeyStream::new(key.clone()))?;
    let cropped = crop_attack(&enc, rect, c.fill)?;
    let damaged = decrypt(&cropped, &mut KeyStream::new(key.clone()))?;
    let xor_enc = xor_cipher(&img, &mut KeyStream::new(xor_key.clone()))?;
    let xor_damaged = xor_cipher(&crop_attack(&xor_enc, rect, c.fill)?, &mut KeyStream::new(xor_key))?;

    let message = random_bits(seed, "crypto/message", c.share_bits);
    let k_ab = random_bits(seed, "crypto/k_ab", c.share_bits);
    let k_ac = random_bits(seed, "crypto/k_ac", c.share_bits);
    let shared = qss_encrypt(&message, &k_ab, &k_ac)?;
    let view = single_share_view(&shared, &k_ab)?;

    let report = CryptoReport {
        image_px: n,
        key_bits: key.len(),
        roundtrip_exact: dec == img,
        plain_correlation: img.adjacent_correlation(),
        cipher_correlation: enc.adjacent_correlation(),
        crop_fraction: (c.crop.width_px * c.crop.height_px) as f64 / (n * n) as f64,
        crop_metric_scda: dispersion_metric(&img, &damaged)?,
        crop_metric_xor: dispersion_metric(&img, &xor_damaged)?,
        share_bits: c.share_bits,
        share_roundtrip: qss_reconstruct(&shared, &k_ab, &k_ac)? == message,
        single_share_ones: view.iter().map(|&b| b as f64).sum::<f64>() / view.len() as f64,
    };
    let images = vec![
        ("plain.pgm".into(), img),
        ("cipher.pgm".into(), enc),
        ("cipher_cropped.pgm".into(), cropped),
        ("decrypted_cropped.pgm".into(), damaged),
        ("xor_decrypted_cropped.pgm".into(), xor_damaged),
    ];
    Ok(CryptoOutputs { report, images })
}

fn pgm_bytes(img: &GrayImage) -> Result<Vec<u8>> {
    let mut v = Vec::new();
    img.write_pgm(&mut v)?;
    Ok(v)
}

/// Artifacts of a scenario, without touching the filesystem.
pub fn scenario_artifacts(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    Ok(match cfg.scenario {
        Scenario::Negativity => vec![Artifact::new("negativity.csv", negativity_csv(&negativity_rows(&cfg.negativity)))],
        Scenario::QberSweep => {
            let pts = coexistence_points(&cfg.coexistence)?;
            vec![Artifact::new("qber.csv", qber_csv(&cfg.coexistence, &pts)), Artifact::json_lines("points.jsonl", &pts)?]
        }
        Scenario::Snr => vec![Artifact::new("snr.csv", snr_csv(&coexistence_points(&cfg.coexistence)?))],
        Scenario::Session => {
            let sc = session_config(cfg);
            let table = load_raman_table(None)?;
            session_artifacts(&sc, &run_session(&sc, &table)?)?
        }
        Scenario::KeyDistill => {
            let d = distill(&cfg.distill, derive_seed(cfg.seed, "distill"))?;
            ensure!(d.report.keys_match, "distilled keys disagree");
            vec![
                Artifact::json_lines("distill.jsonl", &[&d.report])?,
                Artifact::new("final_a.qkey", keyfile::encode(&d.key_a)),
                Artifact::new("final_b.qkey", keyfile::encode(&d.key_b)),
            ]
        }
        Scenario::CryptoDemo => {
            let c = crypto_demo(&cfg.crypto, derive_seed(cfg.seed, "crypto"))?;
            let mut v = vec![Artifact::json_lines("crypto.jsonl", &[&c.report])?];
            for (name, img) in &c.images {
                v.push(Artifact::new(name.clone(), pgm_bytes(img)?));
            }
            v
        }
    })
}

/// Runs the scenario and writes its artifacts and manifest into the
/// configured output directory. Returns the manifest path.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let artifacts = scenario_artifacts(cfg)?;
    emit(&cfg.out_dir, cfg, &artifacts)
}
