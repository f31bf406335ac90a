use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlink_core::coexist_noise::{amplitude_damp, negativity_closed, negativity_numeric, white_noise_state};
use qlink_core::rng::stream;
use qlink_core::KeyBlock;
use qlink_crypto::image::{synthetic_scene, GrayImage};
use qlink_keys::keyfile;
use rand::Rng;

fn qlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlink")).args(args).output().expect("spawn qlink")
}

fn ok(args: &[&str]) -> Output {
    let out = qlink(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_key(path: &Path, bits: usize, seed: u64) -> Vec<u8> {
    let mut rng = stream(seed, "test-key");
    let b: Vec<u8> = (0..bits).map(|_| rng.random_range(0..2)).collect();
    fs::write(path, keyfile::encode(&KeyBlock::sifted(b.clone(), 0.0))).unwrap();
    b
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_config_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["fig2_qber_sweep", "crypto_demo"] {
        let cfg = configs().join(format!("{name}.toml"));
        let (a, b) = (tmp.path().join(format!("{name}-a")), tmp.path().join(format!("{name}-b")));
        ok(&["--config", s(&cfg), "--out", s(&a), "scenario"]);
        ok(&["--config", s(&cfg), "--out", s(&b), "scenario"]);
        let (da, db) = (dir_contents(&a), dir_contents(&b));
        assert!(da.len() > 1);
        assert!(da.iter().all(|(n, _)| !n.ends_with(".partial")));
        assert_eq!(da, db, "{name}");
    }
}

#[test]
fn seed_changes_random_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["--seed", "1", "--out", s(&a), "scenario", "crypto_demo"]);
    ok(&["--seed", "2", "--out", s(&b), "scenario", "crypto_demo"]);
    assert_ne!(fs::read(a.join("cipher.pgm")).unwrap(), fs::read(b.join("cipher.pgm")).unwrap());
}

#[test]
fn manifest_lists_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("m");
    ok(&["--seed", "9", "--out", s(&d), "scenario", "fig1b_negativity"]);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenario"], "fig1b_negativity");
    assert_eq!(m["seed"], 9);
    let config = m["config"].as_str().unwrap();
    assert!(!config.contains("out_dir"));
    let parsed: toml::Value = toml::from_str(config).unwrap();
    assert_eq!(parsed["seed"].as_integer(), Some(9));
    for o in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(d.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(o["sha256"].as_str().unwrap(), qlink_cli::output::sha256_hex(&bytes));
    }
}

#[test]
fn negativity_table_matches_both_routes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("n");
    ok(&["--config", s(&configs().join("fig1b_negativity.toml")), "--out", s(&d), "scenario"]);
    let (header, rows) = csv(&d.join("negativity.csv"));
    assert_eq!(header, ["white_noise", "damping", "pairs", "closed", "numeric"]);
    assert_eq!(rows.len(), 10 * 3 * 3);
    for r in &rows {
        let (p, g, n) = (r[0], r[1], r[2] as usize);
        assert!((r[3] - negativity_closed(p, g, g, n).unwrap()).abs() < 1e-9, "{r:?}");
        let num = negativity_numeric(&amplitude_damp(&white_noise_state(p, n), g, g).normalized());
        assert!((r[4] - num).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn qber_falls_with_subspaces_at_every_power() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("q");
    ok(&["--config", s(&configs().join("fig2_qber_sweep.toml")), "--out", s(&d), "scenario"]);
    let (header, rows) = csv(&d.join("qber.csv"));
    let cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("qber_n")).collect();
    assert_eq!(cols.len(), 4);
    for r in &rows {
        for w in cols.windows(2) {
            assert!(r[w[1]] <= r[w[0]], "{r:?}");
        }
    }
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
}

#[test]
fn sample_configs_validate() {
    for e in fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        let out = ok(&["validate", s(&p)]);
        assert!(String::from_utf8_lossy(&out.stdout).ends_with("ok\n"));
    }
}

#[test]
fn invalid_configs_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("scenario = \"fig2_qber_sweep\"\n[coexistence]\nfiber_length_km = -1.0\n", "coexistence.fiber_length_km"),
        ("scenario = \"fig2_qber_sweep\"\n[coexistence]\nfibre_length = 3.0\n", "fibre_length"),
        ("scenario = \"key_distill\"\n[distill]\nqber = 0.3\n", "distill.qber"),
        ("scenario = \"nonsense\"\n", "nonsense"),
    ];
    for (k, (text, field)) in cases.iter().enumerate() {
        let p = tmp.path().join(format!("bad{k}.toml"));
        fs::write(&p, text).unwrap();
        let out = qlink(&["validate", s(&p)]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{err}");
        let out = qlink(&["--config", s(&p), "--out", s(&tmp.path().join("x")), "scenario"]);
        assert_eq!(out.status.code(), Some(2));
        assert!(!tmp.path().join("x").exists());
    }
}

#[test]
fn runtime_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let img = tmp.path().join("in.pgm");
    let mut pgm = Vec::new();
    synthetic_scene(32, 1).unwrap().write_pgm(&mut pgm).unwrap();
    fs::write(&img, pgm).unwrap();
    let key = tmp.path().join("short.qkey");
    random_key(&key, 64, 1);
    let out = qlink(&["--out", s(&tmp.path().join("c.pgm")), "img", "encrypt", "--key", s(&key), "--in", s(&img)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("c.pgm").exists());
    let out = qlink(&["--out", s(&tmp.path().join("c.pgm")), "img", "encrypt", "--key", s(&tmp.path().join("missing.qkey")), "--in", s(&img)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn image_roundtrip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |n: &str| tmp.path().join(n);
    let plain = synthetic_scene(64, 4).unwrap();
    let mut pgm = Vec::new();
    plain.write_pgm(&mut pgm).unwrap();
    fs::write(t("plain.pgm"), &pgm).unwrap();
    random_key(&t("k.qkey"), 200_000, 2);
    ok(&["--out", s(&t("c.pgm")), "img", "encrypt", "--key", s(&t("k.qkey")), "--in", s(&t("plain.pgm"))]);
    ok(&["--out", s(&t("d.pgm")), "img", "decrypt", "--key", s(&t("k.qkey")), "--in", s(&t("c.pgm"))]);
    assert_ne!(fs::read(t("c.pgm")).unwrap(), pgm);
    assert_eq!(GrayImage::from_pgm_bytes(&fs::read(t("d.pgm")).unwrap()).unwrap(), plain);
    ok(&["--out", s(&t("a.pgm")), "img", "attack", "--in", s(&t("c.pgm")), "--crop", "4,4,8,8", "--fill", "0"]);
    let attacked = GrayImage::from_pgm_bytes(&fs::read(t("a.pgm")).unwrap()).unwrap();
    assert_eq!(attacked.get(5, 5), 0);
}

#[test]
fn secret_sharing_roundtrip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |n: &str| tmp.path().join(n);
    let message = b"three parties, two keys".to_vec();
    fs::write(t("m.bin"), &message).unwrap();
    random_key(&t("ab.qkey"), 4096, 3);
    random_key(&t("ac.qkey"), 4096, 4);
    let (ab, ac) = (t("ab.qkey"), t("ac.qkey"));
    let keys = ["--k-ab", s(&ab), "--k-ac", s(&ac)];
    ok(&[&["--out", s(&t("c.bin")), "qss", "share", "--in", s(&t("m.bin"))][..], &keys].concat());
    ok(&[&["--out", s(&t("r.bin")), "qss", "reconstruct", "--in", s(&t("c.bin"))][..], &keys].concat());
    assert_ne!(fs::read(t("c.bin")).unwrap(), message);
    assert_eq!(fs::read(t("r.bin")).unwrap(), message);
}

#[test]
fn reconcile_then_amplify_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |n: &str| tmp.path().join(n);
    let a = random_key(&t("a.qkey"), 6000, 5);
    let mut rng = stream(5, "flips");
    let b: Vec<u8> = a.iter().map(|&x| x ^ u8::from(rng.random_bool(0.05))).collect();
    fs::write(t("b.qkey"), keyfile::encode(&KeyBlock::sifted(b, 0.05))).unwrap();
    ok(&["--out", s(&t("r")), "keys", "reconcile", "--a", s(&t("a.qkey")), "--b", s(&t("b.qkey")), "--qber", "0.05", "--block-bits", "2000"]);
    let ra = keyfile::decode(&fs::read(t("r_a.qkey")).unwrap()).unwrap();
    let rb = keyfile::decode(&fs::read(t("r_b.qkey")).unwrap()).unwrap();
    assert_eq!(ra.bits, rb.bits);
    assert_eq!(ra.len() % 2000, 0);
    if ra.len() > 0 {
        for side in ["r_a.qkey", "r_b.qkey"] {
            ok(&["--seed", "8", "--out", s(&t(&format!("{side}.final"))), "keys", "amplify", "--in", s(&t(side)), "--length", "500"]);
        }
        let fa = fs::read(t("r_a.qkey.final")).unwrap();
        assert_eq!(fa, fs::read(t("r_b.qkey.final")).unwrap());
        assert_eq!(keyfile::decode(&fa).unwrap().len(), 500);
    }
}

#[test]
fn optimize_reports_a_key_length() {
    let out = ok(&["keys", "optimize", "--sifted-bits", "1000000", "--qber", "0.05"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["l"].as_u64().unwrap() > 0, "{v}");
    let out = ok(&["keys", "optimize", "--sifted-bits", "1000000", "--qber", "0.05", "--as-printed"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["l"].as_u64(), Some(0), "{v}");
}
