use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qlink_cli::config::{load_config, validate_config, ConfigError, ExperimentConfig, Scenario};
use qlink_cli::output::{emit, write_atomic};
use qlink_cli::scenario::{coexistence_points, scenario_artifacts, session_config, session_summary};
use qlink_core::coexist_noise::{amplitude_damp, negativity_closed, negativity_numeric, white_noise_state};
use qlink_core::optics_modes::{default_window, solve_modes, type2_overlap, Afromowitz, LayeredWaveguide, Polarization, SolverOptions};
use qlink_core::spdc_source::{coincidence_rates, CoincidenceModel, RamanPhotons};
use qlink_core::subspace_coding::{subspace_qber, JointCoincidenceMatrix};
use qlink_core::KeyBlock;
use qlink_crypto::attack::{crop_attack, Rect};
use qlink_crypto::cipher::{decrypt, encrypt};
use qlink_crypto::qss::{qss_encrypt, qss_reconstruct};
use qlink_crypto::{GrayImage, KeyStream};
use qlink_keys::amplify::privacy_amplify;
use qlink_keys::finite_key::{optimize_key_length, AmplificationForm, EstimationForm, Formulas};
use qlink_keys::keyfile::{self, pack_bits, unpack_bits};
use qlink_keys::reconcile::Reconciler;
use qlink_net::session::run_session;

#[derive(Parser)]
#[command(name = "qlink", version, about = "Entanglement-distribution network models, key distillation and key-consuming applications")]
struct Cli {
    /// Global seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or output directory for `scenario` and `network`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Guided modes of the reference Bragg reflection waveguide.
    Modes(ModesArgs),
    /// Singles, coincidences and CAR over a pump-power sweep.
    Source(SourceArgs),
    /// Raman background and negativity of the noisy state.
    #[command(subcommand)]
    Noise(NoiseCommand),
    /// Subspace QBER from measured joint spectra, or the model sweep.
    Subspace(SubspaceArgs),
    /// Run the multi-user session from the configuration.
    Network,
    /// Finite-key length, reconciliation and privacy amplification.
    #[command(subcommand)]
    Keys(KeysCommand),
    /// Key-driven image cipher and the crop attack.
    #[command(subcommand)]
    Img(ImgCommand),
    /// Three-party secret sharing over two pairwise keys.
    #[command(subcommand)]
    Qss(QssCommand),
    /// Run a canned scenario and write its artifacts and manifest.
    Scenario {
        /// Scenario name; taken from the configuration when omitted.
        name: Option<String>,
    },
    /// Check a configuration file and list every violation.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pol {
    Te,
    Tm,
}

#[derive(Args)]
struct ModesArgs {
    #[arg(long, default_value_t = 1560.16)]
    lambda_nm: f64,
    #[arg(long, value_enum, default_value_t = Pol::Te)]
    pol: Pol,
    /// Report the type-II overlap with this pump wavelength instead.
    #[arg(long)]
    overlap_pump_nm: Option<f64>,
}

#[derive(Args)]
struct SourceArgs {
    /// Comma-separated pump powers; a 10-point log sweep from 0.01 mW by default.
    #[arg(long, value_delimiter = ',')]
    pump_mw: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    subspaces: usize,
    /// Thin true coincidences by both detectors' dead time.
    #[arg(long)]
    thinned: bool,
}

#[derive(Subcommand)]
enum NoiseCommand {
    /// Raman photon rates over the configured launch powers.
    Raman,
    /// Closed-form and numeric negativity at one point.
    Negativity {
        #[arg(long)]
        white_noise: f64,
        #[arg(long)]
        damping: f64,
        #[arg(long, default_value_t = 1)]
        pairs: usize,
    },
}

#[derive(Args)]
struct SubspaceArgs {
    /// Z-basis joint coincidence matrix (CSV).
    #[arg(long, requires_all = ["x", "groups"])]
    z: Option<PathBuf>,
    /// X-basis joint coincidence matrix (CSV).
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long)]
    groups: Option<usize>,
    /// Polarization error of the signal part.
    #[arg(long, default_value_t = 0.0)]
    e_pol: f64,
}

#[derive(Subcommand)]
enum KeysCommand {
    /// Longest secure key for a sifted block.
    Optimize {
        #[arg(long)]
        sifted_bits: u64,
        #[arg(long)]
        qber: f64,
        /// Reconciliation efficiency f.
        #[arg(long, default_value_t = 1.1)]
        efficiency: f64,
        #[arg(long, default_value_t = 9.0)]
        security_exponent: f64,
        /// Use the literal security terms instead of the regrouped ones.
        #[arg(long)]
        as_printed: bool,
    },
    /// Correct key B toward key A; writes `<out>_a.qkey` and `<out>_b.qkey`.
    Reconcile {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        qber: f64,
        #[arg(long, default_value_t = 10_000)]
        block_bits: usize,
    },
    /// Compress a key to `length` bits with a seeded Toeplitz hash.
    Amplify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        length: usize,
    },
}

#[derive(Args)]
struct ImgIo {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Subcommand)]
enum ImgCommand {
    /// Encrypt a PGM image, consuming key bits from the start of the file.
    Encrypt(ImgIo),
    Decrypt(ImgIo),
    /// Overwrite a rectangle of an image.
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        /// x,y,w,h in pixels.
        #[arg(long)]
        crop: Rect,
        #[arg(long, default_value_t = 0)]
        fill: u8,
    },
}

#[derive(Args)]
struct QssIo {
    /// Message (share) or cipher (reconstruct) as raw bytes.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k_ab: PathBuf,
    #[arg(long)]
    k_ac: PathBuf,
}

#[derive(Subcommand)]
enum QssCommand {
    Share(QssIo),
    Reconstruct(QssIo),
}

impl Cli {
    fn experiment(&self, fallback: Scenario) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::new(fallback),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        Ok(cfg.resolved())
    }

    fn seed(&self) -> Result<u64> {
        Ok(match (&self.seed, &self.config) {
            (Some(s), _) => *s,
            (None, Some(p)) => load_config(p)?.seed,
            (None, None) => 0,
        })
    }

    /// Writes to `--out` when given, otherwise to stdout.
    fn emit_text(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_atomic(p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn out_path(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }
}

fn read_key(path: &Path) -> Result<KeyBlock> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    keyfile::read_key(f).with_context(|| format!("reading {}", path.display()))
}

fn write_key(path: &Path, key: &KeyBlock) -> Result<()> {
    write_atomic(path, &keyfile::encode(key))
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    GrayImage::read_pgm(f).with_context(|| format!("reading {}", path.display()))
}

fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    let mut v = Vec::new();
    img.write_pgm(&mut v)?;
    write_atomic(path, &v)
}

fn json_line(v: &serde_json::Value) -> String {
    format!("{v}\n")
}

fn modes(cli: &Cli, a: &ModesArgs) -> Result<()> {
    let wg = LayeredWaveguide::reference_design();
    let model = Afromowitz::default();
    let opts = SolverOptions::default();
    if let Some(pump) = a.overlap_pump_nm {
        let r = type2_overlap(&wg, &model, pump, &opts, 1.0)?;
        return cli.emit_text(&json_line(&json!({
            "pump_nm": pump,
            "pump_n_eff": r.pump.n_eff,
            "signal_n_eff": r.signal.n_eff,
            "idler_n_eff": r.idler.n_eff,
            "overlap": r.overlap,
        })));
    }
    let pol = match a.pol {
        Pol::Te => Polarization::TE,
        Pol::Tm => Polarization::TM,
    };
    let found = solve_modes(a.lambda_nm, pol, &wg, &model, default_window(&wg, &model, a.lambda_nm)?, &opts)?;
    let mut s = String::from("polarization,lambda_nm,n_eff,class,bloch_modulus\n");
    for m in found {
        let _ = writeln!(s, "{:?},{},{:.12},{:?},{:.12}", m.polarization, m.lambda_nm, m.n_eff, m.class, m.bloch.norm());
    }
    cli.emit_text(&s)
}

fn source(cli: &Cli, a: &SourceArgs) -> Result<()> {
    let cfg = cli.experiment(Scenario::Snr)?;
    let mut p = cfg.coexistence.source.clone();
    if a.thinned {
        p.coincidences = CoincidenceModel::DeadTimeThinned;
    }
    let powers = if a.pump_mw.is_empty() {
        (0..10).map(|k| 0.01 * 10f64.powf(k as f64 * 5.0 / 9.0)).collect()
    } else {
        a.pump_mw.clone()
    };
    let mut s = String::from("pump_mw,singles_signal_hz,singles_idler_hz,true_hz,accidental_hz,car\n");
    for pump in powers {
        let c = coincidence_rates(&p, pump, a.subspaces, RamanPhotons::default());
        let _ = writeln!(
            s,
            "{pump},{:.6},{:.6},{:.6e},{:.6e},{:.6}",
            c.singles.measured_s, c.singles.measured_i, c.true_hz, c.acc_matched_hz, c.car
        );
    }
    cli.emit_text(&s)
}

fn noise(cli: &Cli, c: &NoiseCommand) -> Result<()> {
    match c {
        NoiseCommand::Raman => {
            let cfg = cli.experiment(Scenario::QberSweep)?;
            let mut s = String::from("launch_dbm,raman_signal_hz,raman_idler_hz\n");
            for p in coexistence_points(&cfg.coexistence)? {
                let _ = writeln!(s, "{},{:.6},{:.6}", p.launch_dbm, p.raman_signal_hz, p.raman_idler_hz);
            }
            cli.emit_text(&s)
        }
        &NoiseCommand::Negativity { white_noise, damping, pairs } => {
            if !(0.0..=1.0).contains(&white_noise) || !(0.0..=1.0).contains(&damping) || pairs == 0 {
                return Err(ConfigError::single("", "white noise and damping lie in [0, 1]; pairs start at 1").into());
            }
            let numeric = negativity_numeric(&amplitude_damp(&white_noise_state(white_noise, pairs), damping, damping).normalized());
            let closed = negativity_closed(white_noise, damping, damping, pairs).ok();
            cli.emit_text(&json_line(&json!({
                "white_noise": white_noise, "damping": damping, "pairs": pairs,
                "closed": closed, "numeric": numeric,
            })))
        }
    }
}

fn subspace(cli: &Cli, a: &SubspaceArgs) -> Result<()> {
    if let (Some(z), Some(x), Some(groups)) = (&a.z, &a.x, a.groups) {
        let read = |p: &PathBuf| -> Result<JointCoincidenceMatrix> {
            Ok(JointCoincidenceMatrix::from_csv(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?)
        };
        let (qz, qx) = subspace_qber(&read(z)?, &read(x)?, groups, a.e_pol)?;
        return cli.emit_text(&json_line(&json!({
            "groups": groups,
            "qber_z": qz.pooled, "qber_x": qx.pooled,
            "per_subspace_z": qz.per_subspace, "per_subspace_x": qx.per_subspace,
            "excluded_z": qz.excluded, "excluded_x": qx.excluded,
        })));
    }
    let cfg = cli.experiment(Scenario::QberSweep)?;
    let arts = scenario_artifacts(&ExperimentConfig {
        scenario: Scenario::QberSweep,
        ..cfg
    })?;
    cli.emit_text(std::str::from_utf8(&arts[0].bytes)?)
}

fn network(cli: &Cli) -> Result<()> {
    let cfg = ExperimentConfig {
        scenario: Scenario::Session,
        ..cli.experiment(Scenario::Session)?
    };
    if cli.out.is_some() {
        let arts = scenario_artifacts(&cfg)?;
        emit(&cfg.out_dir, &cfg, &arts)?;
        print!("{}", std::str::from_utf8(&arts[1].bytes)?);
        return Ok(());
    }
    let sc = session_config(&cfg);
    let report = run_session(&sc, &qlink_core::coexist_noise::RamanTable::synthetic())?;
    for row in session_summary(&sc, &report) {
        println!("{}", serde_json::to_string(&row)?);
    }
    Ok(())
}

fn keys(cli: &Cli, c: &KeysCommand) -> Result<()> {
    match c {
        &KeysCommand::Optimize { sifted_bits, qber, efficiency, security_exponent, as_printed } => {
            let forms = if as_printed {
                Formulas {
                    estimation: EstimationForm::AsPrinted,
                    amplification: AmplificationForm::AsPrinted,
                }
            } else {
                Formulas::regrouped()
            };
            let o = optimize_key_length(sifted_bits, qber, efficiency, security_exponent, forms);
            cli.emit_text(&json_line(&serde_json::to_value(&o)?))
        }
        KeysCommand::Reconcile { a, b, qber, block_bits } => {
            let out = cli.out_path()?;
            let r = Reconciler::new(*block_bits, cli.seed()?).reconcile(&read_key(a)?, &read_key(b)?, *qber)?;
            let stem = out.to_string_lossy();
            write_key(Path::new(&format!("{stem}_a.qkey")), &r.key_a)?;
            write_key(Path::new(&format!("{stem}_b.qkey")), &r.key_b)?;
            println!(
                "{}",
                json!({
                    "bucket": r.bucket,
                    "blocks": r.blocks.len(),
                    "frame_success": r.frame_success(),
                    "leakage_bits": r.leakage_bits,
                    "tag_bits": r.tag_bits,
                    "efficiency": r.f_measured,
                    "verified_bits": r.key_a.len(),
                })
            );
            Ok(())
        }
        KeysCommand::Amplify { input, length } => {
            let k = read_key(input)?;
            let mut out = KeyBlock::sifted(privacy_amplify(&k.bits, *length, cli.seed()?)?, k.qber);
            out.leakage_bits = k.leakage_bits;
            out.advance(qlink_core::KeyStatus::Amplified)?;
            write_key(cli.out_path()?, &out)
        }
    }
}

fn img(cli: &Cli, c: &ImgCommand) -> Result<()> {
    let out = cli.out_path()?;
    match c {
        ImgCommand::Encrypt(io) => {
            let enc = encrypt(&read_image(&io.input)?, &mut KeyStream::new(read_key(&io.key)?.bits))?;
            write_image(out, &enc)
        }
        ImgCommand::Decrypt(io) => {
            let dec = decrypt(&read_image(&io.input)?, &mut KeyStream::new(read_key(&io.key)?.bits))?;
            write_image(out, &dec)
        }
        ImgCommand::Attack { input, crop, fill } => write_image(out, &crop_attack(&read_image(input)?, *crop, *fill)?),
    }
}

fn qss(cli: &Cli, c: &QssCommand) -> Result<()> {
    let (io, share) = match c {
        QssCommand::Share(io) => (io, true),
        QssCommand::Reconstruct(io) => (io, false),
    };
    let bytes = fs::read(&io.input).with_context(|| format!("reading {}", io.input.display()))?;
    let bits = unpack_bits(&bytes, 8 * bytes.len());
    let key = |p: &PathBuf| -> Result<Vec<u8>> {
        let k = read_key(p)?;
        if k.len() < bits.len() {
            bail!("{} holds {} bits, {} needed", p.display(), k.len(), bits.len());
        }
        Ok(k.bits[..bits.len()].to_vec())
    };
    let (k_ab, k_ac) = (key(&io.k_ab)?, key(&io.k_ac)?);
    let out = if share {
        qss_encrypt(&bits, &k_ab, &k_ac)?
    } else {
        qss_reconstruct(&bits, &k_ab, &k_ac)?
    };
    write_atomic(cli.out_path()?, &pack_bits(&out))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Modes(a) => modes(cli, a),
        Command::Source(a) => source(cli, a),
        Command::Noise(c) => noise(cli, c),
        Command::Subspace(a) => subspace(cli, a),
        Command::Network => network(cli),
        Command::Keys(c) => keys(cli, c),
        Command::Img(c) => img(cli, c),
        Command::Qss(c) => qss(cli, c),
        Command::Scenario { name } => {
            let named = name.as_deref().map(str::parse::<Scenario>).transpose().map_err(|e| ConfigError::single("scenario", e))?;
            if named.is_none() && cli.config.is_none() {
                return Err(ConfigError::single("scenario", "give a scenario name or --config").into());
            }
            let mut cfg = cli.experiment(named.unwrap_or(Scenario::Negativity))?;
            if let Some(s) = named {
                cfg.scenario = s;
            }
            let manifest = qlink_cli::run_scenario(&cfg)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Validate { path } => {
            let v = validate_config(path);
            if v.is_empty() {
                println!("{}: ok", path.display());
                Ok(())
            } else {
                Err(ConfigError(v).into())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                for v in &c.0 {
                    eprintln!("config error: {v}");
                }
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(3)
            }
        }
    }
}
