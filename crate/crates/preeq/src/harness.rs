//! Experiment harness: seeded presets for the label-corruption study, the
//! adaptivity runs and posterior finetuning, plus metrics persistence and
//! run manifests.
//!
//! Config files and manifests are line-oriented `section.key=value` text;
//! a run's manifest embeds its full effective configuration, so any run
//! can be reproduced from its output directory alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::coding;
use crate::impairments::{awgn, NoiseSpec, Side, Trajectory};
use crate::link::{
    collect_training_set, finetune, initial_training, posterior_finetune, record_frames,
    run_adaptive_link, run_time_step, Effect, FinetuneConfig, LabelMode, LinkConfig,
    PretrainBudget, PretrainRange, Trigger,
};
use crate::nn::{load_checkpoint, save_checkpoint, AdamState, PreEqNet, Reshape};
use crate::ofdm::{self, qpsk_demap_hard, qpsk_map, BitBlock};
use crate::{Error, Result};

/// Fixed, versioned metrics CSV header.
pub const CSV_HEADER: &str =
    "time_step,param_beta,param_gamma,side,pre_ecc_ser,pre_ecc_ber,post_ecc_ber,evm,label_acc,finetune,loss";

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub time_step: usize,
    pub param_beta: f64,
    pub param_gamma: f64,
    pub side: Side,
    pub pre_ecc_ser: f64,
    pub pre_ecc_ber: f64,
    pub post_ecc_ber: f64,
    pub evm: f64,
    pub label_acc: f64,
    pub finetune_applied: bool,
    pub loss: f64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.time_step,
            self.param_beta,
            self.param_gamma,
            side_name(self.side),
            self.pre_ecc_ser,
            self.pre_ecc_ber,
            self.post_ecc_ber,
            self.evm,
            self.label_acc,
            u8::from(self.finetune_applied),
            self.loss,
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::Csv(format!("expected 11 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Csv(format!("bad number {s:?}")))
        };
        let row = Self {
            time_step: f[0]
                .parse()
                .map_err(|_| Error::Csv(format!("bad time step {:?}", f[0])))?,
            param_beta: num(f[1])?,
            param_gamma: num(f[2])?,
            side: parse_side(f[3])?,
            pre_ecc_ser: num(f[4])?,
            pre_ecc_ber: num(f[5])?,
            post_ecc_ber: num(f[6])?,
            evm: num(f[7])?,
            label_acc: num(f[8])?,
            finetune_applied: f[9] == "1",
            loss: num(f[10])?,
        };
        for (name, rate) in [
            ("pre_ecc_ser", row.pre_ecc_ser),
            ("pre_ecc_ber", row.pre_ecc_ber),
            ("post_ecc_ber", row.post_ecc_ber),
            ("label_acc", row.label_acc),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Csv(format!("{name} out of [0,1]: {rate}")));
            }
        }
        if row.evm < 0.0 {
            return Err(Error::Csv(format!("negative evm {}", row.evm)));
        }
        Ok(row)
    }
}

pub fn side_name(side: Side) -> &'static str {
    match side {
        Side::Tx => "tx",
        Side::Rx => "rx",
        Side::Both => "both",
    }
}

pub fn parse_side(s: &str) -> Result<Side> {
    match s {
        "tx" => Ok(Side::Tx),
        "rx" => Ok(Side::Rx),
        "both" => Ok(Side::Both),
        other => Err(Error::Config(format!("unknown side {other:?}"))),
    }
}

/// Writes a metrics CSV (header plus rows).
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads and validates a metrics CSV.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Csv(format!(
                "bad or missing header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines.map(MetricsRow::parse_csv_line).collect()
}

/// Experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Label-corruption study at a single imbalance step.
    Fig3,
    /// Adaptivity under drifting IQ-imbalance, TX and RX variants.
    Fig4,
    /// Adaptivity under drifting non-linearity, TX and RX variants.
    Fig5,
    /// Posterior finetuning with varying window size.
    Fig6,
    /// Uncoded QPSK/OFDM BER sweep over AWGN.
    BerSweep,
    /// Fully config-driven adaptive run.
    Custom,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "fig5" => Ok(Self::Fig5),
            "fig6" => Ok(Self::Fig6),
            "ber_sweep" | "bersweep" => Ok(Self::BerSweep),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::BerSweep => "ber_sweep",
            Self::Custom => "custom",
        }
    }
}

/// Full effective configuration of one run. Every field has a preset
/// default; config files and CLI flags override.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub eb_n0_db: f64,
    pub k: usize,
    pub effect: Effect,
    pub side: Side,
    pub channel_gain: f64,
    pub hidden_layers: usize,
    pub alpha_trainable: bool,
    pub reshape: Reshape,
    pub iterations_per_step: usize,
    pub batch_size: usize,
    pub frames_per_step: usize,
    pub trigger: Trigger,
    /// Adaptive time steps (fig4/fig5/custom).
    pub steps: usize,
    /// Frames per evaluation measurement.
    pub eval_frames: usize,
    /// Passes over the collected set during fig3 finetuning.
    pub epochs: usize,
    /// Posterior window sizes to compare (fig6).
    pub ntheta: Vec<usize>,
    /// Length of the fig6 recording.
    pub record_frames: usize,
    /// Impairment value of the fig6 jump.
    pub jump_value: f64,
    /// Re-decode each posterior window after its own update.
    pub redecode: bool,
    /// Scripted trajectory override for custom runs.
    pub trajectory: Option<Trajectory>,
    pub pretrain_steps: usize,
    pub pretrain_frames: usize,
    pub pretrain_lo: f64,
    pub pretrain_hi: f64,
    /// Operating points the initial training draws from.
    pub pretrain_snrs: Vec<f64>,
    pub label_modes: Vec<LabelMode>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// BER sweep operating points.
    pub sweep_db: Vec<f64>,
    /// Bits per BER sweep point.
    pub sweep_bits: usize,
}

impl ExperimentConfig {
    /// Preset defaults for an experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            seed: 1,
            eb_n0_db: 10.0,
            k: coding::DEFAULT_K,
            effect: Effect::IqImbalance,
            side: Side::Tx,
            channel_gain: 0.5,
            hidden_layers: crate::nn::DEFAULT_HIDDEN_LAYERS,
            alpha_trainable: true,
            reshape: Reshape::Interleaved,
            iterations_per_step: 7,
            batch_size: 1000,
            frames_per_step: 5000,
            trigger: Trigger::Periodic,
            steps: 18,
            eval_frames: 3000,
            epochs: 6,
            ntheta: vec![500, 1000],
            record_frames: 4000,
            jump_value: 0.8,
            redecode: false,
            trajectory: None,
            pretrain_steps: 900,
            pretrain_frames: 128,
            pretrain_lo: 0.4,
            pretrain_hi: 0.6,
            pretrain_snrs: vec![10.0],
            label_modes: vec![
                LabelMode::Corrupted,
                LabelMode::DetectOnly,
                LabelMode::EccCorrected,
            ],
            checkpoint: None,
            out_dir: default_out_dir(),
            sweep_db: vec![0.0, 4.0, 8.0],
            sweep_bits: 1_200_000,
        };
        match kind {
            ExperimentKind::Fig3 => {
                cfg.eb_n0_db = 5.0;
                cfg.frames_per_step = 20_000;
                cfg.eval_frames = 20_000;
                cfg.pretrain_steps = 1200;
                cfg.pretrain_lo = 0.40;
                cfg.pretrain_hi = 0.50;
                cfg.pretrain_snrs = vec![5.0];
            }
            ExperimentKind::Fig4 => {
                cfg.eb_n0_db = 10.0;
                cfg.frames_per_step = 5_000;
            }
            ExperimentKind::Fig5 => {
                cfg.eb_n0_db = 14.0;
                cfg.frames_per_step = 20_000;
                cfg.effect = Effect::Nonlinearity;
                cfg.channel_gain = 1.0;
                cfg.steps = 8;
                cfg.pretrain_lo = 0.0;
                cfg.pretrain_hi = 0.3;
                cfg.pretrain_snrs = vec![14.0];
            }
            ExperimentKind::Fig6 => {
                cfg.eb_n0_db = 5.0;
                cfg.side = Side::Tx;
                cfg.jump_value = 0.65;
                cfg.record_frames = 20_000;
                cfg.pretrain_steps = 1200;
                cfg.pretrain_lo = 0.40;
                cfg.pretrain_hi = 0.50;
                cfg.pretrain_snrs = vec![5.0];
            }
            ExperimentKind::BerSweep | ExperimentKind::Custom => {}
        }
        cfg
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            k: self.k,
            noise: NoiseSpec::from_db(self.eb_n0_db),
            effect: self.effect,
            side: self.side,
            channel_gain: self.channel_gain,
            nl_norm: crate::impairments::NlNormalization::Peak,
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        FinetuneConfig {
            iterations_per_step: self.iterations_per_step,
            batch_size: self.batch_size,
            frames_per_step: self.frames_per_step,
            trigger: self.trigger,
        }
    }

    /// Applies `section.key=value` lines from a config file.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("bad value {v:?}")))
        }
        match key {
            "experiment.name" => self.kind = ExperimentKind::parse(value)?,
            "experiment.seed" => self.seed = num(value)?,
            "noise.eb_n0_db" => self.eb_n0_db = num(value)?,
            "code.k" => self.k = num(value)?,
            "link.effect" => {
                self.effect = match value {
                    "iq" => Effect::IqImbalance,
                    "nl" => Effect::Nonlinearity,
                    other => return Err(Error::Config(format!("unknown effect {other:?}"))),
                }
            }
            "link.side" => self.side = parse_side(value)?,
            "link.channel_gain" => self.channel_gain = num(value)?,
            "nn.hidden_layers" => self.hidden_layers = num(value)?,
            "nn.alpha_trainable" => self.alpha_trainable = num::<u8>(value)? != 0,
            "nn.reshape" => {
                self.reshape = match value {
                    "interleaved" => Reshape::Interleaved,
                    "blocked" => Reshape::Blocked,
                    other => return Err(Error::Config(format!("unknown reshape {other:?}"))),
                }
            }
            "finetune.iterations" => self.iterations_per_step = num(value)?,
            "finetune.batch_size" => self.batch_size = num(value)?,
            "finetune.frames_per_step" => self.frames_per_step = num(value)?,
            "finetune.trigger" => {
                self.trigger = match value {
                    "periodic" => Trigger::Periodic,
                    other => match other.strip_prefix("ber>") {
                        Some(th) => Trigger::BerThreshold(num(th)?),
                        None => {
                            return Err(Error::Config(format!("unknown trigger {other:?}")))
                        }
                    },
                }
            }
            "adapt.steps" => self.steps = num(value)?,
            "eval.frames" => self.eval_frames = num(value)?,
            "fig3.epochs" => self.epochs = num(value)?,
            "fig6.ntheta" => {
                self.ntheta = value
                    .split(',')
                    .map(|s| num::<usize>(s.trim()))
                    .collect::<Result<_>>()?
            }
            "fig6.record_frames" => self.record_frames = num(value)?,
            "fig6.jump_value" => self.jump_value = num(value)?,
            "fig6.redecode" => self.redecode = num::<u8>(value)? != 0,
            "traj.file" => {
                let text = fs::read_to_string(value)?;
                self.trajectory = Some(Trajectory::parse(&text)?);
            }
            "pretrain.steps" => self.pretrain_steps = num(value)?,
            "pretrain.frames" => self.pretrain_frames = num(value)?,
            "pretrain.lo" => self.pretrain_lo = num(value)?,
            "pretrain.hi" => self.pretrain_hi = num(value)?,
            "pretrain.snrs_db" => {
                self.pretrain_snrs = value
                    .split(',')
                    .map(|s| num::<f64>(s.trim()))
                    .collect::<Result<_>>()?
            }
            "labels.modes" => {
                self.label_modes = value
                    .split(',')
                    .map(|s| LabelMode::parse(s.trim()))
                    .collect::<Result<_>>()?
            }
            "io.checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "io.out_dir" => self.out_dir = PathBuf::from(value),
            "sweep.eb_n0_db" => {
                self.sweep_db = value
                    .split(',')
                    .map(|s| num::<f64>(s.trim()))
                    .collect::<Result<_>>()?
            }
            "sweep.bits" => self.sweep_bits = num(value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Serializes the effective configuration in config-file form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment.name={}", self.kind.name());
        let _ = writeln!(s, "experiment.seed={}", self.seed);
        let _ = writeln!(s, "noise.eb_n0_db={}", self.eb_n0_db);
        let _ = writeln!(s, "code.k={}", self.k);
        let _ = writeln!(
            s,
            "link.effect={}",
            match self.effect {
                Effect::IqImbalance => "iq",
                Effect::Nonlinearity => "nl",
            }
        );
        let _ = writeln!(s, "link.side={}", side_name(self.side));
        let _ = writeln!(s, "link.channel_gain={}", self.channel_gain);
        let _ = writeln!(s, "nn.hidden_layers={}", self.hidden_layers);
        let _ = writeln!(s, "nn.alpha_trainable={}", u8::from(self.alpha_trainable));
        let _ = writeln!(
            s,
            "nn.reshape={}",
            match self.reshape {
                Reshape::Interleaved => "interleaved",
                Reshape::Blocked => "blocked",
            }
        );
        let _ = writeln!(s, "finetune.iterations={}", self.iterations_per_step);
        let _ = writeln!(s, "finetune.batch_size={}", self.batch_size);
        let _ = writeln!(s, "finetune.frames_per_step={}", self.frames_per_step);
        let _ = writeln!(
            s,
            "finetune.trigger={}",
            match self.trigger {
                Trigger::Periodic => "periodic".to_string(),
                Trigger::BerThreshold(th) => format!("ber>{th}"),
            }
        );
        let _ = writeln!(s, "adapt.steps={}", self.steps);
        let _ = writeln!(s, "eval.frames={}", self.eval_frames);
        let _ = writeln!(s, "fig3.epochs={}", self.epochs);
        let _ = writeln!(
            s,
            "fig6.ntheta={}",
            self.ntheta
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "fig6.record_frames={}", self.record_frames);
        let _ = writeln!(s, "fig6.jump_value={}", self.jump_value);
        let _ = writeln!(s, "fig6.redecode={}", u8::from(self.redecode));
        let _ = writeln!(s, "pretrain.steps={}", self.pretrain_steps);
        let _ = writeln!(s, "pretrain.frames={}", self.pretrain_frames);
        let _ = writeln!(s, "pretrain.lo={}", self.pretrain_lo);
        let _ = writeln!(s, "pretrain.hi={}", self.pretrain_hi);
        let _ = writeln!(
            s,
            "pretrain.snrs_db={}",
            self.pretrain_snrs
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(
            s,
            "labels.modes={}",
            self.label_modes
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(",")
        );
        if let Some(ckpt) = &self.checkpoint {
            let _ = writeln!(s, "io.checkpoint={}", ckpt.display());
        }
        let _ = writeln!(s, "io.out_dir={}", self.out_dir.display());
        let _ = writeln!(
            s,
            "sweep.eb_n0_db={}",
            self.sweep_db
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "sweep.bits={}", self.sweep_bits);
        s
    }
}

/// Default output directory, overridable via `PREEQ_OUT_DIR`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os("PREEQ_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Trains a pre-equalizer for the configured effect/side over the
/// configured parameter range and saves the checkpoint.
pub fn run_pretrain(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PreEqNet::init(cfg.hidden_layers, &mut rng);
    net.alpha_trainable = cfg.alpha_trainable;
    net.reshape = cfg.reshape;
    let mut adam = AdamState::new(&net);
    let link = cfg.link();
    let budget = PretrainBudget {
        steps: cfg.pretrain_steps,
        frames_per_step: cfg.pretrain_frames,
        snrs_db: cfg.pretrain_snrs.clone(),
    };
    let range = PretrainRange {
        lo: cfg.pretrain_lo,
        hi: cfg.pretrain_hi,
    };
    let losses = initial_training(&mut net, &mut adam, &link, range, &budget, &mut rng)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_checkpoint(out, &net, Some(&adam))?;
    eprintln!(
        "pretrained {} steps, first loss {:.6}, last loss {:.6}, alpha {:.4} -> {}",
        losses.len(),
        losses.first().copied().unwrap_or(f64::NAN),
        losses.last().copied().unwrap_or(f64::NAN),
        net.alpha,
        out.display()
    );
    Ok(())
}

fn load_or_pretrain(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PreEqNet, AdamState, PathBuf)> {
    match &cfg.checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let adam = ckpt.adam.unwrap_or_else(|| AdamState::new(&ckpt.net));
            Ok((ckpt.net, adam, path.clone()))
        }
        None => {
            let path = out_dir.join("pretrained.ckpt");
            eprintln!("no checkpoint given; pretraining into {}", path.display());
            run_pretrain(cfg, &path)?;
            let ckpt = load_checkpoint(&path)?;
            let adam = ckpt.adam.unwrap_or_else(|| AdamState::new(&ckpt.net));
            Ok((ckpt.net, adam, path))
        }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// One point of the uncoded BER sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub eb_n0_db: f64,
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
}

/// Uncoded QPSK/OFDM loopback over AWGN. For the uncoded sweep
/// `sigma2 = 1/(2 * Eb/N0)` (2 bits per unit-energy symbol, no code).
pub fn run_ber_sweep(points_db: &[f64], bits_per_point: usize, seed: u64) -> Result<Vec<BerPoint>> {
    let mut out = Vec::with_capacity(points_db.len());
    for (i, &db) in points_db.iter().enumerate() {
        let sigma2 = 1.0 / (2.0 * 10f64.powf(db / 10.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut errors = 0usize;
        let mut sent = 0usize;
        while sent < bits_per_point {
            let bits =
                BitBlock::new((0..2 * ofdm::FFT_LEN).map(|_| rng.gen_range(0..2u8)).collect())?;
            let grid = qpsk_map(&bits)?;
            let frame = ofdm::ofdm_modulate(&grid)?;
            let noisy = ofdm::OfdmFrame::new(awgn(frame.samples(), sigma2, &mut rng)?)?;
            let eq = ofdm::ofdm_demodulate(&noisy, sigma2)?;
            let decided = qpsk_demap_hard(&eq);
            errors += decided.hamming(&bits);
            sent += bits.len();
        }
        out.push(BerPoint {
            eb_n0_db: db,
            bits: sent,
            bit_errors: errors,
            ber: errors as f64 / sent as f64,
        });
    }
    Ok(out)
}

pub fn write_ber_csv(path: &Path, points: &[BerPoint]) -> Result<()> {
    let mut s = String::from("eb_n0_db,bits,bit_errors,ber\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.eb_n0_db, p.bits, p.bit_errors, p.ber);
    }
    fs::write(path, s)?;
    Ok(())
}

/// Runs the configured experiment, returning the output directory.
/// Outputs are deterministic for a given config and seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out_dir = cfg.out_dir.join(format!("{}-seed{}", cfg.kind.name(), cfg.seed));
    fs::create_dir_all(&out_dir)?;
    let mut manifest = cfg.to_text();
    let _ = writeln!(manifest, "meta.version={}", env!("CARGO_PKG_VERSION"));

    match cfg.kind {
        ExperimentKind::BerSweep => {
            let points = run_ber_sweep(&cfg.sweep_db, cfg.sweep_bits, cfg.seed)?;
            write_ber_csv(&out_dir.join("ber.csv"), &points)?;
        }
        ExperimentKind::Fig3 => {
            let (net, adam, ckpt_path) = load_or_pretrain(cfg, &out_dir)?;
            let _ = writeln!(manifest, "meta.checkpoint_sha256={}", sha256_file(&ckpt_path)?);
            let outcome = run_fig3(cfg, net, adam)?;
            for (mode, rows) in outcome.per_mode {
                write_metrics_csv(
                    &out_dir.join(format!("fig3_{}.csv", mode.name())),
                    &rows,
                )?;
            }
            let _ = writeln!(
                manifest,
                "result.collection_pre_ecc_ser={}",
                outcome.collection_ser
            );
        }
        ExperimentKind::Fig4 | ExperimentKind::Fig5 | ExperimentKind::Custom => {
            let (net, adam, ckpt_path) = load_or_pretrain(cfg, &out_dir)?;
            let _ = writeln!(manifest, "meta.checkpoint_sha256={}", sha256_file(&ckpt_path)?);
            for side in adaptive_sides(cfg) {
                let mut side_cfg = cfg.clone();
                side_cfg.side = side;
                let link = side_cfg.link();
                let traj = adaptive_trajectory(&side_cfg)?;
                let mut net = net.clone();
                let mut adam = adam.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(31).wrapping_add(7));
                let rows = run_adaptive_link(
                    &mut net,
                    &mut adam,
                    &link,
                    &traj,
                    &side_cfg.finetune_config(),
                    side_cfg.steps,
                    true,
                    &mut rng,
                )?;
                write_metrics_csv(
                    &out_dir.join(format!("adaptive_{}.csv", side_name(side))),
                    &rows,
                )?;
            }
        }
        ExperimentKind::Fig6 => {
            let (net, adam, ckpt_path) = load_or_pretrain(cfg, &out_dir)?;
            let _ = writeln!(manifest, "meta.checkpoint_sha256={}", sha256_file(&ckpt_path)?);
            let link = cfg.link();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(131).wrapping_add(3));
            let recorded = record_frames(&link, cfg.jump_value, cfg.record_frames, &mut rng)?;
            let mut windows = cfg.ntheta.clone();
            windows.push(cfg.record_frames); // m = 1 reference
            for n_theta in windows {
                let mut net = net.clone();
                let mut adam = adam.clone();
                let outcome = posterior_finetune(
                    &mut net,
                    &mut adam,
                    &recorded,
                    n_theta,
                    &link,
                    &cfg.finetune_config(),
                    cfg.redecode,
                )?;
                let rows: Vec<MetricsRow> = outcome
                    .windows
                    .iter()
                    .enumerate()
                    .map(|(i, w)| MetricsRow {
                        time_step: i,
                        param_beta: cfg.jump_value,
                        param_gamma: 0.0,
                        side: cfg.side,
                        pre_ecc_ser: w.pre_ecc_ser,
                        pre_ecc_ber: w.pre_ecc_ber,
                        post_ecc_ber: w.post_ecc_ber,
                        evm: w.evm,
                        label_acc: w.label_accuracy,
                        finetune_applied: true,
                        loss: f64::NAN,
                    })
                    .collect();
                write_metrics_csv(
                    &out_dir.join(format!("posterior_ntheta{n_theta}.csv")),
                    &rows,
                )?;
                let mean_ber: f64 = outcome
                    .windows
                    .iter()
                    .map(|w| w.post_ecc_ber)
                    .sum::<f64>()
                    / outcome.windows.len() as f64;
                let _ = writeln!(manifest, "result.post_ecc_ber.ntheta{n_theta}={mean_ber}");
            }
        }
    }

    fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(out_dir)
}

fn adaptive_sides(cfg: &ExperimentConfig) -> Vec<Side> {
    match cfg.kind {
        ExperimentKind::Fig4 | ExperimentKind::Fig5 => vec![Side::Tx, Side::Rx],
        _ => vec![cfg.side],
    }
}

fn adaptive_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory> {
    if let Some(t) = &cfg.trajectory {
        return Ok(t.clone());
    }
    match cfg.effect {
        // Nominal 0.5 with excursions to 0.65 and 0.35.
        Effect::IqImbalance => Trajectory::scripted(vec![
            (0, 0.5),
            (3, 0.65),
            (9, 0.5),
            (12, 0.35),
        ]),
        // Calm start, a strong distortion plateau, then partial recovery.
        Effect::Nonlinearity => Trajectory::scripted(vec![(0, 0.0), (2, 1.0), (7, 0.5)]),
    }
}

/// Outcome of the fig3 label-corruption study.
pub struct Fig3Outcome {
    /// Metrics rows per label mode: one row per epoch (evaluated on a
    /// shared eval set) plus a final row.
    pub per_mode: Vec<(LabelMode, Vec<MetricsRow>)>,
    /// Pre-ECC SER at the collection point (before any finetuning).
    pub collection_ser: f64,
    /// Final pre-ECC SER per mode.
    pub final_ser: Vec<(LabelMode, f64)>,
    /// Baseline SER at the new impairment value without finetuning.
    pub baseline_ser: f64,
}

/// The label-corruption study: adapt to the pre-step value, step the
/// impairment, collect one training set with the stale weights, then
/// finetune once per label mode from the same starting point and compare.
pub fn run_fig3(cfg: &ExperimentConfig, net: PreEqNet, adam: AdamState) -> Result<Fig3Outcome> {
    let link = cfg.link();
    let ft = cfg.finetune_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(17).wrapping_add(11));

    // One Adam step per batch of `batch_size` frames.
    let one_step = FinetuneConfig {
        iterations_per_step: 1,
        batch_size: cfg.batch_size,
        frames_per_step: ft.frames_per_step,
        trigger: Trigger::Periodic,
    };
    let train_pass = |net: &mut PreEqNet,
                      adam: &mut AdamState,
                      examples: &[crate::link::TrainingExample]|
     -> Result<f64> {
        let mut last = f64::NAN;
        for batch in examples.chunks(cfg.batch_size.max(1)) {
            let losses = finetune(net, adam, batch, &link, &one_step)?;
            if let Some(l) = losses.last() {
                last = *l;
            }
        }
        Ok(last)
    };

    // Settle the running system at the pre-step operating point until it
    // is converged there (so the later finetuning measures the labels,
    // not leftover pretraining slack).
    let mut net = net;
    let mut adam = adam;
    for _ in 0..3 {
        let (records, decoded, _) = run_time_step(&net, &link, 0.45, 5000, &mut rng)?;
        let (examples, _) = collect_training_set(&records, &decoded, LabelMode::EccCorrected)?;
        for _ in 0..3 {
            train_pass(&mut net, &mut adam, &examples)?;
        }
    }

    // Step to the new value and collect the shared training set with the
    // now-stale weights.
    let step_value = 0.65;
    let (records, decoded, collect_metrics) =
        run_time_step(&net, &link, step_value, ft.frames_per_step, &mut rng)?;
    let collection_ser = collect_metrics.pre_ecc_ser;

    // Shared evaluation stream so every mode sees identical frames.
    let eval_seed = cfg.seed.wrapping_mul(1009).wrapping_add(5);
    let eval = |net: &PreEqNet| -> Result<crate::link::StepMetrics> {
        let mut eval_rng = ChaCha8Rng::seed_from_u64(eval_seed);
        let (_, _, m) = run_time_step(net, &link, step_value, cfg.eval_frames, &mut eval_rng)?;
        Ok(m)
    };
    let baseline_ser = eval(&net)?.pre_ecc_ser;

    let mut per_mode = Vec::new();
    let mut final_ser = Vec::new();
    for &mode in &cfg.label_modes {
        let mut mode_net = net.clone();
        let mut mode_adam = adam.clone();
        let (examples, stats) = collect_training_set(&records, &decoded, mode)?;
        eprintln!(
            "fig3 {}: {} of {} frames kept, label accuracy {:?}",
            mode.name(),
            stats.frames_kept,
            stats.frames_in,
            stats.label_bit_accuracy
        );
        let mut rows = Vec::new();
        let push_row = |epoch: usize,
                            m: &crate::link::StepMetrics,
                            loss: f64,
                            rows: &mut Vec<MetricsRow>| {
            rows.push(MetricsRow {
                time_step: epoch,
                param_beta: step_value,
                param_gamma: 0.0,
                side: cfg.side,
                pre_ecc_ser: m.pre_ecc_ser,
                pre_ecc_ber: m.pre_ecc_ber,
                post_ecc_ber: m.post_ecc_ber,
                evm: m.evm,
                label_acc: stats.label_bit_accuracy.unwrap_or(f64::NAN),
                finetune_applied: epoch > 0,
                loss,
            });
        };
        push_row(0, &eval(&mode_net)?, f64::NAN, &mut rows);
        for epoch in 1..=cfg.epochs {
            let loss = train_pass(&mut mode_net, &mut mode_adam, &examples)?;
            let m = eval(&mode_net)?;
            push_row(epoch, &m, loss, &mut rows);
        }
        final_ser.push((mode, rows.last().unwrap().pre_ecc_ser));
        per_mode.push((mode, rows));
    }

    Ok(Fig3Outcome {
        per_mode,
        collection_ser,
        final_ser,
        baseline_ser,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            time_step: 3,
            param_beta: 0.65,
            param_gamma: 0.0,
            side: Side::Tx,
            pre_ecc_ser: 0.096,
            pre_ecc_ber: 0.051,
            post_ecc_ber: 0.012,
            evm: 0.21,
            label_acc: 0.99,
            finetune_applied: true,
            loss: 0.034,
        }
    }

    #[test]
    fn csv_roundtrip_is_byte_identical() {
        let rows = vec![
            row(),
            MetricsRow {
                time_step: 4,
                side: Side::Rx,
                finetune_applied: false,
                loss: f64::NAN,
                ..row()
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics_csv(&path, &rows).unwrap();
        let bytes1 = fs::read(&path).unwrap();
        let parsed = read_metrics_csv(&path).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0], rows[0]);
        assert_eq!(parsed[1].side, Side::Rx);
        assert!(parsed[1].loss.is_nan());
        write_metrics_csv(&path, &parsed).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes1);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        assert!(MetricsRow::parse_csv_line("1,0.5,0,tx,0.1").is_err());
        // SER out of range.
        assert!(
            MetricsRow::parse_csv_line("1,0.5,0,tx,1.5,0.1,0.1,0.2,0.9,1,0.1").is_err()
        );
        assert!(
            MetricsRow::parse_csv_line("1,0.5,0,midway,0.1,0.1,0.1,0.2,0.9,1,0.1").is_err()
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_metrics_csv(&path).is_err());
    }

    #[test]
    fn config_text_roundtrip() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Fig4);
        cfg.seed = 99;
        cfg.eb_n0_db = 12.5;
        cfg.trigger = Trigger::BerThreshold(0.02);
        cfg.label_modes = vec![LabelMode::EccCorrected];
        let text = cfg.to_text();
        let mut parsed = ExperimentConfig::preset(ExperimentKind::Custom);
        parsed.apply_text(&text).unwrap();
        assert_eq!(parsed.kind, ExperimentKind::Fig4);
        assert_eq!(parsed.seed, 99);
        assert_eq!(parsed.eb_n0_db, 12.5);
        assert_eq!(parsed.trigger, Trigger::BerThreshold(0.02));
        assert_eq!(parsed.label_modes, vec![LabelMode::EccCorrected]);
        // Second serialization is identical.
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn config_rejects_unknown_keys_and_garbage() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Custom);
        assert!(cfg.apply_text("bogus.key=1").is_err());
        assert!(cfg.apply_text("noise.eb_n0_db").is_err());
        assert!(cfg.apply_text("noise.eb_n0_db=ten").is_err());
        // Comments and blank lines are fine.
        cfg.apply_text("# comment\n\nexperiment.seed=7\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn ber_sweep_matches_qpsk_theory() {
        let points = run_ber_sweep(&[4.0], 60_000, 11).unwrap();
        let p = &points[0];
        assert_eq!(p.bits, 60_032); // rounded up to whole frames
        // Uncoded QPSK over AWGN: BER = Q(sqrt(2 Eb/N0)).
        let ebn0 = 10f64.powf(0.4);
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        let theory =
            1.0 - statrs::distribution::ContinuousCDF::cdf(&normal, (2.0 * ebn0).sqrt());
        assert!(
            (p.ber - theory).abs() < 0.25 * theory,
            "ber {} vs theory {theory}",
            p.ber
        );
    }

    #[test]
    fn ber_sweep_is_deterministic() {
        let a = run_ber_sweep(&[2.0], 10_000, 5).unwrap();
        let b = run_ber_sweep(&[2.0], 10_000, 5).unwrap();
        assert_eq!(a, b);
        let c = run_ber_sweep(&[2.0], 10_000, 6).unwrap();
        assert_ne!(a[0].bit_errors, c[0].bit_errors);
    }

    #[test]
    fn presets_have_expected_operating_points() {
        let f3 = ExperimentConfig::preset(ExperimentKind::Fig3);
        assert_eq!(f3.eb_n0_db, 5.0);
        assert_eq!(f3.frames_per_step, 20_000);
        let f4 = ExperimentConfig::preset(ExperimentKind::Fig4);
        assert_eq!(f4.eb_n0_db, 10.0);
        assert_eq!(f4.frames_per_step, 5_000);
        let f5 = ExperimentConfig::preset(ExperimentKind::Fig5);
        assert_eq!(f5.eb_n0_db, 14.0);
        assert_eq!(f5.frames_per_step, 20_000);
        assert_eq!(f5.effect, Effect::Nonlinearity);
        let f6 = ExperimentConfig::preset(ExperimentKind::Fig6);
        assert_eq!(f6.side, Side::Tx);
        assert_eq!(f6.eb_n0_db, 5.0);
        assert_eq!(f6.jump_value, 0.65);
        assert_eq!(f6.ntheta, vec![500, 1000]);
    }
}
