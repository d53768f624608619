//! The online adaptation loop: transmit coded OFDM frames through the
//! impaired channel, recover labels at the receiver by Viterbi decoding
//! and re-encoding, and finetune the pre-equalizer on those labels.
//!
//! Genie knowledge (the transmitted bits) is carried alongside every
//! frame for metrics only; no weight update and no decoded output depends
//! on it.

use rand::Rng;

use crate::coding::{self, Codeword, InfoWord};
use crate::harness::MetricsRow;
use crate::impairments::{
    awgn, evm, iq_imbalance, nonlinearity_with, ImpairmentState, NlNormalization, NoiseSpec, Side,
    Trajectory,
};
use crate::nn::{
    adam_step, receiver_backward, receiver_forward, receiver_forward_recorded, AdamState,
    ParamGrads, PreEqNet,
};
use crate::ofdm::{self, qpsk_demap_hard, qpsk_map, BitBlock, OfdmFrame, QpskSymbolVec};
use crate::{Error, Result};

/// Which impairment parameter the experiment varies. The inactive effect
/// is not applied at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    IqImbalance,
    Nonlinearity,
}

/// Static description of one simulated link.
#[derive(Debug, Clone)]
pub struct LinkConfig {
    /// Information bits per codeword; 62 gives one codeword per OFDM frame.
    pub k: usize,
    pub noise: NoiseSpec,
    pub effect: Effect,
    pub side: Side,
    /// Flat channel gain the baseline receiver is calibrated to
    /// (0.5 for the IQ experiments, 1.0 otherwise).
    pub channel_gain: f64,
    /// Normalization convention of the non-linearity.
    pub nl_norm: NlNormalization,
}

impl LinkConfig {
    pub fn iq(side: Side, eb_n0_db: f64) -> Self {
        Self {
            k: coding::DEFAULT_K,
            noise: NoiseSpec::from_db(eb_n0_db),
            effect: Effect::IqImbalance,
            side,
            channel_gain: 0.5,
            nl_norm: NlNormalization::Peak,
        }
    }

    pub fn nonlinearity(side: Side, eb_n0_db: f64) -> Self {
        Self {
            k: coding::DEFAULT_K,
            noise: NoiseSpec::from_db(eb_n0_db),
            effect: Effect::Nonlinearity,
            side,
            channel_gain: 1.0,
            nl_norm: NlNormalization::Peak,
        }
    }

    /// Complex noise variance actually added per sample. `Eb/N0` is
    /// referenced to the nominal received signal power (the design-point
    /// channel gain), so the nominal operating point does not change with
    /// the calibration gain.
    pub fn sigma2(&self) -> f64 {
        self.noise.sigma2() * self.channel_gain * self.channel_gain
    }
}

/// Genie-side record of what was actually transmitted. Metrics only.
#[derive(Debug, Clone)]
pub struct FrameTruth {
    pub info: InfoWord,
    pub codeword: Codeword,
    pub symbols: QpskSymbolVec,
}

/// Everything produced for one transmitted frame.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub truth: Option<FrameTruth>,
    /// Received time-domain frame, pre-equalizer input.
    pub y_time: OfdmFrame,
    /// EVM of the TX-side distortion for this frame, when applicable.
    pub evm_tx: Option<f64>,
}

/// Receiver outputs for one frame under a given set of weights.
#[derive(Debug, Clone)]
pub struct Decoded {
    /// Hard-decision codeword estimate.
    pub estimated: Codeword,
    /// Viterbi-decoded information bits.
    pub info: InfoWord,
    /// Re-encoded (corrected) codeword.
    pub reencoded: Codeword,
    /// Equalized frequency-domain symbols.
    pub symbols: QpskSymbolVec,
}

/// How labels for a training example are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Label with the raw hard decisions; transmission errors are kept.
    Corrupted,
    /// Keep only frames received without any error (ideal CRC); errors
    /// are detected but not corrected.
    DetectOnly,
    /// Label with the decoded-and-re-encoded codeword.
    EccCorrected,
    /// Label with the true transmitted codeword (initial training only).
    Genie,
}

impl LabelMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "corrupted" => Ok(LabelMode::Corrupted),
            "detect-only" => Ok(LabelMode::DetectOnly),
            "ecc" => Ok(LabelMode::EccCorrected),
            "genie" => Ok(LabelMode::Genie),
            other => Err(Error::InvalidArgument(format!(
                "unknown label mode {other:?} (expected corrupted|detect-only|ecc|genie)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Corrupted => "corrupted",
            LabelMode::DetectOnly => "detect-only",
            LabelMode::EccCorrected => "ecc",
            LabelMode::Genie => "genie",
        }
    }
}

/// One supervised example for the pre-equalizer.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub y_time: OfdmFrame,
    pub label_codeword: Codeword,
    pub label_symbols: QpskSymbolVec,
}

/// Bookkeeping returned with a collected training set.
#[derive(Debug, Clone, Default)]
pub struct LabelStats {
    pub frames_in: usize,
    pub frames_kept: usize,
    /// Fraction of label bits matching the true codeword, when genie
    /// data was available.
    pub label_bit_accuracy: Option<f64>,
}

/// When weight updates are triggered in the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    Periodic,
    /// Finetune only when the receiver-side BER estimate (disagreement
    /// between hard decisions and the re-encoded codeword) exceeds the
    /// threshold.
    BerThreshold(f64),
}

/// Finetuning schedule.
#[derive(Debug, Clone)]
pub struct FinetuneConfig {
    /// Adam steps per time step (7 in the adaptivity experiments).
    pub iterations_per_step: usize,
    /// Frames per gradient-accumulation batch.
    pub batch_size: usize,
    /// Frames transmitted and collected per time step.
    pub frames_per_step: usize,
    pub trigger: Trigger,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            iterations_per_step: 7,
            batch_size: 1000,
            frames_per_step: 5000,
            trigger: Trigger::Periodic,
        }
    }
}

/// Encodes, modulates and passes one info word through the impaired
/// channel, returning the received frame plus genie truth.
pub fn transmit_frame(
    info: &InfoWord,
    state: &ImpairmentState,
    cfg: &LinkConfig,
    rng: &mut impl Rng,
) -> Result<FrameRecord> {
    let codeword = coding::encode(info);
    let symbols = qpsk_map(&codeword)?;
    let clean = ofdm::ofdm_modulate(&symbols)?;

    let mut samples = clean.samples().to_vec();
    let mut evm_tx = None;
    if state.side.applies_tx() {
        let distorted = apply_effect(&samples, state, cfg);
        evm_tx = Some(evm(&samples, &distorted)?);
        samples = distorted;
    }
    let mut samples = awgn(&samples, cfg.sigma2(), rng)?;
    if state.side.applies_rx() {
        samples = apply_effect(&samples, state, cfg);
    }

    Ok(FrameRecord {
        truth: Some(FrameTruth {
            info: info.clone(),
            codeword,
            symbols,
        }),
        y_time: OfdmFrame::new(samples)?,
        evm_tx,
    })
}

fn apply_effect(samples: &[num_complex::Complex64], state: &ImpairmentState, cfg: &LinkConfig) -> Vec<num_complex::Complex64> {
    match cfg.effect {
        Effect::IqImbalance => iq_imbalance(samples, state.beta_iq),
        Effect::Nonlinearity => nonlinearity_with(samples, state.gamma_nl, cfg.nl_norm),
    }
}

/// Full receive path: equalize, demap, decode, re-encode.
pub fn receive_and_decode(net: &PreEqNet, y_time: &OfdmFrame, cfg: &LinkConfig) -> Result<Decoded> {
    let symbols = receiver_forward(net, y_time, cfg.channel_gain, cfg.sigma2())?;
    let estimated = qpsk_demap_hard(&symbols);
    let info = coding::viterbi_decode(&estimated)?;
    let reencoded = coding::reencode(&info);
    Ok(Decoded {
        estimated,
        info,
        reencoded,
        symbols,
    })
}

/// Builds the training set for `mode` from received frames and their
/// decoder outputs. `DetectOnly` may keep fewer frames than it was given;
/// an empty result is reported in the stats, not an error.
pub fn collect_training_set(
    records: &[FrameRecord],
    decoded: &[Decoded],
    mode: LabelMode,
) -> Result<(Vec<TrainingExample>, LabelStats)> {
    if records.len() != decoded.len() {
        return Err(Error::shape(
            format!("{} decoder outputs", records.len()),
            format!("{}", decoded.len()),
        ));
    }
    let mut examples = Vec::new();
    let mut label_bits_ok = 0usize;
    let mut label_bits_total = 0usize;
    let mut have_truth = true;

    for (rec, dec) in records.iter().zip(decoded) {
        let label_codeword = match mode {
            LabelMode::Corrupted => dec.estimated.clone(),
            LabelMode::EccCorrected => dec.reencoded.clone(),
            LabelMode::DetectOnly => {
                let truth = rec.truth.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(
                        "detect-only labeling needs genie truth for the ideal CRC".into(),
                    )
                })?;
                if dec.estimated != truth.codeword {
                    continue;
                }
                dec.estimated.clone()
            }
            LabelMode::Genie => {
                rec.truth
                    .as_ref()
                    .ok_or_else(|| {
                        Error::InvalidArgument("genie labeling needs the transmitted codeword".into())
                    })?
                    .codeword
                    .clone()
            }
        };
        match &rec.truth {
            Some(truth) => {
                label_bits_total += label_codeword.len();
                label_bits_ok += label_codeword.len() - label_codeword.hamming(&truth.codeword);
            }
            None => have_truth = false,
        }
        let label_symbols = qpsk_map(&label_codeword)?;
        examples.push(TrainingExample {
            y_time: rec.y_time.clone(),
            label_codeword,
            label_symbols,
        });
    }

    let stats = LabelStats {
        frames_in: records.len(),
        frames_kept: examples.len(),
        label_bit_accuracy: if have_truth && label_bits_total > 0 {
            Some(label_bits_ok as f64 / label_bits_total as f64)
        } else {
            None
        },
    };
    Ok((examples, stats))
}

/// Runs `iterations_per_step` Adam steps over the example set. Each
/// iteration accumulates the mean gradient over all examples in batches
/// of `batch_size` before a single update. Returns the mean loss seen in
/// each iteration; an empty set is a warned no-op.
pub fn finetune(
    net: &mut PreEqNet,
    adam: &mut AdamState,
    examples: &[TrainingExample],
    link: &LinkConfig,
    cfg: &FinetuneConfig,
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        eprintln!("warning: finetune called with an empty training set; skipping update");
        return Ok(Vec::new());
    }
    let n = examples.len() as f64;
    let h = link.channel_gain;
    let noise_var = link.sigma2();
    let mut losses = Vec::with_capacity(cfg.iterations_per_step);
    for _ in 0..cfg.iterations_per_step {
        let mut grads = ParamGrads::zeros_like(net);
        let mut loss_sum = 0.0;
        for batch in examples.chunks(cfg.batch_size.max(1)) {
            for ex in batch {
                let (_, record) =
                    receiver_forward_recorded(net, &ex.y_time, h, noise_var, &ex.label_symbols)?;
                loss_sum += record.loss;
                grads.add_assign(&receiver_backward(net, &record)?);
            }
        }
        grads.scale(1.0 / n);
        adam_step(net, &grads, adam)?;
        losses.push(loss_sum / n);
    }
    Ok(losses)
}

/// Parameter range the pre-equalizer is initially trained over.
#[derive(Debug, Clone, Copy)]
pub struct PretrainRange {
    pub lo: f64,
    pub hi: f64,
}

/// Budget of the initial (genie-label) training phase.
#[derive(Debug, Clone)]
pub struct PretrainBudget {
    pub steps: usize,
    pub frames_per_step: usize,
    /// Training operating points; drawn uniformly per step.
    pub snrs_db: Vec<f64>,
}

impl Default for PretrainBudget {
    fn default() -> Self {
        Self {
            steps: 1200,
            frames_per_step: 128,
            snrs_db: vec![10.0, 14.0],
        }
    }
}

/// Initial training with perfect label knowledge: frames are drawn with
/// the drifting parameter sampled uniformly from `range` and trained
/// against the true transmitted symbols. Starts from `alpha = 0`; the
/// residual path engages as alpha is learned jointly.
pub fn initial_training(
    net: &mut PreEqNet,
    adam: &mut AdamState,
    link: &LinkConfig,
    range: PretrainRange,
    budget: &PretrainBudget,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(budget.steps);
    let one_step = FinetuneConfig {
        iterations_per_step: 1,
        batch_size: budget.frames_per_step,
        frames_per_step: budget.frames_per_step,
        trigger: Trigger::Periodic,
    };
    for _ in 0..budget.steps {
        let snr = budget.snrs_db[rng.gen_range(0..budget.snrs_db.len())];
        let mut step_link = link.clone();
        step_link.noise = NoiseSpec::from_db(snr);
        let value = rng.gen_range(range.lo..=range.hi);
        let state = impairment_state(link, value);
        let mut records = Vec::with_capacity(budget.frames_per_step);
        for _ in 0..budget.frames_per_step {
            let info = random_info(link.k, rng);
            records.push(transmit_frame(&info, &state, &step_link, rng)?);
        }
        // Genie labels straight from the truth; no decoding needed here.
        let examples: Vec<TrainingExample> = records
            .iter()
            .map(|r| {
                let truth = r.truth.as_ref().expect("transmit_frame fills truth");
                TrainingExample {
                    y_time: r.y_time.clone(),
                    label_codeword: truth.codeword.clone(),
                    label_symbols: truth.symbols.clone(),
                }
            })
            .collect();
        let l = finetune(net, adam, &examples, &step_link, &one_step)?;
        losses.extend(l);
    }
    Ok(losses)
}

fn impairment_state(link: &LinkConfig, value: f64) -> ImpairmentState {
    let mut state = ImpairmentState {
        beta_iq: 0.5,
        gamma_nl: 0.0,
        side: link.side,
    };
    match link.effect {
        Effect::IqImbalance => state.beta_iq = value,
        Effect::Nonlinearity => state.gamma_nl = value,
    }
    state
}

fn random_info(k: usize, rng: &mut impl Rng) -> InfoWord {
    BitBlock::new((0..k).map(|_| rng.gen_range(0..2u8)).collect()).expect("binary bits")
}

/// Per-frame metrics aggregated over one time step.
#[derive(Debug, Clone, Default)]
pub struct StepMetrics {
    pub pre_ecc_ser: f64,
    pub pre_ecc_ber: f64,
    pub post_ecc_ber: f64,
    pub label_accuracy: f64,
    pub evm: f64,
}

/// Genie comparison of decoder outputs against the transmitted truth.
pub fn measure_step(records: &[FrameRecord], decoded: &[Decoded]) -> StepMetrics {
    let mut symbol_errors = 0usize;
    let mut symbols_total = 0usize;
    let mut bit_errors = 0usize;
    let mut bits_total = 0usize;
    let mut info_errors = 0usize;
    let mut info_total = 0usize;
    let mut label_ok = 0usize;
    let mut label_total = 0usize;
    let mut evm_sum = 0.0;
    let mut evm_count = 0usize;

    for (rec, dec) in records.iter().zip(decoded) {
        let truth = match &rec.truth {
            Some(t) => t,
            None => continue,
        };
        for (a, b) in dec
            .estimated
            .bits()
            .chunks_exact(2)
            .zip(truth.codeword.bits().chunks_exact(2))
        {
            symbols_total += 1;
            if a != b {
                symbol_errors += 1;
            }
        }
        bit_errors += dec.estimated.hamming(&truth.codeword);
        bits_total += truth.codeword.len();
        info_errors += dec.info.hamming(&truth.info);
        info_total += truth.info.len();
        label_total += truth.codeword.len();
        label_ok += truth.codeword.len() - dec.reencoded.hamming(&truth.codeword);
        if let Some(e) = rec.evm_tx {
            evm_sum += e;
            evm_count += 1;
        }
    }

    StepMetrics {
        pre_ecc_ser: ratio(symbol_errors, symbols_total),
        pre_ecc_ber: ratio(bit_errors, bits_total),
        post_ecc_ber: ratio(info_errors, info_total),
        label_accuracy: ratio(label_ok, label_total),
        evm: if evm_count > 0 {
            evm_sum / evm_count as f64
        } else {
            0.0
        },
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One time step of the adaptive link: transmit `frames_per_step` frames
/// at the given impairment value, decode them all with the current
/// weights, and return records, decodings and metrics.
pub fn run_time_step(
    net: &PreEqNet,
    link: &LinkConfig,
    value: f64,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<FrameRecord>, Vec<Decoded>, StepMetrics)> {
    let state = impairment_state(link, value);
    let mut records = Vec::with_capacity(frames);
    let mut decoded = Vec::with_capacity(frames);
    for _ in 0..frames {
        let info = random_info(link.k, rng);
        let rec = transmit_frame(&info, &state, link, rng)?;
        decoded.push(receive_and_decode(net, &rec.y_time, link)?);
        records.push(rec);
    }
    let metrics = measure_step(&records, &decoded);
    Ok((records, decoded, metrics))
}

/// Runs the full adaptive link over a trajectory for `steps` time steps.
/// Per step: advance the impairment parameter, transmit and decode
/// `frames_per_step` frames, record metrics, then (if `updates_enabled`
/// and the trigger fires) finetune on labels recovered through the code.
#[allow(clippy::too_many_arguments)]
pub fn run_adaptive_link(
    net: &mut PreEqNet,
    adam: &mut AdamState,
    link: &LinkConfig,
    traj: &Trajectory,
    ft: &FinetuneConfig,
    steps: usize,
    updates_enabled: bool,
    rng: &mut impl Rng,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(steps);
    let mut value = match link.effect {
        Effect::IqImbalance => 0.5,
        Effect::Nonlinearity => 0.0,
    };
    for t in 0..steps {
        value = traj.step(value, t, rng);
        let (records, decoded, metrics) =
            run_time_step(net, link, value, ft.frames_per_step, rng)?;

        let triggered = updates_enabled
            && match ft.trigger {
                Trigger::Periodic => true,
                Trigger::BerThreshold(th) => {
                    // Receiver-side BER estimate: disagreement between the
                    // hard decisions and the re-encoded codeword.
                    let est: usize = decoded
                        .iter()
                        .map(|d| d.estimated.hamming(&d.reencoded))
                        .sum();
                    let total: usize = decoded.iter().map(|d| d.estimated.len()).sum();
                    ratio(est, total) > th
                }
            };

        let mut loss = f64::NAN;
        if triggered {
            let (examples, _) =
                collect_training_set(&records, &decoded, LabelMode::EccCorrected)?;
            let losses = finetune(net, adam, &examples, link, ft)?;
            if let Some(last) = losses.last() {
                loss = *last;
            }
        }

        let state = impairment_state(link, value);
        rows.push(MetricsRow {
            time_step: t,
            param_beta: state.beta_iq,
            param_gamma: state.gamma_nl,
            side: link.side,
            pre_ecc_ser: metrics.pre_ecc_ser,
            pre_ecc_ber: metrics.pre_ecc_ber,
            post_ecc_ber: metrics.post_ecc_ber,
            evm: metrics.evm,
            label_acc: metrics.label_accuracy,
            finetune_applied: triggered,
            loss,
        });
    }
    Ok(rows)
}

/// Outcome of posterior finetuning over one recorded sequence.
#[derive(Debug, Clone)]
pub struct PosteriorOutcome {
    /// Decoded info bits in transmission order, produced with the weights
    /// available at the start of each window.
    pub decoded: Vec<InfoWord>,
    /// Metrics per window, measured on the emitted decisions.
    pub windows: Vec<StepMetrics>,
}

/// Windowed offline decoding of a recorded sequence: decode a window of
/// `n_theta` frames with the current weights, emit those decisions, then
/// recover labels from the window and apply one finetuning pass before
/// moving on. The recording length must be divisible by `n_theta`.
/// With `redecode` set, each window is decoded a second time after its
/// own update and those decisions are emitted instead.
pub fn posterior_finetune(
    net: &mut PreEqNet,
    adam: &mut AdamState,
    recorded: &[FrameRecord],
    n_theta: usize,
    link: &LinkConfig,
    ft: &FinetuneConfig,
    redecode: bool,
) -> Result<PosteriorOutcome> {
    if n_theta == 0 || recorded.len() % n_theta != 0 {
        return Err(Error::InvalidArgument(format!(
            "recording length {} is not divisible by window size {n_theta}",
            recorded.len()
        )));
    }
    let mut decoded_all = Vec::with_capacity(recorded.len());
    let mut windows = Vec::with_capacity(recorded.len() / n_theta);
    for window in recorded.chunks(n_theta) {
        let mut decoded = Vec::with_capacity(window.len());
        for rec in window {
            decoded.push(receive_and_decode(net, &rec.y_time, link)?);
        }
        let (examples, _) = collect_training_set(window, &decoded, LabelMode::EccCorrected)?;
        finetune(net, adam, &examples, link, ft)?;
        if redecode {
            decoded.clear();
            for rec in window {
                decoded.push(receive_and_decode(net, &rec.y_time, link)?);
            }
        }
        windows.push(measure_step(window, &decoded));
        decoded_all.extend(decoded.into_iter().map(|d| d.info));
    }
    Ok(PosteriorOutcome {
        decoded: decoded_all,
        windows,
    })
}

/// Records `frames` transmissions at a fixed impairment value without
/// decoding them (the posterior scenario's constant-channel recording).
pub fn record_frames(
    link: &LinkConfig,
    value: f64,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<Vec<FrameRecord>> {
    let state = impairment_state(link, value);
    let mut records = Vec::with_capacity(frames);
    for _ in 0..frames {
        let info = random_info(link.k, rng);
        records.push(transmit_frame(&info, &state, link, rng)?);
    }
    Ok(records)
}
