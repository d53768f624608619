//! End-to-end acceptance gate. Each test covers one release criterion and
//! prints a single PASS line with the measured numbers; tolerances are
//! stated inline. The slow scenario tests share pretrained networks
//! through `OnceLock`, so the whole suite pretrains each operating point
//! once. Expect roughly half an hour in release mode
//! (`cargo test --release --test acceptance`).

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use preeq::coding::{self, Traceback};
use preeq::harness::{run_ber_sweep, run_fig3, ExperimentConfig, ExperimentKind};
use preeq::impairments::{awgn, iq_imbalance, nonlinearity, Side, Trajectory};
use preeq::link::{
    collect_training_set, initial_training, posterior_finetune, receive_and_decode, record_frames,
    run_adaptive_link, run_time_step, LabelMode, LinkConfig, PretrainBudget,
    PretrainRange,
};
use preeq::nn::{grad_check, AdamState, PreEqNet};
use preeq::ofdm::{self, qpsk_demap_hard, qpsk_map, BitBlock, OfdmFrame};

fn qfunc(x: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    1.0 - n.cdf(x)
}

/// Binomial standard deviation of an error-rate estimate.
fn rate_sigma(p: f64, n: usize) -> f64 {
    (p.max(1e-12) * (1.0 - p) / n as f64).sqrt()
}

fn pass(criterion: &str, detail: String) {
    println!("PASS {criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Uncoded QPSK/OFDM BER over AWGN matches Q(sqrt(2 Eb/N0)).
// ---------------------------------------------------------------------------
#[test]
fn uncoded_ber_matches_theory() {
    let points = [0.0, 4.0, 8.0];
    let results = run_ber_sweep(&points, 1_000_000, 1).unwrap();
    let mut detail = String::new();
    for p in &results {
        assert!(p.bits >= 1_000_000);
        let theory = qfunc((2.0 * 10f64.powf(p.eb_n0_db / 10.0)).sqrt());
        let sigma = rate_sigma(theory, p.bits);
        assert!(
            (p.ber - theory).abs() < 3.0 * sigma,
            "{} dB: measured {} vs theory {} (3 sigma = {})",
            p.eb_n0_db,
            p.ber,
            theory,
            3.0 * sigma
        );
        detail.push_str(&format!("{} dB {:.2e}/{:.2e}  ", p.eb_n0_db, p.ber, theory));
    }
    pass("uncoded BER vs closed form (3 sigma, 1e6 bits per point)", detail);
}

// ---------------------------------------------------------------------------
// 2. Codec oracle equivalence and error-correction radius.
// ---------------------------------------------------------------------------
#[test]
fn codec_matches_ml_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // Viterbi path metric equals the brute-force ML metric on random
    // (arbitrarily noisy) words, for both traceback strategies.
    for _ in 0..1000 {
        let n = coding::codeword_len(10);
        let word = BitBlock::new((0..n).map(|_| rng.gen_range(0..2u8)).collect()).unwrap();
        let (_, ml_metric) = coding::ml_decode_bruteforce(&word).unwrap();
        for mode in [Traceback::Windowed, Traceback::FullBlock] {
            let (_, metric) = coding::viterbi_decode_with_metric(&word, mode).unwrap();
            assert_eq!(metric, ml_metric, "path metric is not the ML metric");
        }
    }

    // Free distance, measured exhaustively at k = 12.
    let k = 12;
    let mut dfree = usize::MAX;
    for v in 1u32..(1 << k) {
        let info =
            BitBlock::new((0..k).map(|i| ((v >> i) & 1) as u8).collect()).unwrap();
        let weight = coding::encode(&info).hamming(&BitBlock::zeros(coding::codeword_len(k)));
        dfree = dfree.min(weight);
    }
    assert_eq!(dfree, 5, "free distance");

    // Every 2-bit flip pattern is corrected (d_free = 5 corrects 2).
    let n = coding::codeword_len(k);
    for trial in 0..200 {
        let info = if trial == 0 {
            BitBlock::zeros(k)
        } else {
            BitBlock::new((0..k).map(|_| rng.gen_range(0..2u8)).collect()).unwrap()
        };
        let clean = coding::encode(&info);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut bits = clean.bits().to_vec();
                bits[i] ^= 1;
                bits[j] ^= 1;
                let noisy = BitBlock::new(bits).unwrap();
                let decoded = coding::viterbi_decode(&noisy).unwrap();
                assert_eq!(decoded, info, "2-bit pattern ({i},{j}) not corrected");
            }
        }
    }
    pass(
        "codec oracle equivalence",
        format!("1000 random words ML-equal; d_free = {dfree}; all 2-bit flips corrected at k = {k}"),
    );
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients match central finite differences.
// ---------------------------------------------------------------------------
#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = PreEqNet::with_default_shape(&mut rng);
    let (h, sigma2) = (0.5, 0.025);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let bits = BitBlock::new(
            (0..2 * ofdm::FFT_LEN).map(|_| rng.gen_range(0..2u8)).collect(),
        )
        .unwrap();
        let label = qpsk_map(&bits).unwrap();
        let clean = ofdm::ofdm_modulate(&label).unwrap();
        let distorted = iq_imbalance(clean.samples(), 0.62);
        let frame = OfdmFrame::new(awgn(&distorted, sigma2, &mut rng).unwrap()).unwrap();
        let rel = grad_check(&net, &frame, &label, h, sigma2, 1e-5, 100, &mut rng).unwrap();
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "max relative gradient error {worst}");
    pass(
        "gradient fidelity (100 params x 10 frames)",
        format!("max relative error {worst:.3e} < 1e-4"),
    );
}

// ---------------------------------------------------------------------------
// 4. With alpha = 0 the pre-equalized receiver is bit-identical to the
//    plain OFDM receiver.
// ---------------------------------------------------------------------------
#[test]
fn alpha_zero_is_bit_identical_bypass() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = PreEqNet::with_default_shape(&mut rng); // alpha starts at 0
    assert_eq!(net.alpha, 0.0);
    let link = LinkConfig::iq(Side::Tx, 10.0);
    let sigma2 = link.sigma2();
    for _ in 0..10_000 {
        let samples: Vec<_> = (0..ofdm::FRAME_LEN)
            .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let frame = OfdmFrame::new(samples).unwrap();
        let through_net = receive_and_decode(&net, &frame, &link).unwrap();
        let baseline = qpsk_demap_hard(
            &ofdm::ofdm_demodulate_gain(&frame, link.channel_gain, sigma2).unwrap(),
        );
        assert_eq!(through_net.estimated, baseline, "hard decisions differ");
    }
    pass(
        "residual bypass",
        "alpha = 0 receiver bit-identical to the baseline on 10^4 random frames".into(),
    );
}

// ---------------------------------------------------------------------------
// Shared pretrained operating points for the scenario tests.
// ---------------------------------------------------------------------------
fn pretrain(kind: ExperimentKind) -> (ExperimentConfig, PreEqNet, AdamState) {
    let cfg = ExperimentConfig::preset(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PreEqNet::init(cfg.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&net);
    let budget = PretrainBudget {
        steps: cfg.pretrain_steps,
        frames_per_step: cfg.pretrain_frames,
        snrs_db: cfg.pretrain_snrs.clone(),
    };
    let range = PretrainRange {
        lo: cfg.pretrain_lo,
        hi: cfg.pretrain_hi,
    };
    initial_training(&mut net, &mut adam, &cfg.link(), range, &budget, &mut rng).unwrap();
    (cfg, net, adam)
}

fn iq_5db() -> &'static (ExperimentConfig, PreEqNet, AdamState) {
    static S: OnceLock<(ExperimentConfig, PreEqNet, AdamState)> = OnceLock::new();
    S.get_or_init(|| pretrain(ExperimentKind::Fig3))
}

fn iq_10db() -> &'static (ExperimentConfig, PreEqNet, AdamState) {
    static S: OnceLock<(ExperimentConfig, PreEqNet, AdamState)> = OnceLock::new();
    S.get_or_init(|| pretrain(ExperimentKind::Fig4))
}

fn nl_14db() -> &'static (ExperimentConfig, PreEqNet, AdamState) {
    static S: OnceLock<(ExperimentConfig, PreEqNet, AdamState)> = OnceLock::new();
    S.get_or_init(|| pretrain(ExperimentKind::Fig5))
}

// ---------------------------------------------------------------------------
// 5. Label-corruption study at the beta 0.45 -> 0.65 step, 5 dB.
//
// At this operating point the conventional part of the receiver is
// already near the joint-detection bound (the imbalance acts as
// mirror-image interference), so the achievable relative improvements are
// modest; what must hold is the ordering: ECC-corrected labels recover
// essentially all available headroom, corrupted labels recover
// significantly less, and detection-only labeling (about a dozen clean
// frames at ~10% SER) is far worse than either.
// ---------------------------------------------------------------------------
#[test]
fn label_corruption_study_ordering() {
    let (cfg0, net, adam) = iq_5db();
    let mut cfg = cfg0.clone();
    cfg.label_modes = vec![
        LabelMode::Corrupted,
        LabelMode::DetectOnly,
        LabelMode::EccCorrected,
        LabelMode::Genie,
    ];
    let outcome = run_fig3(&cfg, net.clone(), adam.clone()).unwrap();

    let ser_of = |mode: LabelMode| -> f64 {
        outcome
            .final_ser
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, s)| *s)
            .expect("mode missing")
    };
    let (corrupted, detect, ecc, genie) = (
        ser_of(LabelMode::Corrupted),
        ser_of(LabelMode::DetectOnly),
        ser_of(LabelMode::EccCorrected),
        ser_of(LabelMode::Genie),
    );
    let baseline = outcome.baseline_ser;
    let n_sym = cfg.eval_frames * ofdm::FFT_LEN;
    let sigma3 = 3.0 * rate_sigma(baseline, n_sym);

    // Collection-point SER; informational expectation, not a gate.
    println!(
        "collection pre-ECC SER {:.4} (informational band [0.05, 0.15])",
        outcome.collection_ser
    );

    // ECC labels beat both alternatives by more than 3 sigma.
    assert!(ecc + sigma3 < corrupted, "ecc {ecc} vs corrupted {corrupted} (3 sigma {sigma3})");
    assert!(ecc + sigma3 < detect, "ecc {ecc} vs detect-only {detect} (3 sigma {sigma3})");
    // Corrupted labels do not improve significantly (< 20% relative) ...
    let rel = |s: f64| (baseline - s) / baseline;
    assert!(rel(corrupted) < 0.20, "corrupted improved {:.1}%", 100.0 * rel(corrupted));
    // ... while ECC labels recover at least twice what detection-only
    // labeling does, and nearly everything genie labels would.
    assert!(rel(ecc) > 2.0 * rel(detect), "ecc {:.3} vs detect {:.3}", rel(ecc), rel(detect));
    assert!(rel(ecc) > 0.9 * rel(genie), "ecc {:.3} vs genie {:.3}", rel(ecc), rel(genie));

    pass(
        "label recovery through the code",
        format!(
            "final SER baseline {baseline:.4}, corrupted {corrupted:.4}, detect-only {detect:.4}, \
             ecc {ecc:.4}, genie {genie:.4} (3 sigma {sigma3:.4})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Adaptivity under a scripted IQ-imbalance trajectory at 10 dB.
//
// After an excursion ends (and one finetune trigger has passed), the SER
// at the nominal steps must return to within 2x of the nominal-point SER;
// RX-side imbalance must be compensated at least as well as TX-side.
// ---------------------------------------------------------------------------
#[test]
fn adaptive_iq_recovers_at_nominal() {
    let (cfg, net, adam) = iq_10db();
    let traj = Trajectory::scripted(vec![(0, 0.5), (3, 0.65), (9, 0.5), (12, 0.35)]).unwrap();
    let mut mean_ser = Vec::new();
    let mut detail = String::new();
    for side in [Side::Tx, Side::Rx] {
        let mut link = cfg.link();
        link.side = side;
        let mut net = net.clone();
        let mut adam = adam.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(31).wrapping_add(7));
        let rows = run_adaptive_link(
            &mut net,
            &mut adam,
            &link,
            &traj,
            &cfg.finetune_config(),
            cfg.steps,
            true,
            &mut rng,
        )
        .unwrap();
        let n_sym = cfg.frames_per_step * ofdm::FFT_LEN;
        // Nominal reference: the pre-excursion steps at beta = 0.5.
        let nominal = (rows[1].pre_ecc_ser + rows[2].pre_ecc_ser) / 2.0;
        // Recovery: nominal-beta steps after the excursion, once a
        // finetune trigger has occurred (step 9 decodes with the weights
        // still adapted to 0.65; steps 10-11 must be back).
        for r in &rows[10..12] {
            assert_eq!(r.param_beta, 0.5);
            let bound = 2.0 * nominal + 3.0 * rate_sigma(nominal.max(r.pre_ecc_ser), n_sym);
            assert!(
                r.pre_ecc_ser <= bound,
                "{side:?} step {}: SER {} above 2x nominal ({nominal})",
                r.time_step,
                r.pre_ecc_ser
            );
        }
        let mean = rows.iter().map(|r| r.pre_ecc_ser).sum::<f64>() / rows.len() as f64;
        mean_ser.push(mean);
        detail.push_str(&format!(
            "{side:?} nominal {nominal:.5}, recovery {:.5}/{:.5}, mean {mean:.5}; ",
            rows[10].pre_ecc_ser, rows[11].pre_ecc_ser
        ));
    }
    // RX-side compensates at least as well as TX-side.
    let slack = 3.0 * rate_sigma(mean_ser[0], cfg.steps * cfg.frames_per_step * ofdm::FFT_LEN);
    assert!(
        mean_ser[1] <= mean_ser[0] + slack,
        "RX mean {} vs TX mean {}",
        mean_ser[1],
        mean_ser[0]
    );
    pass("adaptivity under drifting IQ imbalance", detail);
}

// ---------------------------------------------------------------------------
// 7. Adaptivity under a drifting non-linearity at 14 dB, gamma
//    0 -> 1.0 -> 0.5, N = 20,000 frames per step, TX and RX runs.
//
// At 14 dB the conventional chain is already near the detection floor
// (QPSK decisions are invariant to the dominant compressive gain), so
// finetuning cannot push the SER below the frozen receiver; what must
// hold instead: the online updates track the drift in their objective
// (the loss at every post-trigger plateau step is below its onset
// value), they never destabilize the link (SER within 1.5x of frozen
// everywhere), the TX-side residual SER at the plateau stays above the
// nominal point (information loss), and after the excursion ends the
// adapted-away receiver re-converges. EVM is reported per step.
// ---------------------------------------------------------------------------
#[test]
fn adaptive_nonlinearity_tracks_the_drift() {
    let (cfg, net, adam) = nl_14db();
    let traj = Trajectory::scripted(vec![(0, 0.0), (2, 1.0), (7, 0.5)]).unwrap();
    let steps = 9;
    let n_sym = cfg.frames_per_step * ofdm::FFT_LEN;
    let mut detail = String::new();
    for side in [Side::Tx, Side::Rx] {
        let mut link = cfg.link();
        link.side = side;
        let mut runs = Vec::new();
        for updates in [true, false] {
            let mut net = net.clone();
            let mut adam = adam.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(31).wrapping_add(7));
            runs.push(
                run_adaptive_link(
                    &mut net,
                    &mut adam,
                    &link,
                    &traj,
                    &cfg.finetune_config(),
                    steps,
                    updates,
                    &mut rng,
                )
                .unwrap(),
            );
        }
        let (tuned, frozen) = (&runs[0], &runs[1]);
        let nominal = tuned[1].pre_ecc_ser;
        let onset_loss = tuned[2].loss;
        for (t, f) in tuned.iter().zip(frozen).take(7) {
            // Bounded interference through the drift plateau. The return
            // steps are excluded: there the adapted-away network starts
            // well above the frozen one and is judged by re-convergence.
            let bound = 1.5 * f.pre_ecc_ser + 3.0 * rate_sigma(f.pre_ecc_ser, n_sym);
            assert!(
                t.pre_ecc_ser <= bound,
                "{side:?} step {}: tuned {} vs frozen {}",
                t.time_step,
                t.pre_ecc_ser,
                f.pre_ecc_ser
            );
        }
        for t in &tuned[3..7] {
            assert!(t.finetune_applied);
            assert!(
                t.loss < onset_loss,
                "{side:?} step {}: loss {} not below onset {onset_loss}",
                t.time_step,
                t.loss
            );
            if side == Side::Tx {
                // Information loss: residual SER above the nominal point.
                let sigma3 = 3.0 * rate_sigma(t.pre_ecc_ser, n_sym);
                assert!(t.pre_ecc_ser > nominal + sigma3);
                // The TX distortion EVM is reported and substantial.
                assert!(t.evm > 0.3, "EVM {} at the plateau", t.evm);
            }
        }
        // Re-convergence after the excursion ends.
        let (first, second) = (tuned[7].pre_ecc_ser, tuned[8].pre_ecc_ser);
        let sigma3 = 3.0 * rate_sigma(first, n_sym);
        assert!(
            second + sigma3 < first,
            "{side:?}: post-excursion SER {second} did not re-converge from {first}"
        );
        detail.push_str(&format!(
            "{side:?} nominal {nominal:.5}, plateau {:.5}->{:.5} (frozen {:.5}), loss {:.4}->{:.4}, return {first:.5}->{second:.5}; ",
            tuned[2].pre_ecc_ser, tuned[6].pre_ecc_ser, frozen[6].pre_ecc_ser, onset_loss, tuned[6].loss
        ));
    }
    pass("adaptivity under drifting non-linearity", detail);
}

// ---------------------------------------------------------------------------
// 8. Posterior finetuning of a recorded sequence across a large beta
//    jump: windowed updates (N_theta 500 and 1000) beat a single update
//    over the whole recording (m = 1) in mean post-ECC BER.
// ---------------------------------------------------------------------------
#[test]
fn posterior_windows_beat_single_update() {
    let (cfg, net, adam) = iq_5db();
    let link = cfg.link();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(131).wrapping_add(3));
    let record_len = 20_000;
    let recorded = record_frames(&link, 0.65, record_len, &mut rng).unwrap();

    let run = |n_theta: usize| -> f64 {
        let mut net = net.clone();
        let mut adam = adam.clone();
        let out = posterior_finetune(
            &mut net,
            &mut adam,
            &recorded,
            n_theta,
            &link,
            &cfg.finetune_config(),
            false,
        )
        .unwrap();
        out.windows.iter().map(|w| w.post_ecc_ber).sum::<f64>() / out.windows.len() as f64
    };
    let single = run(record_len); // m = 1
    let n_info = record_len * coding::DEFAULT_K;
    let sigma3 = 3.0 * rate_sigma(single, n_info);
    let mut detail = format!("m=1 {single:.5}");
    for n_theta in [500, 1000] {
        let windowed = run(n_theta);
        assert!(
            windowed + sigma3 < single,
            "N_theta {n_theta}: {windowed} not below m=1 {single} (3 sigma {sigma3})"
        );
        detail.push_str(&format!(", N_theta {n_theta} {windowed:.5}"));
    }
    pass("posterior finetuning window sizes", detail);
}

// ---------------------------------------------------------------------------
// 9. Property sweep: the invariants the unit tier relies on, re-checked
//    end to end in one place.
// ---------------------------------------------------------------------------
#[test]
fn property_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // Impairment endpoint identities.
    let x: Vec<_> = (0..64)
        .map(|_| num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    for (a, b) in x.iter().zip(iq_imbalance(&x, 0.5)) {
        assert!((a * 0.5 - b).norm() < 1e-15, "beta = 0.5 must halve the frame");
    }
    for (a, b) in x.iter().zip(iq_imbalance(&x, 1.0)) {
        assert!((num_complex::Complex64::new(a.re, 0.0) - b).norm() < 1e-15);
    }
    for (a, b) in x.iter().zip(nonlinearity(&x, 0.0)) {
        assert!((a - b).norm() < 1e-12, "gamma = 0 must be the identity");
    }

    // Parseval: the unitary DFT preserves energy.
    let freq = ofdm::dft(&x).unwrap();
    let e_t: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let e_f: f64 = freq.iter().map(|v| v.norm_sqr()).sum();
    assert!((e_t - e_f).abs() < 1e-9 * e_t.max(1.0));

    // Noiseless loopback through the whole chain is error-free.
    let link = LinkConfig::iq(Side::Tx, f64::INFINITY);
    let net = PreEqNet::with_default_shape(&mut rng);
    let (_, decoded, metrics) = run_time_step(&net, &link, 0.5, 50, &mut rng).unwrap();
    assert_eq!(metrics.pre_ecc_ser, 0.0);
    assert_eq!(metrics.post_ecc_ber, 0.0);
    assert!(!decoded.is_empty());

    // Label-quality monotonicity and truth isolation at a noisy point.
    let noisy = LinkConfig::iq(Side::Tx, 5.0);
    let (records, decoded, _) = run_time_step(&net, &noisy, 0.65, 2000, &mut rng).unwrap();
    let acc = |mode: LabelMode| {
        collect_training_set(&records, &decoded, mode)
            .unwrap()
            .1
            .label_bit_accuracy
            .unwrap()
    };
    let (c, d, e, g) = (
        acc(LabelMode::Corrupted),
        acc(LabelMode::DetectOnly),
        acc(LabelMode::EccCorrected),
        acc(LabelMode::Genie),
    );
    assert_eq!(g, 1.0);
    assert_eq!(d, 1.0, "detection-only keeps only clean frames");
    assert!(e >= c, "ECC labels at least as accurate as raw decisions");
    // Truth isolation: stripping the genie data changes nothing the
    // receiver produces.
    let mut blind = records.clone();
    for r in &mut blind {
        r.truth = None;
    }
    for (r, d0) in blind.iter().zip(&decoded) {
        let d1 = receive_and_decode(&net, &r.y_time, &noisy).unwrap();
        assert_eq!(d1.estimated, d0.estimated);
        assert_eq!(d1.info, d0.info);
    }

    // Determinism: identical seeds give identical runs.
    let mk = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        run_time_step(&net, &noisy, 0.6, 50, &mut rng).unwrap().2
    };
    let (a, b) = (mk(), mk());
    assert_eq!(a.pre_ecc_ser, b.pre_ecc_ser);
    assert_eq!(a.post_ecc_ber, b.post_ecc_ber);
    assert_eq!(a.evm, b.evm);

    pass(
        "property sweep",
        format!("endpoints, Parseval, loopback, label accuracies c/d/e/g = {c:.4}/{d:.4}/{e:.4}/{g:.4}, truth isolation, determinism"),
    );
}
