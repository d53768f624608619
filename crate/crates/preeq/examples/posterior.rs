//! Posterior finetuning of a recorded sequence: frames captured across a
//! large IQ-imbalance jump are decoded offline in windows of N_theta
//! frames, finetuning between windows. Smaller windows track the jump
//! sooner than a single update over the whole recording (m = 1).
//!
//!     cargo run --release --example posterior

use preeq::harness::{ExperimentConfig, ExperimentKind};
use preeq::link::{
    initial_training, posterior_finetune, record_frames, PretrainBudget, PretrainRange,
};
use preeq::nn::{AdamState, PreEqNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> preeq::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Fig6);
    cfg.record_frames = 2000;
    let link = cfg.link();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PreEqNet::init(cfg.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&net);
    let budget = PretrainBudget {
        steps: 200,
        frames_per_step: 128,
        snrs_db: vec![cfg.eb_n0_db],
    };
    initial_training(&mut net, &mut adam, &link, PretrainRange { lo: 0.4, hi: 0.6 }, &budget, &mut rng)?;

    let recorded = record_frames(&link, cfg.jump_value, cfg.record_frames, &mut rng)?;
    println!(
        "recorded {} frames at beta = {} ({} dB, {:?} side)",
        cfg.record_frames, cfg.jump_value, cfg.eb_n0_db, cfg.side
    );

    for n_theta in [250usize, 500, cfg.record_frames] {
        let mut net = net.clone();
        let mut adam = adam.clone();
        let out = posterior_finetune(
            &mut net,
            &mut adam,
            &recorded,
            n_theta,
            &link,
            &cfg.finetune_config(),
            cfg.redecode,
        )?;
        let mean_ser: f64 =
            out.windows.iter().map(|w| w.pre_ecc_ser).sum::<f64>() / out.windows.len() as f64;
        let mean_ber: f64 =
            out.windows.iter().map(|w| w.post_ecc_ber).sum::<f64>() / out.windows.len() as f64;
        let tag = if n_theta == cfg.record_frames { " (m = 1)" } else { "" };
        println!(
            "N_theta {:>5}{tag}: mean pre-ECC SER {:.5}, mean post-ECC BER {:.5}",
            n_theta, mean_ser, mean_ber
        );
    }
    Ok(())
}
