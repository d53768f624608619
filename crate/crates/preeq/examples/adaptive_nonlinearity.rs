//! Online adaptation under a drifting cubic non-linearity at 14 dB,
//! printing the per-step distortion EVM alongside the error rates.
//!
//!     cargo run --release --example adaptive_nonlinearity

use preeq::harness::{ExperimentConfig, ExperimentKind};
use preeq::impairments::Trajectory;
use preeq::link::{initial_training, run_adaptive_link, PretrainBudget, PretrainRange};
use preeq::nn::{AdamState, PreEqNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> preeq::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Fig5);
    // The preset uses 20k frames per step for tight error bars; trim it
    // so the example finishes in about a minute.
    cfg.frames_per_step = 4000;
    let link = cfg.link();
    let traj = Trajectory::scripted(vec![(0, 0.0), (2, 0.6), (7, 0.3)])?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PreEqNet::init(cfg.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&net);
    let budget = PretrainBudget {
        steps: 200,
        frames_per_step: 128,
        snrs_db: vec![cfg.eb_n0_db],
    };
    initial_training(&mut net, &mut adam, &link, PretrainRange { lo: 0.0, hi: 0.3 }, &budget, &mut rng)?;

    let rows = run_adaptive_link(
        &mut net,
        &mut adam,
        &link,
        &traj,
        &cfg.finetune_config(),
        cfg.steps,
        true,
        &mut rng,
    )?;
    println!("{:>4} {:>6} {:>10} {:>12} {:>8}", "t", "gamma", "pre SER", "post BER", "EVM");
    for r in &rows {
        println!(
            "{:>4} {:>6.2} {:>10.5} {:>12.5} {:>8.4}",
            r.time_step, r.param_gamma, r.pre_ecc_ser, r.post_ecc_ber, r.evm
        );
    }
    Ok(())
}
