//! Online adaptation under a drifting IQ imbalance: the link runs a
//! scripted beta trajectory and the receiver finetunes itself each time
//! step on labels recovered through the code. Pass `--frozen` to disable
//! the updates for comparison.
//!
//!     cargo run --release --example adaptive_iq [-- --frozen]

use preeq::harness::{ExperimentConfig, ExperimentKind};
use preeq::impairments::Trajectory;
use preeq::link::run_adaptive_link;
use preeq::nn::{AdamState, PreEqNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> preeq::Result<()> {
    let updates = !std::env::args().any(|a| a == "--frozen");
    let cfg = ExperimentConfig::preset(ExperimentKind::Fig4);
    let link = cfg.link();
    let traj = Trajectory::scripted(vec![(0, 0.5), (3, 0.65), (9, 0.5), (12, 0.35)])?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PreEqNet::init(cfg.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&net);
    // A short warm-up over the nominal range stands in for a saved
    // checkpoint; see the `pretrain` example for the full budget.
    let budget = preeq::link::PretrainBudget {
        steps: 200,
        frames_per_step: 128,
        snrs_db: vec![cfg.eb_n0_db],
    };
    let range = preeq::link::PretrainRange { lo: 0.4, hi: 0.6 };
    preeq::link::initial_training(&mut net, &mut adam, &link, range, &budget, &mut rng)?;

    let rows = run_adaptive_link(
        &mut net,
        &mut adam,
        &link,
        &traj,
        &cfg.finetune_config(),
        cfg.steps,
        updates,
        &mut rng,
    )?;
    println!(
        "updates {}",
        if updates { "enabled" } else { "disabled (--frozen)" }
    );
    println!("{:>4} {:>6} {:>10} {:>12}", "t", "beta", "pre SER", "post BER");
    for r in &rows {
        println!(
            "{:>4} {:>6.2} {:>10.5} {:>12.5}",
            r.time_step, r.param_beta, r.pre_ecc_ser, r.post_ecc_ber
        );
    }
    Ok(())
}
