//! Initial training of the pre-equalizer over a range of impairment
//! values with genie labels, saving a checkpoint that the adaptive
//! examples can start from.
//!
//!     cargo run --release --example pretrain -- [out.ckpt]

use std::path::PathBuf;

use preeq::harness::{run_pretrain, ExperimentConfig, ExperimentKind};

fn main() -> preeq::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("pretrained.ckpt"));
    // The fig4 preset: IQ imbalance drawn from [0.4, 0.6] at 10 dB.
    let cfg = ExperimentConfig::preset(ExperimentKind::Fig4);
    run_pretrain(&cfg, &out)?;
    Ok(())
}
