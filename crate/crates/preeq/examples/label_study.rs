//! The label-corruption study end to end: adapt at beta = 0.45, step to
//! 0.65, collect one training set with the stale weights, then finetune
//! from the same starting point under each labeling policy and compare
//! final symbol error rates. Uses the full preset budget, so expect a
//! runtime of several minutes in release mode.
//!
//!     cargo run --release --example label_study -- [checkpoint.ckpt]

use std::path::PathBuf;

use preeq::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> preeq::Result<()> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Fig3);
    cfg.checkpoint = std::env::args().nth(1).map(PathBuf::from);
    let out_dir = run_experiment(&cfg)?;
    println!("wrote {}", out_dir.display());
    println!("{}", std::fs::read_to_string(out_dir.join("manifest.txt"))?);
    Ok(())
}
