//! Label recovery through the channel code: transmit frames over an
//! impaired link, then build training sets under each labeling policy and
//! compare how many frames are kept and how accurate the labels are.
//!
//!     cargo run --release --example label_recovery

use preeq::impairments::Side;
use preeq::link::{collect_training_set, run_time_step, LabelMode, LinkConfig};
use preeq::nn::PreEqNet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> preeq::Result<()> {
    let link = LinkConfig::iq(Side::Tx, 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // An untrained network starts as an exact bypass (alpha = 0), so this
    // measures the conventional receiver at beta = 0.65.
    let net = PreEqNet::with_default_shape(&mut rng);

    let (records, decoded, metrics) = run_time_step(&net, &link, 0.65, 4000, &mut rng)?;
    println!(
        "collected 4000 frames at beta=0.65, 5 dB: pre-ECC SER {:.4}, post-ECC BER {:.4}",
        metrics.pre_ecc_ser, metrics.post_ecc_ber
    );
    println!();
    println!("{:<12} {:>8} {:>14}", "labels", "kept", "bit accuracy");
    for mode in [
        LabelMode::Corrupted,
        LabelMode::DetectOnly,
        LabelMode::EccCorrected,
        LabelMode::Genie,
    ] {
        let (examples, stats) = collect_training_set(&records, &decoded, mode)?;
        println!(
            "{:<12} {:>8} {:>14.4}",
            mode.name(),
            examples.len(),
            stats.label_bit_accuracy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
