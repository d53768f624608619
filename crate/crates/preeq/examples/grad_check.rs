//! Validates the analytic gradients of the full receiver graph
//! (pre-equalizer -> DFT -> MMSE -> loss) against central finite
//! differences on randomly sampled parameters.
//!
//!     cargo run --release --example grad_check

use preeq::impairments::{awgn, iq_imbalance};
use preeq::nn::{grad_check, PreEqNet};
use preeq::ofdm::{self, qpsk_map, BitBlock, OfdmFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> preeq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let net = PreEqNet::with_default_shape(&mut rng);
    let (h, sigma2) = (0.5, 0.025);

    let mut worst = 0.0f64;
    for frame_idx in 0..10 {
        let bits = BitBlock::new((0..2 * ofdm::FFT_LEN).map(|_| rng.gen_range(0..2u8)).collect())?;
        let label = qpsk_map(&bits)?;
        let clean = ofdm::ofdm_modulate(&label)?;
        let distorted = iq_imbalance(clean.samples(), 0.6);
        let received = OfdmFrame::new(awgn(&distorted, sigma2, &mut rng)?)?;

        let max_rel = grad_check(&net, &received, &label, h, sigma2, 1e-5, 64, &mut rng)?;
        println!("frame {frame_idx:2}: max relative error {max_rel:.3e}");
        worst = worst.max(max_rel);
    }
    println!("worst over all frames: {worst:.3e} (tolerance 1e-4)");
    assert!(worst < 1e-4);
    Ok(())
}
