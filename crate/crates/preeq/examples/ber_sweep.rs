//! Uncoded QPSK/OFDM BER over AWGN, compared against the closed form
//! Q(sqrt(2 Eb/N0)).
//!
//!     cargo run --release --example ber_sweep

fn qfunc(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

// Abramowitz & Stegun 7.1.26 rational approximation (|err| < 1.5e-7),
// accurate far beyond the Monte Carlo noise floor here.
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let e = poly * (-x * x).exp();
    if x >= 0.0 {
        e
    } else {
        2.0 - e
    }
}

fn main() -> preeq::Result<()> {
    let points = [0.0, 2.0, 4.0, 6.0, 8.0];
    let results = preeq::harness::run_ber_sweep(&points, 600_000, 1)?;
    println!("{:>8}  {:>10}  {:>10}  {:>8}", "Eb/N0", "measured", "theory", "ratio");
    for p in &results {
        let theory = qfunc((2.0 * 10f64.powf(p.eb_n0_db / 10.0)).sqrt());
        println!(
            "{:>6.1} dB  {:>10.3e}  {:>10.3e}  {:>8.3}",
            p.eb_n0_db,
            p.ber,
            theory,
            p.ber / theory
        );
    }
    Ok(())
}
