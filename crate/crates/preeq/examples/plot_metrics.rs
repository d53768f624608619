//! Renders a metrics CSV as an SVG line chart. With no arguments, runs a
//! quick BER sweep and plots it.
//!
//!     cargo run --release --example plot_metrics -- [metrics.csv [out.svg]]

use std::path::PathBuf;

use preeq::harness::{run_ber_sweep, write_ber_csv};
use preeq::plot::plot_csv;

fn main() -> preeq::Result<()> {
    let mut args = std::env::args().skip(1);
    let csv = match args.next() {
        Some(p) => PathBuf::from(p),
        None => {
            let path = PathBuf::from("ber.csv");
            let points = run_ber_sweep(&[0.0, 2.0, 4.0, 6.0, 8.0], 120_000, 1)?;
            write_ber_csv(&path, &points)?;
            println!("wrote {}", path.display());
            path
        }
    };
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| csv.with_extension("svg"));
    plot_csv(&csv, &[], &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
