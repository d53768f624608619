//! Command-line front end for the simulator. Exit codes: 0 on success,
//! 1 on a usage error, 2 on a runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use preeq::harness::{
    run_ber_sweep, run_experiment, run_pretrain, write_ber_csv, ExperimentConfig, ExperimentKind,
};
use preeq::plot::plot_csv;

#[derive(Parser)]
#[command(name = "preeq", version, about = "OFDM link simulator with an online-finetuned neural pre-equalizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment preset: fig3|fig4|fig5|fig6|ber_sweep|custom
    #[arg(long, default_value = "custom")]
    experiment: String,
    /// Config file with section.key=value lines; overrides the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Operating Eb/N0 in dB
    #[arg(long)]
    snr_db: Option<f64>,
    /// Output directory (default: runs/, or $PREEQ_OUT_DIR)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pre-trained network checkpoint to start from
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Label modes for the corruption study: corrupted|detect-only|ecc|genie
    /// (comma-separated)
    #[arg(long)]
    label_mode: Option<String>,
    /// Posterior window sizes, comma-separated
    #[arg(long)]
    ntheta: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> preeq::Result<ExperimentConfig> {
        let kind = ExperimentKind::parse(&self.experiment)?;
        let mut cfg = ExperimentConfig::preset(kind);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            cfg.apply_text(&text)?;
            cfg.kind = kind;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(db) = self.snr_db {
            cfg.eb_n0_db = db;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(ckpt) = &self.checkpoint {
            cfg.checkpoint = Some(ckpt.clone());
        }
        if let Some(modes) = &self.label_mode {
            cfg.apply_kv("labels.modes", modes)?;
        }
        if let Some(ntheta) = &self.ntheta {
            cfg.apply_kv("fig6.ntheta", ntheta)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset end to end
    Run(ConfigArgs),
    /// Train a pre-equalizer over an impairment range and save a checkpoint
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint file to write
        #[arg(long, default_value = "pretrained.ckpt")]
        ckpt_out: PathBuf,
    },
    /// Render a metrics CSV as an SVG line plot
    Plot {
        /// Input CSV (first column is the x axis)
        csv: PathBuf,
        /// Output SVG (default: input with .svg extension)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Columns to plot, comma-separated (default: all numeric)
        #[arg(long)]
        columns: Option<String>,
    },
    /// Uncoded QPSK/OFDM BER sweep over AWGN
    Bersweep {
        /// Eb/N0 points in dB, comma-separated
        #[arg(long, default_value = "0,2,4,6,8")]
        snr_db: String,
        /// Bits per point
        #[arg(long, default_value_t = 1_200_000)]
        bits: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV file
        #[arg(long, default_value = "ber.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> preeq::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.build()?;
            let out_dir = run_experiment(&cfg)?;
            println!("{}", out_dir.display());
        }
        Command::Pretrain { cfg, ckpt_out } => {
            let cfg = cfg.build()?;
            run_pretrain(&cfg, &ckpt_out)?;
        }
        Command::Plot { csv, out, columns } => {
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            let columns: Vec<String> = columns
                .map(|c| c.split(',').map(|s| s.trim().to_string()).collect())
                .unwrap_or_default();
            plot_csv(&csv, &columns, &out)?;
            println!("{}", out.display());
        }
        Command::Bersweep {
            snr_db,
            bits,
            seed,
            out,
        } => {
            let points: Vec<f64> = snr_db
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        preeq::Error::Config(format!("bad Eb/N0 value {s:?}"))
                    })
                })
                .collect::<preeq::Result<_>>()?;
            let results = run_ber_sweep(&points, bits, seed)?;
            write_ber_csv(&out, &results)?;
            for p in &results {
                println!("{:>6.2} dB  ber {:.3e}  ({} / {})", p.eb_n0_db, p.ber, p.bit_errors, p.bits);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, anything else is
            // a usage error.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(preeq::Error::Config(msg)) | Err(preeq::Error::InvalidArgument(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
