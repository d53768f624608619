//! Link-level simulator for an OFDM receiver with a trainable residual
//! pre-equalizer that finetunes itself at run time.
//!
//! The receiver recovers training labels from its own channel decoder:
//! hard decisions are Viterbi-decoded, re-encoded and re-modulated, and the
//! resulting symbols serve as regression targets for the pre-equalizer
//! network. No pilots and no feedback channel are required.
//!
//! Crate layout:
//!
//! - [`ofdm`]: QPSK mapping, unitary 64-point (I)DFT, cyclic prefix,
//!   per-subcarrier MMSE equalization.
//! - [`coding`]: terminated rate-1/2 convolutional code (memory 2,
//!   generators 05/07), Viterbi decoding with bounded traceback,
//!   brute-force ML reference decoder.
//! - [`impairments`]: IQ-imbalance, third-order non-linearity with
//!   clipping, AWGN, parameter trajectories, EVM.
//! - [`nn`]: dense layers, the residual pre-equalizer, reverse-mode
//!   gradients through the full receiver chain, Adam, checkpointing.
//! - [`link`]: the online adaptation loop (transmit, decode, label
//!   recovery, finetuning, posterior finetuning).
//! - [`harness`]: experiment presets, metrics CSV, config files.
//! - [`plot`]: SVG line charts from metrics CSV.

pub mod coding;
pub mod harness;
pub mod impairments;
pub mod link;
pub mod nn;
pub mod ofdm;
pub mod plot;
pub mod tensor;

mod error;
pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
