//! Unsupervised jamming detection on raw I/Q sample streams.
//!
//! The pipeline: a synthetic 5G-like baseband generator produces labeled
//! I/Q traffic ([`signal`]), windows of consecutive samples are normalized
//! ([`window`]) and fed to a self-attention enhanced LSTM autoencoder
//! ([`model`]) trained with a denoising objective ([`train`]). Windows whose
//! reconstruction error exceeds a percentile threshold calibrated on normal
//! traffic are flagged as jammed ([`detect`]).
//!
//! All numerics are double precision and every source of randomness is an
//! explicit seed, so any run is bit-reproducible.

pub mod detect;
pub mod error;
pub mod iqfile;
pub mod model;
pub mod nn;
pub mod signal;
pub mod train;
pub mod window;

pub use error::{Error, Result};
