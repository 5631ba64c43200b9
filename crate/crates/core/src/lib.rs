//! Spectral-quotient cumulant classification (SQCC) of OFDM modulation types.
//!
//! This crate is the pure algorithmic core: constellation alphabets, OFDM
//! synthesis and recovery, the Rician tap-delay-line channel, spectral
//! quotient features with their cumulant estimators, and a small
//! feed-forward classifier. It is `no_std` and only needs `alloc`; file
//! formats, the experiment harness and the CLI live in the `sqcc` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod constellation;
mod error;
pub mod features;
pub mod fft;
pub mod frame;
pub mod metrics;
pub mod mlp;
pub mod ofdm;
pub mod seed;

pub use num_complex::Complex64;

pub use crate::channel::{ChannelRealization, ChannelSpec};
pub use crate::constellation::{Alphabet, Modulation, Pool};
pub use crate::error::Error;
pub use crate::features::{FilterConfig, SqcVector};
pub use crate::frame::FrameSpec;
pub use crate::metrics::ConfusionMatrix;
pub use crate::mlp::{MlpModel, TrainConfig};
pub use crate::ofdm::OfdmParams;

pub type Result<T, E = Error> = core::result::Result<T, E>;
