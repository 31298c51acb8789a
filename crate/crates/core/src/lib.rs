//! Metric learning between fixed-length multichannel time-series segments and
//! routine discovery by spectral clustering under the learned metric.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! experiment pipeline and the command line live in the `ss2s` crate.
//!
//! Module map:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`numerics`] | Dense symmetric eigensolver, SPD inverse, PSD projection |
//! | [`timeseries`] | Recordings, segmentation, resampling, scaling, masking, synthetic data |
//! | [`pairs`] | Similar / dissimilar pairs from time-slot structure |
//! | [`seq2seq`] | LSTM encoder-decoder with hand-written backpropagation |
//! | [`metric`] | Euclidean, cosine and KISSME heads and their losses |
//! | [`objective`] | Per-sample and per-pair objectives with their gradients |
//! | [`training`] | Adam, plateau schedule, joint and disjoint regimes |
//! | [`clustering`] | Distance kernels and normalized spectral clustering |
//! | [`evaluation`] | Completeness, silhouette, NMI, AMI, Welch's t-test |
//! | [`dtw`] | Exact DTW, FastDTW and the DTW baseline |
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod clustering;
pub mod dtw;
mod error;
pub mod evaluation;
pub(crate) mod float;
pub mod metric;
pub mod numerics;
pub mod objective;
pub mod pairs;
pub mod seq2seq;
pub mod timeseries;
pub mod training;

pub use error::{Error, Result};
pub use metric::{MetricHead, MetricKind};
pub use numerics::Matrix;
pub use pairs::{PairLabel, PairSet};
pub use seq2seq::{EncoderDecoder, ReconLoss};
pub use timeseries::{Recording, SequenceSample};
pub use training::TrainConfig;

/// Deterministic generator used everywhere a seed is accepted.
pub type SeedRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a `u64` seed.
pub fn seeded_rng(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    SeedRng::seed_from_u64(seed)
}
