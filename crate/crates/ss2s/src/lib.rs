//! File formats, the experiment pipeline and the `ss2s` command line on top
//! of [`ss2s_core`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod model_file;
pub mod pipeline;
pub mod runner;
pub mod timeline;

pub use config::ExperimentConfig;
pub use pipeline::{execute, report, Experiment, RunManifest};
