//! Experiment configuration (JSON, unknown keys rejected).
//!
//! ```json
//! {
//!   "data": { "synth": { "days": 30, "seed": 7 } },
//!   "split": { "train_days": 12, "val_days": 3, "test_days": 15 },
//!   "similar_per_slot": 20,
//!   "hidden": 100,
//!   "proj_dim": 50,
//!   "train": { "metric": "kissme", "joint": false, "reconstruction": "mse" },
//!   "k": 5,
//!   "runs": 20,
//!   "seed": 0
//! }
//! ```
//!
//! `data` is either `{"synth": SynthSpec}` or `{"csv": CsvSource}`. Every
//! other key has a default; relative paths are resolved against the config
//! file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ss2s_core::dtw::DEFAULT_RADII;
use ss2s_core::timeseries::SynthSpec;
use ss2s_core::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthSpec),
    Csv(CsvSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub sidecar: PathBuf,
    /// Optional `sequence_index,day,slot,archetype` ground truth.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Each day is split into this many decimated days.
    #[serde(default = "default_augment")]
    pub augment_factor: usize,
    #[serde(default = "default_slot_seconds")]
    pub slot_seconds: f64,
    #[serde(default = "default_slots")]
    pub slots_per_day: usize,
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
}

fn default_augment() -> usize {
    10
}
fn default_slot_seconds() -> f64 {
    3600.0
}
fn default_slots() -> usize {
    24
}
fn default_seq_len() -> usize {
    100
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Split {
    pub train_days: usize,
    pub val_days: usize,
    pub test_days: usize,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train_days: 12,
            val_days: 3,
            test_days: 15,
        }
    }
}

impl Split {
    pub fn total(&self) -> usize {
        self.train_days + self.val_days + self.test_days
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtwConfig {
    pub radii: Vec<usize>,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            radii: DEFAULT_RADII.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: Split,
    #[serde(default = "default_similar")]
    pub similar_per_slot: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_proj")]
    pub proj_dim: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Run `r` uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub dtw: DtwConfig,
    /// Also write each run's test distance matrix.
    #[serde(default)]
    pub export_distances: bool,
}

fn default_similar() -> usize {
    20
}
fn default_hidden() -> usize {
    100
}
fn default_proj() -> usize {
    50
}
fn default_k() -> usize {
    5
}
fn default_runs() -> usize {
    20
}

impl ExperimentConfig {
    /// Config with every default and the given data source.
    pub fn with_data(data: DataSource) -> Self {
        Self {
            data,
            split: Split::default(),
            similar_per_slot: default_similar(),
            hidden: default_hidden(),
            proj_dim: default_proj(),
            train: TrainConfig::default(),
            k: default_k(),
            runs: default_runs(),
            seed: 0,
            out: None,
            dtw: DtwConfig::default(),
            export_distances: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config, resolving relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv(c) = &mut cfg.data {
            c.path = crate::io::resolve(base, &c.path);
            c.sidecar = crate::io::resolve(base, &c.sidecar);
            c.labels = c.labels.as_ref().map(|l| crate::io::resolve(base, l));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if self.hidden == 0 || self.proj_dim == 0 {
            bail!("hidden and proj_dim must be positive");
        }
        if self.similar_per_slot == 0 {
            bail!("similar_per_slot must be at least 1");
        }
        let s = self.split;
        if s.train_days < 2 || s.val_days < 2 || s.test_days == 0 {
            bail!("split needs at least 2 training days, 2 validation days and 1 test day");
        }
        if self.dtw.radii.is_empty() {
            bail!("dtw.radii must not be empty");
        }
        match &self.data {
            DataSource::Synth(spec) => {
                spec.validate()?;
                if s.total() > spec.days {
                    bail!("split uses {} days but the synthetic data has {}", s.total(), spec.days);
                }
            }
            DataSource::Csv(c) => {
                if c.augment_factor == 0 || c.slots_per_day == 0 || c.seq_len < 2 || !(c.slot_seconds > 0.0) {
                    bail!("csv source needs augment_factor ≥ 1, slots_per_day ≥ 1, seq_len ≥ 2, slot_seconds > 0");
                }
            }
        }
        self.train.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synth_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"data": {"synth": {}}}"#).unwrap();
        assert_eq!(cfg.split, Split::default());
        assert_eq!((cfg.k, cfg.runs, cfg.hidden, cfg.proj_dim), (5, 20, 100, 50));
        assert_eq!(cfg.similar_per_slot, 20);
        assert_eq!(cfg.dtw.radii, vec![1, 2, 5, 10, 20, 50]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"data": {"synth": {}}, "hiden": 10}"#,
            r#"{"data": {"synth": {}}, "train": {"learning_rte": 0.1}}"#,
            r#"{"data": {"synth": {"dayz": 3}}}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn split_must_fit_the_data() {
        let err = ExperimentConfig::from_json(r#"{"data": {"synth": {"days": 20}}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("30 days"), "{err:#}");
        assert!(ExperimentConfig::from_json(r#"{"data": {"synth": {}}, "runs": 0}"#).is_err());
    }
}
