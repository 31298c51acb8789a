//! Recording CSV and sidecar input, audit CSV exports, atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use ss2s_core::pairs::PairSet;
use ss2s_core::training::TrainLog;
use ss2s_core::{Matrix, Recording, SequenceSample};

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Metadata stored next to a recording CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub sample_rate_hz: f64,
    /// Sample index where each day begins, strictly increasing.
    pub day_starts: Vec<usize>,
}

impl Sidecar {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading sidecar {}", path.display()))?;
        let s: Sidecar = serde_json::from_str(&text).with_context(|| format!("parsing sidecar {}", path.display()))?;
        if !(s.sample_rate_hz > 0.0) || !s.sample_rate_hz.is_finite() {
            bail!("sidecar {}: sample_rate_hz must be positive", path.display());
        }
        if s.day_starts.is_empty() || s.day_starts.windows(2).any(|w| w[0] >= w[1]) {
            bail!(
                "sidecar {}: day_starts must be non-empty and strictly increasing",
                path.display()
            );
        }
        Ok(s)
    }

    /// Sample ranges of each day in a recording of `len` samples.
    pub fn day_ranges(&self, len: usize) -> Result<Vec<(usize, usize)>> {
        if let Some(&last) = self.day_starts.last() {
            if last >= len {
                bail!("day start {last} is beyond the recording's {len} samples");
            }
        }
        let mut ends: Vec<usize> = self.day_starts[1..].to_vec();
        ends.push(len);
        Ok(self.day_starts.iter().copied().zip(ends).collect())
    }
}

/// Reads a recording: a header naming the channels, then one sample per row.
pub fn load_recording_csv(path: &Path, sample_rate_hz: f64) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening recording {}", path.display()))?;
    let channels = reader.headers()?.len();
    if channels == 0 {
        bail!("{}: header names no channels", path.display());
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // data rows start on line 2
        let row = i + 2;
        let record = record.with_context(|| format!("{}: row {row}", path.display()))?;
        if record.len() != channels {
            bail!(
                "{}: row {row} has {} cells, expected {channels}",
                path.display(),
                record.len()
            );
        }
        for cell in record.iter() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| anyhow!("{}: row {row}: cannot parse {cell:?} as a number", path.display()))?;
            if !v.is_finite() {
                bail!("{}: row {row}: non-finite value {cell:?}", path.display());
            }
            samples.push(v);
        }
    }
    if samples.is_empty() {
        bail!("{}: no samples", path.display());
    }
    Ok(Recording::new(channels, sample_rate_hz, samples)?)
}

pub fn recording_csv(rec: &Recording) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..rec.channels()).map(|c| format!("ch{c}")))?;
    for t in 0..rec.len() {
        w.write_record(rec.sample(t).iter().map(|v| v.to_string()))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

/// `index_a,index_b,label`
pub fn pairs_csv(pairs: &PairSet) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index_a", "index_b", "label"])?;
    for p in &pairs.pairs {
        w.write_record([p.a.to_string(), p.b.to_string(), p.label.as_str().to_string()])?;
    }
    finish(w)
}

/// `epoch,train_loss,val_loss,lr,event`
pub fn log_csv(log: &TrainLog) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "val_loss", "lr", "event"])?;
    for e in &log.entries {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.val_loss.to_string(),
            e.lr.to_string(),
            e.event_string(),
        ])?;
    }
    finish(w)
}

/// `sequence_index,day,slot,cluster`
pub fn assignments_csv(samples: &[SequenceSample], clusters: &[usize]) -> Result<Vec<u8>> {
    if samples.len() != clusters.len() {
        bail!("{} samples but {} cluster ids", samples.len(), clusters.len());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sequence_index", "day", "slot", "cluster"])?;
    for (i, (s, c)) in samples.iter().zip(clusters).enumerate() {
        w.write_record([i.to_string(), s.day.to_string(), s.slot.to_string(), c.to_string()])?;
    }
    finish(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub struct Assignment {
    pub sequence_index: usize,
    pub day: usize,
    pub slot: usize,
    pub cluster: usize,
}

pub fn read_assignments(path: &Path) -> Result<Vec<Assignment>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("reading {}", path.display())))
        .collect()
}

/// Square matrix without a header.
pub fn matrix_csv(m: &Matrix) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    finish(w)
}

/// `sequence_index,day,slot,archetype`
pub fn labels_csv(samples: &[SequenceSample], labels: &[usize]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sequence_index", "day", "slot", "archetype"])?;
    for (i, (s, l)) in samples.iter().zip(labels).enumerate() {
        w.write_record([i.to_string(), s.day.to_string(), s.slot.to_string(), l.to_string()])?;
    }
    finish(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub struct LabelRow {
    pub sequence_index: usize,
    pub day: usize,
    pub slot: usize,
    pub archetype: usize,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening labels {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("reading labels {}", path.display())))
        .collect()
}

/// `base` joined with `p` unless `p` is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
