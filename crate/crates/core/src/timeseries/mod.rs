//! Recordings, fixed-length segments and the preprocessing applied to them.

mod resample;
mod synth;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;

use crate::float::round;
use crate::{Error, Result};

pub use resample::resample_to_length;
pub use synth::{synth_generate, Archetype, SynthDataset, SynthSpec};

/// A multichannel signal sampled at a fixed rate. Samples are stored
/// row-major: `samples[t * channels + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    channels: usize,
    sample_rate: f64,
    samples: Vec<f64>,
}

impl Recording {
    pub fn new(channels: usize, sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("recording needs at least one channel".into()));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !samples.len().is_multiple_of(channels) {
            return Err(Error::DimensionMismatch {
                context: "recording samples",
                expected: channels,
                got: samples.len() % channels,
            });
        }
        Ok(Self {
            channels,
            sample_rate,
            samples,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.samples[t * self.channels..(t + 1) * self.channels]
    }

    /// Samples `[start, end)` as a new recording at the same rate.
    pub fn slice(&self, start: usize, end: usize) -> Recording {
        Recording {
            channels: self.channels,
            sample_rate: self.sample_rate,
            samples: self.samples[start * self.channels..end * self.channels].to_vec(),
        }
    }
}

/// One fixed-length segment (`steps × channels`, row-major) tagged with the
/// day and time slot it was recorded in.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub day: usize,
    pub slot: usize,
    steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl SequenceSample {
    pub fn new(day: usize, slot: usize, steps: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if steps == 0 || channels == 0 {
            return Err(Error::Empty("sequence"));
        }
        if values.len() != steps * channels {
            return Err(Error::DimensionMismatch {
                context: "sequence values",
                expected: steps * channels,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sequence"));
        }
        Ok(Self {
            day,
            slot,
            steps,
            channels,
            values,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.channels..(t + 1) * self.channels]
    }

    /// Same tags and shape, new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            day: self.day,
            slot: self.slot,
            steps: self.steps,
            channels: self.channels,
            values,
        }
    }
}

/// Splits a recording into `factor` recordings: output `j` holds the samples
/// whose index is `j` modulo `factor`, in order, at `sample_rate / factor`.
pub fn decimate_augment(rec: &Recording, factor: usize) -> Result<Vec<Recording>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("decimation factor must be at least 1".into()));
    }
    if rec.len() < factor {
        return Err(Error::InvalidArgument(format!(
            "recording of {} samples is shorter than factor {factor}",
            rec.len()
        )));
    }
    let ch = rec.channels;
    let mut out: Vec<Vec<f64>> = (0..factor)
        .map(|_| Vec::with_capacity((rec.len() / factor + 1) * ch))
        .collect();
    for t in 0..rec.len() {
        out[t % factor].extend_from_slice(rec.sample(t));
    }
    out.into_iter()
        .map(|samples| Recording::new(ch, rec.sample_rate / factor as f64, samples))
        .collect()
}

/// Output of [`segment_slots`]: the windows plus the number of trailing
/// samples that did not fill a whole slot.
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub samples: Vec<SequenceSample>,
    pub dropped_samples: usize,
}

/// Cuts a recording into consecutive non-overlapping windows of
/// `slot_seconds` each. Slots are numbered from 0; a partial trailing slot is
/// dropped and reported in [`Segmentation::dropped_samples`].
pub fn segment_slots(rec: &Recording, slot_seconds: f64, day_index: usize) -> Result<Segmentation> {
    let window = round(slot_seconds * rec.sample_rate);
    if !(window >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "a slot of {slot_seconds} s at {} Hz is shorter than 2 samples",
            rec.sample_rate
        )));
    }
    let window = window as usize;
    let count = rec.len() / window;
    let ch = rec.channels;
    let mut samples = Vec::with_capacity(count);
    for slot in 0..count {
        let values = rec.samples[slot * window * ch..(slot + 1) * window * ch].to_vec();
        samples.push(SequenceSample::new(day_index, slot, window, ch, values)?);
    }
    Ok(Segmentation {
        samples,
        dropped_samples: rec.len() - count * window,
    })
}

/// Per-channel min/max fitted on the training set.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &[SequenceSample]) -> Result<Self> {
        let first = train.first().ok_or(Error::Empty("training set"))?;
        let ch = first.channels;
        let mut min = alloc::vec![f64::INFINITY; ch];
        let mut max = alloc::vec![f64::NEG_INFINITY; ch];
        for seq in train {
            if seq.channels != ch {
                return Err(Error::DimensionMismatch {
                    context: "scaler fit",
                    expected: ch,
                    got: seq.channels,
                });
            }
            for step in seq.values.chunks_exact(ch) {
                for (c, &v) in step.iter().enumerate() {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        Ok(Self { min, max })
    }

    /// `x' = 2(x − min)/(max − min) − 1` per channel; constant channels map to 0.
    /// Values outside the fitted range are not clipped.
    pub fn apply(&self, seq: &SequenceSample) -> Result<SequenceSample> {
        let ch = self.min.len();
        if seq.channels != ch {
            return Err(Error::DimensionMismatch {
                context: "scaler apply",
                expected: ch,
                got: seq.channels,
            });
        }
        let mut values = seq.values.clone();
        for step in values.chunks_exact_mut(ch) {
            for (c, v) in step.iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 {
                    2.0 * (*v - self.min[c]) / span - 1.0
                } else {
                    0.0
                };
            }
        }
        Ok(seq.with_values(values))
    }
}

/// Zeroes exactly `round(fraction · steps · channels)` entries chosen
/// uniformly without replacement.
pub fn corrupt_mask(seq: &SequenceSample, fraction: f64, seed: u64) -> Result<SequenceSample> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "mask fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let total = seq.values.len();
    let amount = (round(fraction * total as f64) as usize).min(total);
    let mut values = seq.values.clone();
    if amount > 0 {
        let mut rng = crate::seeded_rng(seed);
        for i in index::sample(&mut rng, total, amount) {
            values[i] = 0.0;
        }
    }
    Ok(seq.with_values(values))
}
