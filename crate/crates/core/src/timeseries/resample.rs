use alloc::vec::Vec;
use core::f64::consts::PI;

use super::SequenceSample;
use crate::float::{ceil, cos, floor, sin};
use crate::{Error, Result};

/// Zero crossings of the sinc kernel kept on each side of the center tap.
const ZERO_CROSSINGS: f64 = 10.0;

/// Resamples every channel to `target_len` steps.
///
/// Each channel is low-pass filtered with a Hamming-windowed sinc whose
/// cutoff is `min(1, target_len / len)` of Nyquist, then read off by linear
/// interpolation at `target_len` uniformly spaced instants spanning the first
/// to the last input step. Taps falling off either end are dropped and the
/// remaining weights renormalized, so constant signals come back exactly.
pub fn resample_to_length(seq: &SequenceSample, target_len: usize) -> Result<SequenceSample> {
    if target_len < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "target length must be at least 2, got {target_len}"
        )));
    }
    let len = seq.steps();
    let ch = seq.channels();
    let cutoff = (target_len as f64 / len as f64).min(1.0);
    let taps = lowpass_taps(cutoff);
    let half = (taps.len() / 2) as isize;

    let filtered_at = |t: usize, c: usize| -> f64 {
        let mut acc = 0.0;
        let mut weight = 0.0;
        let lo = (t as isize - half).max(0) as usize;
        let hi = ((t as isize + half) as usize).min(len - 1);
        for src in lo..=hi {
            let w = taps[(src as isize - t as isize + half) as usize];
            acc += w * seq.values()[src * ch + c];
            weight += w;
        }
        acc / weight
    };

    let mut values = Vec::with_capacity(target_len * ch);
    let span = (len - 1) as f64;
    for m in 0..target_len {
        let pos = if len == 1 {
            0.0
        } else {
            m as f64 * span / (target_len - 1) as f64
        };
        let i0 = (floor(pos) as usize).min(len - 1);
        let frac = pos - i0 as f64;
        for c in 0..ch {
            let left = filtered_at(i0, c);
            let v = if frac > 0.0 && i0 + 1 < len {
                left + frac * (filtered_at(i0 + 1, c) - left)
            } else {
                left
            };
            values.push(v);
        }
    }
    SequenceSample::new(seq.day, seq.slot, target_len, ch, values)
}

/// Hamming-windowed sinc with cutoff `cutoff` (fraction of Nyquist).
fn lowpass_taps(cutoff: f64) -> Vec<f64> {
    let half = ceil(ZERO_CROSSINGS / cutoff) as isize;
    (-half..=half)
        .map(|k| {
            let ideal = if k == 0 {
                cutoff
            } else if cutoff >= 1.0 {
                0.0
            } else {
                sin(PI * cutoff * k as f64) / (PI * k as f64)
            };
            let window = 0.54 + 0.46 * cos(PI * k as f64 / half as f64);
            ideal * window
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_signal_is_preserved() {
        for (from, to) in [(36_000, 100), (100, 100), (57, 13), (10, 40)] {
            let seq = SequenceSample::new(3, 7, from, 2, vec![0.75; from * 2]).unwrap();
            let out = resample_to_length(&seq, to).unwrap();
            assert_eq!(out.steps(), to);
            assert_eq!((out.day, out.slot, out.channels()), (3, 7, 2));
            assert!(out.values().iter().all(|v| (v - 0.75).abs() < 1e-6));
        }
    }

    #[test]
    fn same_length_is_identity() {
        let values: Vec<f64> = (0..300).map(|i| sin(i as f64 * 0.37) * 3.0).collect();
        let seq = SequenceSample::new(0, 0, 100, 3, values.clone()).unwrap();
        let out = resample_to_length(&seq, 100).unwrap();
        for (a, b) in out.values().iter().zip(&values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn slow_sine_survives_decimation() {
        let (from, to) = (36_000usize, 100usize);
        let spacing = (from - 1) as f64 / (to - 1) as f64;
        // 0.05 of the output Nyquist, expressed in cycles per input sample
        let freq = 0.05 * 0.5 / spacing;
        let values: Vec<f64> = (0..from).map(|i| sin(2.0 * PI * freq * i as f64)).collect();
        let seq = SequenceSample::new(0, 0, from, 1, values).unwrap();
        let out = resample_to_length(&seq, to).unwrap();
        for m in 12..(to - 12) {
            let expected = sin(2.0 * PI * freq * m as f64 * spacing);
            assert!((out.values()[m] - expected).abs() < 0.05, "m={m}");
        }
    }

    #[test]
    fn rejects_short_target() {
        let seq = SequenceSample::new(0, 0, 4, 1, vec![1.0; 4]).unwrap();
        assert!(resample_to_length(&seq, 1).is_err());
    }
}
