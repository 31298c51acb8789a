//! Dynamic time warping: the exact dynamic program, FastDTW, and the
//! clustering baseline built on them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::clustering::{kernel_from_distance, spectral_cluster, KernelMatrix};
use crate::evaluation::nmi;
use crate::float::sqrt;
use crate::numerics::Matrix;
use crate::timeseries::SequenceSample;
use crate::training::{BatchRunner, Sequential};
use crate::{Error, Result};

/// Radii tried by [`select_radius`] when none are given.
pub const DEFAULT_RADII: [usize; 6] = [1, 2, 5, 10, 20, 50];

#[derive(Clone, Debug, PartialEq)]
pub struct WarpResult {
    pub distance: f64,
    /// Monotone, contiguous alignment from `(0, 0)` to `(l₁−1, l₂−1)`.
    pub path: Vec<(usize, usize)>,
}

/// A borrowed `steps × channels` sequence.
#[derive(Clone, Copy)]
struct Series<'a> {
    values: &'a [f64],
    channels: usize,
}

impl<'a> Series<'a> {
    fn of(seq: &'a SequenceSample) -> Self {
        Self {
            values: seq.values(),
            channels: seq.channels(),
        }
    }

    fn len(&self) -> usize {
        self.values.len() / self.channels
    }

    fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.channels..(t + 1) * self.channels]
    }
}

fn step_cost(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn check(a: &SequenceSample, b: &SequenceSample) -> Result<()> {
    if a.channels() != b.channels() {
        return Err(Error::DimensionMismatch {
            context: "DTW channel count",
            expected: a.channels(),
            got: b.channels(),
        });
    }
    if a.steps() == 0 || b.steps() == 0 {
        return Err(Error::Empty("DTW input sequence"));
    }
    Ok(())
}

/// Dynamic program restricted to column range `window[i] = (lo, hi)` in each
/// row. Cells outside the window are unreachable.
fn windowed_dtw(x: Series<'_>, y: Series<'_>, window: &[(usize, usize)]) -> WarpResult {
    let n = x.len();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for &(lo, hi) in window {
        offsets.push(offsets.last().unwrap() + (hi + 1 - lo));
    }
    let mut acc = vec![f64::INFINITY; offsets[n]];
    let get = |acc: &[f64], i: usize, j: usize| -> f64 {
        let (lo, hi) = window[i];
        if j < lo || j > hi {
            f64::INFINITY
        } else {
            acc[offsets[i] + j - lo]
        }
    };
    for i in 0..n {
        let (lo, hi) = window[i];
        for j in lo..=hi {
            let c = step_cost(x.step(i), y.step(j));
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    get(&acc, i - 1, j - 1)
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { get(&acc, i - 1, j) } else { f64::INFINITY };
                let left = if j > lo {
                    acc[offsets[i] + j - 1 - lo]
                } else {
                    f64::INFINITY
                };
                diag.min(up).min(left)
            };
            acc[offsets[i] + j - lo] = c + prev;
        }
    }
    let m = y.len();
    let distance = get(&acc, n - 1, m - 1);
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 {
            get(&acc, i - 1, j - 1)
        } else {
            f64::INFINITY
        };
        let up = if i > 0 { get(&acc, i - 1, j) } else { f64::INFINITY };
        let left = if j > 0 { get(&acc, i, j - 1) } else { f64::INFINITY };
        // diagonal first, then vertical, then horizontal on ties
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    WarpResult { distance, path }
}

fn full_window(n: usize, m: usize) -> Vec<(usize, usize)> {
    vec![(0, m - 1); n]
}

/// Optimal warping cost under Euclidean step costs.
pub fn dtw_exact(a: &SequenceSample, b: &SequenceSample) -> Result<WarpResult> {
    check(a, b)?;
    Ok(windowed_dtw(
        Series::of(a),
        Series::of(b),
        &full_window(a.steps(), b.steps()),
    ))
}

/// Averages adjacent steps; an odd trailing step is kept as is.
fn coarsen(x: Series<'_>) -> Vec<f64> {
    let n = x.len();
    let ch = x.channels;
    let mut out = Vec::with_capacity(n.div_ceil(2) * ch);
    let mut t = 0;
    while t < n {
        if t + 1 < n {
            for c in 0..ch {
                out.push(0.5 * (x.step(t)[c] + x.step(t + 1)[c]));
            }
        } else {
            out.extend_from_slice(x.step(t));
        }
        t += 2;
    }
    out
}

/// Fine cells covered by the coarse path widened by `radius`, as per-row
/// column ranges.
fn expand_window(
    path: &[(usize, usize)],
    coarse: (usize, usize),
    fine: (usize, usize),
    radius: usize,
) -> Vec<(usize, usize)> {
    let (n, m) = fine;
    let mut window = vec![(usize::MAX, 0usize); n];
    let r = radius as isize;
    for &(ci, cj) in path {
        for di in -r..=r {
            let i = ci as isize + di;
            if i < 0 || i >= coarse.0 as isize {
                continue;
            }
            let j_lo = (cj as isize - r).max(0) as usize;
            let j_hi = ((cj as isize + r) as usize).min(coarse.1 - 1);
            let fi_lo = 2 * i as usize;
            let fi_hi = (2 * i as usize + 1).min(n - 1);
            let fj_lo = 2 * j_lo;
            let fj_hi = (2 * j_hi + 1).min(m - 1);
            for row in &mut window[fi_lo..=fi_hi] {
                row.0 = row.0.min(fj_lo);
                row.1 = row.1.max(fj_hi);
            }
        }
    }
    window
}

fn fast(x: Series<'_>, y: Series<'_>, radius: usize) -> WarpResult {
    let (n, m) = (x.len(), y.len());
    let min_size = radius + 2;
    if n <= min_size || m <= min_size {
        return windowed_dtw(x, y, &full_window(n, m));
    }
    let xs = coarsen(x);
    let ys = coarsen(y);
    let cx = Series {
        values: &xs,
        channels: x.channels,
    };
    let cy = Series {
        values: &ys,
        channels: y.channels,
    };
    let low = fast(cx, cy, radius);
    let window = expand_window(&low.path, (cx.len(), cy.len()), (n, m), radius);
    windowed_dtw(x, y, &window)
}

/// FastDTW: solve at half resolution, project the path, and refine inside a
/// corridor of `radius` cells around it. Never below the exact cost.
pub fn fastdtw(a: &SequenceSample, b: &SequenceSample, radius: usize) -> Result<WarpResult> {
    check(a, b)?;
    Ok(fast(Series::of(a), Series::of(b), radius))
}

/// Pairwise DTW distances; `radius = None` uses exact DTW.
pub fn dtw_distance_matrix(seqs: &[SequenceSample], radius: Option<usize>) -> Result<Matrix> {
    dtw_distance_matrix_with(seqs, radius, &Sequential)
}

pub fn dtw_distance_matrix_with<R: BatchRunner>(
    seqs: &[SequenceSample],
    radius: Option<usize>,
    runner: &R,
) -> Result<Matrix> {
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let values = runner.map(pairs.len(), |k| {
        let (i, j) = pairs[k];
        match radius {
            Some(r) => fastdtw(&seqs[i], &seqs[j], r),
            None => dtw_exact(&seqs[i], &seqs[j]),
        }
        .map(|w| w.distance)
    });
    let mut m = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        m.as_mut_slice()[i * n + j] = v;
        m.as_mut_slice()[j * n + i] = v;
    }
    Ok(m)
}

/// `exp(−d/(n·l))` for sequences of `channels × steps` values.
pub fn dtw_kernel(distances: &Matrix, channels: usize, steps: usize) -> Result<KernelMatrix> {
    kernel_from_distance(distances, 1.0 / (channels * steps) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusSelection {
    pub radius: usize,
    /// NMI per candidate, in the order given.
    pub scores: Vec<(usize, f64)>,
}

/// Picks the radius whose DTW clustering of `val` best matches `labels`
/// (NMI); ties go to the smaller radius.
pub fn select_radius<R: BatchRunner>(
    val: &[SequenceSample],
    labels: &[usize],
    candidates: &[usize],
    k: usize,
    seed: u64,
    runner: &R,
) -> Result<RadiusSelection> {
    if val.is_empty() {
        return Err(Error::Empty("validation sequences"));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("candidate radii"));
    }
    if labels.len() != val.len() {
        return Err(Error::DimensionMismatch {
            context: "radius selection labels",
            expected: val.len(),
            got: labels.len(),
        });
    }
    let first = &val[0];
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for &r in candidates {
        let d = dtw_distance_matrix_with(val, Some(r), runner)?;
        let kernel = dtw_kernel(&d, first.channels(), first.steps())?;
        let clusters = spectral_cluster(&kernel, k, seed)?;
        let score = nmi(labels, &clusters.assignment)?;
        scores.push((r, score));
        let better = match best {
            None => true,
            Some((br, bs)) => score > bs || (score == bs && r < br),
        };
        if better {
            best = Some((r, score));
        }
    }
    let (radius, _) = best.ok_or_else(|| Error::InvalidArgument(format!("no radius among {candidates:?}")))?;
    Ok(RadiusSelection { radius, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn scalar(v: &[f64]) -> SequenceSample {
        SequenceSample::new(0, 0, v.len(), 1, v.to_vec()).unwrap()
    }

    fn walk(len: usize, ch: usize, rng: &mut impl Rng) -> SequenceSample {
        let mut v = Vec::with_capacity(len * ch);
        let mut cur = vec![0.0; ch];
        for _ in 0..len {
            for c in cur.iter_mut() {
                *c += rng.gen_range(-1.0..1.0);
            }
            v.extend_from_slice(&cur);
        }
        SequenceSample::new(0, 0, len, ch, v).unwrap()
    }

    /// Minimum over every monotone path, by recursion.
    fn brute(a: &SequenceSample, b: &SequenceSample) -> f64 {
        fn go(a: &SequenceSample, b: &SequenceSample, i: usize, j: usize) -> f64 {
            let c = step_cost(a.step(i), b.step(j));
            if i == 0 && j == 0 {
                return c;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            c + best
        }
        go(a, b, a.steps() - 1, b.steps() - 1)
    }

    fn assert_valid(w: &WarpResult, a: &SequenceSample, b: &SequenceSample) {
        assert_eq!(w.path[0], (0, 0));
        assert_eq!(*w.path.last().unwrap(), (a.steps() - 1, b.steps() - 1));
        for s in w.path.windows(2) {
            let (di, dj) = (s[1].0 - s[0].0, s[1].1 - s[0].1);
            assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
        let sum: f64 = w.path.iter().map(|&(i, j)| step_cost(a.step(i), b.step(j))).sum();
        assert!((sum - w.distance).abs() < 1e-9 * (1.0 + sum));
    }

    #[test]
    fn examples() {
        let a = scalar(&[0.0, 0.0, 1.0]);
        let b = scalar(&[0.0, 1.0, 1.0]);
        assert_eq!(dtw_exact(&a, &b).unwrap().distance, 0.0);
        let w = dtw_exact(&a, &a).unwrap();
        assert_eq!(w.distance, 0.0);
        assert_eq!(w.path, vec![(0, 0), (1, 1), (2, 2)]);
        let c = scalar(&[3.0, -1.0]);
        assert_eq!(dtw_exact(&a, &c).unwrap().distance, dtw_exact(&c, &a).unwrap().distance);
        let two = SequenceSample::new(0, 0, 1, 2, vec![0.0, 0.0]).unwrap();
        assert!(dtw_exact(&a, &two).is_err());
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = crate::seeded_rng(42);
        for _ in 0..200 {
            let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
            let ch = rng.gen_range(1..=3);
            let a = walk(la, ch, &mut rng);
            let b = walk(lb, ch, &mut rng);
            let w = dtw_exact(&a, &b).unwrap();
            assert_eq!(w.distance, brute(&a, &b));
            assert_valid(&w, &a, &b);
        }
    }

    #[test]
    fn fastdtw_with_large_radius_is_exact() {
        let mut rng = crate::seeded_rng(7);
        for _ in 0..20 {
            let a = walk(rng.gen_range(5..40), 2, &mut rng);
            let b = walk(rng.gen_range(5..40), 2, &mut rng);
            let r = a.steps().max(b.steps());
            assert_eq!(fastdtw(&a, &b, r).unwrap(), dtw_exact(&a, &b).unwrap());
        }
    }

    #[test]
    fn fastdtw_paths_are_valid_and_never_below_exact() {
        let mut rng = crate::seeded_rng(8);
        for radius in [0, 1, 3] {
            for _ in 0..20 {
                let a = walk(rng.gen_range(1..60), 1, &mut rng);
                let b = walk(rng.gen_range(1..60), 1, &mut rng);
                let w = fastdtw(&a, &b, radius).unwrap();
                assert_valid(&w, &a, &b);
                assert!(w.distance >= dtw_exact(&a, &b).unwrap().distance - 1e-9);
            }
        }
    }

    #[test]
    fn distance_matrix_examples() {
        let mut rng = crate::seeded_rng(9);
        let seqs: Vec<_> = (0..5).map(|_| walk(12, 2, &mut rng)).collect();
        assert_eq!(dtw_distance_matrix(&seqs[..1], Some(2)).unwrap(), Matrix::zeros(1, 1));
        let d = dtw_distance_matrix(&seqs, Some(2)).unwrap();
        assert_eq!(d, d.transpose());
        for i in 0..5 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..5 {
                if i != j {
                    assert_eq!(d[(i, j)], fastdtw(&seqs[i], &seqs[j], 2).unwrap().distance);
                }
            }
        }
    }

    #[test]
    fn radius_selection() {
        let mut rng = crate::seeded_rng(10);
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for k in 0..12 {
            let class = k % 2;
            let v: Vec<f64> = (0..20)
                .map(|t| if class == 0 { (t as f64 * 0.3).sin() } else { 2.0 } + rng.gen_range(-0.1..0.1))
                .collect();
            seqs.push(scalar(&v));
            labels.push(class);
        }
        let single = select_radius(&seqs, &labels, &[5], 2, 0, &Sequential).unwrap();
        assert_eq!(single.radius, 5);
        let sel = select_radius(&seqs, &labels, &[1, 30], 2, 0, &Sequential).unwrap();
        // both separate the classes perfectly, so the smaller radius wins
        assert_eq!(sel.scores[0].1, sel.scores[1].1);
        assert_eq!(sel.radius, 1);
        assert_eq!(sel, select_radius(&seqs, &labels, &[1, 30], 2, 0, &Sequential).unwrap());
        assert!(select_radius(&[], &[], &[1], 2, 0, &Sequential).is_err());
    }
}
