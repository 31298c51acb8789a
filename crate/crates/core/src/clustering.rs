//! Affinity kernels and normalized spectral clustering.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::float::{exp, sqrt};
use crate::numerics::{sym_eig, Matrix};
use crate::{Error, Result};

pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

/// A symmetric matrix of non-negative pairwise affinities.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    matrix: Matrix,
}

impl KernelMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let asym = matrix.max_asymmetry();
        if asym > 1e-12 * matrix.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        if matrix.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("kernel entries must be non-negative".into()));
        }
        Ok(Self { matrix })
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }
}

/// Symmetric matrix with `d(i, j)` above the diagonal mirrored below and a
/// zero diagonal. `d` is called once per unordered pair.
pub fn pairwise(n: usize, mut d: impl FnMut(usize, usize) -> Result<f64>) -> Result<Matrix> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d(i, j)?;
            if !v.is_finite() {
                return Err(Error::NonFinite("pairwise distance"));
            }
            m.as_mut_slice()[i * n + j] = v;
            m.as_mut_slice()[j * n + i] = v;
        }
    }
    Ok(m)
}

/// `exp(−γ·d)` entrywise.
pub fn kernel_from_distance(d: &Matrix, gamma: f64) -> Result<KernelMatrix> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if let Some(v) = d.as_slice().iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "distances must be non-negative, got {v}"
        )));
    }
    let data = d.as_slice().iter().map(|&v| exp(-gamma * v)).collect();
    KernelMatrix::new(Matrix::from_vec(d.rows(), d.cols(), data)?)
}

/// `cos + 1` entrywise, mapping similarities in `[−1, 1]` to `[0, 2]`.
pub fn kernel_from_cosine(c: &Matrix) -> Result<KernelMatrix> {
    const SLACK: f64 = 1e-12;
    if let Some(v) = c
        .as_slice()
        .iter()
        .find(|&&v| !(-1.0 - SLACK..=1.0 + SLACK).contains(&v))
    {
        return Err(Error::InvalidArgument(format!("cosine similarity {v} outside [-1, 1]")));
    }
    let data = c.as_slice().iter().map(|&v| v.clamp(-1.0, 1.0) + 1.0).collect();
    KernelMatrix::new(Matrix::from_vec(c.rows(), c.cols(), data)?)
}

/// `I − D^(−1/2) K D^(−1/2)` with `D` the row sums of `K`.
pub fn laplacian_sym(kernel: &KernelMatrix) -> Result<Matrix> {
    let k = &kernel.matrix;
    let n = k.rows();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let deg: f64 = k.row(i).iter().sum();
        if !(deg > 0.0) {
            return Err(Error::IsolatedPoint(i));
        }
        inv_sqrt.push(1.0 / sqrt(deg));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        let row = k.row(i);
        let out = l.row_mut(i);
        for j in 0..n {
            out[j] = -inv_sqrt[i] * row[j] * inv_sqrt[j];
        }
        out[i] += 1.0;
    }
    Ok(l.symmetrized())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    /// Within-cluster sum of squared distances of the final k-means.
    pub inertia: f64,
}

/// Rows of the `k` eigenvectors of `L_sym` with the smallest eigenvalues,
/// each row scaled to unit length.
pub fn spectral_embedding(kernel: &KernelMatrix, k: usize) -> Result<Matrix> {
    let n = kernel.len();
    let eig = sym_eig(&laplacian_sym(kernel)?)?;
    let mut emb = Matrix::zeros(n, k);
    for i in 0..n {
        let row = emb.row_mut(i);
        for (c, r) in row.iter_mut().enumerate() {
            *r = eig.eigenvectors[(i, c)];
        }
        let len = sqrt(row.iter().map(|v| v * v).sum());
        if len > 1e-300 {
            row.iter_mut().for_each(|v| *v /= len);
        }
    }
    Ok(emb)
}

/// Normalized spectral clustering into `k` groups.
pub fn spectral_cluster(kernel: &KernelMatrix, k: usize, seed: u64) -> Result<ClusteringResult> {
    let n = kernel.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let emb = spectral_embedding(kernel, k)?;
    let (assignment, inertia) = kmeans(&emb, k, seed, KMEANS_RESTARTS)?;
    Ok(ClusteringResult {
        assignment,
        k,
        seed,
        inertia,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

/// Closest center; ties go to the lowest index.
fn nearest_center(p: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(p, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// One Lloyd run from the given centers. Returns assignment, inertia and the
/// inertia after every iteration.
fn lloyd(points: &Matrix, mut centers: Matrix) -> (Vec<usize>, f64, Vec<f64>) {
    let n = points.rows();
    let k = centers.rows();
    let dim = points.cols();
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest_center(points.row(i), &centers);
            dists[i] = d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        history.push(dists.iter().sum());
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, &v) in sums.row_mut(assignment[i]).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                // Re-seed from the point farthest from its current center.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                centers.row_mut(c).copy_from_slice(points.row(far));
                dists[far] = 0.0;
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist(points.row(i), centers.row(assignment[i]))).sum();
    (assignment, inertia, history)
}

/// k-means with k-means++ seeding; the restart with the lowest inertia wins,
/// ties going to the earlier restart.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<(Vec<usize>, f64)> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let mut rng = crate::seeded_rng(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let centers = plus_plus_init(points, k, &mut rng);
        let (assignment, inertia, _) = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((assignment, inertia));
        }
    }
    Ok(best.expect("at least one restart"))
}
