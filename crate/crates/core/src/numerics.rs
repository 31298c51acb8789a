//! Dense linear algebra for the KISSME update, spectral clustering and the
//! evaluation code.
//!
//! Everything here works on small dense matrices (at most a few hundred rows),
//! so the symmetric eigensolver is a plain cyclic Jacobi iteration.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::float::{norm, sqrt};
use crate::{Error, Result};

/// Default ridge applied by [`spd_inverse`] in the KISSME update.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Wraps row-major `data`; fails when the length or any entry is invalid.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v` for a vector of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| crate::float::dot(self.row(i), v)).collect()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "elementwise op",
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest `|a_ij - a_ji|`; zero for non-square matrices is not meaningful.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// `Wᵀ · self · W`.
    pub fn conjugate_by(&self, w: &Self) -> Result<Self> {
        w.transpose().matmul(&self.matmul(w)?)
    }

    fn check_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues in ascending order with matching unit-norm eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for (k, &l) in mapped.iter().enumerate() {
                    acc += v[(i, k)] * l * v[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first.
pub fn sym_eig(a: &Matrix) -> Result<EigenDecomposition> {
    a.check_square()?;
    a.check_finite()?;
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();

    if n > 1 && scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if sqrt(off) <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq.abs() <= 1e-17 * scale {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                    let c = 1.0 / sqrt(t * t + 1.0);
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s, t, apq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = m.diag();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64, apq: f64) {
    let n = m.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        m[(k, p)] = new_kp;
        m[(p, k)] = new_kp;
        m[(k, q)] = new_kq;
        m[(q, k)] = new_kq;
    }
    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Inverse of `a + ridge·(trace(a)/dim)·I` for a symmetric positive definite `a`.
pub fn spd_inverse(a: &Matrix, ridge: f64) -> Result<Matrix> {
    spd_inverse_named(a, ridge, "matrix")
}

pub(crate) fn spd_inverse_named(a: &Matrix, ridge: f64, name: &'static str) -> Result<Matrix> {
    a.check_square()?;
    a.check_finite()?;
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    let n = a.rows();
    let mut reg = a.symmetrized();
    if ridge > 0.0 && n > 0 {
        let shift = ridge * reg.trace() / n as f64;
        for i in 0..n {
            reg[(i, i)] += shift;
        }
    }
    let eig = sym_eig(&reg)?;
    let largest = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let smallest = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if !(largest > 0.0) || smallest < 1e-12 * largest {
        return Err(Error::Singular(name));
    }
    Ok(eig.reconstruct_with(|l| 1.0 / l))
}

/// Nearest positive semidefinite matrix in Frobenius norm: negative
/// eigenvalues are clamped to zero.
///
/// The clamp floor is a few ulps of the largest eigenvalue rather than an
/// exact zero, so that re-decomposing the result does not report negative
/// eigenvalues of roundoff size when the matrix is large.
pub fn psd_project(a: &Matrix) -> Result<Matrix> {
    a.check_square()?;
    a.check_finite()?;
    let asym = a.max_asymmetry();
    if asym > 1e-10 * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = sym_eig(a)?;
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let floor = 8.0 * f64::EPSILON * top;
    Ok(eig.reconstruct_with(|l| l.max(floor)))
}

/// `(1/|P|) Σ (x_i − x_j)(x_i − x_j)ᵀ` over the pair list; rows of
/// `encodings` are the points.
pub fn pair_diff_covariance(encodings: &Matrix, pairs: &[(usize, usize)]) -> Result<Matrix> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let dim = encodings.cols();
    let mut cov = Matrix::zeros(dim, dim);
    let mut diff = vec![0.0; dim];
    for &(i, j) in pairs {
        for idx in [i, j] {
            if idx >= encodings.rows() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "pair index {idx} out of range for {} encodings",
                    encodings.rows()
                )));
            }
        }
        for ((d, a), b) in diff.iter_mut().zip(encodings.row(i)).zip(encodings.row(j)) {
            *d = a - b;
        }
        for r in 0..dim {
            let dr = diff[r];
            if dr == 0.0 {
                continue;
            }
            for (c, out) in cov.row_mut(r)[r..].iter_mut().enumerate() {
                *out += dr * diff[r + c];
            }
        }
    }
    let inv = 1.0 / pairs.len() as f64;
    for r in 0..dim {
        for c in r..dim {
            let v = cov[(r, c)] * inv;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    Ok(cov)
}

/// Cosine similarity; zero when either vector has norm below `1e-12`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine similarity",
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(cosine(u, v))
}

/// Unchecked cosine used on hot paths.
#[inline]
pub(crate) fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = norm(u);
    let nv = norm(v);
    if nu < 1e-12 || nv < 1e-12 {
        return 0.0;
    }
    (crate::float::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::seeded_rng(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::seeded_rng(seed);
        let mut b = Matrix::zeros(n, n);
        for x in b.as_mut_slice() {
            *x = rng.gen_range(-1.0..1.0);
        }
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&Matrix::identity(2)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
    }

    #[test]
    fn eig_two_by_two() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_and_is_orthonormal() {
        for (n, seed) in [(8, 1), (20, 2), (50, 3)] {
            let a = random_symmetric(n, seed);
            let e = sym_eig(&a).unwrap();
            assert!(rel_err(&e.reconstruct(), &a) < 1e-8, "n={n}");
            let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors).unwrap();
            assert!(vtv.sub(&Matrix::identity(n)).unwrap().max_abs() < 1e-8);
            for k in 0..n {
                let v = e.eigenvectors.column(k);
                let av = a.mul_vec(&v);
                for (x, y) in av.iter().zip(&v) {
                    assert!((x - e.eigenvalues[k] * y).abs() < 1e-8 * a.frobenius_norm());
                }
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(sym_eig(&Matrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
        let mut m = Matrix::identity(2);
        m.as_mut_slice()[1] = f64::NAN;
        assert!(matches!(sym_eig(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn inverse_examples() {
        let id = spd_inverse(&Matrix::identity(3), 0.0).unwrap();
        assert!(id.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
        let d = spd_inverse(&Matrix::from_diag(&[2.0, 4.0]), 0.0).unwrap();
        assert!(d.sub(&Matrix::from_diag(&[0.5, 0.25])).unwrap().max_abs() < 1e-15);
        let a = random_spd(10, 7);
        let inv = spd_inverse(&a, 0.0).unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.sub(&Matrix::identity(10)).unwrap().max_abs() < 1e-8);
        assert!(inv.max_asymmetry() == 0.0);
    }

    #[test]
    fn inverse_rejects_singular_and_ridge_rescues_it() {
        let a = Matrix::from_diag(&[1.0, 0.0]);
        assert_eq!(spd_inverse(&a, 0.0), Err(Error::Singular("matrix")));
        let inv = spd_inverse(&a, 1e-6).unwrap();
        // shift = 1e-6 * trace / dim = 5e-7
        assert!((inv[(1, 1)] - 1.0 / 5e-7).abs() < 1e-3);
    }

    #[test]
    fn psd_projection_examples() {
        let p = psd_project(&Matrix::from_diag(&[2.0, -1.0])).unwrap();
        assert!(p.sub(&Matrix::from_diag(&[2.0, 0.0])).unwrap().max_abs() < 1e-14);
        let z = psd_project(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(z, Matrix::zeros(3, 3));
        let a = random_spd(6, 11);
        assert!(rel_err(&psd_project(&a).unwrap(), &a) < 1e-8);
        let skew = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(psd_project(&skew), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn psd_projection_is_nearest_among_sampled_psd_matrices() {
        let mut rng = crate::seeded_rng(99);
        for seed in 0..20 {
            let a = random_symmetric(3, 1000 + seed);
            let p = psd_project(&a).unwrap();
            let best = a.sub(&p).unwrap().frobenius_norm();
            for _ in 0..500 {
                let mut e = Matrix::zeros(3, 3);
                for i in 0..3 {
                    for j in i..3 {
                        let v: f64 = rng.gen_range(-0.3..0.3);
                        e[(i, j)] = v;
                        e[(j, i)] = v;
                    }
                }
                let candidate = psd_project(&p.add(&e).unwrap()).unwrap();
                let d = a.sub(&candidate).unwrap().frobenius_norm();
                assert!(d >= best - 1e-6, "candidate beat projection: {d} < {best}");
            }
        }
    }

    #[test]
    fn pair_covariance_examples() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0], &[0.0, 2.0]]).unwrap();
        assert_eq!(
            pair_diff_covariance(&x, &[(0, 1), (1, 0)]).unwrap(),
            Matrix::zeros(2, 2)
        );
        let c = pair_diff_covariance(&x, &[(0, 2)]).unwrap();
        assert_eq!(c, Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap());
        assert_eq!(pair_diff_covariance(&x, &[]), Err(Error::Empty("pair list")));
        assert!(pair_diff_covariance(&x, &[(0, 3)]).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn psd_project_is_idempotent(seed in 0u64..10_000, n in 1usize..7) {
            let a = random_symmetric(n, seed);
            let p = psd_project(&a).unwrap();
            let pp = psd_project(&p).unwrap();
            prop_assert!(pp.sub(&p).unwrap().max_abs() < 1e-10);
            let min = sym_eig(&p).unwrap().eigenvalues[0];
            prop_assert!(min >= -1e-10);
        }

        #[test]
        fn psd_project_stays_psd_at_large_scale(seed in 0u64..10_000, n in 1usize..7, exp in 0i32..10) {
            let a = random_symmetric(n, seed).scale(10f64.powi(exp));
            let min = sym_eig(&psd_project(&a).unwrap()).unwrap().eigenvalues[0];
            prop_assert!(min >= -1e-10, "{min}");
        }

        #[test]
        fn pair_covariance_is_symmetric_psd(seed in 0u64..10_000, dim in 1usize..6, npairs in 1usize..20) {
            let mut rng = crate::seeded_rng(seed);
            let rows = 8;
            let data: Vec<f64> = (0..rows * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = Matrix::from_vec(rows, dim, data).unwrap();
            let pairs: Vec<(usize, usize)> = (0..npairs)
                .map(|_| (rng.gen_range(0..rows), rng.gen_range(0..rows)))
                .collect();
            let c = pair_diff_covariance(&x, &pairs).unwrap();
            prop_assert_eq!(c.max_asymmetry(), 0.0);
            prop_assert!(sym_eig(&c).unwrap().eigenvalues[0] >= -1e-10);
        }
    }
}
