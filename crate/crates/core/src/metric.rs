//! Siamese metric heads.
//!
//! * Euclidean: contrastive loss on the encodings.
//! * Cosine: `1 − cos` for similar pairs, hinge `max(0, cos − m)` otherwise.
//! * KISSME: encodings are projected by a learned `W` and compared under a
//!   Mahalanobis matrix `M`. `W` is trained by gradient descent on a
//!   contrastive-style loss over `q = δᵀMδ`; `M` is only ever set by the
//!   closed-form update from pair covariances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::float::{dot, sqrt};
use crate::numerics::{cosine, pair_diff_covariance, psd_project, spd_inverse_named, sym_eig, Matrix};
use crate::pairs::PairLabel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MetricKind {
    Euclidean,
    Cosine,
    Kissme,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Cosine => "cosine",
            MetricKind::Kissme => "kissme",
        }
    }

    /// 0.5 for the cosine loss, 1 otherwise.
    pub fn default_margin(self) -> f64 {
        match self {
            MetricKind::Cosine => 0.5,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricHead {
    kind: MetricKind,
    margin: f64,
    /// `encoding_dim × proj_dim`
    projection: Option<Matrix>,
    /// `proj_dim × proj_dim`, symmetric PSD
    mahalanobis: Option<Matrix>,
}

fn check_margin(margin: f64) -> Result<()> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    Ok(())
}

fn check_psd(m: &Matrix) -> Result<()> {
    let asym = m.max_asymmetry();
    if !m.is_square() || asym > 1e-10 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let min = sym_eig(m)?.eigenvalues.first().copied().unwrap_or(0.0);
    if min < -1e-10 * m.max_abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "Mahalanobis matrix is not PSD (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

impl MetricHead {
    pub fn euclidean(margin: f64) -> Result<Self> {
        check_margin(margin)?;
        Ok(Self {
            kind: MetricKind::Euclidean,
            margin,
            projection: None,
            mahalanobis: None,
        })
    }

    pub fn cosine(margin: f64) -> Result<Self> {
        check_margin(margin)?;
        Ok(Self {
            kind: MetricKind::Cosine,
            margin,
            projection: None,
            mahalanobis: None,
        })
    }

    /// KISSME head with `W` uniform in `±1/√encoding_dim` and `M = I`.
    pub fn kissme<R: Rng + ?Sized>(encoding_dim: usize, proj_dim: usize, margin: f64, rng: &mut R) -> Result<Self> {
        if encoding_dim == 0 || proj_dim == 0 {
            return Err(Error::InvalidArgument("KISSME dimensions must be positive".into()));
        }
        let bound = 1.0 / sqrt(encoding_dim as f64);
        let w: Vec<f64> = (0..encoding_dim * proj_dim)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self::kissme_with(
            Matrix::from_vec(encoding_dim, proj_dim, w)?,
            Matrix::identity(proj_dim),
            margin,
        )
    }

    pub fn kissme_with(projection: Matrix, mahalanobis: Matrix, margin: f64) -> Result<Self> {
        check_margin(margin)?;
        if mahalanobis.rows() != projection.cols() {
            return Err(Error::DimensionMismatch {
                context: "KISSME metric matrix",
                expected: projection.cols(),
                got: mahalanobis.rows(),
            });
        }
        check_psd(&mahalanobis)?;
        Ok(Self {
            kind: MetricKind::Kissme,
            margin,
            projection: Some(projection),
            mahalanobis: Some(mahalanobis),
        })
    }

    /// Head of `kind` with its default margin.
    pub fn for_kind<R: Rng + ?Sized>(
        kind: MetricKind,
        encoding_dim: usize,
        proj_dim: usize,
        margin: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let margin = margin.unwrap_or(kind.default_margin());
        match kind {
            MetricKind::Euclidean => Self::euclidean(margin),
            MetricKind::Cosine => Self::cosine(margin),
            MetricKind::Kissme => Self::kissme(encoding_dim, proj_dim, margin, rng),
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn projection(&self) -> Option<&Matrix> {
        self.projection.as_ref()
    }

    pub fn mahalanobis(&self) -> Option<&Matrix> {
        self.mahalanobis.as_ref()
    }

    /// Number of gradient-trained parameters (the entries of `W`).
    pub fn param_count(&self) -> usize {
        self.projection.as_ref().map_or(0, |w| w.rows() * w.cols())
    }

    pub fn projection_params(&self) -> &[f64] {
        self.projection.as_ref().map_or(&[], |w| w.as_slice())
    }

    pub fn projection_params_mut(&mut self) -> &mut [f64] {
        match self.projection.as_mut() {
            Some(w) => w.as_mut_slice(),
            None => &mut [],
        }
    }

    /// Replaces `M`; rejected unless symmetric PSD.
    pub fn set_mahalanobis(&mut self, m: Matrix) -> Result<()> {
        let w = self
            .projection
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("only KISSME heads carry a metric matrix".into()))?;
        if m.rows() != w.cols() || !m.is_square() {
            return Err(Error::DimensionMismatch {
                context: "KISSME metric matrix",
                expected: w.cols(),
                got: m.rows(),
            });
        }
        check_psd(&m)?;
        self.mahalanobis = Some(m);
        Ok(())
    }

    /// `Wᵀ y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let w = self
            .projection
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("head has no projection".into()))?;
        if y.len() != w.rows() {
            return Err(Error::DimensionMismatch {
                context: "projection input",
                expected: w.rows(),
                got: y.len(),
            });
        }
        let mut p = vec![0.0; w.cols()];
        for (e, &ye) in y.iter().enumerate() {
            for (pk, &wk) in p.iter_mut().zip(w.row(e)) {
                *pk += ye * wk;
            }
        }
        Ok(p)
    }

    fn check_pair(&self, y1: &[f64], y2: &[f64]) -> Result<()> {
        if y1.len() != y2.len() {
            return Err(Error::DimensionMismatch {
                context: "encoding pair",
                expected: y1.len(),
                got: y2.len(),
            });
        }
        if let Some(w) = &self.projection {
            if y1.len() != w.rows() {
                return Err(Error::DimensionMismatch {
                    context: "KISSME projection",
                    expected: w.rows(),
                    got: y1.len(),
                });
            }
        }
        Ok(())
    }

    /// `δᵀ M δ` with `δ = Wᵀ(y1 − y2)`.
    fn quadratic_form(&self, y1: &[f64], y2: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let w = self.projection.as_ref().expect("kissme head");
        let m = self.mahalanobis.as_ref().expect("kissme head");
        let dy: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
        let mut delta = vec![0.0; w.cols()];
        for (e, &d) in dy.iter().enumerate() {
            for (dk, &wk) in delta.iter_mut().zip(w.row(e)) {
                *dk += d * wk;
            }
        }
        let m_delta = m.mul_vec(&delta);
        (dot(&delta, &m_delta), dy, m_delta)
    }

    /// Loss for one pair under this head's own loss.
    pub fn pair_loss(&self, y1: &[f64], y2: &[f64], label: PairLabel) -> Result<f64> {
        self.check_pair(y1, y2)?;
        Ok(self.pair_loss_grad(y1, y2, label, None))
    }

    /// Loss for one pair; with `grad = (dy1, dy2, dW, scale)`, adds
    /// `scale·∂L/∂·` into the buffers.
    #[allow(clippy::type_complexity)]
    pub(crate) fn pair_loss_grad(
        &self,
        y1: &[f64],
        y2: &[f64],
        label: PairLabel,
        grad: Option<(&mut [f64], &mut [f64], &mut [f64], f64)>,
    ) -> f64 {
        let m = self.margin;
        match self.kind {
            MetricKind::Euclidean => {
                let dy: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
                let d = sqrt(dot(&dy, &dy));
                let (loss, coef) = match label {
                    PairLabel::Similar => (0.5 * d * d, 1.0),
                    PairLabel::Dissimilar if d < m => {
                        let gap = m - d;
                        (0.5 * gap * gap, if d > 0.0 { -gap / d } else { 0.0 })
                    }
                    PairLabel::Dissimilar => (0.0, 0.0),
                };
                if let Some((g1, g2, _, scale)) = grad {
                    for ((a, b), &d) in g1.iter_mut().zip(g2.iter_mut()).zip(&dy) {
                        *a += scale * coef * d;
                        *b -= scale * coef * d;
                    }
                }
                loss
            }
            MetricKind::Cosine => {
                let c = cosine(y1, y2);
                let (loss, dl_dc) = match label {
                    PairLabel::Similar => (1.0 - c, -1.0),
                    PairLabel::Dissimilar if c > m => (c - m, 1.0),
                    PairLabel::Dissimilar => (0.0, 0.0),
                };
                if let Some((g1, g2, _, scale)) = grad {
                    let n1 = sqrt(dot(y1, y1));
                    let n2 = sqrt(dot(y2, y2));
                    if dl_dc != 0.0 && n1 >= 1e-12 && n2 >= 1e-12 {
                        let k = scale * dl_dc;
                        for i in 0..y1.len() {
                            g1[i] += k * (y2[i] / (n1 * n2) - c * y1[i] / (n1 * n1));
                            g2[i] += k * (y1[i] / (n1 * n2) - c * y2[i] / (n2 * n2));
                        }
                    }
                }
                loss
            }
            MetricKind::Kissme => {
                let (q, dy, m_delta) = self.quadratic_form(y1, y2);
                let (loss, dl_dq) = match label {
                    PairLabel::Similar => (0.5 * q, 0.5),
                    PairLabel::Dissimilar if q < m => (0.5 * (m - q), -0.5),
                    PairLabel::Dissimilar => (0.0, 0.0),
                };
                if let Some((g1, g2, gw, scale)) = grad {
                    if dl_dq != 0.0 {
                        let w = self.projection.as_ref().expect("kissme head");
                        // ∂L/∂δ = dl_dq · 2Mδ
                        let g_delta: Vec<f64> = m_delta.iter().map(|v| scale * dl_dq * 2.0 * v).collect();
                        for e in 0..dy.len() {
                            let w_row = w.row(e);
                            let gw_row = &mut gw[e * g_delta.len()..(e + 1) * g_delta.len()];
                            let mut acc = 0.0;
                            for k in 0..g_delta.len() {
                                gw_row[k] += dy[e] * g_delta[k];
                                acc += w_row[k] * g_delta[k];
                            }
                            g1[e] += acc;
                            g2[e] -= acc;
                        }
                    }
                }
                loss
            }
        }
    }

    /// Closed-form KISSME update of `M` from encodings (rows) and the pair
    /// lists; see [`kissme_closed_form_update`].
    pub fn update_mahalanobis(
        &mut self,
        encodings: &Matrix,
        similar: &[(usize, usize)],
        dissimilar: &[(usize, usize)],
        ridge: f64,
    ) -> Result<()> {
        let m = kissme_closed_form_update(self, encodings, similar, dissimilar, ridge)?;
        self.mahalanobis = Some(m);
        Ok(())
    }
}

/// Distance used for clustering and silhouettes.
///
/// Euclidean: `‖y1 − y2‖`; cosine: `1 − cos`; KISSME: `√max(0, δᵀMδ)`.
pub fn head_distance(head: &MetricHead, y1: &[f64], y2: &[f64]) -> Result<f64> {
    head.check_pair(y1, y2)?;
    Ok(match head.kind {
        MetricKind::Euclidean => {
            let d: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
            sqrt(d)
        }
        MetricKind::Cosine => 1.0 - cosine(y1, y2),
        MetricKind::Kissme => sqrt(head.quadratic_form(y1, y2).0.max(0.0)),
    })
}

/// Contrastive loss on the Euclidean distance of the encodings:
/// `½d²` for similar pairs, `½max(0, m − d)²` for dissimilar ones.
pub fn contrastive_loss(head: &MetricHead, y1: &[f64], y2: &[f64], label: PairLabel) -> Result<f64> {
    let euclid = MetricHead::euclidean(head.margin)?;
    euclid.pair_loss(y1, y2, label)
}

/// `1 − cos` for similar pairs, `max(0, cos − m)` for dissimilar ones.
pub fn cosine_pair_loss(head: &MetricHead, y1: &[f64], y2: &[f64], label: PairLabel) -> Result<f64> {
    MetricHead::cosine(head.margin)?.pair_loss(y1, y2, label)
}

/// `½q` for similar pairs and `½max(0, m − q)` for dissimilar ones, with
/// `q = δᵀMδ` on projected encodings.
pub fn kissme_pair_loss(head: &MetricHead, y1: &[f64], y2: &[f64], label: PairLabel) -> Result<f64> {
    if head.kind != MetricKind::Kissme {
        return Err(Error::InvalidArgument("KISSME loss needs a KISSME head".into()));
    }
    head.pair_loss(y1, y2, label)
}

/// `M = Proj_PSD((WᵀΣ_S W)⁻¹ − (WᵀΣ_D W)⁻¹)`, where `Σ_S`, `Σ_D` are the
/// second moments of pair differences in encoding space.
pub fn kissme_closed_form_update(
    head: &MetricHead,
    encodings: &Matrix,
    similar: &[(usize, usize)],
    dissimilar: &[(usize, usize)],
    ridge: f64,
) -> Result<Matrix> {
    let w = head
        .projection
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("closed-form update needs a KISSME head".into()))?;
    if encodings.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            context: "KISSME encodings",
            expected: w.rows(),
            got: encodings.cols(),
        });
    }
    if similar.is_empty() {
        return Err(Error::Empty("similar pairs"));
    }
    if dissimilar.is_empty() {
        return Err(Error::Empty("dissimilar pairs"));
    }
    let sigma_s = pair_diff_covariance(encodings, similar)?.conjugate_by(w)?;
    let sigma_d = pair_diff_covariance(encodings, dissimilar)?.conjugate_by(w)?;
    let inv_s = spd_inverse_named(&sigma_s, ridge, "similar-pair covariance")?;
    let inv_d = spd_inverse_named(&sigma_d, ridge, "dissimilar-pair covariance")?;
    psd_project(&inv_s.sub(&inv_d)?.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn kissme_identity(dim: usize) -> MetricHead {
        MetricHead::kissme_with(Matrix::identity(dim), Matrix::identity(dim), 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let y = [0.3, -0.2];
        let mut rng = crate::seeded_rng(0);
        for kind in [MetricKind::Euclidean, MetricKind::Cosine, MetricKind::Kissme] {
            let head = MetricHead::for_kind(kind, 2, 3, None, &mut rng).unwrap();
            assert!(head_distance(&head, &y, &y).unwrap().abs() < 1e-12);
        }
        let e = MetricHead::euclidean(1.0).unwrap();
        assert_eq!(head_distance(&e, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);

        let w = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 2.0], &[1.0, 1.0]]).unwrap();
        let k = MetricHead::kissme_with(w.clone(), Matrix::identity(2), 1.0).unwrap();
        let (a, b) = ([1.0, 2.0, 0.0], [0.0, 1.0, 1.0]);
        let (pa, pb) = (k.project(&a).unwrap(), k.project(&b).unwrap());
        let expected = head_distance(&e, &pa, &pb).unwrap();
        assert!((head_distance(&k, &a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(head_distance(&k, &[1.0], &[2.0]).is_err());
    }

    #[test]
    fn contrastive_examples() {
        let h = MetricHead::euclidean(1.0).unwrap();
        assert_eq!(
            contrastive_loss(&h, &[1.0, 1.0], &[1.0, 1.0], PairLabel::Similar).unwrap(),
            0.0
        );
        assert_eq!(
            contrastive_loss(&h, &[0.0], &[1.5], PairLabel::Dissimilar).unwrap(),
            0.0
        );
        let l = contrastive_loss(&h, &[0.0], &[0.4], PairLabel::Dissimilar).unwrap();
        assert!((l - 0.18).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let h = MetricHead::cosine(0.5).unwrap();
        assert!(
            cosine_pair_loss(&h, &[1.0, 2.0], &[2.0, 4.0], PairLabel::Similar)
                .unwrap()
                .abs()
                < 1e-12
        );
        // cos = 0.5 exactly at 60 degrees
        let l = cosine_pair_loss(&h, &[1.0, 0.0], &[0.5, 0.75f64.sqrt()], PairLabel::Dissimilar).unwrap();
        assert!(l.abs() < 1e-12);
        let (a, b) = ([1.0, 0.0], [0.9, 0.19f64.sqrt()]);
        let l = cosine_pair_loss(&h, &a, &b, PairLabel::Dissimilar).unwrap();
        assert!((l - 0.4).abs() < 1e-12);
    }

    #[test]
    fn kissme_loss_examples() {
        let h = kissme_identity(2);
        assert_eq!(
            kissme_pair_loss(&h, &[1.0, 1.0], &[1.0, 1.0], PairLabel::Similar).unwrap(),
            0.0
        );
        assert_eq!(
            kissme_pair_loss(&h, &[1.0, 0.0], &[0.0, 0.0], PairLabel::Similar).unwrap(),
            0.5
        );
        assert_eq!(
            kissme_pair_loss(&h, &[2.0, 0.0], &[0.0, 0.0], PairLabel::Dissimilar).unwrap(),
            0.0
        );
        let e = MetricHead::euclidean(1.0).unwrap();
        assert!(kissme_pair_loss(&e, &[1.0], &[0.0], PairLabel::Similar).is_err());
    }

    #[test]
    fn equal_statistics_give_zero_metric() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.5], &[0.2, -1.0], &[2.0, 1.0]]).unwrap();
        let pairs = [(0, 1), (2, 3), (0, 2)];
        let m = kissme_closed_form_update(&kissme_identity(2), &x, &pairs, &pairs, 1e-6).unwrap();
        assert!(m.max_abs() < 1e-9);
    }

    #[test]
    fn closed_form_recovers_variance_ratio() {
        let dim = 3;
        let pairs = 10_000;
        let mut rng = crate::seeded_rng(2024);
        let sim = Normal::new(0.0, 0.5).unwrap();
        let dis = Normal::new(0.0, 2.0).unwrap();
        let mut rows = Vec::with_capacity(4 * pairs * dim);
        for dist in [sim, dis] {
            for _ in 0..pairs {
                for _ in 0..dim {
                    rows.push(dist.sample(&mut rng));
                }
                rows.extend(core::iter::repeat_n(0.0, dim));
            }
        }
        let x = Matrix::from_vec(4 * pairs, dim, rows).unwrap();
        let similar: Vec<_> = (0..pairs).map(|k| (2 * k, 2 * k + 1)).collect();
        let dissimilar: Vec<_> = (pairs..2 * pairs).map(|k| (2 * k, 2 * k + 1)).collect();
        let mut head = kissme_identity(dim);
        head.update_mahalanobis(&x, &similar, &dissimilar, 1e-6).unwrap();
        let m = head.mahalanobis().unwrap();
        let target = Matrix::identity(dim).scale(1.0 / 0.25 - 1.0 / 4.0);
        let rel = m.sub(&target).unwrap().frobenius_norm() / target.frobenius_norm();
        assert!(rel < 0.05, "relative error {rel}");
        assert!(sym_eig(m).unwrap().eigenvalues[0] >= -1e-10);
    }

    #[test]
    fn singular_similar_covariance_is_named() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let err = kissme_closed_form_update(&kissme_identity(2), &x, &[(0, 1)], &[(0, 2), (1, 2)], 0.0).unwrap_err();
        assert_eq!(err, Error::Singular("similar-pair covariance"));
    }

    #[test]
    fn non_psd_metric_is_rejected() {
        let mut h = kissme_identity(2);
        assert!(h.set_mahalanobis(Matrix::from_diag(&[1.0, -1.0])).is_err());
    }

    fn arb_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, n)
    }

    proptest! {
        #[test]
        fn losses_are_symmetric_and_non_negative(a in arb_vec(4), b in arb_vec(4), seed in 0u64..100) {
            let mut rng = crate::seeded_rng(seed);
            for kind in [MetricKind::Euclidean, MetricKind::Cosine, MetricKind::Kissme] {
                let head = MetricHead::for_kind(kind, 4, 3, None, &mut rng).unwrap();
                for label in [PairLabel::Similar, PairLabel::Dissimilar] {
                    let l1 = head.pair_loss(&a, &b, label).unwrap();
                    let l2 = head.pair_loss(&b, &a, label).unwrap();
                    prop_assert!(l1 >= 0.0);
                    prop_assert!((l1 - l2).abs() < 1e-12);
                }
                prop_assert_eq!(head.pair_loss(&a, &a, PairLabel::Similar).unwrap().abs() < 1e-12, true);
            }
        }

        #[test]
        fn cosine_distance_ignores_positive_scaling(a in arb_vec(5), b in arb_vec(5), s in 0.01f64..100.0, t in 0.01f64..100.0) {
            let h = MetricHead::cosine(0.5).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v * s).collect();
            let tb: Vec<f64> = b.iter().map(|v| v * t).collect();
            let d1 = head_distance(&h, &a, &b).unwrap();
            let d2 = head_distance(&h, &sa, &tb).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);
        }

        #[test]
        fn kissme_distance_is_a_pseudometric(a in arb_vec(4), b in arb_vec(4), c in arb_vec(4), seed in 0u64..1000) {
            let mut rng = crate::seeded_rng(seed);
            let mut head = MetricHead::kissme(4, 3, 1.0, &mut rng).unwrap();
            let g: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = Matrix::from_vec(3, 3, g).unwrap();
            head.set_mahalanobis(g.matmul(&g.transpose()).unwrap().symmetrized()).unwrap();
            let d = |x: &[f64], y: &[f64]| head_distance(&head, x, y).unwrap();
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
            prop_assert!(d(&a, &a).abs() < 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }
}
