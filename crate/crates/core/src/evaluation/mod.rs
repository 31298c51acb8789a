//! Clustering quality against reference labels, and Welch's t-test for
//! comparing repeated runs. Entropies use the natural logarithm.

mod welch;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::float::{exp, ln, ln_gamma, sqrt};
use crate::numerics::Matrix;
use crate::{Error, Result};

pub use welch::{regularized_incomplete_beta, welch_test, welch_test_summary, WelchResult};

/// Counts of co-occurring labels: rows are classes, columns clusters, both
/// in ascending label order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contingency {
    pub counts: Vec<Vec<usize>>,
    pub class_totals: Vec<usize>,
    pub cluster_totals: Vec<usize>,
    pub total: usize,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0usize);
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl Contingency {
    pub fn new(classes: &[usize], clusters: &[usize]) -> Result<Self> {
        if classes.len() != clusters.len() {
            return Err(Error::DimensionMismatch {
                context: "class and cluster labels",
                expected: classes.len(),
                got: clusters.len(),
            });
        }
        if classes.is_empty() {
            return Err(Error::Empty("label list"));
        }
        let (ci, nc) = dense(classes);
        let (ki, nk) = dense(clusters);
        let mut counts = vec![vec![0usize; nk]; nc];
        for (&c, &k) in ci.iter().zip(&ki) {
            counts[c][k] += 1;
        }
        let class_totals = counts.iter().map(|r| r.iter().sum()).collect();
        let cluster_totals = (0..nk).map(|k| counts.iter().map(|r| r[k]).sum()).collect();
        Ok(Self {
            counts,
            class_totals,
            cluster_totals,
            total: classes.len(),
        })
    }

    fn entropy_of(totals: &[usize], n: usize) -> f64 {
        let n = n as f64;
        -totals
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * ln(p)
            })
            .sum::<f64>()
    }

    pub fn class_entropy(&self) -> f64 {
        Self::entropy_of(&self.class_totals, self.total)
    }

    pub fn cluster_entropy(&self) -> f64 {
        Self::entropy_of(&self.cluster_totals, self.total)
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &nij) in row.iter().enumerate() {
                if nij > 0 {
                    let nij = nij as f64;
                    let a = self.class_totals[i] as f64;
                    let b = self.cluster_totals[j] as f64;
                    mi += nij / n * ln(n * nij / (a * b));
                }
            }
        }
        mi.max(0.0)
    }

    /// `H(cluster | class)`.
    pub fn conditional_cluster_entropy(&self) -> f64 {
        let n = self.total as f64;
        let mut h = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            let a = self.class_totals[i] as f64;
            for &nij in row.iter().filter(|&&v| v > 0) {
                let nij = nij as f64;
                h -= nij / n * ln(nij / a);
            }
        }
        h.max(0.0)
    }

    /// Expected mutual information of two random labelings with these
    /// marginals (hypergeometric model).
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.total;
        let nf = n as f64;
        let lg = |x: usize| ln_gamma(x as f64 + 1.0);
        let lg_n = lg(n);
        let mut emi = 0.0;
        for &a in &self.class_totals {
            for &b in &self.cluster_totals {
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                let fixed = lg(a) + lg(b) + lg(n - a) + lg(n - b) - lg_n;
                for nij in lo..=hi {
                    let log_p = fixed - lg(nij) - lg(a - nij) - lg(b - nij) - lg(n + nij - a - b);
                    let x = nij as f64;
                    emi += x / nf * ln(nf * x / (a as f64 * b as f64)) * exp(log_p);
                }
            }
        }
        emi
    }

    /// Same partition up to relabeling.
    pub fn is_bijective(&self) -> bool {
        self.class_totals.len() == self.cluster_totals.len()
            && self.counts.iter().all(|r| r.iter().filter(|&&v| v > 0).count() == 1)
    }
}

/// `1 − H(cluster|class)/H(cluster)`, or 1 when all points share a cluster.
pub fn completeness(classes: &[usize], clusters: &[usize]) -> Result<f64> {
    let c = Contingency::new(classes, clusters)?;
    let hk = c.cluster_entropy();
    if hk <= 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - c.conditional_cluster_entropy() / hk).clamp(0.0, 1.0))
}

/// Mutual information normalized by the geometric mean of the entropies.
pub fn nmi(classes: &[usize], clusters: &[usize]) -> Result<f64> {
    let c = Contingency::new(classes, clusters)?;
    let (hc, hk) = (c.class_entropy(), c.cluster_entropy());
    if hc <= 0.0 && hk <= 0.0 {
        return Ok(1.0);
    }
    if hc <= 0.0 || hk <= 0.0 {
        return Ok(0.0);
    }
    Ok((c.mutual_information() / sqrt(hc * hk)).clamp(0.0, 1.0))
}

/// Mutual information adjusted for chance, normalized by the larger entropy.
pub fn ami(classes: &[usize], clusters: &[usize]) -> Result<f64> {
    let c = Contingency::new(classes, clusters)?;
    let emi = c.expected_mutual_information();
    let denom = c.class_entropy().max(c.cluster_entropy()) - emi;
    if denom.abs() < 1e-15 {
        return Ok(if c.is_bijective() { 1.0 } else { 0.0 });
    }
    Ok((c.mutual_information() - emi) / denom)
}

/// Mean silhouette. Points alone in their cluster score 0.
pub fn silhouette(distances: &Matrix, clusters: &[usize]) -> Result<f64> {
    let n = clusters.len();
    if distances.rows() != n || distances.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "silhouette distance matrix",
            expected: n,
            got: distances.rows(),
        });
    }
    let (ids, k) = dense(clusters);
    if k < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least two clusters".into()));
    }
    let mut sizes = vec![0usize; k];
    for &c in &ids {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = ids[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, &d) in distances.row(i).iter().enumerate() {
            if j != i {
                sums[ids[j]] += d;
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn completeness_examples() {
        assert_eq!(completeness(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert_eq!(completeness(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 1.0);
        assert!(completeness(&[0, 0, 1, 1], &[1, 2, 1, 2]).unwrap().abs() < 1e-12);
        assert!(completeness(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1], &[3, 3, 2, 2]).unwrap() - 1.0).abs() < 1e-12);
        // product contingency: each class spread evenly over both clusters
        assert!(nmi(&[0, 0, 0, 0, 1, 1, 1, 1], &[0, 1, 0, 1, 0, 1, 0, 1]).unwrap().abs() < 1e-12);
        // (a,a,b,b) vs (1,1,1,2): MI = ln2 − ¾ln3 + ½ln2... computed by hand
        let h_c = 2f64.ln();
        let h_k = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let mi = 0.5 * (4.0 * 2.0 / (2.0 * 3.0_f64)).ln() + 0.25 * (4.0 / 6.0f64).ln() + 0.25 * (4.0 / 2.0f64).ln();
        let expected = mi / (h_c * h_k).sqrt();
        assert!((nmi(&[0, 0, 1, 1], &[1, 1, 1, 2]).unwrap() - expected).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0], &[1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 1], &[1, 1]).unwrap(), 0.0);
    }

    fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let x = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn expected_mi_matches_enumeration() {
        let classes = [0, 0, 1, 2];
        let clusters = [0, 1, 1, 1];
        let perms = permutations(&clusters);
        assert_eq!(perms.len(), 24);
        let brute: f64 = perms
            .iter()
            .map(|p| Contingency::new(&classes, p).unwrap().mutual_information())
            .sum::<f64>()
            / 24.0;
        let emi = Contingency::new(&classes, &clusters)
            .unwrap()
            .expected_mutual_information();
        assert!((brute - emi).abs() < 1e-12, "{brute} vs {emi}");
    }

    #[test]
    fn ami_examples() {
        assert!((ami(&[0, 0, 1, 1, 2], &[4, 4, 0, 0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ami(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn ami_is_zero_on_average_for_shuffles() {
        let mut rng = crate::seeded_rng(17);
        let labels: Vec<usize> = (0..120).map(|_| rng.gen_range(0..5)).collect();
        let mut shuffled = labels.clone();
        let mut sum = 0.0;
        for _ in 0..300 {
            shuffled.shuffle(&mut rng);
            sum += ami(&labels, &shuffled).unwrap();
        }
        assert!((sum / 300.0).abs() < 0.02);
    }

    #[test]
    fn silhouette_examples() {
        let d = Matrix::from_rows(&[
            &[0.0, 1.0, 10.0, 10.0],
            &[1.0, 0.0, 10.0, 10.0],
            &[10.0, 10.0, 0.0, 1.0],
            &[10.0, 10.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!((silhouette(&d, &[0, 0, 1, 1]).unwrap() - 0.9).abs() < 1e-12);
        let coincident = Matrix::from_rows(&[&[0.0, 0.0, 5.0], &[0.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]).unwrap();
        // the singleton scores 0
        assert!((silhouette(&coincident, &[0, 0, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let equi = Matrix::from_rows(&[
            &[0.0, 1.0, 1.0, 1.0],
            &[1.0, 0.0, 1.0, 1.0],
            &[1.0, 1.0, 0.0, 1.0],
            &[1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(silhouette(&equi, &[0, 0, 1, 1]).unwrap().abs() < 1e-12);
        assert!(silhouette(&equi, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    proptest! {
        #[test]
        fn scores_are_bounded_and_relabel_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..5), 2..60),
            shift in 1usize..100,
        ) {
            let classes: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let clusters: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let relabeled: Vec<usize> = clusters.iter().map(|c| (4 - c) * shift).collect();
            for f in [completeness, nmi, ami] {
                let a = f(&classes, &clusters).unwrap();
                let b = f(&classes, &relabeled).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a <= 1.0 + 1e-12);
            }
            prop_assert!(completeness(&classes, &clusters).unwrap() >= 0.0);
            prop_assert!(nmi(&classes, &clusters).unwrap() >= 0.0);
        }
    }
}
