use crate::float::{exp, ln, ln_gamma, sqrt};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t-test on raw samples.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    let (ma, sa) = super::mean_std(a);
    let (mb, sb) = super::mean_std(b);
    welch_test_summary(ma, sa, a.len(), mb, sb, b.len())
}

/// Welch's test from means, sample standard deviations and sizes.
pub fn welch_test_summary(
    mean_a: f64,
    sd_a: f64,
    n_a: usize,
    mean_b: f64,
    sd_b: f64,
    n_b: usize,
) -> Result<WelchResult> {
    if n_a < 2 || n_b < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    if [mean_a, sd_a, mean_b, sd_b].iter().any(|v| !v.is_finite()) || sd_a < 0.0 || sd_b < 0.0 {
        return Err(Error::NonFinite("Welch summary statistics"));
    }
    let va = sd_a * sd_a / n_a as f64;
    let vb = sd_b * sd_b / n_b as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        let (t, p) = if mean_a == mean_b {
            (0.0, 1.0)
        } else {
            ((mean_a - mean_b) * f64::INFINITY, 0.0)
        };
        return Ok(WelchResult {
            t,
            df: (n_a + n_b - 2) as f64,
            p,
        });
    }
    let t = (mean_a - mean_b) / sqrt(se2);
    let df = se2 * se2 / (va * va / (n_a - 1) as f64 + vb * vb / (n_b - 1) as f64);
    let p = regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5)?;
    Ok(WelchResult {
        t,
        df,
        p: p.clamp(0.0, 1.0),
    })
}

/// `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidArgument("incomplete beta arguments out of range".into()));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * ln(x) + b * ln(1.0 - x);
    let front = exp(ln_front);
    // The fraction converges fastest for x below the mean a/(a+b).
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_fraction(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_fraction(1.0 - x, b, a) / b)
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-sided Student p by Simpson integration of the t density.
    fn student_p_by_quadrature(t: f64, df: f64) -> f64 {
        let c =
            libm::exp(libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0)) / libm::sqrt(df * core::f64::consts::PI);
        let pdf = |x: f64| c * libm::pow(1.0 + x * x / df, -(df + 1.0) / 2.0);
        let steps = 200_000;
        let h = t.abs() / steps as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_variances_reduce_to_student() {
        let a = [0.1, 0.5, 0.9, 0.3, 0.7];
        let b = [1.1, 1.5, 1.9, 1.3, 1.7];
        let r = welch_test(&a, &b).unwrap();
        assert!((r.df - 8.0).abs() < 1e-12);
        let oracle = student_p_by_quadrature(r.t, 8.0);
        assert!((r.p - oracle).abs() < 1e-6, "{} vs {oracle}", r.p);
    }

    #[test]
    fn quadrature_agreement_across_df() {
        for (t, df) in [(0.3, 3.0), (1.7, 11.5), (2.5, 37.0), (4.0, 2.2)] {
            let p = regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5).unwrap();
            assert!((p - student_p_by_quadrature(t, df)).abs() < 1e-6);
        }
    }

    #[test]
    fn crl_versus_mse_summary_is_significant() {
        let r = welch_test_summary(0.714, 0.048, 20, 0.666, 0.066, 20).unwrap();
        assert!(r.p < 0.05, "{r:?}");
        assert!(r.t > 0.0);
    }

    #[test]
    fn degenerate_variances() {
        assert_eq!(welch_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap().p, 1.0);
        assert_eq!(welch_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap().p, 0.0);
        assert!(welch_test(&[1.0], &[2.0, 3.0]).is_err());
    }
}
