use crate::float::{dot, norm};
use crate::{Error, Result};

/// Reconstruction loss used to train the autoencoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ReconLoss {
    /// Mean over steps of the squared Euclidean error.
    Mse,
    /// `l − Σ_t cos(S(t), Ŝ(t))`.
    Crl,
}

impl ReconLoss {
    pub fn as_str(self) -> &'static str {
        match self {
            ReconLoss::Mse => "mse",
            ReconLoss::Crl => "crl",
        }
    }

    pub fn eval(self, target: &[f64], recon: &[f64], channels: usize) -> Result<f64> {
        check_shapes(target, recon, channels)?;
        Ok(self.loss_and_grad(target, recon, channels, None))
    }

    /// Loss value; when `grad` is given, `∂loss/∂recon` is added into it.
    pub(crate) fn loss_and_grad(
        self,
        target: &[f64],
        recon: &[f64],
        channels: usize,
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        match self {
            ReconLoss::Mse => mse_impl(target, recon, channels, grad),
            ReconLoss::Crl => crl_impl(target, recon, channels, grad),
        }
    }
}

fn check_shapes(target: &[f64], recon: &[f64], channels: usize) -> Result<()> {
    if target.len() != recon.len() || channels == 0 || !target.len().is_multiple_of(channels) {
        return Err(Error::DimensionMismatch {
            context: "reconstruction loss",
            expected: target.len(),
            got: recon.len(),
        });
    }
    Ok(())
}

/// `(1/l) Σ_t ‖S(t) − Ŝ(t)‖²`.
pub fn mse_loss(target: &[f64], recon: &[f64], channels: usize) -> Result<f64> {
    ReconLoss::Mse.eval(target, recon, channels)
}

/// `l − Σ_t cos(S(t), Ŝ(t))`, with `cos(0, ·) = 0`.
pub fn crl_loss(target: &[f64], recon: &[f64], channels: usize) -> Result<f64> {
    ReconLoss::Crl.eval(target, recon, channels)
}

fn mse_impl(target: &[f64], recon: &[f64], channels: usize, grad: Option<(&mut [f64], f64)>) -> f64 {
    let steps = (target.len() / channels) as f64;
    let sum: f64 = target.iter().zip(recon).map(|(s, r)| (r - s) * (r - s)).sum();
    if let Some((g, scale)) = grad {
        let k = scale * 2.0 / steps;
        for ((gi, s), r) in g.iter_mut().zip(target).zip(recon) {
            *gi += k * (r - s);
        }
    }
    sum / steps
}

fn crl_impl(target: &[f64], recon: &[f64], channels: usize, mut grad: Option<(&mut [f64], f64)>) -> f64 {
    let steps = target.len() / channels;
    let mut loss = steps as f64;
    for t in 0..steps {
        let range = t * channels..(t + 1) * channels;
        let s = &target[range.clone()];
        let r = &recon[range.clone()];
        let ns = norm(s);
        let nr = norm(r);
        if ns < 1e-12 || nr < 1e-12 {
            continue;
        }
        let cos = dot(s, r) / (ns * nr);
        loss -= cos;
        if let Some((g, scale)) = grad.as_mut() {
            // ∂cos/∂r = s/(|s||r|) − cos·r/|r|²
            for ((gi, &sv), &rv) in g[range].iter_mut().zip(s).zip(r) {
                *gi -= *scale * (sv / (ns * nr) - cos * rv / (nr * nr));
            }
        }
    }
    loss
}
