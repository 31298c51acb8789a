//! Scalar training objectives over one sample or one pair, with gradients
//! with respect to the autoencoder parameters and the KISSME projection.

use alloc::vec;
use alloc::vec::Vec;

use crate::metric::MetricHead;
use crate::pairs::PairLabel;
use crate::seq2seq::{EncoderDecoder, ReconLoss};
use crate::timeseries::SequenceSample;
use crate::{Error, Result};

/// `input` is what the encoder sees (possibly masked); `target` is the clean
/// sequence the decoder must reproduce.
#[derive(Clone, Copy, Debug)]
pub struct View<'a> {
    pub input: &'a SequenceSample,
    pub target: &'a SequenceSample,
}

impl<'a> View<'a> {
    pub fn clean(seq: &'a SequenceSample) -> Self {
        Self {
            input: seq,
            target: seq,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// Reconstruction loss of one sequence.
    Reconstruction { view: View<'a>, loss: ReconLoss },
    /// Metric loss of a pair, optionally plus `weight · ½(RL(a) + RL(b))`.
    Pair {
        a: View<'a>,
        b: View<'a>,
        label: PairLabel,
        reconstruction: Option<(ReconLoss, f64)>,
    },
}

/// Gradient buffers matching the model parameters and the head's `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub model: Vec<f64>,
    pub projection: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &EncoderDecoder, head: Option<&MetricHead>) -> Self {
        Self {
            model: vec![0.0; model.param_count()],
            projection: vec![0.0; head.map_or(0, MetricHead::param_count)],
        }
    }

    pub fn clear(&mut self) {
        self.model.iter_mut().for_each(|g| *g = 0.0);
        self.projection.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.model.iter().chain(&self.projection).all(|g| g.is_finite())
    }
}

fn check_view(view: &View<'_>) -> Result<()> {
    if view.input.steps() != view.target.steps() || view.input.channels() != view.target.channels() {
        return Err(Error::DimensionMismatch {
            context: "input and target sequence",
            expected: view.target.values().len(),
            got: view.input.values().len(),
        });
    }
    Ok(())
}

/// Reconstruction term of one view, scaled by `weight`; gradients are added
/// into `grads` when given.
fn reconstruction_term(
    model: &EncoderDecoder,
    view: &View<'_>,
    loss: ReconLoss,
    weight: f64,
    d_encoding: Option<&[f64]>,
    grads: Option<&mut [f64]>,
) -> Result<f64> {
    check_view(view)?;
    let (enc, enc_tape) = model.encode(view.input)?;
    let steps = view.target.steps();
    let (recon, dec_tape) = model.decode(&enc, steps)?;
    let channels = view.target.channels();
    match grads {
        Some(g) => {
            let mut d_recon = vec![0.0; recon.len()];
            let value = loss.loss_and_grad(view.target.values(), &recon, channels, Some((&mut d_recon, weight)));
            model.backward(&enc_tape, Some((&dec_tape, &d_recon)), d_encoding, g)?;
            Ok(weight * value)
        }
        None => Ok(weight * loss.loss_and_grad(view.target.values(), &recon, channels, None)),
    }
}

/// Loss value of `objective`; with `grads`, its gradient is added into them.
pub fn evaluate(
    model: &EncoderDecoder,
    head: Option<&MetricHead>,
    objective: &Objective<'_>,
    grads: Option<&mut Gradients>,
) -> Result<f64> {
    match *objective {
        Objective::Reconstruction { view, loss } => {
            reconstruction_term(model, &view, loss, 1.0, None, grads.map(|g| g.model.as_mut_slice()))
        }
        Objective::Pair {
            a,
            b,
            label,
            reconstruction,
        } => {
            let head = head.ok_or_else(|| Error::InvalidArgument("pair objective needs a metric head".into()))?;
            check_view(&a)?;
            check_view(&b)?;
            let (ya, tape_a) = model.encode(a.input)?;
            let (yb, tape_b) = model.encode(b.input)?;
            let hd = model.hidden();
            match grads {
                None => {
                    let mut total = head.pair_loss(&ya, &yb, label)?;
                    if let Some((loss, weight)) = reconstruction {
                        total += reconstruction_term(model, &a, loss, 0.5 * weight, None, None)?;
                        total += reconstruction_term(model, &b, loss, 0.5 * weight, None, None)?;
                    }
                    Ok(total)
                }
                Some(g) => {
                    if g.projection.len() != head.param_count() {
                        return Err(Error::DimensionMismatch {
                            context: "projection gradient buffer",
                            expected: head.param_count(),
                            got: g.projection.len(),
                        });
                    }
                    head.pair_loss(&ya, &yb, label)?;
                    let mut da = vec![0.0; hd];
                    let mut db = vec![0.0; hd];
                    let mut total =
                        head.pair_loss_grad(&ya, &yb, label, Some((&mut da, &mut db, &mut g.projection, 1.0)));
                    match reconstruction {
                        Some((loss, weight)) => {
                            // The metric gradient on each encoding rides along
                            // with that sequence's reconstruction backward pass.
                            total += reconstruction_term(model, &a, loss, 0.5 * weight, Some(&da), Some(&mut g.model))?;
                            total += reconstruction_term(model, &b, loss, 0.5 * weight, Some(&db), Some(&mut g.model))?;
                        }
                        None => {
                            model.backward(&tape_a, None, Some(&da), &mut g.model)?;
                            model.backward(&tape_b, None, Some(&db), &mut g.model)?;
                        }
                    }
                    Ok(total)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricKind;
    use rand::Rng;

    fn seq(seed: u64) -> SequenceSample {
        let mut rng = crate::seeded_rng(seed);
        let v = (0..7 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SequenceSample::new(0, 0, 7, 3, v).unwrap()
    }

    #[test]
    fn joint_value_is_metric_plus_weighted_mean_reconstruction() {
        let mut rng = crate::seeded_rng(1);
        let model = EncoderDecoder::new(3, 5, &mut rng);
        let head = MetricHead::for_kind(MetricKind::Kissme, 5, 4, None, &mut rng).unwrap();
        let (s1, s2) = (seq(2), seq(3));
        let (a, b) = (View::clean(&s1), View::clean(&s2));
        let rl = |v: View<'_>| {
            evaluate(
                &model,
                None,
                &Objective::Reconstruction {
                    view: v,
                    loss: ReconLoss::Crl,
                },
                None,
            )
            .unwrap()
        };
        let metric = head
            .pair_loss(
                &model.encoding(&s1).unwrap(),
                &model.encoding(&s2).unwrap(),
                PairLabel::Similar,
            )
            .unwrap();
        let joint = Objective::Pair {
            a,
            b,
            label: PairLabel::Similar,
            reconstruction: Some((ReconLoss::Crl, 2.0)),
        };
        let value = evaluate(&model, Some(&head), &joint, None).unwrap();
        assert!((value - (metric + 2.0 * 0.5 * (rl(a) + rl(b)))).abs() < 1e-12);

        let mut g = Gradients::zeros(&model, Some(&head));
        let with_grad = evaluate(&model, Some(&head), &joint, Some(&mut g)).unwrap();
        assert!((value - with_grad).abs() < 1e-12);
    }

    #[test]
    fn pair_without_head_is_rejected() {
        let model = EncoderDecoder::zeros(3, 2);
        let s = seq(1);
        let o = Objective::Pair {
            a: View::clean(&s),
            b: View::clean(&s),
            label: PairLabel::Similar,
            reconstruction: None,
        };
        assert!(evaluate(&model, None, &o, None).is_err());
    }
}
