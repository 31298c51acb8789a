use alloc::vec::Vec;

use crate::metric::MetricHead;
use crate::objective::{evaluate, Gradients, Objective};
use crate::seq2seq::EncoderDecoder;
use crate::Result;

mod dd;
mod reference;

use dd::Dd;
use reference::Reference;

const STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name of the parameter block holding the worst entry, and its index
    /// within the flat vector (`W` entries are numbered after the model's).
    pub worst_param: (&'static str, usize),
    pub checked: usize,
    pub passed: bool,
}

fn rel_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-8)
}

fn lift(v: &[f64]) -> Vec<Dd> {
    v.iter().map(|&x| Dd::new(x)).collect()
}

/// Compares the analytic gradient of `objective` with central finite
/// differences for every model parameter and every entry of the head's `W`.
///
/// The finite differences come from a separate forward implementation in
/// double-double arithmetic, so the oracle is free of f64 cancellation noise.
pub fn grad_check(
    model: &EncoderDecoder,
    head: Option<&MetricHead>,
    objective: &Objective<'_>,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut analytic = Gradients::zeros(model, head);
    evaluate(model, head, objective, Some(&mut analytic))?;

    let layout = model.layout();
    let params = lift(model.params());
    let w = head.map(|h| lift(h.projection_params())).unwrap_or_default();
    let h = Dd::new(STEP);
    let central = |params: &[Dd], w: &[Dd], i: usize, in_w: bool| -> f64 {
        let mut p = params.to_vec();
        let mut wp = w.to_vec();
        let slot = if in_w { &mut wp[i] } else { &mut p[i] };
        let orig = *slot;
        *slot = orig + h;
        let eval = |p: &[Dd], wp: &[Dd]| {
            Reference {
                layout,
                params: p,
                head: head.map(|hd| (hd, wp)),
            }
            .evaluate(objective)
        };
        let up = eval(&p, &wp);
        let slot = if in_w { &mut wp[i] } else { &mut p[i] };
        *slot = orig - h;
        let down = eval(&p, &wp);
        ((up - down) / (h * Dd::new(2.0))).to_f64()
    };

    let mut worst = (0.0, ("none", 0));
    for i in 0..model.param_count() {
        let rel = rel_error(analytic.model[i], central(&params, &w, i, false));
        if rel > worst.0 || !rel.is_finite() {
            worst = (rel, (layout.name_of(i), i));
        }
    }
    let mut checked = model.param_count();
    for k in 0..w.len() {
        let rel = rel_error(analytic.projection[k], central(&params, &w, k, true));
        if rel > worst.0 || !rel.is_finite() {
            worst = (rel, ("projection.w", checked + k));
        }
    }
    checked += w.len();

    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_param: worst.1,
        checked,
        passed: worst.0 < tolerance,
    })
}
