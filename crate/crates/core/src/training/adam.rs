use alloc::vec;
use alloc::vec::Vec;

use crate::float::sqrt;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moment estimates for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient aborts before any
/// parameter is touched; the error names the offending block via `name_of`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
    name_of: &dyn Fn(usize) -> &'static str,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "optimizer step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(name_of(i)));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(BETA1, t as f64);
    let c2 = 1.0 - libm::pow(BETA2, t as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / (sqrt(*v / c2) + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anon(_: usize) -> &'static str {
        "p"
    }

    #[test]
    fn zero_gradient_is_a_null_update() {
        let mut p = vec![1.0, -2.0];
        let mut s = OptimizerState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.001, &anon).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let lr = 0.001;
        let g = [1e-4, -3.0, 250.0, -1e-3];
        let mut p = vec![0.0; 4];
        let mut s = OptimizerState::new(4);
        adam_step(&mut p, &g, &mut s, lr, &anon).unwrap();
        for (d, gi) in p.iter().zip(g) {
            assert!(d.abs() >= 0.99 * lr && d.abs() <= lr, "{d}");
            assert_eq!(d.signum(), -gi.signum());
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.5, 0.25];
            let mut s = OptimizerState::new(2);
            for k in 0..5 {
                adam_step(&mut p, &[0.1 * k as f64, -1.0], &mut s, 0.01, &anon).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = vec![0.0; 3];
        let mut s = OptimizerState::new(3);
        let names = |i: usize| if i < 2 { "a" } else { "b" };
        let err = adam_step(&mut p, &[0.0, 1.0, f64::NAN], &mut s, 0.1, &names).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient("b"));
        assert_eq!(p, vec![0.0; 3]);
        assert_eq!(s.step, 0);
    }
}
