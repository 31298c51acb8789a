//! One LSTM layer (input, forget, cell, output gates; no peepholes) with
//! forward caching and backpropagation through time.
//!
//! Gate pre-activations are stacked in the order `[i, f, g, o]`, so every
//! weight block has `4·hidden` rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::float::{dot, sigmoid, tanh};

#[derive(Clone, Copy)]
pub(crate) struct LstmParams<'a> {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4H × input_dim`
    pub w_x: &'a [f64],
    /// `4H × H`
    pub w_h: &'a [f64],
    /// `4H`
    pub bias: &'a [f64],
}

pub(crate) struct LstmGrads<'a> {
    pub w_x: &'a mut [f64],
    pub w_h: &'a mut [f64],
    pub bias: &'a mut [f64],
}

#[derive(Clone, Copy)]
pub(crate) enum Inputs<'a> {
    /// `steps × input_dim`, one row per step.
    Sequence(&'a [f64]),
    /// The same vector fed at every step.
    Constant(&'a [f64]),
}

/// Activations cached by [`forward`].
#[derive(Clone, Debug)]
pub struct LstmTape {
    pub(crate) steps: usize,
    pub(crate) hidden: usize,
    /// `(steps + 1) × H`; row 0 is the initial state.
    pub(crate) h: Vec<f64>,
    /// `(steps + 1) × H`
    pub(crate) c: Vec<f64>,
    /// `steps × 4H`, post-activation `[i, f, g, o]`.
    pub(crate) gates: Vec<f64>,
    /// `steps × H`
    pub(crate) tanh_c: Vec<f64>,
}

impl LstmTape {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub(crate) fn h(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }

    /// Hidden state after the last step.
    pub fn last_hidden(&self) -> &[f64] {
        self.h(self.steps)
    }
}

fn add_matvec(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

fn add_outer(w: &mut [f64], dz: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &d) in w.chunks_exact_mut(cols).zip(dz) {
        if d == 0.0 {
            continue;
        }
        for (r, &xv) in row.iter_mut().zip(x) {
            *r += d * xv;
        }
    }
}

/// `out += Wᵀ dz` for `W` of shape `dz.len() × out.len()`.
fn add_matvec_t(out: &mut [f64], w: &[f64], dz: &[f64]) {
    let cols = out.len();
    for (row, &d) in w.chunks_exact(cols).zip(dz) {
        if d == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += d * wv;
        }
    }
}

pub(crate) fn forward(p: LstmParams<'_>, inputs: Inputs<'_>, steps: usize, h0: &[f64]) -> LstmTape {
    let hd = p.hidden;
    let g4 = 4 * hd;
    let mut tape = LstmTape {
        steps,
        hidden: hd,
        h: vec![0.0; (steps + 1) * hd],
        c: vec![0.0; (steps + 1) * hd],
        gates: vec![0.0; steps * g4],
        tanh_c: vec![0.0; steps * hd],
    };
    tape.h[..hd].copy_from_slice(h0);

    let constant_part = match inputs {
        Inputs::Constant(x) => {
            let mut z = p.bias.to_vec();
            add_matvec(&mut z, p.w_x, x);
            Some(z)
        }
        Inputs::Sequence(_) => None,
    };

    let mut z = vec![0.0; g4];
    for t in 0..steps {
        match (&constant_part, inputs) {
            (Some(base), _) => z.copy_from_slice(base),
            (None, Inputs::Sequence(xs)) => {
                z.copy_from_slice(p.bias);
                add_matvec(&mut z, p.w_x, &xs[t * p.input_dim..(t + 1) * p.input_dim]);
            }
            (None, Inputs::Constant(_)) => unreachable!(),
        }
        let (h_prev_all, h_next_all) = tape.h.split_at_mut((t + 1) * hd);
        let h_prev = &h_prev_all[t * hd..];
        add_matvec(&mut z, p.w_h, h_prev);

        let gates = &mut tape.gates[t * g4..(t + 1) * g4];
        for j in 0..hd {
            gates[j] = sigmoid(z[j]);
            gates[hd + j] = sigmoid(z[hd + j]);
            gates[2 * hd + j] = tanh(z[2 * hd + j]);
            gates[3 * hd + j] = sigmoid(z[3 * hd + j]);
        }
        let (c_prev_all, c_next_all) = tape.c.split_at_mut((t + 1) * hd);
        let c_prev = &c_prev_all[t * hd..];
        let c_new = &mut c_next_all[..hd];
        let tc = &mut tape.tanh_c[t * hd..(t + 1) * hd];
        let h_new = &mut h_next_all[..hd];
        for j in 0..hd {
            let cj = gates[hd + j] * c_prev[j] + gates[j] * gates[2 * hd + j];
            c_new[j] = cj;
            tc[j] = tanh(cj);
            h_new[j] = gates[3 * hd + j] * tc[j];
        }
    }
    tape
}

/// Gradients of a layer run. `dh_ext` holds `steps × H` upstream gradients on
/// the hidden outputs. Returns the gradient on the initial hidden state and,
/// for constant inputs, on that input vector.
pub(crate) fn backward(
    p: LstmParams<'_>,
    inputs: Inputs<'_>,
    tape: &LstmTape,
    dh_ext: &[f64],
    grads: LstmGrads<'_>,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let hd = p.hidden;
    let g4 = 4 * hd;
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dh = vec![0.0; hd];
    let mut dz = vec![0.0; g4];
    let mut dz_sum = match inputs {
        Inputs::Constant(_) => Some(vec![0.0; g4]),
        Inputs::Sequence(_) => None,
    };

    for t in (0..tape.steps).rev() {
        let gates = &tape.gates[t * g4..(t + 1) * g4];
        let tc = &tape.tanh_c[t * hd..(t + 1) * hd];
        let c_prev = &tape.c[t * hd..(t + 1) * hd];
        let ext = &dh_ext[t * hd..(t + 1) * hd];
        for j in 0..hd {
            dh[j] = ext[j] + dh_next[j];
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let d_o = dh[j] * tc[j];
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
            dc_next[j] = dc * f;
            dz[j] = dc * g * i * (1.0 - i);
            dz[hd + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * hd + j] = dc * i * (1.0 - g * g);
            dz[3 * hd + j] = d_o * o * (1.0 - o);
        }
        add_outer(grads.w_h, &dz, tape.h(t));
        for (b, &d) in grads.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        match (&mut dz_sum, inputs) {
            (Some(sum), _) => {
                for (s, &d) in sum.iter_mut().zip(&dz) {
                    *s += d;
                }
            }
            (None, Inputs::Sequence(xs)) => {
                add_outer(grads.w_x, &dz, &xs[t * p.input_dim..(t + 1) * p.input_dim]);
            }
            (None, Inputs::Constant(_)) => unreachable!(),
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        add_matvec_t(&mut dh_next, p.w_h, &dz);
    }

    let dx = match (dz_sum, inputs) {
        (Some(sum), Inputs::Constant(x)) => {
            add_outer(grads.w_x, &sum, x);
            let mut dx = vec![0.0; p.input_dim];
            add_matvec_t(&mut dx, p.w_x, &sum);
            Some(dx)
        }
        _ => None,
    };
    (dh_next, dx)
}
