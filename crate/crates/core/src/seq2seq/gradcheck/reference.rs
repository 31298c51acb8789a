//! Forward-only evaluation of an [`Objective`] in double-double precision,
//! written independently of the f64 forward and backward passes.

use alloc::vec;
use alloc::vec::Vec;

use super::dd::Dd;
use crate::metric::{MetricHead, MetricKind};
use crate::objective::{Objective, View};
use crate::pairs::PairLabel;
use crate::seq2seq::{LstmLayout, ParamLayout, ReconLoss};

pub(super) struct Reference<'a> {
    pub layout: &'a ParamLayout,
    pub params: &'a [Dd],
    pub head: Option<(&'a MetricHead, &'a [Dd])>,
}

fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    a.iter().zip(b).fold(Dd::ZERO, |acc, (&x, &y)| acc + x * y)
}

fn lift(v: &[f64]) -> Vec<Dd> {
    v.iter().map(|&x| Dd::new(x)).collect()
}

impl Reference<'_> {
    /// Hidden states after each step, starting from `(h0, c = 0)`.
    fn lstm(&self, layer: &LstmLayout, input: impl Fn(usize) -> Vec<Dd>, steps: usize, h0: Vec<Dd>) -> Vec<Vec<Dd>> {
        let hd = layer.hidden;
        let p = self.params;
        let mut h = h0;
        let mut c = vec![Dd::ZERO; hd];
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = input(t);
            let pre = |row: usize| {
                let wx = &p[layer.w_x + row * layer.input_dim..layer.w_x + (row + 1) * layer.input_dim];
                let wh = &p[layer.w_h + row * hd..layer.w_h + (row + 1) * hd];
                p[layer.bias + row] + dot(wx, &x) + dot(wh, &h)
            };
            let mut h_new = vec![Dd::ZERO; hd];
            for j in 0..hd {
                let i_g = pre(j).sigmoid();
                let f_g = pre(hd + j).sigmoid();
                let g_g = pre(2 * hd + j).tanh();
                let o_g = pre(3 * hd + j).sigmoid();
                c[j] = f_g * c[j] + i_g * g_g;
                h_new[j] = o_g * c[j].tanh();
            }
            h = h_new;
            out.push(h.clone());
        }
        out
    }

    fn encode(&self, values: &[f64], channels: usize) -> Vec<Dd> {
        let steps = values.len() / channels;
        let states = self.lstm(
            &self.layout.encoder,
            |t| lift(&values[t * channels..(t + 1) * channels]),
            steps,
            vec![Dd::ZERO; self.layout.hidden],
        );
        states
            .last()
            .cloned()
            .unwrap_or_else(|| vec![Dd::ZERO; self.layout.hidden])
    }

    fn decode(&self, enc: &[Dd], steps: usize) -> Vec<Vec<Dd>> {
        let l = self.layout;
        let n = l.channels;
        let states = self.lstm(&l.decoder, |_| enc.to_vec(), steps, enc.to_vec());
        states
            .iter()
            .map(|h| {
                (0..n)
                    .map(|c| {
                        let mut v = self.params[l.out_b + c];
                        for (j, &hj) in h.iter().enumerate() {
                            v = v + hj * self.params[l.out_w + j * n + c];
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    fn reconstruction(&self, view: &View<'_>, loss: ReconLoss) -> Dd {
        let n = view.target.channels();
        let enc = self.encode(view.input.values(), n);
        let recon = self.decode(&enc, view.target.steps());
        let steps = recon.len();
        let mut total = Dd::ZERO;
        for (t, r) in recon.iter().enumerate() {
            let s = lift(view.target.step(t));
            match loss {
                ReconLoss::Mse => {
                    for (a, b) in r.iter().zip(&s) {
                        let d = *a - *b;
                        total = total + d * d;
                    }
                }
                ReconLoss::Crl => {
                    let ns = dot(&s, &s).sqrt();
                    let nr = dot(r, r).sqrt();
                    if ns.to_f64() >= 1e-12 && nr.to_f64() >= 1e-12 {
                        total = total - dot(&s, r) / (ns * nr);
                    }
                }
            }
        }
        match loss {
            ReconLoss::Mse => total / Dd::new(steps as f64),
            ReconLoss::Crl => total + Dd::new(steps as f64),
        }
    }

    fn metric(&self, ya: &[Dd], yb: &[Dd], label: PairLabel) -> Dd {
        let (head, w) = self.head.expect("pair objective has a head");
        let m = Dd::new(head.margin());
        let half = Dd::new(0.5);
        let dissimilar = label == PairLabel::Dissimilar;
        match head.kind() {
            MetricKind::Euclidean => {
                let dy: Vec<Dd> = ya.iter().zip(yb).map(|(&a, &b)| a - b).collect();
                let d2 = dot(&dy, &dy);
                if !dissimilar {
                    half * d2
                } else {
                    let gap = (m - d2.sqrt()).max(Dd::ZERO);
                    half * gap * gap
                }
            }
            MetricKind::Cosine => {
                let na = dot(ya, ya).sqrt();
                let nb = dot(yb, yb).sqrt();
                let cos = if na.to_f64() < 1e-12 || nb.to_f64() < 1e-12 {
                    Dd::ZERO
                } else {
                    (dot(ya, yb) / (na * nb)).min(Dd::ONE).max(-Dd::ONE)
                };
                if !dissimilar {
                    Dd::ONE - cos
                } else {
                    (cos - m).max(Dd::ZERO)
                }
            }
            MetricKind::Kissme => {
                let mahal = head.mahalanobis().expect("KISSME head");
                let p = mahal.rows();
                let e = ya.len();
                let delta: Vec<Dd> = (0..p)
                    .map(|k| (0..e).fold(Dd::ZERO, |acc, r| acc + (ya[r] - yb[r]) * w[r * p + k]))
                    .collect();
                let mut q = Dd::ZERO;
                for a in 0..p {
                    for b in 0..p {
                        q = q + delta[a] * Dd::new(mahal[(a, b)]) * delta[b];
                    }
                }
                if !dissimilar {
                    half * q
                } else {
                    half * (m - q).max(Dd::ZERO)
                }
            }
        }
    }

    pub fn evaluate(&self, objective: &Objective<'_>) -> Dd {
        match *objective {
            Objective::Reconstruction { view, loss } => self.reconstruction(&view, loss),
            Objective::Pair {
                a,
                b,
                label,
                reconstruction,
            } => {
                let n = a.input.channels();
                let ya = self.encode(a.input.values(), n);
                let yb = self.encode(b.input.values(), n);
                let mut total = self.metric(&ya, &yb, label);
                if let Some((loss, weight)) = reconstruction {
                    let rl = self.reconstruction(&a, loss) + self.reconstruction(&b, loss);
                    total = total + Dd::new(0.5 * weight) * rl;
                }
                total
            }
        }
    }
}
