//! Sequence-to-sequence LSTM autoencoder.
//!
//! The encoder runs over the input from a zero state and its final hidden
//! state is the encoding. The decoder starts from `h = encoding, c = 0`,
//! receives the encoding as its input at every step, and each decoder hidden
//! state is mapped to channel space by an affine output projection.
//!
//! All parameters live in one flat vector; [`ParamLayout`] documents the
//! order, which is also the order used by the model file.

mod gradcheck;
mod loss;
mod lstm;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::float::sqrt;
use crate::timeseries::SequenceSample;
use crate::{Error, Result};

pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{crl_loss, mse_loss, ReconLoss};
pub use lstm::LstmTape;

use lstm::{Inputs, LstmGrads, LstmParams};

/// Offsets of one LSTM layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmLayout {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: usize,
    pub w_h: usize,
    pub bias: usize,
    pub end: usize,
}

impl LstmLayout {
    fn new(start: usize, input_dim: usize, hidden: usize) -> Self {
        let w_x = start;
        let w_h = w_x + 4 * hidden * input_dim;
        let bias = w_h + 4 * hidden * hidden;
        Self {
            input_dim,
            hidden,
            w_x,
            w_h,
            bias,
            end: bias + 4 * hidden,
        }
    }

    fn view<'a>(&self, params: &'a [f64]) -> LstmParams<'a> {
        LstmParams {
            input_dim: self.input_dim,
            hidden: self.hidden,
            w_x: &params[self.w_x..self.w_h],
            w_h: &params[self.w_h..self.bias],
            bias: &params[self.bias..self.end],
        }
    }

    fn grads<'a>(&self, grads: &'a mut [f64]) -> LstmGrads<'a> {
        let (head, rest) = grads[self.w_x..self.end].split_at_mut(self.w_h - self.w_x);
        let (w_h, bias) = rest.split_at_mut(self.bias - self.w_h);
        LstmGrads { w_x: head, w_h, bias }
    }
}

/// Parameter order:
///
/// 1. encoder `w_x` (`4H × n`), `w_h` (`4H × H`), `bias` (`4H`)
/// 2. decoder `w_x` (`4H × H`), `w_h` (`4H × H`), `bias` (`4H`)
/// 3. output projection `H × n`, output bias `n`
///
/// Gate rows are stacked `[input, forget, cell, output]`; all matrices are
/// row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub channels: usize,
    pub hidden: usize,
    pub encoder: LstmLayout,
    pub decoder: LstmLayout,
    pub out_w: usize,
    pub out_b: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(channels: usize, hidden: usize) -> Self {
        let encoder = LstmLayout::new(0, channels, hidden);
        let decoder = LstmLayout::new(encoder.end, hidden, hidden);
        let out_w = decoder.end;
        let out_b = out_w + hidden * channels;
        Self {
            channels,
            hidden,
            encoder,
            decoder,
            out_w,
            out_b,
            total: out_b + channels,
        }
    }

    /// Named ranges in storage order.
    pub fn sections(&self) -> [(&'static str, Range<usize>); 8] {
        let e = &self.encoder;
        let d = &self.decoder;
        [
            ("encoder.w_x", e.w_x..e.w_h),
            ("encoder.w_h", e.w_h..e.bias),
            ("encoder.bias", e.bias..e.end),
            ("decoder.w_x", d.w_x..d.w_h),
            ("decoder.w_h", d.w_h..d.bias),
            ("decoder.bias", d.bias..d.end),
            ("output.w", self.out_w..self.out_b),
            ("output.bias", self.out_b..self.total),
        ]
    }

    pub fn name_of(&self, index: usize) -> &'static str {
        self.sections()
            .into_iter()
            .find(|(_, r)| r.contains(&index))
            .map_or("out of range", |(n, _)| n)
    }

    pub fn encoder_range(&self) -> Range<usize> {
        self.encoder.w_x..self.encoder.end
    }
}

/// Encoder tape: activations plus a copy of the input the encoder saw.
#[derive(Clone, Debug)]
pub struct EncoderTape {
    lstm: LstmTape,
    inputs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DecoderTape {
    lstm: LstmTape,
    encoding: Vec<f64>,
}

impl DecoderTape {
    pub fn steps(&self) -> usize {
        self.lstm.steps
    }
}

/// LSTM encoder, LSTM decoder and output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderDecoder {
    layout: ParamLayout,
    params: Vec<f64>,
}

impl EncoderDecoder {
    /// Weights uniform in `±1/√H`, forget-gate biases 1, other biases 0.
    pub fn new<R: Rng + ?Sized>(channels: usize, hidden: usize, rng: &mut R) -> Self {
        let mut model = Self::zeros(channels, hidden);
        let bound = 1.0 / sqrt(hidden as f64);
        let layout = model.layout;
        for (name, range) in layout.sections() {
            if name.ends_with("bias") {
                continue;
            }
            for p in &mut model.params[range] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        for layer in [layout.encoder, layout.decoder] {
            let forget = layer.bias + hidden..layer.bias + 2 * hidden;
            model.params[forget].iter_mut().for_each(|b| *b = 1.0);
        }
        model
    }

    pub fn zeros(channels: usize, hidden: usize) -> Self {
        let layout = ParamLayout::new(channels, hidden);
        Self {
            layout,
            params: vec![0.0; layout.total],
        }
    }

    pub fn from_params(channels: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(channels, hidden);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                context: "model parameters",
                expected: layout.total,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self { layout, params })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn channels(&self) -> usize {
        self.layout.channels
    }

    pub fn hidden(&self) -> usize {
        self.layout.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    /// Runs the encoder; the encoding is the final hidden state.
    pub fn encode(&self, seq: &SequenceSample) -> Result<(Vec<f64>, EncoderTape)> {
        self.encode_values(seq.values(), seq.channels())
    }

    pub(crate) fn encode_values(&self, values: &[f64], channels: usize) -> Result<(Vec<f64>, EncoderTape)> {
        if channels != self.layout.channels {
            return Err(Error::DimensionMismatch {
                context: "encoder input channels",
                expected: self.layout.channels,
                got: channels,
            });
        }
        let steps = values.len() / channels;
        let h0 = vec![0.0; self.layout.hidden];
        let lstm = lstm::forward(
            self.layout.encoder.view(&self.params),
            Inputs::Sequence(values),
            steps,
            &h0,
        );
        let encoding = lstm.last_hidden().to_vec();
        Ok((
            encoding,
            EncoderTape {
                lstm,
                inputs: values.to_vec(),
            },
        ))
    }

    /// Encoding only, for inference.
    pub fn encoding(&self, seq: &SequenceSample) -> Result<Vec<f64>> {
        Ok(self.encode(seq)?.0)
    }

    /// Reconstructs `steps × channels` values from an encoding.
    pub fn decode(&self, encoding: &[f64], steps: usize) -> Result<(Vec<f64>, DecoderTape)> {
        let hd = self.layout.hidden;
        if encoding.len() != hd {
            return Err(Error::DimensionMismatch {
                context: "decoder encoding",
                expected: hd,
                got: encoding.len(),
            });
        }
        let lstm = lstm::forward(
            self.layout.decoder.view(&self.params),
            Inputs::Constant(encoding),
            steps,
            encoding,
        );
        let n = self.layout.channels;
        let out_w = &self.params[self.layout.out_w..self.layout.out_b];
        let out_b = &self.params[self.layout.out_b..self.layout.total];
        let mut recon = Vec::with_capacity(steps * n);
        for t in 0..steps {
            let h = lstm.h(t + 1);
            for c in 0..n {
                let mut v = out_b[c];
                for (j, &hj) in h.iter().enumerate() {
                    v += hj * out_w[j * n + c];
                }
                recon.push(v);
            }
        }
        Ok((
            recon,
            DecoderTape {
                lstm,
                encoding: encoding.to_vec(),
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` (same layout as the
    /// parameters).
    ///
    /// `decoder` carries the decoder tape with the gradient of the loss on the
    /// reconstruction; `d_encoding` is any gradient applied directly to the
    /// encoding (the metric path). Both paths are summed.
    pub fn backward(
        &self,
        encoder: &EncoderTape,
        decoder: Option<(&DecoderTape, &[f64])>,
        d_encoding: Option<&[f64]>,
        grads: &mut [f64],
    ) -> Result<()> {
        let hd = self.layout.hidden;
        let n = self.layout.channels;
        if grads.len() != self.layout.total {
            return Err(Error::DimensionMismatch {
                context: "gradient buffer",
                expected: self.layout.total,
                got: grads.len(),
            });
        }
        if encoder.lstm.hidden != hd || encoder.inputs.len() != encoder.lstm.steps * n {
            return Err(Error::InvalidArgument("encoder tape does not match the model".into()));
        }

        let mut d_enc = vec![0.0; hd];
        if let Some(d) = d_encoding {
            if d.len() != hd {
                return Err(Error::DimensionMismatch {
                    context: "encoding gradient",
                    expected: hd,
                    got: d.len(),
                });
            }
            d_enc.copy_from_slice(d);
        }

        if let Some((tape, d_recon)) = decoder {
            let steps = tape.lstm.steps;
            if tape.lstm.hidden != hd || d_recon.len() != steps * n {
                return Err(Error::InvalidArgument("decoder tape does not match the model".into()));
            }
            let out_w = &self.params[self.layout.out_w..self.layout.out_b];
            let mut dh_ext = vec![0.0; steps * hd];
            {
                let (gw, gb) = grads[self.layout.out_w..self.layout.total].split_at_mut(hd * n);
                for t in 0..steps {
                    let dy = &d_recon[t * n..(t + 1) * n];
                    let h = tape.lstm.h(t + 1);
                    for (b, &d) in gb.iter_mut().zip(dy) {
                        *b += d;
                    }
                    let dh = &mut dh_ext[t * hd..(t + 1) * hd];
                    for j in 0..hd {
                        let row_w = &out_w[j * n..(j + 1) * n];
                        let row_g = &mut gw[j * n..(j + 1) * n];
                        let mut acc = 0.0;
                        for c in 0..n {
                            row_g[c] += h[j] * dy[c];
                            acc += row_w[c] * dy[c];
                        }
                        dh[j] = acc;
                    }
                }
            }
            let (dh0, dx) = lstm::backward(
                self.layout.decoder.view(&self.params),
                Inputs::Constant(&tape.encoding),
                &tape.lstm,
                &dh_ext,
                self.layout.decoder.grads(grads),
            );
            let dx = dx.expect("constant decoder input has a gradient");
            for ((d, a), b) in d_enc.iter_mut().zip(&dh0).zip(&dx) {
                *d += a + b;
            }
        }

        let steps = encoder.lstm.steps;
        let mut dh_ext = vec![0.0; steps * hd];
        if steps > 0 {
            dh_ext[(steps - 1) * hd..].copy_from_slice(&d_enc);
        }
        lstm::backward(
            self.layout.encoder.view(&self.params),
            Inputs::Sequence(&encoder.inputs),
            &encoder.lstm,
            &dh_ext,
            self.layout.encoder.grads(grads),
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float::{sigmoid, tanh};

    fn seq(steps: usize, ch: usize, seed: u64) -> SequenceSample {
        let mut rng = crate::seeded_rng(seed);
        let v = (0..steps * ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SequenceSample::new(0, 0, steps, ch, v).unwrap()
    }

    #[test]
    fn layout_counts() {
        let l = ParamLayout::new(3, 5);
        assert_eq!(l.encoder.end, 4 * 5 * 3 + 4 * 5 * 5 + 20);
        assert_eq!(l.total, 180 + 220 + 15 + 3);
        assert_eq!(l.name_of(0), "encoder.w_x");
        assert_eq!(l.name_of(l.total - 1), "output.bias");
    }

    #[test]
    fn zero_model_encodes_and_decodes_to_zero() {
        let model = EncoderDecoder::zeros(3, 4);
        let (enc, _) = model.encode(&seq(6, 3, 1)).unwrap();
        assert!(enc.iter().all(|&v| v == 0.0));
        let (recon, _) = model.decode(&enc, 6).unwrap();
        assert_eq!(recon.len(), 18);
        assert!(recon.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_shapes() {
        let model = EncoderDecoder::new(2, 6, &mut crate::seeded_rng(3));
        let s = seq(9, 2, 4);
        assert_eq!(model.encoding(&s).unwrap(), model.encoding(&s).unwrap());
        let enc = model.encoding(&s).unwrap();
        let (a, _) = model.decode(&enc, 9).unwrap();
        let (b, _) = model.decode(&enc, 9).unwrap();
        assert_eq!(a.len(), 18);
        assert_eq!(a, b);
        assert!(model.decode(&enc[..5], 3).is_err());
        assert!(model.encode(&seq(4, 3, 1)).is_err());
    }

    #[test]
    fn single_step_matches_hand_rolled_cell() {
        let model = EncoderDecoder::new(2, 3, &mut crate::seeded_rng(5));
        let s = seq(1, 2, 6);
        let enc = model.encoding(&s).unwrap();
        let l = model.layout().encoder;
        let p = model.params();
        let x = s.values();
        for (j, &e) in enc.iter().enumerate() {
            let z = |gate: usize| {
                let r = gate * 3 + j;
                p[l.bias + r] + p[l.w_x + r * 2] * x[0] + p[l.w_x + r * 2 + 1] * x[1]
            };
            let c = sigmoid(z(0)) * tanh(z(2));
            let h = sigmoid(z(3)) * tanh(c);
            assert!((e - h).abs() < 1e-15);
        }
    }

    #[test]
    fn encoding_ignores_decoder_parameters() {
        let mut model = EncoderDecoder::new(3, 4, &mut crate::seeded_rng(8));
        let s = seq(5, 3, 9);
        let before = model.encoding(&s).unwrap();
        let start = model.layout().decoder.w_x;
        for p in &mut model.params_mut()[start..] {
            *p += 0.5;
        }
        assert_eq!(before, model.encoding(&s).unwrap());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let model = EncoderDecoder::new(3, 4, &mut crate::seeded_rng(10));
        let s = seq(5, 3, 11);
        let (enc, et) = model.encode(&s).unwrap();
        let (_, dt) = model.decode(&enc, 5).unwrap();
        let mut g = vec![0.0; model.param_count()];
        model
            .backward(&et, Some((&dt, &[0.0; 15])), Some(&[0.0; 4]), &mut g)
            .unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
