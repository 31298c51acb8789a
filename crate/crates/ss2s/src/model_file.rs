//! `SS2S1` model files.
//!
//! Layout: the 5 ASCII bytes `SS2S1`, the JSON header length as a
//! little-endian `u32`, the UTF-8 JSON [`Header`], then little-endian `f64`
//! values in this order:
//!
//! 1. encoder-decoder parameters, in [`ParamLayout`](ss2s_core::seq2seq::ParamLayout) order
//! 2. KISSME projection `W` (`encoding_dim × proj_dim`, row-major), if any
//! 3. KISSME metric matrix `M` (`proj_dim × proj_dim`, row-major), if any

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use ss2s_core::timeseries::Scaler;
use ss2s_core::{EncoderDecoder, Matrix, MetricHead, MetricKind};

use crate::io::write_atomic;

pub const MAGIC: &[u8; 5] = b"SS2S1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub channels: usize,
    pub hidden: usize,
    pub metric: MetricKind,
    pub margin: f64,
    /// Present for KISSME heads.
    pub proj_dim: Option<usize>,
    pub scaler: Option<Scaler>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub model: EncoderDecoder,
    pub head: MetricHead,
    pub scaler: Option<Scaler>,
    pub seed: u64,
}

impl SavedModel {
    fn header(&self) -> Header {
        Header {
            channels: self.model.channels(),
            hidden: self.model.hidden(),
            metric: self.head.kind(),
            margin: self.head.margin(),
            proj_dim: self.head.projection().map(|w| w.cols()),
            scaler: self.scaler.clone(),
            seed: self.seed,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 8 * self.model.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&u32::try_from(header.len())?.to_le_bytes());
        out.extend_from_slice(&header);
        let mats = [self.head.projection(), self.head.mahalanobis()];
        let values = self
            .model
            .params()
            .iter()
            .chain(mats.iter().flatten().flat_map(|m| m.as_slice()));
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        ensure!(bytes.len() >= 9 && &bytes[..5] == MAGIC, "not an SS2S1 model file");
        let len = u32::from_le_bytes(bytes[5..9].try_into()?) as usize;
        ensure!(bytes.len() >= 9 + len, "truncated header");
        let header: Header = serde_json::from_slice(&bytes[9..9 + len]).context("model header")?;
        let body = &bytes[9 + len..];
        ensure!(
            body.len().is_multiple_of(8),
            "parameter block is not a whole number of f64 values"
        );
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));

        let model_len = ss2s_core::seq2seq::ParamLayout::new(header.channels, header.hidden).total;
        let proj = header.proj_dim.unwrap_or(0);
        let expected = model_len + header.hidden * proj + proj * proj;
        ensure!(
            body.len() / 8 == expected,
            "expected {expected} parameters, found {}",
            body.len() / 8
        );
        let model_params: Vec<f64> = values.by_ref().take(model_len).collect();
        let model = EncoderDecoder::from_params(header.channels, header.hidden, model_params)?;
        let head = match (header.metric, header.proj_dim) {
            (MetricKind::Kissme, Some(p)) => {
                let w = Matrix::from_vec(header.hidden, p, values.by_ref().take(header.hidden * p).collect())?;
                let m = Matrix::from_vec(p, p, values.collect())?;
                MetricHead::kissme_with(w, m, header.margin)?
            }
            (MetricKind::Kissme, None) => bail!("KISSME model without proj_dim"),
            (_, Some(_)) => bail!("only KISSME heads carry a projection"),
            (MetricKind::Euclidean, None) => MetricHead::euclidean(header.margin)?,
            (MetricKind::Cosine, None) => MetricHead::cosine(header.margin)?,
        };
        Ok(Self {
            model,
            head,
            scaler: header.scaler,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))
    }
}
