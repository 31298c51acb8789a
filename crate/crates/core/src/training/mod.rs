//! Adam, the plateau schedule and the two training regimes.
//!
//! * Joint: every batch of pairs minimizes the metric loss plus
//!   `λ · ½(RL(a) + RL(b))`.
//! * Disjoint: stage 1 trains the autoencoder on reconstruction alone; stage 2
//!   (KISSME only) freezes it and trains the projection `W` on precomputed
//!   encodings. Euclidean and cosine heads have no stage 2.
//!
//! Encoder inputs are masked afresh every epoch while the targets stay clean.
//! Validation always uses clean inputs, and the snapshot with the lowest
//! validation loss is returned.

mod adam;
mod schedule;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::metric::{MetricHead, MetricKind};
use crate::numerics::{Matrix, DEFAULT_RIDGE};
use crate::objective::{evaluate, Gradients, Objective, View};
use crate::pairs::{Pair, PairSet};
use crate::seq2seq::{EncoderDecoder, ReconLoss};
use crate::timeseries::{corrupt_mask, SequenceSample};
use crate::{Error, Result};

pub use adam::{adam_step, OptimizerState, BETA1, BETA2, EPSILON};
pub use schedule::{Observation, Schedule};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    /// `None` picks the head's default (0.5 cosine, 1 otherwise).
    pub margin: Option<f64>,
    pub mask_fraction: f64,
    pub kissme_update_period: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub joint: bool,
    pub reconstruction: ReconLoss,
    pub metric: MetricKind,
    /// Weight λ of the reconstruction term in the joint loss.
    pub recon_weight: f64,
    /// Minimum drop in validation loss that counts as an improvement.
    pub improvement_threshold: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            plateau_patience: 10,
            lr_decay_factor: 10.0,
            batch_size: 50,
            margin: None,
            mask_fraction: 0.3,
            kissme_update_period: 30,
            max_epochs: 300,
            early_stop_patience: 30,
            joint: false,
            reconstruction: ReconLoss::Mse,
            metric: MetricKind::Kissme,
            recon_weight: 1.0,
            improvement_threshold: 1e-5,
            ridge: DEFAULT_RIDGE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_margin(&self) -> f64 {
        self.margin.unwrap_or(self.metric.default_margin())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay_factor", self.lr_decay_factor),
            ("recon_weight", self.recon_weight),
            ("margin", self.effective_margin()),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("plateau_patience", self.plateau_patience),
            ("early_stop_patience", self.early_stop_patience),
            ("batch_size", self.batch_size),
            ("kissme_update_period", self.kissme_update_period),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return Err(Error::InvalidArgument(format!(
                "mask_fraction must lie in [0, 1), got {}",
                self.mask_fraction
            )));
        }
        if !(self.improvement_threshold >= 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument(
                "threshold and ridge must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Executes independent per-item work, e.g. the pairs of one batch. Results
/// come back in index order so the reduction is the same for any executor.
pub trait BatchRunner {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs items one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl BatchRunner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogEvent {
    Best,
    LrDecay,
    MetricUpdate,
    FinalMetricUpdate,
    StageTwo,
    EarlyStop,
}

impl LogEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            LogEvent::Best => "best",
            LogEvent::LrDecay => "lr_decay",
            LogEvent::MetricUpdate => "m_update",
            LogEvent::FinalMetricUpdate => "final_m_update",
            LogEvent::StageTwo => "stage2",
            LogEvent::EarlyStop => "early_stop",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    /// 1-based, counting on across disjoint stages.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub events: Vec<LogEvent>,
}

impl LogEntry {
    /// Events joined by `;`, empty when there are none.
    pub fn event_string(&self) -> String {
        let mut s = String::new();
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            s.push_str(e.as_str());
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    fn mark_last(&mut self, event: LogEvent) {
        if let Some(last) = self.entries.last_mut() {
            last.events.push(event);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: EncoderDecoder,
    pub head: MetricHead,
    pub log: TrainLog,
}

/// Training and validation samples with their pair sets. Pair indices refer
/// into `train` and `val` respectively.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a [SequenceSample],
    pub train_pairs: &'a PairSet,
    pub val: &'a [SequenceSample],
    pub val_pairs: &'a PairSet,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn shuffled(len: usize, seed: u64, stage: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut crate::seeded_rng(mix(seed, stage, epoch as u64)));
    order
}

fn check_pairs(pairs: &PairSet, samples: usize, what: &'static str) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Empty(what));
    }
    if let Some(p) = pairs.pairs.iter().find(|p| p.a >= samples || p.b >= samples) {
        return Err(Error::InvalidArgument(format!(
            "{what} reference sample {} but only {samples} exist",
            p.a.max(p.b)
        )));
    }
    Ok(())
}

/// Encodings of all samples as matrix rows.
pub fn encode_all<R: BatchRunner>(model: &EncoderDecoder, samples: &[SequenceSample], runner: &R) -> Result<Matrix> {
    let rows = runner.map(samples.len(), |i| model.encoding(&samples[i]));
    let mut data = Vec::with_capacity(samples.len() * model.hidden());
    for r in rows {
        data.extend(r?);
    }
    Matrix::from_vec(samples.len(), model.hidden(), data)
}

fn sum_gradients(results: Vec<Result<(f64, Gradients)>>, into: &mut Gradients) -> Result<f64> {
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        for (a, b) in into.model.iter_mut().zip(&g.model) {
            *a += b;
        }
        for (a, b) in into.projection.iter_mut().zip(&g.projection) {
            *a += b;
        }
    }
    Ok(loss)
}

fn scale(g: &mut [f64], s: f64) {
    g.iter_mut().for_each(|v| *v *= s);
}

trait Stage {
    /// Runs one epoch of updates at `lr`; returns the mean training loss and
    /// whether the metric matrix was updated.
    fn train_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, bool)>;
    fn val_loss(&self) -> Result<f64>;
    fn snapshot(&mut self);
}

/// Epoch loop shared by all stages. Returns the number of epochs run.
fn run_stage<S: Stage>(
    stage: &mut S,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    first_event: Option<LogEvent>,
) -> Result<()> {
    let offset = log.entries.len();
    let mut schedule = Schedule::new(
        cfg.learning_rate,
        cfg.lr_decay_factor,
        cfg.plateau_patience,
        cfg.early_stop_patience,
        cfg.improvement_threshold,
    );
    for epoch in 0..cfg.max_epochs {
        let lr = schedule.lr();
        let (train_loss, updated) = stage.train_epoch(epoch, lr)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged(offset + epoch + 1));
        }
        let val_loss = stage.val_loss()?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(offset + epoch + 1));
        }
        let mut events = Vec::new();
        if epoch == 0 {
            events.extend(first_event);
        }
        if updated {
            events.push(LogEvent::MetricUpdate);
        }
        let obs = schedule.observe(val_loss);
        if obs.improved {
            stage.snapshot();
            events.push(LogEvent::Best);
        }
        if obs.decayed {
            events.push(LogEvent::LrDecay);
        }
        if obs.stop {
            events.push(LogEvent::EarlyStop);
        }
        log.entries.push(LogEntry {
            epoch: offset + epoch + 1,
            train_loss,
            val_loss,
            lr,
            events,
        });
        if obs.stop {
            break;
        }
    }
    Ok(())
}

fn masked(seq: &SequenceSample, fraction: f64, seed: u64) -> Result<SequenceSample> {
    if fraction > 0.0 {
        corrupt_mask(seq, fraction, seed)
    } else {
        Ok(seq.clone())
    }
}

struct JointStage<'a, R> {
    model: EncoderDecoder,
    head: MetricHead,
    best: (EncoderDecoder, MetricHead),
    data: TrainData<'a>,
    cfg: &'a TrainConfig,
    runner: &'a R,
    adam_model: OptimizerState,
    adam_w: OptimizerState,
}

impl<R: BatchRunner + Sync> Stage for JointStage<'_, R> {
    fn train_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, bool)> {
        let cfg = self.cfg;
        let pairs: &[Pair] = &self.data.train_pairs.pairs;
        let order = shuffled(pairs.len(), cfg.seed, 1, epoch);
        let mut total = 0.0;
        let mut grads = Gradients::zeros(&self.model, Some(&self.head));
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let (model, head, train) = (&self.model, &self.head, self.data.train);
            let results = self.runner.map(batch.len(), |k| {
                let idx = batch[k];
                let p = pairs[idx];
                let key = mix(cfg.seed, 2, epoch as u64);
                let ma = masked(&train[p.a], cfg.mask_fraction, mix(key, idx as u64, 0))?;
                let mb = masked(&train[p.b], cfg.mask_fraction, mix(key, idx as u64, 1))?;
                let objective = Objective::Pair {
                    a: View {
                        input: &ma,
                        target: &train[p.a],
                    },
                    b: View {
                        input: &mb,
                        target: &train[p.b],
                    },
                    label: p.label,
                    reconstruction: Some((cfg.reconstruction, cfg.recon_weight)),
                };
                let mut g = Gradients::zeros(model, Some(head));
                let l = evaluate(model, Some(head), &objective, Some(&mut g))?;
                Ok((l, g))
            });
            total += sum_gradients(results, &mut grads)?;
            let inv = 1.0 / batch.len() as f64;
            scale(&mut grads.model, inv);
            scale(&mut grads.projection, inv);
            let layout = *self.model.layout();
            adam_step(self.model.params_mut(), &grads.model, &mut self.adam_model, lr, &|i| {
                layout.name_of(i)
            })?;
            adam_step(
                self.head.projection_params_mut(),
                &grads.projection,
                &mut self.adam_w,
                lr,
                &|_| "projection.w",
            )?;
        }
        let mut updated = false;
        if cfg.metric == MetricKind::Kissme && (epoch + 1).is_multiple_of(cfg.kissme_update_period) {
            let enc = encode_all(&self.model, self.data.train, self.runner)?;
            self.head.update_mahalanobis(
                &enc,
                &self.data.train_pairs.similar(),
                &self.data.train_pairs.dissimilar(),
                cfg.ridge,
            )?;
            updated = true;
        }
        Ok((total / pairs.len() as f64, updated))
    }

    fn val_loss(&self) -> Result<f64> {
        let pairs = &self.data.val_pairs.pairs;
        let val = self.data.val;
        let results = self.runner.map(pairs.len(), |k| {
            let p = pairs[k];
            let objective = Objective::Pair {
                a: View::clean(&val[p.a]),
                b: View::clean(&val[p.b]),
                label: p.label,
                reconstruction: Some((self.cfg.reconstruction, self.cfg.recon_weight)),
            };
            evaluate(&self.model, Some(&self.head), &objective, None)
        });
        let mut sum = 0.0;
        for r in results {
            sum += r?;
        }
        Ok(sum / pairs.len() as f64)
    }

    fn snapshot(&mut self) {
        self.best = (self.model.clone(), self.head.clone());
    }
}

struct ReconStage<'a, R> {
    model: EncoderDecoder,
    best: EncoderDecoder,
    train: &'a [SequenceSample],
    val: &'a [SequenceSample],
    cfg: &'a TrainConfig,
    runner: &'a R,
    adam: OptimizerState,
}

impl<R: BatchRunner + Sync> Stage for ReconStage<'_, R> {
    fn train_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, bool)> {
        let cfg = self.cfg;
        let order = shuffled(self.train.len(), cfg.seed, 3, epoch);
        let mut total = 0.0;
        let mut grads = Gradients::zeros(&self.model, None);
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let (model, train) = (&self.model, self.train);
            let results = self.runner.map(batch.len(), |k| {
                let idx = batch[k];
                let input = masked(
                    &train[idx],
                    cfg.mask_fraction,
                    mix(mix(cfg.seed, 4, epoch as u64), idx as u64, 0),
                )?;
                let objective = Objective::Reconstruction {
                    view: View {
                        input: &input,
                        target: &train[idx],
                    },
                    loss: cfg.reconstruction,
                };
                let mut g = Gradients::zeros(model, None);
                let l = evaluate(model, None, &objective, Some(&mut g))?;
                Ok((l, g))
            });
            total += sum_gradients(results, &mut grads)?;
            scale(&mut grads.model, 1.0 / batch.len() as f64);
            let layout = *self.model.layout();
            adam_step(self.model.params_mut(), &grads.model, &mut self.adam, lr, &|i| {
                layout.name_of(i)
            })?;
        }
        Ok((total / self.train.len() as f64, false))
    }

    fn val_loss(&self) -> Result<f64> {
        mean_reconstruction_loss(&self.model, self.val, self.cfg.reconstruction, self.runner)
    }

    fn snapshot(&mut self) {
        self.best = self.model.clone();
    }
}

/// Mean reconstruction loss of clean inputs.
pub fn mean_reconstruction_loss<R: BatchRunner>(
    model: &EncoderDecoder,
    samples: &[SequenceSample],
    loss: ReconLoss,
    runner: &R,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("validation sequences"));
    }
    let results = runner.map(samples.len(), |k| {
        let objective = Objective::Reconstruction {
            view: View::clean(&samples[k]),
            loss,
        };
        evaluate(model, None, &objective, None)
    });
    let mut sum = 0.0;
    for r in results {
        sum += r?;
    }
    Ok(sum / samples.len() as f64)
}

struct HeadStage<'a> {
    head: MetricHead,
    best: MetricHead,
    enc_train: Matrix,
    enc_val: Matrix,
    data: TrainData<'a>,
    cfg: &'a TrainConfig,
    adam: OptimizerState,
}

impl Stage for HeadStage<'_> {
    fn train_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, bool)> {
        let cfg = self.cfg;
        let pairs = &self.data.train_pairs.pairs;
        let order = shuffled(pairs.len(), cfg.seed, 5, epoch);
        let dim = self.enc_train.cols();
        let mut total = 0.0;
        let mut gw = vec![0.0; self.head.param_count()];
        let (mut d1, mut d2) = (vec![0.0; dim], vec![0.0; dim]);
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|v| *v = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &idx in batch {
                let p = pairs[idx];
                total += self.head.pair_loss_grad(
                    self.enc_train.row(p.a),
                    self.enc_train.row(p.b),
                    p.label,
                    Some((&mut d1, &mut d2, &mut gw, inv)),
                );
            }
            adam_step(self.head.projection_params_mut(), &gw, &mut self.adam, lr, &|_| {
                "projection.w"
            })?;
        }
        let mut updated = false;
        if (epoch + 1).is_multiple_of(cfg.kissme_update_period) {
            self.head.update_mahalanobis(
                &self.enc_train,
                &self.data.train_pairs.similar(),
                &self.data.train_pairs.dissimilar(),
                cfg.ridge,
            )?;
            updated = true;
        }
        Ok((total / pairs.len() as f64, updated))
    }

    fn val_loss(&self) -> Result<f64> {
        let pairs = &self.data.val_pairs.pairs;
        let mut sum = 0.0;
        for p in pairs {
            sum += self
                .head
                .pair_loss(self.enc_val.row(p.a), self.enc_val.row(p.b), p.label)?;
        }
        Ok(sum / pairs.len() as f64)
    }

    fn snapshot(&mut self) {
        self.best = self.head.clone();
    }
}

fn check_head(head: &MetricHead, cfg: &TrainConfig, model: &EncoderDecoder) -> Result<()> {
    if head.kind() != cfg.metric {
        return Err(Error::InvalidArgument(format!(
            "head is {} but the configuration asks for {}",
            head.kind().as_str(),
            cfg.metric.as_str()
        )));
    }
    if let Some(w) = head.projection() {
        if w.rows() != model.hidden() {
            return Err(Error::DimensionMismatch {
                context: "projection rows vs encoding size",
                expected: model.hidden(),
                got: w.rows(),
            });
        }
    }
    Ok(())
}

/// Stage 1 of the disjoint regime: reconstruction only.
pub fn fit_autoencoder<R: BatchRunner + Sync>(
    model: EncoderDecoder,
    train: &[SequenceSample],
    val: &[SequenceSample],
    cfg: &TrainConfig,
    runner: &R,
) -> Result<(EncoderDecoder, TrainLog)> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.max_epochs == 0 {
        return Ok((model, log));
    }
    if train.is_empty() {
        return Err(Error::Empty("training sequences"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation sequences"));
    }
    let mut stage = ReconStage {
        best: model.clone(),
        adam: OptimizerState::new(model.param_count()),
        model,
        train,
        val,
        cfg,
        runner,
    };
    run_stage(&mut stage, cfg, &mut log, None)?;
    Ok((stage.best, log))
}

/// Stage 2 of the disjoint regime: trains the KISSME projection on encodings
/// of a frozen model, with periodic and final closed-form updates of `M`.
/// Log epochs continue after `log`'s last entry.
pub fn fit_head_on_frozen<R: BatchRunner + Sync>(
    model: &EncoderDecoder,
    head: MetricHead,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    runner: &R,
    log: &mut TrainLog,
) -> Result<MetricHead> {
    cfg.validate()?;
    check_head(&head, cfg, model)?;
    if head.kind() != MetricKind::Kissme || cfg.max_epochs == 0 {
        return Ok(head);
    }
    check_pairs(data.train_pairs, data.train.len(), "training pairs")?;
    check_pairs(data.val_pairs, data.val.len(), "validation pairs")?;
    let mut stage = HeadStage {
        best: head.clone(),
        adam: OptimizerState::new(head.param_count()),
        head,
        enc_train: encode_all(model, data.train, runner)?,
        enc_val: encode_all(model, data.val, runner)?,
        data,
        cfg,
    };
    run_stage(&mut stage, cfg, log, Some(LogEvent::StageTwo))?;
    let mut best = stage.best;
    best.update_mahalanobis(
        &stage.enc_train,
        &data.train_pairs.similar(),
        &data.train_pairs.dissimilar(),
        cfg.ridge,
    )?;
    log.mark_last(LogEvent::FinalMetricUpdate);
    Ok(best)
}

pub fn train(model: EncoderDecoder, head: MetricHead, data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, head, data, cfg, &Sequential)
}

/// Runs the configured regime and returns the best-validation snapshot.
pub fn train_with<R: BatchRunner + Sync>(
    model: EncoderDecoder,
    head: MetricHead,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    runner: &R,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_head(&head, cfg, &model)?;
    if cfg.max_epochs == 0 {
        return Ok(TrainOutcome {
            model,
            head,
            log: TrainLog::default(),
        });
    }
    if !cfg.joint {
        let (model, mut log) = fit_autoencoder(model, data.train, data.val, cfg, runner)?;
        let head = fit_head_on_frozen(&model, head, data, cfg, runner, &mut log)?;
        return Ok(TrainOutcome { model, head, log });
    }

    check_pairs(data.train_pairs, data.train.len(), "training pairs")?;
    check_pairs(data.val_pairs, data.val.len(), "validation pairs")?;
    let mut log = TrainLog::default();
    let mut stage = JointStage {
        best: (model.clone(), head.clone()),
        adam_model: OptimizerState::new(model.param_count()),
        adam_w: OptimizerState::new(head.param_count()),
        model,
        head,
        data,
        cfg,
        runner,
    };
    run_stage(&mut stage, cfg, &mut log, None)?;
    let (model, mut head) = stage.best;
    if head.kind() == MetricKind::Kissme {
        let enc = encode_all(&model, data.train, runner)?;
        head.update_mahalanobis(
            &enc,
            &data.train_pairs.similar(),
            &data.train_pairs.dissimilar(),
            cfg.ridge,
        )?;
        log.mark_last(LogEvent::FinalMetricUpdate);
    }
    Ok(TrainOutcome { model, head, log })
}
