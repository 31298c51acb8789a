//! End-to-end experiment: data preparation, training, clustering, scoring and
//! result files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ss2s_core::clustering::{kernel_from_cosine, kernel_from_distance, pairwise, spectral_cluster, KernelMatrix};
use ss2s_core::dtw::{dtw_distance_matrix_with, dtw_kernel, select_radius};
use ss2s_core::evaluation::{ami, completeness, mean_std, nmi, silhouette};
use ss2s_core::metric::head_distance;
use ss2s_core::pairs::{build_pair_set, similar_capacity, PairSet};
use ss2s_core::timeseries::{decimate_augment, resample_to_length, segment_slots, synth_generate, Scaler};
use ss2s_core::training::{encode_all, fit_head_on_frozen, train_with, TrainData, TrainLog};
use ss2s_core::{EncoderDecoder, Matrix, MetricHead, MetricKind, SequenceSample, TrainConfig};

use crate::config::{CsvSource, DataSource, ExperimentConfig, Split};
use crate::io::{self, write_atomic, Sidecar};
use crate::model_file::SavedModel;
use crate::runner::Rayon;
use crate::timeline::timeline_svg;

pub const METRICS_HEADER: [&str; 9] = [
    "metric",
    "model",
    "joint",
    "completeness",
    "silhouette",
    "nmi",
    "ami",
    "mean",
    "std",
];
pub const PER_RUN_HEADER: [&str; 8] = [
    "run",
    "seed",
    "labels",
    "completeness",
    "silhouette",
    "nmi",
    "ami",
    "radius",
];

/// Sequences in day-major order, optionally with ground-truth archetypes.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub archetypes: Option<Vec<usize>>,
}

pub fn load_dataset(data: &DataSource) -> Result<Dataset> {
    match data {
        DataSource::Synth(spec) => {
            let ds = synth_generate(spec)?;
            Ok(Dataset {
                samples: ds.samples,
                archetypes: Some(ds.labels),
            })
        }
        DataSource::Csv(src) => load_csv_dataset(src),
    }
}

/// Splits every source day into `augment_factor` decimated days (day index
/// `source_day · factor + j`), cuts each into slots and resamples them.
fn load_csv_dataset(src: &CsvSource) -> Result<Dataset> {
    let sidecar = Sidecar::load(&src.sidecar)?;
    let rec = io::load_recording_csv(&src.path, sidecar.sample_rate_hz)?;
    let truth: Option<HashMap<(usize, usize), usize>> = match &src.labels {
        Some(p) => Some(
            io::read_labels(p)?
                .into_iter()
                .map(|r| ((r.day, r.slot), r.archetype))
                .collect(),
        ),
        None => None,
    };
    let mut samples = Vec::new();
    let mut archetypes = Vec::new();
    for (src_day, (start, end)) in sidecar.day_ranges(rec.len())?.into_iter().enumerate() {
        let day = rec.slice(start, end);
        let parts = if src.augment_factor == 1 {
            vec![day]
        } else {
            decimate_augment(&day, src.augment_factor).with_context(|| format!("augmenting day {src_day}"))?
        };
        for (j, part) in parts.iter().enumerate() {
            let day_index = src_day * src.augment_factor + j;
            let seg = segment_slots(part, src.slot_seconds, day_index)
                .with_context(|| format!("segmenting day {day_index}"))?;
            if seg.dropped_samples > 0 {
                warn!("day {day_index}: dropped {} trailing samples", seg.dropped_samples);
            }
            if seg.samples.len() > src.slots_per_day {
                warn!(
                    "day {day_index}: ignoring {} slots beyond {}",
                    seg.samples.len() - src.slots_per_day,
                    src.slots_per_day
                );
            }
            for s in seg.samples.into_iter().take(src.slots_per_day) {
                if let Some(t) = &truth {
                    let a = t
                        .get(&(src_day, s.slot))
                        .ok_or_else(|| anyhow!("labels have no entry for day {src_day} slot {}", s.slot))?;
                    archetypes.push(*a);
                }
                samples.push(resample_to_length(&s, src.seq_len)?);
            }
        }
    }
    if samples.is_empty() {
        bail!("recording yields no complete slots");
    }
    Ok(Dataset {
        samples,
        archetypes: truth.map(|_| archetypes),
    })
}

/// Scaled train/val/test sets. The scaler is fitted on training days only.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub val_archetypes: Option<Vec<usize>>,
    pub test_archetypes: Option<Vec<usize>>,
    pub scaler: Scaler,
}

/// Consecutive days: the first `train_days`, the next `val_days`, then
/// `test_days`. Remaining days are unused.
pub fn prepare(ds: &Dataset, split: Split) -> Result<Prepared> {
    let days: Vec<usize> = ds
        .samples
        .iter()
        .map(|s| s.day)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if split.total() > days.len() {
        bail!("split needs {} days but the data has {}", split.total(), days.len());
    }
    let bound = |n: usize| days[n - 1];
    let train_end = bound(split.train_days);
    let val_end = bound(split.train_days + split.val_days);
    let test_end = bound(split.total());
    let pick = |lo: Option<usize>, hi: usize| -> (Vec<SequenceSample>, Vec<usize>) {
        let mut seqs = Vec::new();
        let mut arch = Vec::new();
        for (i, s) in ds.samples.iter().enumerate() {
            if lo.is_none_or(|lo| s.day > lo) && s.day <= hi {
                seqs.push(s.clone());
                if let Some(a) = &ds.archetypes {
                    arch.push(a[i]);
                }
            }
        }
        (seqs, arch)
    };
    let (train, _) = pick(None, train_end);
    let (val, val_arch) = pick(Some(train_end), val_end);
    let (test, test_arch) = pick(Some(val_end), test_end);
    let scaler = Scaler::fit(&train)?;
    let apply = |v: &[SequenceSample]| v.iter().map(|s| scaler.apply(s)).collect::<ss2s_core::Result<Vec<_>>>();
    let has = ds.archetypes.is_some();
    Ok(Prepared {
        train: apply(&train)?,
        val: apply(&val)?,
        test: apply(&test)?,
        val_archetypes: has.then_some(val_arch),
        test_archetypes: has.then_some(test_arch),
        scaler,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub completeness: f64,
    pub silhouette: f64,
    pub nmi: f64,
    pub ami: f64,
}

impl Scores {
    pub fn compute(classes: &[usize], clusters: &[usize], distances: &Matrix) -> Result<Self> {
        Ok(Self {
            completeness: completeness(classes, clusters)?,
            silhouette: silhouette(distances, clusters)?,
            nmi: nmi(classes, clusters)?,
            ami: ami(classes, clusters)?,
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.completeness, self.silhouette, self.nmi, self.ami]
    }

    pub fn average(&self) -> f64 {
        self.as_array().iter().sum::<f64>() / 4.0
    }
}

pub const SCORE_NAMES: [&str; 4] = ["completeness", "silhouette", "nmi", "ami"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub slot: Scores,
    pub archetype: Option<Scores>,
    pub radius: Option<usize>,
    pub assignment: Vec<usize>,
    pub seconds: f64,
}

/// Pairwise learned distances between encodings (`1 − cos` for the cosine
/// head).
pub fn learned_distances(head: &MetricHead, encodings: &Matrix) -> Result<Matrix> {
    Ok(pairwise(encodings.rows(), |i, j| {
        head_distance(head, encodings.row(i), encodings.row(j))
    })?)
}

/// Clustering kernel for a learned metric: `cos + 1` for the cosine head,
/// otherwise `exp(−d / hidden)`.
pub fn learned_kernel(kind: MetricKind, distances: &Matrix, hidden: usize) -> Result<KernelMatrix> {
    Ok(match kind {
        MetricKind::Cosine => {
            let cos: Vec<f64> = distances.as_slice().iter().map(|d| 1.0 - d).collect();
            kernel_from_cosine(&Matrix::from_vec(distances.rows(), distances.cols(), cos)?)?
        }
        _ => kernel_from_distance(distances, 1.0 / hidden as f64)?,
    })
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

/// Training pairs and validation pairs for one run. Validation draws as many
/// similar pairs per slot as every slot can supply, up to `similar_per_slot`.
pub fn build_pairs(prep: &Prepared, similar_per_slot: usize, seed: u64) -> Result<(PairSet, PairSet)> {
    let train = build_pair_set(&prep.train, similar_per_slot, derive_seed(seed, 1)).context("training pairs")?;
    let cap = similar_capacity(&prep.val).values().copied().min().unwrap_or(0);
    let val = build_pair_set(&prep.val, similar_per_slot.min(cap), derive_seed(seed, 2)).context("validation pairs")?;
    Ok((train, val))
}

/// What one learned-metric run produced besides its scores.
pub struct RunArtifacts {
    pub model: EncoderDecoder,
    pub head: MetricHead,
    pub log: TrainLog,
    pub train_pairs: PairSet,
    pub val_pairs: PairSet,
    pub distances: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Train per the config.
    Trained,
    /// Keep the randomly initialized encoder frozen; a KISSME head still
    /// learns `W` and `M` on its encodings.
    FrozenRandom,
}

fn stage<T>(run: usize, name: &str, r: impl FnOnce() -> Result<T>) -> Result<T> {
    r().with_context(|| format!("run {run}: stage `{name}` failed"))
}

/// One learned-metric run with seed `cfg.seed + run`.
pub fn run_once(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    run: usize,
    regime: Regime,
) -> Result<(RunRecord, RunArtifacts)> {
    let start = Instant::now();
    let seed = cfg.seed + run as u64;
    let (train_pairs, val_pairs) = stage(run, "pairs", || build_pairs(prep, cfg.similar_per_slot, seed))?;

    let channels = prep.train[0].channels();
    let mut rng = ss2s_core::seeded_rng(seed);
    let model = EncoderDecoder::new(channels, cfg.hidden, &mut rng);
    let tcfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let head = MetricHead::for_kind(tcfg.metric, cfg.hidden, cfg.proj_dim, tcfg.margin, &mut rng)?;
    let data = TrainData {
        train: &prep.train,
        train_pairs: &train_pairs,
        val: &prep.val,
        val_pairs: &val_pairs,
    };
    let (model, head, log) = stage(run, "train", || match regime {
        Regime::Trained => {
            let out = train_with(model, head, data, &tcfg, &Rayon)?;
            Ok((out.model, out.head, out.log))
        }
        Regime::FrozenRandom => {
            let mut log = TrainLog::default();
            let head = fit_head_on_frozen(&model, head, data, &tcfg, &Rayon, &mut log)?;
            Ok((model, head, log))
        }
    })?;

    let (assignment, distances) = stage(run, "cluster", || {
        let enc = encode_all(&model, &prep.test, &Rayon)?;
        let d = learned_distances(&head, &enc)?;
        let kernel = learned_kernel(head.kind(), &d, cfg.hidden)?;
        Ok((spectral_cluster(&kernel, cfg.k, seed)?.assignment, d))
    })?;
    let (slot, archetype) = stage(run, "evaluate", || score(prep, &assignment, &distances))?;
    info!(
        "run {run} (seed {seed}): slot NMI {:.4}, completeness {:.4}",
        slot.nmi, slot.completeness
    );
    Ok((
        RunRecord {
            run,
            seed,
            slot,
            archetype,
            radius: None,
            assignment,
            seconds: start.elapsed().as_secs_f64(),
        },
        RunArtifacts {
            model,
            head,
            log,
            train_pairs,
            val_pairs,
            distances,
        },
    ))
}

fn score(prep: &Prepared, assignment: &[usize], distances: &Matrix) -> Result<(Scores, Option<Scores>)> {
    let slots: Vec<usize> = prep.test.iter().map(|s| s.slot).collect();
    let slot = Scores::compute(&slots, assignment, distances)?;
    let archetype = match &prep.test_archetypes {
        Some(a) => Some(Scores::compute(a, assignment, distances)?),
        None => None,
    };
    Ok((slot, archetype))
}

/// Shares DTW test matrices between runs that select the same radius.
#[derive(Default)]
pub struct DtwCache {
    test: Mutex<BTreeMap<usize, std::sync::Arc<Matrix>>>,
}

impl DtwCache {
    fn test_matrix(&self, prep: &Prepared, radius: usize) -> Result<std::sync::Arc<Matrix>> {
        if let Some(m) = self.test.lock().expect("cache lock").get(&radius) {
            return Ok(m.clone());
        }
        let m = std::sync::Arc::new(dtw_distance_matrix_with(&prep.test, Some(radius), &Rayon)?);
        self.test.lock().expect("cache lock").insert(radius, m.clone());
        Ok(m)
    }
}

/// One DTW baseline run: radius chosen on validation, then clustering of the
/// test set under the DTW kernel.
pub fn run_dtw_once(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    run: usize,
    cache: &DtwCache,
) -> Result<(RunRecord, Matrix)> {
    let start = Instant::now();
    let seed = cfg.seed + run as u64;
    let val_slots: Vec<usize> = prep.val.iter().map(|s| s.slot).collect();
    let selection = stage(run, "select_radius", || {
        Ok(select_radius(
            &prep.val,
            &val_slots,
            &cfg.dtw.radii,
            cfg.k,
            seed,
            &Rayon,
        )?)
    })?;
    let d = stage(run, "dtw_distances", || cache.test_matrix(prep, selection.radius))?;
    let first = &prep.test[0];
    let assignment = stage(run, "cluster", || {
        let kernel = dtw_kernel(&d, first.channels(), first.steps())?;
        Ok(spectral_cluster(&kernel, cfg.k, seed)?.assignment)
    })?;
    let (slot, archetype) = stage(run, "evaluate", || score(prep, &assignment, &d))?;
    info!("dtw run {run}: radius {}, slot NMI {:.4}", selection.radius, slot.nmi);
    Ok((
        RunRecord {
            run,
            seed,
            slot,
            archetype,
            radius: Some(selection.radius),
            assignment,
            seconds: start.elapsed().as_secs_f64(),
        },
        (*d).clone(),
    ))
}

/// Row of the metrics table: `mean±std` per score, then the mean and sample
/// standard deviation of each run's average over the four scores.
pub fn metrics_row(metric: &str, model: &str, joint: &str, scores: &[Scores]) -> Vec<String> {
    let mut row = vec![metric.to_string(), model.to_string(), joint.to_string()];
    for k in 0..4 {
        let v: Vec<f64> = scores.iter().map(|s| s.as_array()[k]).collect();
        let (m, sd) = mean_std(&v);
        row.push(format!("{m:.6}±{sd:.6}"));
    }
    let avg: Vec<f64> = scores.iter().map(Scores::average).collect();
    let (m, sd) = mean_std(&avg);
    row.push(format!("{m:.6}"));
    row.push(format!("{sd:.6}"));
    row
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

pub fn per_run_rows(records: &[RunRecord]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in records {
        let radius = r.radius.map(|x| x.to_string()).unwrap_or_default();
        let labelled = std::iter::once(("slot", &r.slot)).chain(r.archetype.as_ref().map(|a| ("archetype", a)));
        for (labels, s) in labelled {
            let mut row = vec![r.run.to_string(), r.seed.to_string(), labels.to_string()];
            row.extend(s.as_array().iter().map(|v| v.to_string()));
            row.push(radius.clone());
            rows.push(row);
        }
    }
    rows
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub seconds: f64,
    pub radius: Option<usize>,
}

/// Everything needed to repeat an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub wall_clock_seconds: f64,
    /// Paths relative to the results directory.
    pub files: Vec<String>,
}

struct Writer {
    root: PathBuf,
    files: Mutex<Vec<String>>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Mutex::new(Vec::new()),
        })
    }

    fn put(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.files.lock().expect("file list").push(rel.to_string());
        Ok(())
    }

    fn files(&self) -> Vec<String> {
        let mut f = self.files.lock().expect("file list").clone();
        f.sort();
        f
    }
}

fn run_dir(run: usize) -> String {
    format!("runs/run_{run:03}")
}

fn write_assignments(w: &Writer, dir: &str, test: &[SequenceSample], assignment: &[usize]) -> Result<()> {
    let bytes = io::assignments_csv(test, assignment)?;
    w.put(&format!("{dir}/assignments.csv"), &bytes)?;
    let rows: Vec<io::Assignment> = test
        .iter()
        .zip(assignment)
        .enumerate()
        .map(|(i, (s, &c))| io::Assignment {
            sequence_index: i,
            day: s.day,
            slot: s.slot,
            cluster: c,
        })
        .collect();
    w.put(&format!("{dir}/timeline.svg"), timeline_svg(&rows)?.as_bytes())
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    Ok(b.build()?)
}

/// Which experiment [`execute`] runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Learned,
    DtwBaseline,
}

/// Runs `cfg.runs` repetitions and writes the results directory.
pub fn execute(cfg: &ExperimentConfig, kind: Experiment, out: &Path, jobs: Option<usize>) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let ds = load_dataset(&cfg.data).context("stage `load` failed")?;
    let prep = prepare(&ds, cfg.split).context("stage `prepare` failed")?;
    info!(
        "{} train, {} validation, {} test sequences",
        prep.train.len(),
        prep.val.len(),
        prep.test.len()
    );
    let w = Writer::new(out)?;
    let cache = DtwCache::default();

    let records: Vec<RunRecord> = pool(jobs)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| -> Result<RunRecord> {
                let dir = run_dir(run);
                match kind {
                    Experiment::Learned => {
                        let (rec, art) = run_once(cfg, &prep, run, Regime::Trained)?;
                        w.put(&format!("{dir}/train_log.csv"), &io::log_csv(&art.log)?)?;
                        w.put(&format!("{dir}/pairs.csv"), &io::pairs_csv(&art.train_pairs)?)?;
                        w.put(&format!("{dir}/val_pairs.csv"), &io::pairs_csv(&art.val_pairs)?)?;
                        let saved = SavedModel {
                            model: art.model,
                            head: art.head,
                            scaler: Some(prep.scaler.clone()),
                            seed: rec.seed,
                        };
                        w.put(&format!("{dir}/model.ss2s"), &saved.to_bytes()?)?;
                        if cfg.export_distances {
                            w.put(&format!("{dir}/distances.csv"), &io::matrix_csv(&art.distances)?)?;
                        }
                        write_assignments(&w, &dir, &prep.test, &rec.assignment)?;
                        Ok(rec)
                    }
                    Experiment::DtwBaseline => {
                        let (rec, d) = run_dtw_once(cfg, &prep, run, &cache)?;
                        if cfg.export_distances {
                            w.put(&format!("{dir}/distances.csv"), &io::matrix_csv(&d)?)?;
                        }
                        write_assignments(&w, &dir, &prep.test, &rec.assignment)?;
                        Ok(rec)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let (metric, model, joint) = match kind {
        Experiment::Learned => (
            cfg.train.metric.as_str(),
            "ss2s",
            if cfg.train.joint { "true" } else { "false" },
        ),
        Experiment::DtwBaseline => ("dtw", "dtw", "n/a"),
    };
    let slot: Vec<Scores> = records.iter().map(|r| r.slot).collect();
    w.put(
        "metrics.csv",
        &csv_bytes(&METRICS_HEADER, &[metrics_row(metric, model, joint, &slot)])?,
    )?;
    if records.iter().all(|r| r.archetype.is_some()) {
        let arch: Vec<Scores> = records.iter().filter_map(|r| r.archetype).collect();
        w.put(
            "metrics_archetype.csv",
            &csv_bytes(&METRICS_HEADER, &[metrics_row(metric, model, joint, &arch)])?,
        )?;
    }
    w.put("per_run.csv", &csv_bytes(&PER_RUN_HEADER, &per_run_rows(&records))?)?;
    write_assignments(&w, ".", &prep.test, &records[0].assignment)?;

    let command = match kind {
        Experiment::Learned => "run",
        Experiment::DtwBaseline => "baseline-dtw",
    };
    let mut files = w.files();
    files.push("manifest.json".into());
    files.sort();
    let files = files
        .into_iter()
        .map(|f| f.trim_start_matches("./").to_string())
        .collect();
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seeds: records.iter().map(|r| r.seed).collect(),
        runs: records
            .iter()
            .map(|r| RunSummary {
                run: r.run,
                seed: r.seed,
                seconds: r.seconds,
                radius: r.radius,
            })
            .collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Writes the default (or given) synthetic dataset as a recording CSV with
/// sidecar, ground-truth labels, and a ready-to-run experiment config.
pub fn write_synth(spec: &ss2s_core::timeseries::SynthSpec, out: &Path) -> Result<Vec<PathBuf>> {
    let ds = synth_generate(spec)?;
    let ch = spec.channels;
    let mut values = Vec::with_capacity(ds.samples.len() * spec.steps * ch);
    for s in &ds.samples {
        values.extend_from_slice(s.values());
    }
    let slot_seconds = 3600.0;
    let rate = spec.steps as f64 / slot_seconds;
    let rec = ss2s_core::Recording::new(ch, rate, values)?;
    let sidecar = Sidecar {
        sample_rate_hz: rate,
        day_starts: (0..spec.days).map(|d| d * spec.slots_per_day * spec.steps).collect(),
    };
    let config = ExperimentConfig::with_data(DataSource::Csv(CsvSource {
        path: "recording.csv".into(),
        sidecar: "recording.json".into(),
        labels: Some("labels.csv".into()),
        augment_factor: 1,
        slot_seconds,
        slots_per_day: spec.slots_per_day,
        seq_len: spec.steps,
    }));
    let files = [
        ("recording.csv", io::recording_csv(&rec)?),
        ("recording.json", serde_json::to_vec_pretty(&sidecar)?),
        ("labels.csv", io::labels_csv(&ds.samples, &ds.labels)?),
        ("config.json", serde_json::to_vec_pretty(&config)?),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = out.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}

/// One row of a results directory's `per_run.csv`.
#[derive(Clone, Debug, Deserialize)]
struct PerRunRow {
    labels: String,
    completeness: f64,
    silhouette: f64,
    nmi: f64,
    ami: f64,
}

pub const WELCH_HEADER: [&str; 10] = [
    "labels", "row_a", "row_b", "score", "mean_a", "mean_b", "t", "df", "p", "n",
];

/// Concatenates the metrics rows of several results directories into
/// `table.csv` and compares every pair of directories with Welch's test per
/// score in `welch.csv`.
pub fn report(dirs: &[PathBuf], out: &Path) -> Result<()> {
    if dirs.is_empty() {
        bail!("no results directories given");
    }
    let mut table = Vec::new();
    let mut arch_table = Vec::new();
    let mut runs: Vec<(String, Vec<PerRunRow>)> = Vec::new();
    for d in dirs {
        let read_row = |name: &str| -> Result<Option<Vec<String>>> {
            let p = d.join(name);
            if !p.exists() {
                return Ok(None);
            }
            let mut r = csv::Reader::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
            if r.headers()?.iter().collect::<Vec<_>>() != METRICS_HEADER {
                bail!("{} does not have the metrics header", p.display());
            }
            let rec = r
                .records()
                .next()
                .ok_or_else(|| anyhow!("{} has no rows", p.display()))??;
            Ok(Some(rec.iter().map(str::to_string).collect()))
        };
        let row = read_row("metrics.csv")?.ok_or_else(|| anyhow!("{} has no metrics.csv", d.display()))?;
        let label = format!("{}/{}/{}", row[0], row[1], row[2]);
        table.push(row);
        if let Some(r) = read_row("metrics_archetype.csv")? {
            arch_table.push(r);
        }
        let p = d.join("per_run.csv");
        let mut r = csv::Reader::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<PerRunRow>, _>>()?;
        runs.push((label, rows));
    }
    write_atomic(&out.join("table.csv"), &csv_bytes(&METRICS_HEADER, &table)?)?;
    if !arch_table.is_empty() {
        write_atomic(
            &out.join("table_archetype.csv"),
            &csv_bytes(&METRICS_HEADER, &arch_table)?,
        )?;
    }

    let mut welch = Vec::new();
    for labels in ["slot", "archetype"] {
        for i in 0..runs.len() {
            for j in (i + 1)..runs.len() {
                let pick = |rows: &[PerRunRow], k: usize| -> Vec<f64> {
                    rows.iter()
                        .filter(|r| r.labels == labels)
                        .map(|r| [r.completeness, r.silhouette, r.nmi, r.ami][k])
                        .collect()
                };
                for (k, name) in SCORE_NAMES.iter().enumerate() {
                    let (a, b) = (pick(&runs[i].1, k), pick(&runs[j].1, k));
                    if a.len() < 2 || b.len() < 2 {
                        continue;
                    }
                    let t = ss2s_core::evaluation::welch_test(&a, &b)?;
                    welch.push(vec![
                        labels.to_string(),
                        runs[i].0.clone(),
                        runs[j].0.clone(),
                        name.to_string(),
                        mean_std(&a).0.to_string(),
                        mean_std(&b).0.to_string(),
                        t.t.to_string(),
                        t.df.to_string(),
                        t.p.to_string(),
                        format!("{}/{}", a.len(), b.len()),
                    ]);
                }
            }
        }
    }
    write_atomic(&out.join("welch.csv"), &csv_bytes(&WELCH_HEADER, &welch)?)?;
    Ok(())
}
