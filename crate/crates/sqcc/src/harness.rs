//! Dataset generation, training and evaluation sweeps.
//!
//! Every frame is regenerated from `(master_seed, split, channel, class,
//! snr, frame_index)` alone, so datasets and result files are reproducible
//! byte for byte no matter how frames are scheduled across threads.
//! Training and validation data come from the training channel; test data
//! is drawn per channel from a separate seed stream.

use std::fmt;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use sqcc_core::channel::ChannelSpec;
use sqcc_core::features::{estimate_sqcs, SqcExtractor};
use sqcc_core::frame::{FrameSpec, FrameSynth};
use sqcc_core::mlp::{self, Sample, TrainingLog};
use sqcc_core::seed::SeedBuilder;
use sqcc_core::{Complex64, ConfusionMatrix, FilterConfig, MlpModel, Modulation, OfdmParams, Pool, TrainConfig};

use crate::dataset::{self, FeatureRecord};
use crate::error::{Error, Result};
use crate::model_file::{self, ModelSet};
use crate::results::{self, ResultRow, ResultTable};

/// Smallest number of frames per (class, SNR) point accepted for a sweep.
pub const MIN_FRAMES_PER_POINT: usize = 50;
pub const DESK_FRAMES_PER_POINT: usize = 200;
pub const PAPER_FRAMES_PER_POINT: usize = 800;
pub const DEFAULT_TMAX_CANDIDATES: [f64; 5] = [2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// How classifiers are fit to the SNR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainingMode {
    /// A single classifier for all SNRs.
    #[default]
    Pooled,
    /// One classifier per grid SNR, applied to frames at that SNR.
    PerSnr,
}

impl TrainingMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainingMode::PerSnr => "per-snr",
            TrainingMode::Pooled => "pooled",
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-snr" => Ok(TrainingMode::PerSnr),
            "pooled" => Ok(TrainingMode::Pooled),
            _ => Err(Error::Config(format!("unknown training mode {s:?}"))),
        }
    }
}

/// `-10, -8, ..., 10` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (-5..=5).map(|k| 2.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub pool: Pool,
    /// Channels evaluated at test time.
    pub channels: Vec<ChannelSpec>,
    pub snr_grid_db: Vec<f64>,
    pub frames_per_point: usize,
    pub ofdm: OfdmParams,
    /// `None` bypasses the outlier filter.
    pub filter: Option<FilterConfig>,
    pub train_channel: ChannelSpec,
    pub train: TrainConfig,
    pub mode: TrainingMode,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn new(pool: Pool, master_seed: u64) -> Self {
        ExperimentPlan {
            pool,
            channels: vec![ChannelSpec::h0(), ChannelSpec::h1(), ChannelSpec::h2()],
            snr_grid_db: default_snr_grid(),
            frames_per_point: DESK_FRAMES_PER_POINT,
            ofdm: OfdmParams::default(),
            filter: Some(FilterConfig::default()),
            train_channel: ChannelSpec::h0(),
            train: TrainConfig::default(),
            mode: TrainingMode::default(),
            master_seed,
        }
    }

    pub fn classes(&self) -> Vec<Modulation> {
        self.pool.members().to_vec()
    }

    /// Checks everything needed to synthesize frames.
    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        for ch in self.channels.iter().chain([&self.train_channel]) {
            ch.validate_for(&self.ofdm)?;
        }
        if self.frames_per_point == 0 {
            return Err(Error::Precondition("frames_per_point must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(Error::Precondition("SNR grid must be non-empty".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    /// Stricter check for runs that report Pcc.
    pub fn validate_for_sweep(&self) -> Result<()> {
        self.validate()?;
        if self.frames_per_point < MIN_FRAMES_PER_POINT {
            return Err(Error::Precondition(format!(
                "frames_per_point {} is below the minimum of {MIN_FRAMES_PER_POINT}",
                self.frames_per_point
            )));
        }
        Ok(())
    }

    pub fn frame_seed(&self, split: Split, channel: &str, class: Modulation, snr_db: f64, index: usize) -> u64 {
        SeedBuilder::new(self.master_seed)
            .mix_str(split.name())
            .mix_str(channel)
            .mix_str(class.name())
            .mix_f64(snr_db)
            .mix(index as u64)
            .finish()
    }

    /// Training configuration with its seed tied to the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: SeedBuilder::new(self.master_seed).mix_str("classifier").mix(self.train.seed).finish(),
            ..self.train.clone()
        }
    }

    fn frame_specs(&self, split: Split, channel: &ChannelSpec) -> Vec<FrameSpec> {
        let mut specs = Vec::with_capacity(self.pool.members().len() * self.snr_grid_db.len() * self.frames_per_point);
        for &snr_db in &self.snr_grid_db {
            for &modulation in self.pool.members() {
                for i in 0..self.frames_per_point {
                    specs.push(FrameSpec {
                        modulation,
                        snr_db,
                        channel: channel.clone(),
                        seed: self.frame_seed(split, &channel.name, modulation, snr_db, i),
                    });
                }
            }
        }
        specs
    }
}

/// Synthesizes the raw received frames for one (class, SNR) point.
pub fn synthesize_point(
    plan: &ExperimentPlan,
    split: Split,
    channel: &ChannelSpec,
    class: Modulation,
    snr_db: f64,
) -> Result<Vec<Vec<Complex64>>> {
    let synth = FrameSynth::new(plan.ofdm)?;
    (0..plan.frames_per_point)
        .into_par_iter()
        .map(|i| {
            let spec = FrameSpec {
                modulation: class,
                snr_db,
                channel: channel.clone(),
                seed: plan.frame_seed(split, &channel.name, class, snr_db, i),
            };
            Ok(synth.synthesize(&spec)?.samples)
        })
        .collect()
}

/// Feature records for every frame of the split, one list per filter setting.
/// Each frame is synthesized once and its pooled quotients are thresholded
/// per setting, which gives the same vectors as separate runs.
pub fn generate_features_multi(
    plan: &ExperimentPlan,
    split: Split,
    channel: &ChannelSpec,
    filters: &[Option<FilterConfig>],
) -> Result<Vec<Vec<FeatureRecord>>> {
    plan.validate()?;
    let synth = FrameSynth::new(plan.ofdm)?;
    let extractor = SqcExtractor::new(plan.ofdm, None)?;
    let specs = plan.frame_specs(split, channel);
    info!(
        "{split}/{}: synthesizing {} frames for {} filter setting(s)",
        channel.name,
        specs.len(),
        filters.len()
    );
    let per_frame: Vec<Vec<FeatureRecord>> = specs
        .par_iter()
        .map(|spec| {
            let frame = synth.synthesize(spec)?;
            let pooled = extractor.pooled_quotients(&frame.samples)?;
            let mut kept = Vec::with_capacity(pooled.len());
            Ok(filters
                .iter()
                .map(|f| {
                    let features = match f {
                        Some(cfg) => {
                            kept.clear();
                            kept.extend(pooled.iter().filter(|v| v.norm() <= cfg.t_max));
                            estimate_sqcs(&kept)
                        }
                        None => estimate_sqcs(&pooled),
                    };
                    FeatureRecord {
                        label: Some(spec.modulation),
                        snr_db: spec.snr_db,
                        channel: channel.name.clone(),
                        frame_seed: spec.seed,
                        features,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(per_frame.len()); filters.len()];
    for frame in per_frame {
        for (slot, rec) in out.iter_mut().zip(frame) {
            slot.push(rec);
        }
    }
    Ok(out)
}

pub fn generate_features(plan: &ExperimentPlan, split: Split, channel: &ChannelSpec) -> Result<Vec<FeatureRecord>> {
    Ok(generate_features_multi(plan, split, channel, &[plan.filter])?
        .pop()
        .expect("one filter setting"))
}

pub fn inadmissible_count(records: &[FeatureRecord]) -> usize {
    records.iter().filter(|r| !r.features.is_admissible()).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub rows: usize,
    pub inadmissible: usize,
}

/// Generates the split for one channel and writes it as a feature dataset.
pub fn generate_dataset(plan: &ExperimentPlan, split: Split, channel: &ChannelSpec, path: &Path) -> Result<DatasetSummary> {
    let records = generate_features(plan, split, channel)?;
    dataset::save(path, &records)?;
    let summary = DatasetSummary {
        rows: records.len(),
        inadmissible: inadmissible_count(&records),
    };
    if summary.inadmissible > 0 {
        log::warn!(
            "{}: {} of {} feature vectors are inadmissible",
            path.display(),
            summary.inadmissible,
            summary.rows
        );
    }
    Ok(summary)
}

fn to_samples(records: &[FeatureRecord], classes: &[Modulation]) -> Result<Vec<Sample>> {
    records
        .iter()
        .filter(|r| r.features.is_admissible())
        .map(|r| {
            let label = r
                .label
                .ok_or_else(|| Error::Precondition("training rows must be labelled".into()))?;
            let class = classes
                .iter()
                .position(|&c| c == label)
                .ok_or_else(|| Error::ClassMismatch(format!("label {label} is not in the class list")))?;
            Ok(Sample {
                features: r.features.values,
                class,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub log: TrainingLog,
    /// Inadmissible rows left out of training.
    pub skipped: usize,
}

/// Trains on the admissible rows and stamps the feature settings into the model.
pub fn train_model(
    records: &[FeatureRecord],
    classes: Vec<Modulation>,
    cfg: &TrainConfig,
    ofdm: OfdmParams,
    filter: Option<FilterConfig>,
) -> Result<TrainedModel> {
    let samples = to_samples(records, &classes)?;
    let skipped = records.len() - samples.len();
    let (mut model, log) = mlp::train(&samples, classes, cfg)?;
    model.ofdm = ofdm;
    model.t_max_used = filter.map(|f| f.t_max);
    info!(
        "trained on {} rows ({} skipped), best epoch {} of {}",
        samples.len(),
        skipped,
        log.best_epoch,
        log.epochs.len()
    );
    Ok(TrainedModel { model, log, skipped })
}

#[derive(Debug, Clone)]
pub struct TrainedSet {
    pub models: ModelSet,
    /// Training log per entry of `models`.
    pub logs: Vec<TrainingLog>,
    pub skipped: usize,
}

/// Fits the classifier(s) for `mode`. Per-SNR models each see only the rows
/// at their SNR; their mini-batch shrinks when needed so that the row count
/// stays at least ten batches.
pub fn train_models(
    records: &[FeatureRecord],
    classes: Vec<Modulation>,
    cfg: &TrainConfig,
    ofdm: OfdmParams,
    filter: Option<FilterConfig>,
    mode: TrainingMode,
) -> Result<TrainedSet> {
    if mode == TrainingMode::Pooled {
        let t = train_model(records, classes, cfg, ofdm, filter)?;
        return Ok(TrainedSet {
            models: ModelSet::pooled(t.model),
            logs: vec![t.log],
            skipped: t.skipped,
        });
    }
    let mut snrs: Vec<f64> = Vec::new();
    for r in records {
        if !snrs.iter().any(|s| s.total_cmp(&r.snr_db).is_eq()) {
            snrs.push(r.snr_db);
        }
    }
    snrs.sort_by(f64::total_cmp);
    let mut out = TrainedSet {
        models: ModelSet { entries: Vec::new() },
        logs: Vec::new(),
        skipped: 0,
    };
    for snr in snrs {
        let subset: Vec<FeatureRecord> = records
            .iter()
            .filter(|r| r.snr_db.total_cmp(&snr).is_eq())
            .cloned()
            .collect();
        let admissible = subset.iter().filter(|r| r.features.is_admissible()).count();
        let local = TrainConfig {
            batch_size: cfg.batch_size.min(admissible / 10).max(1),
            seed: SeedBuilder::new(cfg.seed).mix_f64(snr).finish(),
            ..cfg.clone()
        };
        info!("training the {snr} dB classifier");
        let t = train_model(&subset, classes.clone(), &local, ofdm, filter)?;
        out.models.entries.push((Some(snr), t.model));
        out.logs.push(t.log);
        out.skipped += t.skipped;
    }
    if out.models.entries.is_empty() {
        return Err(Error::Core(sqcc_core::Error::Dataset("no training rows".into())));
    }
    Ok(out)
}

fn label_set(records: &[FeatureRecord]) -> Result<Vec<Modulation>> {
    let mut labels = Vec::new();
    for r in records {
        let l = r
            .label
            .ok_or_else(|| Error::Precondition("evaluation rows must be labelled".into()))?;
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    Ok(labels)
}

/// Scores every row and groups the outcome by (channel, SNR).
/// Inadmissible rows are counted as misclassified.
pub fn evaluate(models: &ModelSet, records: &[FeatureRecord]) -> Result<ResultTable> {
    if records.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    let classes = models.classes().to_vec();
    let labels = label_set(records)?;
    let extra: Vec<_> = labels.iter().filter(|l| !classes.contains(l)).collect();
    let missing: Vec<_> = classes.iter().filter(|c| !labels.contains(c)).collect();
    if !extra.is_empty() || !missing.is_empty() {
        return Err(Error::ClassMismatch(format!(
            "model classes {:?} vs dataset labels {:?}",
            classes.iter().map(|m| m.name()).collect::<Vec<_>>(),
            labels.iter().map(|m| m.name()).collect::<Vec<_>>()
        )));
    }
    if let Some(r) = records.iter().find(|r| models.for_snr(r.snr_db).is_none()) {
        return Err(Error::Precondition(format!("no classifier for SNR {} dB", r.snr_db)));
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut channel_order: Vec<String> = Vec::new();
    for r in records {
        let key = rows
            .iter()
            .position(|row| row.channel == r.channel && row.snr_db == r.snr_db);
        let idx = match key {
            Some(i) => i,
            None => {
                if !channel_order.contains(&r.channel) {
                    channel_order.push(r.channel.clone());
                }
                rows.push(ResultRow {
                    channel: r.channel.clone(),
                    snr_db: r.snr_db,
                    confusion: ConfusionMatrix::new(classes.clone()),
                });
                rows.len() - 1
            }
        };
        let cm = &mut rows[idx].confusion;
        let truth = cm.class_index(r.label.expect("checked above")).expect("checked above");
        let model = models.for_snr(r.snr_db).expect("checked above");
        let predicted = r
            .features
            .is_admissible()
            .then(|| mlp::argmax(&model.forward(&r.features.values)));
        cm.record(truth, predicted);
    }
    rows.sort_by(|a, b| {
        let ca = channel_order.iter().position(|c| *c == a.channel);
        let cb = channel_order.iter().position(|c| *c == b.channel);
        ca.cmp(&cb).then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(ResultTable { classes, rows })
}

/// Pcc over all rows of a dataset, regardless of SNR.
pub fn overall_pcc(models: &ModelSet, records: &[FeatureRecord]) -> Result<f64> {
    let table = evaluate(models, records)?;
    let mut cm = ConfusionMatrix::new(table.classes.clone());
    for r in &table.rows {
        cm.merge(&r.confusion)?;
    }
    Ok(cm.pcc()?)
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub trained: TrainedSet,
    /// One table per test channel, in plan order.
    pub tables: Vec<ResultTable>,
}

impl SweepOutcome {
    pub fn pcc(&self, channel: &str, snr_db: f64) -> Option<f64> {
        self.tables.iter().find_map(|t| t.pcc_at(channel, snr_db))
    }
}

/// Writes the training logs; `snr_db` is `any` for a pooled classifier.
pub fn write_training_log(path: &Path, trained: &TrainedSet) -> Result<()> {
    results::write_with(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["snr_db", "epoch", "train_loss", "val_loss", "val_accuracy", "best"])?;
        for ((snr, _), log) in trained.models.entries.iter().zip(&trained.logs) {
            let snr = snr.map_or("any".to_string(), |s| s.to_string());
            for e in &log.epochs {
                w.write_record([
                    snr.clone(),
                    e.epoch.to_string(),
                    e.train_loss.to_string(),
                    e.val_loss.to_string(),
                    e.val_accuracy.to_string(),
                    (e.epoch == log.best_epoch).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

/// Output file name for a channel's results, with an optional suffix.
pub fn results_file_name(channel: &str, suffix: &str) -> String {
    format!("results_{channel}{suffix}.csv")
}

fn write_sweep(out: &Path, outcome: &SweepOutcome, suffix: &str) -> Result<()> {
    model_file::save_set(&out.join(format!("model{suffix}.txt")), &outcome.trained.models)?;
    write_training_log(&out.join(format!("training_log{suffix}.csv")), &outcome.trained)?;
    for t in &outcome.tables {
        for ch in t.channels() {
            t.for_channel(&ch).save(&out.join(results_file_name(&ch, suffix)))?;
        }
    }
    results::save_summary(&out.join(format!("summary{suffix}.csv")), &outcome.tables)
}

/// Trains on the training channel over the whole SNR grid, then evaluates
/// every test channel at every SNR.
pub fn run_sweep(plan: &ExperimentPlan, out: Option<&Path>) -> Result<SweepOutcome> {
    run_sweep_named(plan, out, "")
}

fn run_sweep_named(plan: &ExperimentPlan, out: Option<&Path>, suffix: &str) -> Result<SweepOutcome> {
    plan.validate_for_sweep()?;
    let train_rows = generate_features(plan, Split::Train, &plan.train_channel)?;
    let trained = train_models(
        &train_rows,
        plan.classes(),
        &plan.train_config(),
        plan.ofdm,
        plan.filter,
        plan.mode,
    )?;
    let mut tables = Vec::with_capacity(plan.channels.len());
    for ch in &plan.channels {
        let test_rows = generate_features(plan, Split::Test, ch)?;
        let table = evaluate(&trained.models, &test_rows)?;
        for r in &table.rows {
            info!("{} {:>5} dB  Pcc {:.4}", r.channel, r.snr_db, r.pcc());
        }
        tables.push(table);
    }
    let outcome = SweepOutcome { trained, tables };
    if let Some(dir) = out {
        write_sweep(dir, &outcome, suffix)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub channel: String,
    pub snr_db: f64,
    pub pcc_filtered: f64,
    pub pcc_unfiltered: f64,
}

impl AblationRow {
    pub fn gap(&self) -> f64 {
        self.pcc_filtered - self.pcc_unfiltered
    }
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub filtered: SweepOutcome,
    pub unfiltered: SweepOutcome,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, channel: &str, snr_db: f64) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.channel == channel && (r.snr_db - snr_db).abs() < 1e-9)
    }
}

/// Runs the same sweep with the outlier filter on (the plan's threshold,
/// default when unset) and bypassed.
pub fn run_ablation(plan: &ExperimentPlan, out: Option<&Path>) -> Result<AblationReport> {
    let on = ExperimentPlan {
        filter: Some(plan.filter.unwrap_or_default()),
        ..plan.clone()
    };
    let off = ExperimentPlan {
        filter: None,
        ..plan.clone()
    };
    let filtered = run_sweep_named(&on, out, "")?;
    let unfiltered = run_sweep_named(&off, out, "_unfiltered")?;
    let mut rows = Vec::new();
    for (a, b) in filtered.tables.iter().zip(&unfiltered.tables) {
        for r in &a.rows {
            rows.push(AblationRow {
                channel: r.channel.clone(),
                snr_db: r.snr_db,
                pcc_filtered: r.pcc(),
                pcc_unfiltered: b.pcc_at(&r.channel, r.snr_db).unwrap_or(0.0),
            });
        }
    }
    if let Some(dir) = out {
        results::write_with(&dir.join("ablation.csv"), |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["channel", "snr_db", "pcc_filtered", "pcc_unfiltered", "gap"])?;
            for r in &rows {
                w.write_record([
                    r.channel.clone(),
                    r.snr_db.to_string(),
                    r.pcc_filtered.to_string(),
                    r.pcc_unfiltered.to_string(),
                    r.gap().to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    Ok(AblationReport {
        filtered,
        unfiltered,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmaxCandidate {
    pub t_max: f64,
    pub validation_pcc: f64,
    pub trained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmaxReport {
    pub chosen: f64,
    pub candidates: Vec<TmaxCandidate>,
}

/// Picks the outlier threshold with the best validation Pcc on the training
/// channel; ties go to the smaller threshold. A candidate whose features
/// leave too few admissible rows to train scores its rejection-only Pcc (0).
pub fn tmax_validation(plan: &ExperimentPlan, candidates: &[f64], out: Option<&Path>) -> Result<TmaxReport> {
    if candidates.is_empty() {
        return Err(Error::Precondition("no T_max candidates".into()));
    }
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let filters: Vec<Option<FilterConfig>> = sorted
        .iter()
        .map(|&t| FilterConfig::new(t).map(Some))
        .collect::<sqcc_core::Result<_>>()?;
    if sorted.len() == 1 {
        return Ok(TmaxReport {
            chosen: sorted[0],
            candidates: vec![],
        });
    }
    plan.validate_for_sweep()?;
    let train_sets = generate_features_multi(plan, Split::Train, &plan.train_channel, &filters)?;
    let val_sets = generate_features_multi(plan, Split::Validation, &plan.train_channel, &filters)?;
    let cfg = plan.train_config();
    let mut scored = Vec::with_capacity(sorted.len());
    for ((&t_max, train_rows), val_rows) in sorted.iter().zip(&train_sets).zip(&val_sets) {
        let result = train_models(
            train_rows,
            plan.classes(),
            &cfg,
            plan.ofdm,
            Some(FilterConfig { t_max }),
            plan.mode,
        );
        let (pcc, trained) = match result {
            Ok(t) => (overall_pcc(&t.models, val_rows)?, true),
            Err(Error::Core(sqcc_core::Error::Dataset(msg))) => {
                info!("T_max {t_max}: not trainable ({msg})");
                (0.0, false)
            }
            Err(e) => return Err(e),
        };
        info!("T_max {t_max}: validation Pcc {pcc:.4}");
        scored.push(TmaxCandidate {
            t_max,
            validation_pcc: pcc,
            trained,
        });
    }
    let best = scored
        .iter()
        .fold(None::<&TmaxCandidate>, |best, c| match best {
            Some(b) if b.validation_pcc >= c.validation_pcc => Some(b),
            _ => Some(c),
        })
        .expect("at least two candidates");
    let report = TmaxReport {
        chosen: best.t_max,
        candidates: scored.clone(),
    };
    if let Some(dir) = out {
        results::write_with(&dir.join("tmax.csv"), |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["t_max", "validation_pcc", "chosen"])?;
            for c in &scored {
                w.write_record([
                    c.t_max.to_string(),
                    c.validation_pcc.to_string(),
                    (c.t_max == report.chosen).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqcc_core::SqcVector;

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            snr_grid_db: vec![10.0],
            frames_per_point: 4,
            ofdm: OfdmParams {
                n_subcarriers: 64,
                cp_len: 16,
                symbols_per_frame: 20,
            },
            ..ExperimentPlan::new(Pool::Theta1, 7)
        }
    }

    fn rec(label: Modulation, snr_db: f64, values: [f64; 6]) -> FeatureRecord {
        FeatureRecord {
            label: Some(label),
            snr_db,
            channel: "H0".into(),
            frame_seed: 0,
            features: SqcVector {
                values,
                sample_count: 5000,
            },
        }
    }

    #[test]
    fn seeds_are_disjoint_across_coordinates() {
        let p = small_plan();
        let base = p.frame_seed(Split::Train, "H0", Modulation::Bpsk, 0.0, 0);
        assert_ne!(base, p.frame_seed(Split::Test, "H0", Modulation::Bpsk, 0.0, 0));
        assert_ne!(base, p.frame_seed(Split::Train, "H1", Modulation::Bpsk, 0.0, 0));
        assert_ne!(base, p.frame_seed(Split::Train, "H0", Modulation::Qpsk, 0.0, 0));
        assert_ne!(base, p.frame_seed(Split::Train, "H0", Modulation::Bpsk, 2.0, 0));
        assert_ne!(base, p.frame_seed(Split::Train, "H0", Modulation::Bpsk, 0.0, 1));
    }

    #[test]
    fn generation_shape_and_determinism() {
        let p = small_plan();
        let a = generate_features(&p, Split::Train, &ChannelSpec::h0()).unwrap();
        assert_eq!(a.len(), 3 * 4);
        assert_eq!(a, generate_features(&p, Split::Train, &ChannelSpec::h0()).unwrap());
    }

    #[test]
    fn multi_filter_matches_single_runs() {
        let p = small_plan();
        let filters = [Some(FilterConfig { t_max: 2.0 }), None];
        let multi = generate_features_multi(&p, Split::Test, &ChannelSpec::h1(), &filters).unwrap();
        for (f, got) in filters.iter().zip(&multi) {
            let single = ExperimentPlan { filter: *f, ..p.clone() };
            assert_eq!(got, &generate_features(&single, Split::Test, &ChannelSpec::h1()).unwrap());
        }
    }

    #[test]
    fn noiseless_features_match_oracle_rows() {
        let p = ExperimentPlan {
            pool: Pool::Theta2,
            snr_grid_db: vec![f64::INFINITY],
            frames_per_point: 3,
            ..ExperimentPlan::new(Pool::Theta2, 11)
        };
        for r in generate_features(&p, Split::Train, &ChannelSpec::h0()).unwrap() {
            let m = r.label.unwrap();
            let table = sqcc_core::features::reference_values(m);
            for (k, (got, want)) in r.features.values.iter().zip(table).enumerate() {
                let tol = if m == Modulation::Qam16 && k >= 3 { 0.3 } else { 0.05 };
                assert!((got - want).abs() <= tol, "{m} {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn evaluate_groups_and_scores() {
        let mut model = MlpModel::zeros(&[6, 3], Pool::Theta1.members().to_vec());
        // Decide by the largest of the first three features.
        for k in 0..3 {
            model.layers[0].weights[k * 6 + k] = 1.0;
        }
        let rows = vec![
            rec(Modulation::Bpsk, 0.0, [5.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            rec(Modulation::Qpsk, 0.0, [5.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            rec(Modulation::Qam16, 0.0, [0.0, 0.0, 5.0, 0.0, 0.0, 0.0]),
            rec(Modulation::Bpsk, -2.0, [5.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            rec(Modulation::Qpsk, -2.0, [0.0, 5.0, 0.0, 0.0, 0.0, 0.0]),
            rec(Modulation::Qam16, -2.0, [0.0, 0.0, 5.0, 0.0, 0.0, 0.0]),
        ];
        let set = ModelSet::pooled(model);
        let t = evaluate(&set, &rows).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].snr_db, -2.0);
        assert_eq!(t.pcc_at("H0", -2.0), Some(1.0));
        assert!((t.pcc_at("H0", 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for r in &t.rows {
            for k in 0..3 {
                assert_eq!(r.confusion.class_total(k), 1);
            }
        }
        assert!(evaluate(&set, &[]).is_err());
        let mismatch = vec![rec(Modulation::Psk8, 0.0, [0.0; 6])];
        assert!(matches!(evaluate(&set, &mismatch), Err(Error::ClassMismatch(_))));
        let specialist = ModelSet {
            entries: vec![(Some(0.0), set.entries[0].1.clone())],
        };
        assert!(matches!(evaluate(&specialist, &rows), Err(Error::Precondition(_))));
        assert_eq!(evaluate(&specialist, &rows[..3]).unwrap().rows, t.rows[1..]);
    }

    #[test]
    fn inadmissible_rows_count_as_rejected() {
        let model = ModelSet::pooled(MlpModel::zeros(&[6, 3], Pool::Theta1.members().to_vec()));
        let mut rows: Vec<_> = Pool::Theta1.members().iter().map(|&m| rec(m, 0.0, [0.0; 6])).collect();
        rows[0].features.sample_count = 10;
        let t = evaluate(&model, &rows).unwrap();
        assert_eq!(t.rows[0].confusion.rejected, vec![1, 0, 0]);
        // Zero model predicts class 0 (tie rule) for the others: BPSK row was rejected.
        assert_eq!(t.pcc_at("H0", 0.0), Some(0.0));
    }

    #[test]
    fn sweep_needs_enough_frames() {
        assert!(matches!(run_sweep(&small_plan(), None), Err(Error::Precondition(_))));
    }

    #[test]
    fn single_tmax_candidate_is_returned() {
        let r = tmax_validation(&small_plan(), &[7.5], None).unwrap();
        assert_eq!(r.chosen, 7.5);
        assert!(tmax_validation(&small_plan(), &[], None).is_err());
    }
}
