//! The experiment commands, callable without the command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use snoic_core::corpus::{
    self, apply_split, build_vocab, make_split, subsample_labeled, ClassDataset, Dataset, EncodedDataset, Role,
    SplitSpec, Vocab,
};
use snoic_core::encoder::EncoderConfig;
use snoic_core::metrics::MetricsReport;
use snoic_core::synthetic;
use snoic_core::trainer::{self, Ablation, Model, Stage};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RunInfo};
use crate::config::{load_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::{self, LogContext};
use crate::report::{self, BaselineReport, ReportRow, RunReport};

pub const PRETRAINED_FILE: &str = "pretrained.ckpt";
pub const PRETRAIN_LOG_FILE: &str = "pretrain_log.jsonl";
pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Loads every dataset file and builds a split over their combined intents.
pub fn cmd_split(data: &[PathBuf], r: f64, seed: u64, out: &Path) -> Result<SplitSpec> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Usage(format!("--r {r} outside (0, 1)")));
    }
    let mut examples = Vec::new();
    for path in data {
        examples.extend(io::load_dataset(path)?.examples().iter().cloned());
    }
    let spec = make_split(&Dataset::new(examples)?, r, seed)?;
    io::save_split(out, &spec)?;
    Ok(spec)
}

/// Train and validation role data for one experiment.
struct StageData {
    train: ClassDataset,
    val: ClassDataset,
}

fn check_ratio(cfg: &ExperimentConfig, spec: &SplitSpec) -> Result<()> {
    match cfg.r {
        Some(r) if (r - spec.r).abs() > 1e-12 => {
            Err(Error::Usage(format!("config expects r={r} but the split was made with r={}", spec.r)))
        }
        _ => Ok(()),
    }
}

fn stage_data(cfg: &ExperimentConfig, spec: &SplitSpec) -> Result<StageData> {
    check_ratio(cfg, spec)?;
    let train = apply_split(&io::load_dataset(&cfg.data.train)?, spec, Role::Train)?;
    let train = subsample_labeled(&train, cfg.labeled_data_ratio, cfg.training.seed)?;
    let val = apply_split(&io::load_dataset(&cfg.data.val)?, spec, Role::Val)?;
    Ok(StageData { train, val })
}

fn log_context(variant: String, data: &StageData) -> LogContext {
    LogContext {
        variant,
        train_examples: data.train.len(),
        val_examples: data.val.len(),
        train_class_counts: data.train.class_counts()[1..=data.train.num_known].to_vec(),
    }
}

fn encode(data: &StageData, vocab: &Vocab, max_len: usize) -> Result<(EncodedDataset, EncodedDataset)> {
    Ok((EncodedDataset::new(&data.train, vocab, max_len)?, EncodedDataset::new(&data.val, vocab, max_len)?))
}

/// Stage 1. Writes the pre-trained checkpoint and its log into `out_dir`.
pub fn cmd_pretrain(config: &Path, split: &Path, out_dir: &Path) -> Result<Checkpoint> {
    let cfg = load_config(config)?;
    let spec = io::load_split(split)?;
    let data = stage_data(&cfg, &spec)?;
    let vocab = build_vocab(data.train.examples.iter().map(|e| e.text.as_str()), cfg.vocab.min_freq, cfg.vocab.max_size)?;
    if cfg.encoder.vocab_size != 0 && cfg.encoder.vocab_size != vocab.len() {
        return Err(Error::Usage(format!(
            "encoder.vocab_size {} differs from the {} tokens built from the training data; set it to 0",
            cfg.encoder.vocab_size,
            vocab.len()
        )));
    }
    let enc = EncoderConfig { vocab_size: vocab.len(), ..cfg.encoder.clone() };
    let (train, val) = encode(&data, &vocab, enc.max_len)?;
    let outcome = trainer::pretrain(&train, &val, &enc, &cfg.training)?;
    let ctx = log_context("pretrain".into(), &data);
    io::save_log(&out_dir.join(PRETRAIN_LOG_FILE), &io::log_lines(&outcome.log, &ctx))?;
    let ckpt = Checkpoint {
        model: Model::new(vocab, outcome.params)?,
        run: Some(RunInfo {
            stage: Stage::Pretrain,
            variant: "pretrain".into(),
            split_digest: io::split_digest(&spec),
            experiment: cfg,
        }),
    };
    save_checkpoint(&out_dir.join(PRETRAINED_FILE), &ckpt)?;
    Ok(ckpt)
}

/// Stage 2 from `init`. `ablation` switches are added to those of the config.
pub fn cmd_train(config: &Path, split: &Path, init: &Path, ablation: Ablation, out_dir: &Path) -> Result<Checkpoint> {
    let mut cfg = load_config(config)?;
    let a = &mut cfg.training.ablation;
    a.disable_soft_labeling |= ablation.disable_soft_labeling;
    a.disable_additive_noise |= ablation.disable_additive_noise;
    a.disable_multiplicative_noise |= ablation.disable_multiplicative_noise;
    let spec = io::load_split(split)?;
    let init = load_checkpoint(init)?.model;
    if init.num_known() != spec.num_known() {
        return Err(Error::Core(snoic_core::Error::Shape(format!(
            "initial checkpoint has head width {} (M={}) but the split needs {} (M={})",
            init.num_known() + 1,
            init.num_known(),
            spec.num_known() + 1,
            spec.num_known()
        ))));
    }
    let data = stage_data(&cfg, &spec)?;
    let (train, val) = encode(&data, &init.vocab, init.params.config.max_len)?;
    let variant = cfg.training.ablation.variant_name();
    let outcome = trainer::train_open(&train, &val, init.params, &cfg.training)?;
    io::save_log(&out_dir.join(TRAIN_LOG_FILE), &io::log_lines(&outcome.log, &log_context(variant.clone(), &data)))?;
    let ckpt = Checkpoint {
        model: Model::new(init.vocab, outcome.params)?,
        run: Some(RunInfo { stage: Stage::Open, variant, split_digest: io::split_digest(&spec), experiment: cfg }),
    };
    save_checkpoint(&out_dir.join(MODEL_FILE), &ckpt)?;
    Ok(ckpt)
}

/// Options of [`cmd_eval`] beyond its input files.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Test file; defaults to the one named in the model's configuration.
    pub test: Option<PathBuf>,
    pub threshold: f64,
    pub timing: bool,
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { test: None, threshold: DEFAULT_THRESHOLD, timing: false, batch_size: 64 }
    }
}

/// Accuracy restricted to examples whose gold class is known.
pub fn known_accuracy(preds: &[usize], golds: &[usize], num_known: usize) -> f64 {
    let known: Vec<(usize, usize)> = preds.iter().zip(golds).filter(|(_, &g)| g <= num_known).map(|(&p, &g)| (p, g)).collect();
    if known.is_empty() {
        return 0.0;
    }
    known.iter().filter(|(p, g)| p == g).count() as f64 / known.len() as f64
}

pub fn cmd_eval(model: &Path, split: &Path, opts: &EvalOptions, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::Usage(format!("--threshold {} outside [0, 1]", opts.threshold)));
    }
    let ckpt = load_checkpoint(model)?;
    let run = ckpt
        .run
        .ok_or_else(|| Error::format(model, "checkpoint carries no run information; it was not written by `train`"))?;
    let spec = io::load_split(split)?;
    let digest = io::split_digest(&spec);
    if digest != run.split_digest {
        return Err(Error::Usage(format!("{} was trained on a different split than {}", model.display(), split.display())));
    }
    let test_path = opts.test.clone().unwrap_or_else(|| run.experiment.data.test.clone());
    let test = apply_split(&io::load_dataset(&test_path)?, &spec, Role::Test)?;
    let m = spec.num_known();
    let encoded = ckpt.model.encode(&test)?;
    let preds = ckpt.model.predict(&encoded, opts.batch_size)?;
    let baseline = ckpt.model.threshold_baseline_predict(&encoded, opts.threshold, opts.batch_size)?;
    let report = RunReport {
        dataset: run.experiment.dataset.clone(),
        r: spec.r,
        variant: run.variant,
        seed: run.experiment.training.seed,
        split_digest: digest,
        known_accuracy: known_accuracy(&preds, &encoded.labels, m),
        model: MetricsReport::evaluate(&preds, &encoded.labels, m)?,
        baseline: BaselineReport {
            threshold: opts.threshold,
            metrics: MetricsReport::evaluate(&baseline, &encoded.labels, m)?,
        },
        config: run.experiment,
        version: report::VERSION.into(),
        wall_clock_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
    };
    io::write_json(out, &report)?;
    Ok(report)
}

pub fn cmd_report(pattern: &str, out_dir: &Path) -> Result<Vec<ReportRow>> {
    let reports: Vec<RunReport> = report::load_reports(pattern)?.into_iter().map(|(_, r)| r).collect();
    let rows = report::aggregate(&reports);
    report::save_table(out_dir, &rows)?;
    Ok(rows)
}

/// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` of a templated corpus.
pub fn cmd_synth(classes: usize, per_class: usize, seed: u64, out_dir: &Path) -> Result<[Dataset; 3]> {
    let ds = synthetic::templated_corpus(classes, per_class, seed)?;
    let roles = synthetic::split_roles(&ds, 0.2, 0.2, corpus::epoch_seed(seed, 1))?;
    for (name, part) in ["train", "val", "test"].iter().zip(&roles) {
        io::save_dataset(&out_dir.join(format!("{name}.jsonl")), part)?;
    }
    Ok(roles)
}
