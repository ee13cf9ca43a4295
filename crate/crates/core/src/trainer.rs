//! Two-stage training: softmax pre-training on the known intents, then joint
//! soft-label and noisy-mixup training of the (M+1)-way classifier.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augment::{self, LayerRange, MixupConfig};
use crate::corpus::{self, EncodedDataset, Vocab};
use crate::encoder::{self, EncoderConfig, EncoderParams};
use crate::error::{invalid, Error, Result};
use crate::losses::{self, SoftTarget};
use crate::optim::AdamW;
use crate::seeded_rng;
use crate::tensor::Matrix;

/// Source of the trade-off weight between the soft-label and mixup losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaMode {
    /// Constant weight in `[0, 1]`.
    Fixed(f64),
    /// The mixing weight λ drawn for the step.
    Lambda,
}

/// Ablation switches; each one removes a single ingredient of stage 2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub disable_soft_labeling: bool,
    pub disable_additive_noise: bool,
    pub disable_multiplicative_noise: bool,
}

impl Ablation {
    /// `SNOiC`, or the ablated variant name such as `SNOiC-SL`.
    pub fn variant_name(&self) -> String {
        let mut name = String::from("SNOiC");
        for (off, tag) in [
            (self.disable_soft_labeling, "-SL"),
            (self.disable_additive_noise, "-AN"),
            (self.disable_multiplicative_noise, "-MN"),
        ] {
            if off {
                name.push_str(tag);
            }
        }
        name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Relocation probability moved to the open class in soft targets.
    pub rho: f64,
    pub alpha: f64,
    pub gamma: GammaMode,
    pub delta_add: f64,
    pub delta_mul: f64,
    pub seed: u64,
    pub mix_layers: Option<LayerRange>,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.01,
            batch_size: 32,
            max_epochs: 60,
            patience: 10,
            rho: 0.3,
            alpha: 2.0,
            gamma: GammaMode::Fixed(0.5),
            delta_add: 0.4,
            delta_mul: 0.2,
            seed: 0,
            mix_layers: None,
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(invalid(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(invalid("weight decay must be non-negative"));
        }
        if self.batch_size < 1 || self.max_epochs < 1 || self.patience < 1 {
            return Err(invalid("batch_size, max_epochs and patience must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid(format!("rho {} outside [0, 1)", self.rho)));
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(invalid(format!("gamma {g} outside [0, 1]")));
            }
        }
        self.mixup().validate()
    }

    /// Mixup settings after applying the noise ablations.
    pub fn mixup(&self) -> MixupConfig {
        MixupConfig {
            alpha: self.alpha,
            delta_add: if self.ablation.disable_additive_noise { 0.0 } else { self.delta_add },
            delta_mul: if self.ablation.disable_multiplicative_noise { 0.0 } else { self.delta_mul },
            layers: self.mix_layers,
        }
    }

    /// Relocation probability after applying the soft-label ablation.
    pub fn effective_rho(&self) -> f64 {
        if self.ablation.disable_soft_labeling {
            0.0
        } else {
            self.rho
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub mean_loss: f64,
    /// Validation accuracy on the known classes.
    pub val_metric: f64,
    /// Whether this epoch produced the kept checkpoint.
    pub best: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().rev().find(|r| r.best)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: EncoderParams<f32>,
    pub log: TrainLog,
}

/// What the stage-2 loop did in one optimizer step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub step: usize,
    pub targets: &'a [SoftTarget<f32>],
    pub mix_layer: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub loss: f64,
}

fn distinct_labels(ds: &EncodedDataset) -> BTreeSet<usize> {
    ds.labels.iter().copied().collect()
}

fn check_known_only(ds: &EncodedDataset, what: &str) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset(format!("{what} set is empty")));
    }
    if let Some(&y) = ds.labels.iter().find(|&&y| y < 1 || y > ds.num_known) {
        return Err(Error::ClassOutOfRange { id: y, max: ds.num_known });
    }
    Ok(())
}

/// Logits of every example in dataset order.
pub fn dataset_logits(p: &EncoderParams<f32>, ds: &EncodedDataset, batch_size: usize) -> Result<Matrix<f32>> {
    let width = p.num_known + 1;
    let mut data = Vec::with_capacity(ds.len() * width);
    for batch in ds.sequential_batches(batch_size) {
        data.extend_from_slice(encoder::forward(p, &batch)?.logits.as_slice());
    }
    Ok(Matrix::from_vec(ds.len(), width, data))
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Argmax over all M+1 logits; ties go to the smaller class id.
pub fn argmax_predictions(logits: &Matrix<f32>) -> Vec<usize> {
    (0..logits.rows()).map(|i| argmax(logits.row(i)) + 1).collect()
}

/// Argmax over the first M logits only; never predicts the open class.
pub fn known_only_predictions(logits: &Matrix<f32>, num_known: usize) -> Vec<usize> {
    (0..logits.rows()).map(|i| argmax(&logits.row(i)[..num_known]) + 1).collect()
}

/// Maximum softmax probability over the M known logits; below `threshold`
/// the example is assigned to the open class.
pub fn threshold_predictions(logits: &Matrix<f32>, num_known: usize, threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok((0..logits.rows())
        .map(|i| {
            let probs = losses::softmax(&logits.row(i)[..num_known]);
            let k = argmax(&probs);
            if (probs[k] as f64) < threshold {
                num_known + 1
            } else {
                k + 1
            }
        })
        .collect())
}

fn known_accuracy(preds: &[usize], golds: &[usize]) -> f64 {
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    correct as f64 / golds.len().max(1) as f64
}

/// Tracks the best validation epoch and decides when to stop.
struct EarlyStopping {
    patience: usize,
    best_metric: f64,
    best_params: Option<EncoderParams<f32>>,
    stale: usize,
}

impl EarlyStopping {
    fn new(patience: usize) -> Self {
        Self { patience, best_metric: f64::NEG_INFINITY, best_params: None, stale: 0 }
    }

    /// Records an epoch; returns whether it is the new best.
    fn observe(&mut self, metric: f64, params: &EncoderParams<f32>) -> bool {
        if metric > self.best_metric {
            self.best_metric = metric;
            self.best_params = Some(params.clone());
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }
}

/// Stage 1: minimizes the softmax loss over the first M head rows. Early
/// stopping monitors validation accuracy of the M-way argmax.
pub fn pretrain(
    train: &EncodedDataset,
    val: &EncodedDataset,
    encoder_cfg: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_known_only(train, "training")?;
    check_known_only(val, "validation")?;
    let m = train.num_known;
    let mut params = encoder::init_params::<f32>(encoder_cfg, m, cfg.seed)?;
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay)?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.max_epochs {
        let batches = corpus::make_batches(train, cfg.batch_size, corpus::epoch_seed(cfg.seed, epoch))?;
        let mut total = 0.0;
        for (step, batch) in batches.iter().enumerate() {
            let (logits, lower, upper) = encoder::trace_forward(&params, batch)?;
            let loss = losses::pretrain_loss(&logits, &batch.labels, m)?;
            if !loss.value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let mut grads = EncoderParams::zeros_like(&params);
            encoder::backward_full(&params, &lower, &upper, &loss.grad, &mut grads);
            opt.step(&mut params, &grads)?;
            total += loss.value as f64;
        }
        let logits = dataset_logits(&params, val, cfg.batch_size)?;
        let metric = known_accuracy(&known_only_predictions(&logits, m), &val.labels);
        let best = stopper.observe(metric, &params);
        log.records.push(EpochRecord {
            epoch,
            stage: Stage::Pretrain,
            mean_loss: total / batches.len() as f64,
            val_metric: metric,
            best,
        });
        if stopper.should_stop() {
            break;
        }
    }
    let params = stopper.best_params.expect("at least one epoch ran");
    Ok(TrainOutcome { params, log })
}

/// Stream separators so the soft-label batches, the mixup pairs and the
/// mixup draws never share a generator.
const PAIR_STREAM: u64 = 0x5041_4952_5354_524d;
const MIX_STREAM: u64 = 0x4d49_5853_5452_4541;

/// Stage 2 from a pre-trained checkpoint. See [`train_open_observed`].
pub fn train_open(
    train: &EncodedDataset,
    val: &EncodedDataset,
    init: EncoderParams<f32>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_open_observed(train, val, init, cfg, &mut |_| {})
}

/// Stage 2: every step combines the KL loss on soft targets of one batch with
/// the open-class softmax loss on noisy-mixup pseudo samples of one paired
/// batch, weighted by γ. Early stopping monitors validation accuracy of the
/// (M+1)-way argmax. `observe` sees every step.
pub fn train_open_observed(
    train: &EncodedDataset,
    val: &EncodedDataset,
    init: EncoderParams<f32>,
    cfg: &TrainConfig,
    observe: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_known_only(train, "training")?;
    check_known_only(val, "validation")?;
    let m = train.num_known;
    if init.num_known != m {
        return Err(Error::Shape(format!(
            "initial checkpoint has head width {} but the split has {} classes (M+1)",
            init.num_known + 1,
            m + 1
        )));
    }
    if distinct_labels(train).len() < 2 {
        return Err(Error::Pairing("stage 2 needs at least 2 known classes in the training set".into()));
    }
    let mixup_cfg = cfg.mixup();
    let rho = cfg.effective_rho();
    let mut params = init;
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay)?;
    let mut mix_rng = seeded_rng(cfg.seed ^ MIX_STREAM);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.max_epochs {
        let batches = corpus::make_batches(train, cfg.batch_size, corpus::epoch_seed(cfg.seed, epoch))?;
        let pairs =
            corpus::pair_batches(train, cfg.batch_size, corpus::epoch_seed(cfg.seed ^ PAIR_STREAM, epoch))?;
        let mut total = 0.0;
        for (step, batch) in batches.iter().enumerate() {
            let targets = batch
                .labels
                .iter()
                .map(|&y| losses::soft_target::<f32>(y, m, rho))
                .collect::<Result<Vec<_>>>()?;
            let (logits, lower, upper) = encoder::trace_forward(&params, batch)?;
            let kl = losses::kl_loss(&targets, &logits)?;

            let pair = &pairs[step % pairs.len()];
            let mix = augment::trace_noisy_mixup(&params, pair, &mixup_cfg, &mut mix_rng)?;
            let nm = losses::mixup_loss(&mix.logits);

            let gamma = match cfg.gamma {
                GammaMode::Fixed(g) => g,
                GammaMode::Lambda => mix.lambda,
            };
            let loss = losses::total_loss(kl, nm, gamma)?;
            if !loss.value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let mut grads = EncoderParams::zeros_like(&params);
            encoder::backward_full(&params, &lower, &upper, &loss.soft.grad, &mut grads);
            mix.backward(&params, &loss.mixup.grad, &mut grads);
            opt.step(&mut params, &grads)?;
            total += loss.value as f64;
            observe(&StepEvent {
                epoch,
                step,
                targets: &targets,
                mix_layer: mix.layer,
                lambda: mix.lambda,
                gamma,
                loss: loss.value as f64,
            });
        }
        let logits = dataset_logits(&params, val, cfg.batch_size)?;
        let metric = known_accuracy(&argmax_predictions(&logits), &val.labels);
        let best = stopper.observe(metric, &params);
        log.records.push(EpochRecord {
            epoch,
            stage: Stage::Open,
            mean_loss: total / batches.len() as f64,
            val_metric: metric,
            best,
        });
        if stopper.should_stop() {
            break;
        }
    }
    let params = stopper.best_params.expect("at least one epoch ran");
    Ok(TrainOutcome { params, log })
}

/// Trained parameters together with the vocabulary their ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: Vocab,
    pub params: EncoderParams<f32>,
}

impl Model {
    pub fn new(vocab: Vocab, params: EncoderParams<f32>) -> Result<Self> {
        if vocab.len() != params.config.vocab_size {
            return Err(Error::VocabMismatch(format!(
                "vocabulary has {} tokens, encoder expects {}",
                vocab.len(),
                params.config.vocab_size
            )));
        }
        Ok(Self { vocab, params })
    }

    pub fn num_known(&self) -> usize {
        self.params.num_known
    }

    /// Tokenizes `ds` with the stored vocabulary.
    pub fn encode(&self, ds: &corpus::ClassDataset) -> Result<EncodedDataset> {
        if ds.num_known != self.num_known() {
            return Err(Error::Shape(format!(
                "dataset has M={} but the model head has M={}",
                ds.num_known,
                self.num_known()
            )));
        }
        EncodedDataset::new(ds, &self.vocab, self.params.config.max_len)
    }

    pub fn logits(&self, ds: &EncodedDataset, batch_size: usize) -> Result<Matrix<f32>> {
        dataset_logits(&self.params, ds, batch_size)
    }

    /// (M+1)-way argmax predictions.
    pub fn predict(&self, ds: &EncodedDataset, batch_size: usize) -> Result<Vec<usize>> {
        Ok(argmax_predictions(&self.logits(ds, batch_size)?))
    }

    /// Maximum-softmax-probability threshold baseline over the known logits.
    pub fn threshold_baseline_predict(
        &self,
        ds: &EncodedDataset,
        threshold: f64,
        batch_size: usize,
    ) -> Result<Vec<usize>> {
        threshold_predictions(&self.logits(ds, batch_size)?, self.num_known(), threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_smallest_class() {
        let l = Matrix::from_rows(&[&[1.0f32, 0.0, 1.0], &[0.0, 0.0, 2.0]]);
        assert_eq!(argmax_predictions(&l), alloc::vec![1, 3]);
        assert_eq!(known_only_predictions(&l, 2), alloc::vec![1, 1]);
    }

    #[test]
    fn threshold_endpoints() {
        let l = Matrix::from_rows(&[&[0.6f32.ln(), 0.4f32.ln(), 9.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(threshold_predictions(&l, 2, 0.0).unwrap(), alloc::vec![1, 1]);
        assert_eq!(threshold_predictions(&l, 2, 1.0).unwrap(), alloc::vec![3, 3]);
        assert_eq!(threshold_predictions(&l, 2, 0.5).unwrap(), alloc::vec![1, 1]);
        assert_eq!(threshold_predictions(&l, 2, 0.51).unwrap(), alloc::vec![1, 3]);
        assert!(threshold_predictions(&l, 2, 1.5).is_err());
    }

    #[test]
    fn variant_names() {
        assert_eq!(Ablation::default().variant_name(), "SNOiC");
        let a = Ablation { disable_soft_labeling: true, ..Ablation::default() };
        assert_eq!(a.variant_name(), "SNOiC-SL");
        let a = Ablation { disable_multiplicative_noise: true, ..Ablation::default() };
        assert_eq!(a.variant_name(), "SNOiC-MN");
    }

    #[test]
    fn ablations_zero_their_ingredient() {
        let cfg = TrainConfig {
            ablation: Ablation { disable_additive_noise: true, disable_soft_labeling: true, ..Ablation::default() },
            ..TrainConfig::default()
        };
        assert_eq!(cfg.mixup().delta_add, 0.0);
        assert_eq!(cfg.mixup().delta_mul, 0.2);
        assert_eq!(cfg.effective_rho(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { rho: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { gamma: GammaMode::Fixed(1.2), ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { alpha: 0.0, ..TrainConfig::default() }.validate().is_err());
    }
}
