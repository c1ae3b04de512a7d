//! Minibatch Adagrad training with dev-set early stopping, plus the
//! counting "training" of the histogram baseline.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, encode, ColorHsv, Dataset, END_ID};
use crate::error::{Error, Result};
use crate::eval::perplexity_of;
use crate::features::FeatureScheme;
use crate::kernel::{check_finite, Adagrad, Parameters};

use super::atomic::{AtomicConfig, AtomicModel, AtomicParams, Inventory};
use super::histogram::HistogramModel;
use super::sequence::{Conditioning, SequenceBatch, SequenceConfig, SequenceModel, SequenceParams};
use super::{Model, ModelFamily};

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub features: FeatureScheme,
    pub conditioning: Conditioning,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub bucket_dim: usize,
    pub dropout: f64,
    pub embedding_sigma: f64,
    pub lstm_sigma: f64,
    pub forget_bias: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive dev evaluations without
    /// improvement; 0 disables early stopping.
    pub patience: usize,
    pub evals_per_epoch: usize,
    pub seed: u64,
    pub deterministic: bool,
    /// Additive smoothing for the histogram baseline.
    pub smoothing: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            features: FeatureScheme::Fourier,
            conditioning: Conditioning::EveryStep,
            hidden: 20,
            embedding_dim: 20,
            bucket_dim: 10,
            dropout: 0.2,
            embedding_sigma: 0.01,
            lstm_sigma: 0.1,
            forget_bias: 5.0,
            learning_rate: 0.1,
            batch_size: 128,
            max_epochs: 10,
            patience: 2,
            evals_per_epoch: 2,
            seed: 0,
            deterministic: true,
            smoothing: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.hidden == 0 || self.embedding_dim == 0 || self.bucket_dim == 0 {
            return bad("hidden, embedding_dim and bucket_dim must be ≥ 1");
        }
        if self.batch_size == 0 || self.evals_per_epoch == 0 {
            return bad("batch_size and evals_per_epoch must be ≥ 1");
        }
        if self.smoothing.is_nan() || self.smoothing <= 0.0 {
            return bad("smoothing must be > 0");
        }
        Ok(())
    }

    pub fn sequence_config(&self) -> SequenceConfig {
        SequenceConfig {
            features: self.features,
            embedding_dim: self.embedding_dim,
            hidden: self.hidden,
            bucket_dim: self.bucket_dim,
            conditioning: self.conditioning,
            dropout: self.dropout,
            embedding_sigma: self.embedding_sigma,
            lstm_sigma: self.lstm_sigma,
            forget_bias: self.forget_bias,
        }
    }

    pub fn atomic_config(&self) -> AtomicConfig {
        AtomicConfig {
            features: self.features,
            hidden1: self.hidden,
            hidden2: self.hidden,
            bucket_dim: self.bucket_dim,
            dropout: self.dropout,
            embedding_sigma: self.embedding_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epoch: f64,
    pub split: String,
    pub perplexity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
    pub epochs_trained: f64,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain struct") + "\n")
            .collect()
    }

    pub fn last(&self, split: &str) -> Option<&TrainingRecord> {
        self.records.iter().rev().find(|r| r.split == split)
    }
}

trait Trainable: Sync {
    type Params: Parameters<f32> + Clone;
    type Example: Sync;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn batch_gradient(
        &self,
        examples: &[&Self::Example],
        dropout_seed: u64,
        deterministic: bool,
    ) -> Result<(f64, Self::Params)>;
}

impl Trainable for SequenceModel<f32> {
    type Params = SequenceParams<f32>;
    type Example = (ColorHsv, Vec<usize>);

    fn params(&self) -> &Self::Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Self::Params {
        &mut self.params
    }

    fn batch_gradient(
        &self,
        examples: &[&Self::Example],
        dropout_seed: u64,
        deterministic: bool,
    ) -> Result<(f64, Self::Params)> {
        let batch = SequenceBatch::new(
            examples.iter().map(|e| e.0).collect(),
            examples.iter().map(|e| e.1.clone()).collect(),
            END_ID,
        );
        self.gradient(&batch, Some(dropout_seed), deterministic)
    }
}

impl Trainable for AtomicModel<f32> {
    type Params = AtomicParams<f32>;
    type Example = (ColorHsv, usize);

    fn params(&self) -> &Self::Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Self::Params {
        &mut self.params
    }

    fn batch_gradient(
        &self,
        examples: &[&Self::Example],
        dropout_seed: u64,
        deterministic: bool,
    ) -> Result<(f64, Self::Params)> {
        let batch: Vec<(ColorHsv, usize)> = examples.iter().map(|&&e| e).collect();
        self.gradient(&batch, Some(dropout_seed), deterministic)
    }
}

/// Batch indices (1-based counts) after which the dev set is evaluated.
fn eval_points(batches_per_epoch: usize, evals: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (1..=evals)
        .map(|k| ((k * batches_per_epoch) as f64 / evals as f64).round() as usize)
        .filter(|&b| b >= 1)
        .collect();
    pts.dedup();
    pts
}

fn fit<M: Trainable>(
    model: &mut M,
    examples: &[M::Example],
    config: &TrainingConfig,
    dev_perplexity: &dyn Fn(&M) -> Option<Result<f64>>,
) -> Result<TrainingLog> {
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);

    let mut opt = Adagrad::new(model.params(), config.learning_rate);
    let n = examples.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let evals = eval_points(batches_per_epoch, config.evals_per_epoch);

    let mut log = TrainingLog::default();
    let mut best: Option<(f64, M::Params, f64)> = None;
    let mut bad_evals = 0;
    let mut order: Vec<usize> = (0..n).collect();

    'epochs: for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (bi, idx) in order.chunks(config.batch_size).enumerate() {
            let progress = epoch as f64 + (bi + 1) as f64 / batches_per_epoch as f64;
            let batch: Vec<&M::Example> = idx.iter().map(|&i| &examples[i]).collect();
            let (loss, grad) = model
                .batch_gradient(&batch, dropout_rng.next_u64(), config.deterministic)
                .map_err(|e| Error::Divergence {
                    epoch: progress,
                    detail: e.to_string(),
                })?;
            opt.step(model.params_mut(), &grad);
            check_finite(model.params(), "parameter").map_err(|e| Error::Divergence {
                epoch: progress,
                detail: e.to_string(),
            })?;
            loss_sum += loss * idx.len() as f64;
            log.epochs_trained = progress;

            if !evals.contains(&(bi + 1)) {
                continue;
            }
            let Some(ppl) = dev_perplexity(model) else {
                continue;
            };
            let ppl = ppl?;
            log.records.push(TrainingRecord {
                epoch: progress,
                split: "dev".into(),
                perplexity: ppl,
            });
            if best.as_ref().is_none_or(|(b, _, _)| ppl < *b) {
                best = Some((ppl, model.params().clone(), progress));
                bad_evals = 0;
            } else {
                bad_evals += 1;
                if config.patience > 0 && bad_evals >= config.patience {
                    log.stopped_early = true;
                    log.records.push(TrainingRecord {
                        epoch: progress,
                        split: "train".into(),
                        perplexity: (loss_sum / ((bi + 1) * config.batch_size).min(n) as f64).exp(),
                    });
                    break 'epochs;
                }
            }
        }
        log.records.push(TrainingRecord {
            epoch: (epoch + 1) as f64,
            split: "train".into(),
            perplexity: (loss_sum / n as f64).exp(),
        });
    }
    if let Some((_, params, _)) = best {
        *model.params_mut() = params;
    }
    Ok(log)
}

fn dev_monitor<'a, M: super::DescriptionModel>(
    dev: Option<&'a Dataset>,
) -> impl Fn(&M) -> Option<Result<f64>> + 'a {
    move |m: &M| dev.map(|d| perplexity_of(m, d, true))
}

/// Trains a model of `family` on `train`, early-stopping on `dev` when
/// given.
pub fn train_model(
    family: ModelFamily,
    train: &Dataset,
    dev: Option<&Dataset>,
    config: &TrainingConfig,
) -> Result<(Model, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Corpus("training set is empty".into()));
    }
    match family {
        ModelFamily::Rnn => {
            let vocab = build_vocabulary(train);
            let examples: Vec<(ColorHsv, Vec<usize>)> = train
                .items
                .iter()
                .map(|it| (it.color, encode(&it.description.tokens, &vocab)))
                .collect();
            let mut model = SequenceModel::<f32>::init(config.sequence_config(), vocab, config.seed)?;
            let log = fit(&mut model, &examples, config, &dev_monitor(dev))?;
            model.run.epochs_trained = log.epochs_trained;
            Ok((Model::Sequence(model), log))
        }
        ModelFamily::Atomic => {
            let inventory = Inventory::build(train);
            let examples: Vec<(ColorHsv, usize)> = train
                .items
                .iter()
                .map(|it| (it.color, inventory.id(&it.description).expect("built from train")))
                .collect();
            let mut model = AtomicModel::<f32>::init(config.atomic_config(), inventory, config.seed)?;
            let log = fit(&mut model, &examples, config, &dev_monitor(dev))?;
            model.run.epochs_trained = log.epochs_trained;
            Ok((Model::Atomic(model), log))
        }
        ModelFamily::Hm => {
            let model = HistogramModel::fit(train, config.smoothing)?;
            let mut log = TrainingLog {
                epochs_trained: 1.0,
                ..TrainingLog::default()
            };
            if let Some(d) = dev {
                log.records.push(TrainingRecord {
                    epoch: 1.0,
                    split: "dev".into(),
                    perplexity: perplexity_of(&model, d, true)?,
                });
            }
            Ok((Model::Histogram(model), log))
        }
    }
}
