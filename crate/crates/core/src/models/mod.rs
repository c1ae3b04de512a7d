//! The three model families behind one scoring/generation interface.

pub mod atomic;
pub mod checkpoint;
pub mod decode;
pub mod featurizer;
pub mod histogram;
pub mod sequence;
pub mod train;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::{decode as decode_ids, ColorHsv, Description};
use crate::error::{Error, Result};
use crate::kernel::{Parameters, Scalar};

pub use atomic::{AtomicConfig, AtomicModel, Inventory};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use decode::{beam_search, sample_ids, StepDecoder, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_LEN};
pub use histogram::HistogramModel;
pub use sequence::{Conditioning, SequenceBatch, SequenceConfig, SequenceModel};
pub use train::{train_model, TrainingConfig, TrainingLog, TrainingRecord};

/// Identifier of the pseudo-random generator used for initialization,
/// shuffling and dropout. Recorded in checkpoints and run metadata.
pub const PRNG_ID: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Rnn,
    Atomic,
    Hm,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Rnn => "rnn",
            ModelFamily::Atomic => "atomic",
            ModelFamily::Hm => "hm",
        })
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ModelFamily::Rnn),
            "atomic" => Ok(ModelFamily::Atomic),
            "hm" => Ok(ModelFamily::Hm),
            other => Err(Error::Config(format!("unknown model family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub prng: String,
    pub epochs_trained: f64,
}

impl RunInfo {
    pub fn new(seed: u64) -> Self {
        RunInfo {
            seed,
            prng: PRNG_ID.to_string(),
            epochs_trained: 0.0,
        }
    }
}

/// Conditional distribution `S(d|c)` over descriptions.
pub trait DescriptionModel: Sync {
    fn family(&self) -> ModelFamily;

    /// Natural-log probability of `d` given `c`; `-inf` when the model
    /// assigns zero probability.
    fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64>;

    fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore, max_len: usize) -> Description;

    fn predict_top1(&self, c: &ColorHsv, beam_width: usize) -> Description;

    /// Number of real-valued free parameters.
    fn count_params(&self) -> usize;

    /// Whether `d` can receive nonzero, non-degenerate probability: for the
    /// sequence model at least one token is in vocabulary, for the
    /// inventory-based models `d` is in the inventory.
    fn can_describe(&self, d: &Description) -> bool;
}

impl<T: Scalar> DescriptionModel for SequenceModel<T> {
    fn family(&self) -> ModelFamily {
        ModelFamily::Rnn
    }

    fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        SequenceModel::score_description(self, c, d)
    }

    fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore, max_len: usize) -> Description {
        let ids = sample_ids(self, c, rng, max_len);
        Description::from_tokens(decode_ids(&ids, &self.vocab))
            .unwrap_or_else(|_| Description::new(self.vocab.tokens()[self.content_start()].clone()).expect("nonempty token"))
    }

    fn predict_top1(&self, c: &ColorHsv, beam_width: usize) -> Description {
        let best = beam_search(self, c, beam_width, DEFAULT_MAX_LEN);
        Description::from_tokens(decode_ids(&best.ids, &self.vocab))
            .expect("beam search never returns an empty sequence")
    }

    fn count_params(&self) -> usize {
        self.params.num_params()
    }

    fn can_describe(&self, d: &Description) -> bool {
        SequenceModel::can_describe(self, d)
    }
}

impl<T: Scalar> DescriptionModel for AtomicModel<T> {
    fn family(&self) -> ModelFamily {
        ModelFamily::Atomic
    }

    fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        AtomicModel::score_description(self, c, d)
    }

    fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore, _max_len: usize) -> Description {
        AtomicModel::sample(self, c, rng)
    }

    fn predict_top1(&self, c: &ColorHsv, _beam_width: usize) -> Description {
        AtomicModel::predict_top1(self, c)
    }

    fn count_params(&self) -> usize {
        self.params.num_params()
    }

    fn can_describe(&self, d: &Description) -> bool {
        self.inventory.id(d).is_some()
    }
}

impl DescriptionModel for HistogramModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::Hm
    }

    fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        HistogramModel::score_description(self, c, d)
    }

    fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore, _max_len: usize) -> Description {
        HistogramModel::sample(self, c, rng)
    }

    fn predict_top1(&self, c: &ColorHsv, _beam_width: usize) -> Description {
        HistogramModel::predict_top1(self, c)
    }

    fn count_params(&self) -> usize {
        HistogramModel::count_params(self)
    }

    fn can_describe(&self, d: &Description) -> bool {
        self.inventory.id(d).is_some()
    }
}

/// A trained model of any family with `f32` parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Sequence(SequenceModel<f32>),
    Atomic(AtomicModel<f32>),
    Histogram(HistogramModel),
}

impl Model {
    fn inner(&self) -> &dyn DescriptionModel {
        match self {
            Model::Sequence(m) => m,
            Model::Atomic(m) => m,
            Model::Histogram(m) => m,
        }
    }
}

impl DescriptionModel for Model {
    fn family(&self) -> ModelFamily {
        self.inner().family()
    }

    fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        self.inner().score_description(c, d)
    }

    fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore, max_len: usize) -> Description {
        self.inner().sample(c, rng, max_len)
    }

    fn predict_top1(&self, c: &ColorHsv, beam_width: usize) -> Description {
        self.inner().predict_top1(c, beam_width)
    }

    fn count_params(&self) -> usize {
        self.inner().count_params()
    }

    fn can_describe(&self, d: &Description) -> bool {
        self.inner().can_describe(d)
    }
}
