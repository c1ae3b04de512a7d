//! LSTM sequence decoder: `S(d|c) = Π_i P(d_i | d_<i, c)` through `</s>`.
//!
//! Each step reads the previous token's embedding and, in
//! [`Conditioning::EveryStep`] mode, the color features concatenated in
//! front of it. In [`Conditioning::InitState`] mode the features instead
//! pass through a dense map that sets the initial hidden (`tanh`) and cell
//! (linear) states. The LSTM output goes through dropout, a dense layer and
//! a softmax over the whole vocabulary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{encode, ColorHsv, Description, Vocabulary, UNK_ID};
use crate::error::{Error, Result};
use crate::features::FeatureScheme;
use crate::kernel::{
    accumulate, fill_normal, log_softmax, softmax, softmax_backward_ce, Dense, DropoutMask,
    LstmCache, LstmParams, LstmState, Parameters, Scalar, Tensor,
};

use super::decode::StepDecoder;
use super::featurizer::Featurizer;
use super::RunInfo;

/// Examples per work unit when computing a minibatch gradient. Fixed so
/// that the reduction order does not depend on the thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    EveryStep,
    InitState,
}

impl std::str::FromStr for Conditioning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "every-step" => Ok(Conditioning::EveryStep),
            "init-state" => Ok(Conditioning::InitState),
            other => Err(Error::Config(format!("unknown conditioning mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Conditioning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Conditioning::EveryStep => "every-step",
            Conditioning::InitState => "init-state",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub features: FeatureScheme,
    pub embedding_dim: usize,
    pub hidden: usize,
    pub bucket_dim: usize,
    pub conditioning: Conditioning,
    pub dropout: f64,
    pub embedding_sigma: f64,
    pub lstm_sigma: f64,
    pub forget_bias: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            features: FeatureScheme::Fourier,
            embedding_dim: 20,
            hidden: 20,
            bucket_dim: 10,
            conditioning: Conditioning::EveryStep,
            dropout: 0.2,
            embedding_sigma: 0.01,
            lstm_sigma: 0.1,
            forget_bias: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceParams<T> {
    pub feat: Featurizer<T>,
    /// `[vocab, embedding_dim]`
    pub token_emb: Tensor<T>,
    /// Features → `[h0; c0]`, present only in init-state mode.
    pub init: Option<Dense<T>>,
    pub lstm: LstmParams<T>,
    /// `[vocab, hidden]`
    pub out: Dense<T>,
}

impl<T: Scalar> SequenceParams<T> {
    pub fn zeros_like(&self) -> Self {
        SequenceParams {
            feat: self.feat.zeros_like(),
            token_emb: self.token_emb.zeros_like(),
            init: self.init.as_ref().map(Dense::zeros_like),
            lstm: self.lstm.zeros_like(),
            out: self.out.zeros_like(),
        }
    }
}

impl<T: Scalar> Parameters<T> for SequenceParams<T> {
    fn tensors(&self) -> Vec<(&str, &Tensor<T>)> {
        let mut v = Vec::new();
        self.feat.push_tensors(&mut v);
        v.push(("token_emb", &self.token_emb));
        if let Some(init) = &self.init {
            v.push(("init.w", &init.w));
            v.push(("init.b", &init.b));
        }
        v.push(("lstm.w_x", &self.lstm.w_x));
        v.push(("lstm.w_h", &self.lstm.w_h));
        v.push(("lstm.peep", &self.lstm.peep));
        v.push(("lstm.b", &self.lstm.b));
        v.push(("out.w", &self.out.w));
        v.push(("out.b", &self.out.b));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&str, &mut Tensor<T>)> {
        let mut v = Vec::new();
        self.feat.push_tensors_mut(&mut v);
        v.push(("token_emb", &mut self.token_emb));
        if let Some(init) = &mut self.init {
            v.push(("init.w", &mut init.w));
            v.push(("init.b", &mut init.b));
        }
        v.push(("lstm.w_x", &mut self.lstm.w_x));
        v.push(("lstm.w_h", &mut self.lstm.w_h));
        v.push(("lstm.peep", &mut self.lstm.peep));
        v.push(("lstm.b", &mut self.lstm.b));
        v.push(("out.w", &mut self.out.w));
        v.push(("out.b", &mut self.out.b));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel<T> {
    pub config: SequenceConfig,
    pub vocab: Vocabulary,
    pub params: SequenceParams<T>,
    pub run: RunInfo,
}

/// Token sequences padded to a common length. Positions at or beyond
/// `lengths[b]` are padding and contribute nothing to loss or gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub colors: Vec<ColorHsv>,
    pub ids: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
}

impl SequenceBatch {
    pub fn new(colors: Vec<ColorHsv>, seqs: Vec<Vec<usize>>, pad_id: usize) -> Self {
        let max = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let lengths = seqs.iter().map(Vec::len).collect();
        let ids = seqs
            .into_iter()
            .map(|mut s| {
                s.resize(max, pad_id);
                s
            })
            .collect();
        SequenceBatch {
            colors,
            ids,
            lengths,
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

struct Step<T> {
    cache: LstmCache<T>,
    mask: Option<DropoutMask<T>>,
    dropped: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> SequenceModel<T> {
    /// Fresh parameters: embeddings `N(0, σ_emb²)`, LSTM weights
    /// `N(0, σ_lstm²)` with forget bias 5, dense layers Glorot-uniform.
    pub fn init(config: SequenceConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        if config.hidden == 0 || config.embedding_dim == 0 {
            return Err(Error::Config("hidden and embedding sizes must be ≥ 1".into()));
        }
        if config.features == FeatureScheme::Buckets && config.bucket_dim == 0 {
            return Err(Error::Config("bucket embedding size must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feat = Featurizer::new(
            config.features,
            config.bucket_dim,
            config.embedding_sigma,
            &mut rng,
        );
        let mut token_emb = Tensor::zeros(&[vocab.len(), config.embedding_dim]);
        fill_normal(&mut token_emb, config.embedding_sigma, &mut rng);
        let input = match config.conditioning {
            Conditioning::EveryStep => feat.dim() + config.embedding_dim,
            Conditioning::InitState => config.embedding_dim,
        };
        let mut lstm = LstmParams::init(input, config.hidden, config.lstm_sigma, &mut rng);
        lstm.set_forget_bias(config.forget_bias);
        let init = match config.conditioning {
            Conditioning::InitState => Some(Dense::glorot(feat.dim(), 2 * config.hidden, &mut rng)),
            Conditioning::EveryStep => None,
        };
        let out = Dense::glorot(config.hidden, vocab.len(), &mut rng);
        Ok(SequenceModel {
            params: SequenceParams {
                feat,
                token_emb,
                init,
                lstm,
                out,
            },
            config,
            vocab,
            run: RunInfo::new(seed),
        })
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn encode(&self, d: &Description) -> Vec<usize> {
        encode(&d.tokens, &self.vocab)
    }

    fn initial_state(&self, feat: &[T]) -> (LstmState<T>, Option<Vec<T>>) {
        let hd = self.hidden();
        match &self.params.init {
            Some(init) => {
                let mut z = vec![T::zero(); 2 * hd];
                init.forward_into(feat, &mut z);
                let state = LstmState {
                    h: z[..hd].iter().map(|x| x.tanh()).collect(),
                    c: z[hd..].to_vec(),
                };
                (state, Some(z))
            }
            None => (LstmState::zeros(hd), None),
        }
    }

    fn step_input(&self, feat: &[T], token: usize) -> Vec<T> {
        let emb = self.params.token_emb.row(token);
        match self.config.conditioning {
            Conditioning::EveryStep => {
                let mut x = Vec::with_capacity(feat.len() + emb.len());
                x.extend_from_slice(feat);
                x.extend_from_slice(emb);
                x
            }
            Conditioning::InitState => emb.to_vec(),
        }
    }

    fn logits(&self, h: &[T]) -> Vec<T> {
        let mut z = vec![T::zero(); self.vocab.len()];
        self.params.out.forward_into(h, &mut z);
        z
    }

    /// Natural-log probability of an id sequence `[<s>, …, </s>]` with
    /// dropout disabled.
    pub fn log_prob_ids(&self, c: &ColorHsv, ids: &[usize]) -> f64 {
        let feat = self.params.feat.features(c);
        let (mut state, _) = self.initial_state(&feat);
        let mut total = 0.0;
        for w in ids.windows(2) {
            let x = self.step_input(&feat, w[0]);
            let cache = self.params.lstm.step_unchecked(&x, &state.h, &state.c);
            let lp = log_softmax(&self.logits(&cache.h));
            total += lp[w[1]].f64();
            state = LstmState {
                h: cache.h,
                c: cache.c,
            };
        }
        total
    }

    pub fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        if d.tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(self.log_prob_ids(c, &self.encode(d)))
    }

    /// Per-step next-token distribution after feeding `prefix` (which starts
    /// with `<s>`).
    pub fn next_distribution(&self, c: &ColorHsv, prefix: &[usize]) -> Vec<f64> {
        let mut st = self.start(c);
        let mut lp = Vec::new();
        for &tok in prefix {
            let (next, l) = self.advance(&st, tok);
            st = next;
            lp = l;
        }
        lp.into_iter().map(f64::exp).collect()
    }

    /// Sum of per-token NLL of one sequence; gradients (scaled by `weight`)
    /// are accumulated into `grad`.
    fn example_gradient(
        &self,
        c: &ColorHsv,
        ids: &[usize],
        weight: T,
        mut rng: Option<&mut ChaCha8Rng>,
        grad: &mut SequenceParams<T>,
    ) -> f64 {
        let hd = self.hidden();
        let feat = self.params.feat.features(c);
        let fdim = feat.len();
        let (mut state, init_z) = self.initial_state(&feat);
        let mut steps: Vec<Step<T>> = Vec::with_capacity(ids.len());
        let mut loss = 0.0;
        for w in ids.windows(2) {
            let x = self.step_input(&feat, w[0]);
            let cache = self.params.lstm.step_unchecked(&x, &state.h, &state.c);
            let mask = rng
                .as_deref_mut()
                .filter(|_| self.config.dropout > 0.0)
                .map(|r| DropoutMask::sample(hd, self.config.dropout, r));
            let dropped = match &mask {
                Some(m) => m.apply(&cache.h),
                None => cache.h.clone(),
            };
            let probs = softmax(&self.logits(&dropped));
            loss -= probs[w[1]].f64().ln();
            state = cache.state();
            steps.push(Step {
                cache,
                mask,
                dropped,
                probs,
            });
        }

        let mut dfeat = vec![T::zero(); fdim];
        let mut dh_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); hd];
        for (t, step) in steps.iter().enumerate().rev() {
            let dz = softmax_backward_ce(&step.probs, ids[t + 1], weight);
            let mut dh = vec![T::zero(); hd];
            self.params
                .out
                .backward(&step.dropped, &dz, &mut grad.out, Some(&mut dh));
            if let Some(m) = &step.mask {
                m.apply_in_place(&mut dh);
            }
            for (a, &b) in dh.iter_mut().zip(&dh_next) {
                *a += b;
            }
            let back = self
                .params
                .lstm
                .backward(&step.cache, &dh, &dc_next, &mut grad.lstm);
            let demb = match self.config.conditioning {
                Conditioning::EveryStep => {
                    for (a, &b) in dfeat.iter_mut().zip(&back.dx[..fdim]) {
                        *a += b;
                    }
                    &back.dx[fdim..]
                }
                Conditioning::InitState => &back.dx[..],
            };
            for (a, &b) in grad.token_emb.row_mut(ids[t]).iter_mut().zip(demb) {
                *a += b;
            }
            dh_next = back.dh_prev;
            dc_next = back.dc_prev;
        }
        if let (Some(init), Some(z), Some(ginit)) =
            (&self.params.init, &init_z, grad.init.as_mut())
        {
            let mut dz = vec![T::zero(); 2 * hd];
            for k in 0..hd {
                let h0 = z[k].tanh();
                dz[k] = dh_next[k] * (T::one() - h0 * h0);
                dz[hd + k] = dc_next[k];
            }
            init.backward(&feat, &dz, ginit, Some(&mut dfeat));
        }
        self.params.feat.backward(c, &dfeat, &mut grad.feat);
        loss
    }

    /// Mean over the batch of each description's summed token NLL, and its
    /// exact gradient. With `dropout_seed` set, dropout is active and the
    /// mask for example `b` is drawn from stream `b` of that seed.
    pub fn gradient(
        &self,
        batch: &SequenceBatch,
        dropout_seed: Option<u64>,
        deterministic: bool,
    ) -> Result<(f64, SequenceParams<T>)> {
        if batch.is_empty() {
            return Err(Error::Shape("empty minibatch".into()));
        }
        let weight = T::of(1.0 / batch.len() as f64);
        let run_chunk = |chunk: usize| {
            let mut grad = self.params.zeros_like();
            let mut loss = 0.0;
            let lo = chunk * GRAD_CHUNK;
            let hi = (lo + GRAD_CHUNK).min(batch.len());
            for b in lo..hi {
                let ids = &batch.ids[b][..batch.lengths[b]];
                let mut rng = dropout_seed.map(|s| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(b as u64);
                    r
                });
                loss += self.example_gradient(&batch.colors[b], ids, weight, rng.as_mut(), &mut grad);
            }
            (loss, grad)
        };
        let nchunks = batch.len().div_ceil(GRAD_CHUNK);
        let (loss, grad) = if deterministic {
            let parts: Vec<(f64, SequenceParams<T>)> =
                (0..nchunks).into_par_iter().map(run_chunk).collect();
            let mut it = parts.into_iter();
            let (mut loss, mut grad) = it.next().expect("nonempty batch");
            for (l, g) in it {
                loss += l;
                accumulate(&mut grad, &g);
            }
            (loss, grad)
        } else {
            (0..nchunks)
                .into_par_iter()
                .map(run_chunk)
                .reduce_with(|(la, mut ga), (lb, gb)| {
                    accumulate(&mut ga, &gb);
                    (la + lb, ga)
                })
                .expect("nonempty batch")
        };
        let loss = loss / batch.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite batch loss {loss}")));
        }
        Ok((loss, grad))
    }

    pub fn cast<U: Scalar>(&self) -> SequenceModel<U> {
        let p = &self.params;
        SequenceModel {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: SequenceParams {
                feat: Featurizer {
                    scheme: p.feat.scheme,
                    tables: p.feat.tables.iter().map(Tensor::cast).collect(),
                },
                token_emb: p.token_emb.cast(),
                init: p.init.as_ref().map(|d| Dense {
                    w: d.w.cast(),
                    b: d.b.cast(),
                }),
                lstm: LstmParams {
                    w_x: p.lstm.w_x.cast(),
                    w_h: p.lstm.w_h.cast(),
                    peep: p.lstm.peep.cast(),
                    b: p.lstm.b.cast(),
                },
                out: Dense {
                    w: p.out.w.cast(),
                    b: p.out.b.cast(),
                },
            },
            run: self.run.clone(),
        }
    }

    /// Whether generation can produce anything from `d`'s tokens: at least
    /// one token must be in the vocabulary.
    pub fn can_describe(&self, d: &Description) -> bool {
        d.tokens.iter().any(|t| self.vocab.id(t).is_some())
    }

    pub(crate) fn content_start(&self) -> usize {
        UNK_ID + 1
    }
}

/// Decoder state: the color features plus the LSTM state.
#[derive(Debug, Clone)]
pub struct SequenceState<T> {
    feat: std::sync::Arc<Vec<T>>,
    lstm: LstmState<T>,
}

impl<T: Scalar> StepDecoder for SequenceModel<T> {
    type State = SequenceState<T>;

    fn start(&self, c: &ColorHsv) -> Self::State {
        let feat = self.params.feat.features(c);
        let (lstm, _) = self.initial_state(&feat);
        SequenceState {
            feat: std::sync::Arc::new(feat),
            lstm,
        }
    }

    fn advance(&self, state: &Self::State, token: usize) -> (Self::State, Vec<f64>) {
        let x = self.step_input(&state.feat, token);
        let cache = self
            .params
            .lstm
            .step_unchecked(&x, &state.lstm.h, &state.lstm.c);
        let lp = log_softmax(&self.logits(&cache.h))
            .into_iter()
            .map(Scalar::f64)
            .collect();
        (
            SequenceState {
                feat: state.feat.clone(),
                lstm: LstmState {
                    h: cache.h,
                    c: cache.c,
                },
            },
            lp,
        )
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}
