//! Feed-forward baseline that treats each full description as one class:
//! features → dense+ReLU → dense → dense+softmax over every distinct
//! training description.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ColorHsv, Dataset, Description};
use crate::error::{Error, Result};
use crate::features::FeatureScheme;
use crate::kernel::{
    accumulate, log_softmax, softmax, softmax_backward_ce, Dense, DropoutMask, Parameters, Scalar,
    Tensor,
};

use super::featurizer::Featurizer;
use super::RunInfo;

const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicConfig {
    pub features: FeatureScheme,
    pub hidden1: usize,
    pub hidden2: usize,
    pub bucket_dim: usize,
    pub dropout: f64,
    pub embedding_sigma: f64,
}

impl Default for AtomicConfig {
    fn default() -> Self {
        AtomicConfig {
            features: FeatureScheme::Fourier,
            hidden1: 20,
            hidden2: 20,
            bucket_dim: 10,
            dropout: 0.2,
            embedding_sigma: 0.01,
        }
    }
}

/// Distinct descriptions ordered by descending training count, ties
/// lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl Inventory {
    pub fn from_entries(entries: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate inventory entry {e:?}")));
            }
        }
        Ok(Inventory { entries, index })
    }

    pub fn build(train: &Dataset) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for item in &train.items {
            *counts.entry(item.description.normalized()).or_default() += 1;
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(ranked.into_iter().map(|(d, _)| d).collect())
            .expect("keys of a map are distinct")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, d: &Description) -> Option<usize> {
        self.index.get(&d.normalized()).copied()
    }

    pub fn description(&self, id: usize) -> Description {
        Description::new(self.entries[id].clone()).expect("inventory entries are nonempty")
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicParams<T> {
    pub feat: Featurizer<T>,
    pub l1: Dense<T>,
    pub l2: Dense<T>,
    pub out: Dense<T>,
}

impl<T: Scalar> AtomicParams<T> {
    fn zeros_like(&self) -> Self {
        AtomicParams {
            feat: self.feat.zeros_like(),
            l1: self.l1.zeros_like(),
            l2: self.l2.zeros_like(),
            out: self.out.zeros_like(),
        }
    }
}

impl<T: Scalar> Parameters<T> for AtomicParams<T> {
    fn tensors(&self) -> Vec<(&str, &Tensor<T>)> {
        let mut v = Vec::new();
        self.feat.push_tensors(&mut v);
        v.extend([
            ("l1.w", &self.l1.w),
            ("l1.b", &self.l1.b),
            ("l2.w", &self.l2.w),
            ("l2.b", &self.l2.b),
            ("out.w", &self.out.w),
            ("out.b", &self.out.b),
        ]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&str, &mut Tensor<T>)> {
        let mut v = Vec::new();
        self.feat.push_tensors_mut(&mut v);
        v.push(("l1.w", &mut self.l1.w));
        v.push(("l1.b", &mut self.l1.b));
        v.push(("l2.w", &mut self.l2.w));
        v.push(("l2.b", &mut self.l2.b));
        v.push(("out.w", &mut self.out.w));
        v.push(("out.b", &mut self.out.b));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicModel<T> {
    pub config: AtomicConfig,
    pub inventory: Inventory,
    pub params: AtomicParams<T>,
    pub run: RunInfo,
}

impl<T: Scalar> AtomicModel<T> {
    pub fn init(config: AtomicConfig, inventory: Inventory, seed: u64) -> Result<Self> {
        if inventory.is_empty() {
            return Err(Error::Config("atomic model needs a nonempty inventory".into()));
        }
        if config.hidden1 == 0 || config.hidden2 == 0 {
            return Err(Error::Config("hidden sizes must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feat = Featurizer::new(
            config.features,
            config.bucket_dim,
            config.embedding_sigma,
            &mut rng,
        );
        let l1 = Dense::glorot(feat.dim(), config.hidden1, &mut rng);
        let l2 = Dense::glorot(config.hidden1, config.hidden2, &mut rng);
        let out = Dense::glorot(config.hidden2, inventory.len(), &mut rng);
        Ok(AtomicModel {
            params: AtomicParams { feat, l1, l2, out },
            config,
            inventory,
            run: RunInfo::new(seed),
        })
    }

    fn hidden(&self, c: &ColorHsv) -> Vec<T> {
        let f = self.params.feat.features(c);
        let mut a = vec![T::zero(); self.config.hidden1];
        self.params.l1.forward_into(&f, &mut a);
        a.iter_mut().for_each(|x| *x = x.max(T::zero()));
        let mut b = vec![T::zero(); self.config.hidden2];
        self.params.l2.forward_into(&a, &mut b);
        b
    }

    /// Natural-log class probabilities for color `c`.
    pub fn log_probs(&self, c: &ColorHsv) -> Vec<f64> {
        let h = self.hidden(c);
        let mut z = vec![T::zero(); self.inventory.len()];
        self.params.out.forward_into(&h, &mut z);
        log_softmax(&z).into_iter().map(Scalar::f64).collect()
    }

    /// `-inf` for descriptions outside the training inventory.
    pub fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        if d.tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(match self.inventory.id(d) {
            Some(id) => self.log_probs(c)[id],
            None => f64::NEG_INFINITY,
        })
    }

    pub fn predict_top1(&self, c: &ColorHsv) -> Description {
        let lp = self.log_probs(c);
        let mut best = 0;
        for (i, &l) in lp.iter().enumerate() {
            if l > lp[best] {
                best = i;
            }
        }
        self.inventory.description(best)
    }

    pub fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore) -> Description {
        let lp = self.log_probs(c);
        let mut u = rng.random::<f64>();
        for (i, &l) in lp.iter().enumerate() {
            let p = l.exp();
            if u < p {
                return self.inventory.description(i);
            }
            u -= p;
        }
        self.inventory.description(lp.len() - 1)
    }

    fn example_gradient(
        &self,
        c: &ColorHsv,
        target: usize,
        weight: T,
        mut rng: Option<&mut ChaCha8Rng>,
        grad: &mut AtomicParams<T>,
    ) -> f64 {
        let p = &self.params;
        let rate = self.config.dropout;
        let f = p.feat.features(c);
        let mut pre1 = vec![T::zero(); self.config.hidden1];
        p.l1.forward_into(&f, &mut pre1);
        let mut a: Vec<T> = pre1.iter().map(|x| x.max(T::zero())).collect();
        let m1 = rng
            .as_deref_mut()
            .filter(|_| rate > 0.0)
            .map(|r| DropoutMask::sample(a.len(), rate, r));
        if let Some(m) = &m1 {
            m.apply_in_place(&mut a);
        }
        let mut b = vec![T::zero(); self.config.hidden2];
        p.l2.forward_into(&a, &mut b);
        let m2 = rng
            .filter(|_| rate > 0.0)
            .map(|r| DropoutMask::sample(b.len(), rate, r));
        if let Some(m) = &m2 {
            m.apply_in_place(&mut b);
        }
        let mut z = vec![T::zero(); self.inventory.len()];
        p.out.forward_into(&b, &mut z);
        let probs = softmax(&z);
        let loss = -probs[target].f64().ln();

        let dz = softmax_backward_ce(&probs, target, weight);
        let mut db = vec![T::zero(); b.len()];
        p.out.backward(&b, &dz, &mut grad.out, Some(&mut db));
        if let Some(m) = &m2 {
            m.apply_in_place(&mut db);
        }
        let mut da = vec![T::zero(); a.len()];
        p.l2.backward(&a, &db, &mut grad.l2, Some(&mut da));
        if let Some(m) = &m1 {
            m.apply_in_place(&mut da);
        }
        for (d, &x) in da.iter_mut().zip(&pre1) {
            if x <= T::zero() {
                *d = T::zero();
            }
        }
        let mut df = vec![T::zero(); f.len()];
        p.l1.backward(&f, &da, &mut grad.l1, Some(&mut df));
        p.feat.backward(c, &df, &mut grad.feat);
        loss
    }

    /// Mean class cross-entropy over `(color, class id)` pairs and its
    /// gradient; dropout streams as in the sequence model.
    pub fn gradient(
        &self,
        batch: &[(ColorHsv, usize)],
        dropout_seed: Option<u64>,
        deterministic: bool,
    ) -> Result<(f64, AtomicParams<T>)> {
        if batch.is_empty() {
            return Err(Error::Shape("empty minibatch".into()));
        }
        let weight = T::of(1.0 / batch.len() as f64);
        let run_chunk = |chunk: usize| {
            let mut grad = self.params.zeros_like();
            let mut loss = 0.0;
            let lo = chunk * GRAD_CHUNK;
            for (b, (c, target)) in batch.iter().enumerate().skip(lo).take(GRAD_CHUNK) {
                let mut rng = dropout_seed.map(|s| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(b as u64);
                    r
                });
                loss += self.example_gradient(c, *target, weight, rng.as_mut(), &mut grad);
            }
            (loss, grad)
        };
        let nchunks = batch.len().div_ceil(GRAD_CHUNK);
        let (loss, grad) = if deterministic {
            let parts: Vec<_> = (0..nchunks).into_par_iter().map(run_chunk).collect();
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
}
