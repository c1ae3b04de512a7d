//! Per-description perplexity, AIC, recall@1 accuracy and the paired
//! approximate randomization test.
//!
//! Log-likelihoods are kept in bits: `ℓ = −Σ log₂ S(d|c)`, perplexity is
//! `2^(ℓ/N)` and `AIC = 2ℓ + 2k`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::models::{DescriptionModel, ModelFamily};

pub const DEFAULT_ROUNDS: usize = 10_000;

/// Per-item `log₂ S(d|c)` in dataset order.
pub fn log2_probs<M: DescriptionModel + ?Sized>(model: &M, data: &Dataset) -> Result<Vec<f64>> {
    data.items
        .par_iter()
        .map(|it| {
            model
                .score_description(&it.color, &it.description)
                .map(|lp| lp / std::f64::consts::LN_2)
        })
        .collect()
}

/// Total negative log₂-likelihood over the items with nonzero probability,
/// and the indices of the zero-probability items. Summed left to right.
pub fn nll_bits(log2: &[f64]) -> (f64, Vec<usize>) {
    let mut ell = 0.0;
    let mut zeros = Vec::new();
    for (i, &l) in log2.iter().enumerate() {
        if l == f64::NEG_INFINITY {
            zeros.push(i);
        } else {
            ell -= l;
        }
    }
    (ell, zeros)
}

/// `2^(ℓ/N)`. Zero-probability items are an error unless `exclude_zero`,
/// in which case they are dropped from both ℓ and N.
pub fn perplexity_from_log2(log2: &[f64], exclude_zero: bool) -> Result<f64> {
    let (ell, zeros) = nll_bits(log2);
    if !zeros.is_empty() && !exclude_zero {
        return Err(Error::ZeroProbability {
            count: zeros.len(),
            first: zeros[0],
        });
    }
    let n = log2.len() - zeros.len();
    if n == 0 {
        return Err(Error::Numeric("perplexity of an empty set".into()));
    }
    if log2.iter().any(|l| l.is_nan()) {
        return Err(Error::Numeric("NaN log-probability".into()));
    }
    Ok((ell / n as f64).exp2())
}

pub fn perplexity_of<M: DescriptionModel + ?Sized>(
    model: &M,
    data: &Dataset,
    exclude_zero: bool,
) -> Result<f64> {
    perplexity_from_log2(&log2_probs(model, data)?, exclude_zero)
}

/// `2ℓ + 2k` with ℓ the total negative log₂-likelihood.
pub fn aic(ell_bits: f64, k: usize) -> f64 {
    2.0 * ell_bits + 2.0 * k as f64
}

/// Whether the model's top-1 prediction equals each reference after token
/// normalization.
pub fn top1_hits<M: DescriptionModel + ?Sized>(
    model: &M,
    data: &Dataset,
    beam_width: usize,
) -> Vec<bool> {
    data.items
        .par_iter()
        .map(|it| model.predict_top1(&it.color, beam_width).tokens == it.description.tokens)
        .collect()
}

/// Percentage of hits, in `[0, 100]`.
pub fn accuracy_from_hits(hits: &[bool]) -> f64 {
    if hits.is_empty() {
        return 0.0;
    }
    100.0 * hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

pub fn accuracy<M: DescriptionModel + ?Sized>(model: &M, data: &Dataset, beam_width: usize) -> f64 {
    accuracy_from_hits(&top1_hits(model, data, beam_width))
}

/// Paired approximate randomization test on the mean difference.
///
/// Each of `rounds` permutations swaps every pair independently with
/// probability ½; the two-sided p-value is
/// `(#{|t*| ≥ |t|} + 1) / (rounds + 1)`.
pub fn permutation_test(a: &[f64], b: &[f64], rounds: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Numeric("permutation test on empty vectors".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite paired score".into()));
    }
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum::<f64>() / n;
    let tol = 1e-12 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..rounds {
        let mut s = 0.0;
        for &d in &diffs {
            s += if rng.random::<bool>() { -d } else { d };
        }
        if (s / n).abs() + tol >= observed {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (rounds + 1) as f64)
}

/// Evaluation of one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub family: ModelFamily,
    pub n: usize,
    pub beam_width: usize,
    pub perplexity: f64,
    /// Total negative log₂-likelihood.
    pub ell_bits: f64,
    pub k: usize,
    pub aic: f64,
    /// Percentage.
    pub accuracy: f64,
    /// Items excluded from ℓ and perplexity for having zero probability.
    pub zero_probability: usize,
    /// `log₂ S(d|c)` per item; `null` for zero probability.
    #[serde(with = "opt_neg_inf")]
    pub log2_probs: Vec<f64>,
    pub hits: Vec<bool>,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

mod opt_neg_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| if x.is_finite() { Some(x) } else { None })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Per-item scores for significance testing: `"logprob"` or
    /// `"accuracy"`.
    pub fn per_item(&self, metric: &str) -> Result<Vec<f64>> {
        match metric {
            "logprob" | "perplexity" => Ok(self.log2_probs.clone()),
            "accuracy" => Ok(self.hits.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect()),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Scores every item, runs top-1 prediction, and assembles the report.
pub fn evaluate<M: DescriptionModel + ?Sized>(
    model: &M,
    data: &Dataset,
    beam_width: usize,
    exclude_zero: bool,
) -> Result<EvalReport> {
    let log2 = log2_probs(model, data)?;
    let perplexity = perplexity_from_log2(&log2, exclude_zero)?;
    let (ell_bits, zeros) = nll_bits(&log2);
    let hits = top1_hits(model, data, beam_width);
    let k = model.count_params();
    Ok(EvalReport {
        split: data.split.to_string(),
        family: model.family(),
        n: data.len(),
        beam_width,
        perplexity,
        ell_bits,
        k,
        aic: aic(ell_bits, k),
        accuracy: accuracy_from_hits(&hits),
        zero_probability: zeros.len(),
        log2_probs: log2,
        hits,
        created: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}
