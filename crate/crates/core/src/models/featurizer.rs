use rand::Rng;

use crate::corpus::ColorHsv;
use crate::features::{bucket_counts, bucket_index, fourier_features, raw_features, FeatureScheme};
use crate::kernel::{fill_normal, Scalar, Tensor};

/// Color featurizer as seen by a network: fixed features for `raw` and
/// `fourier`, learned per-region embeddings (concatenated over the three
/// resolutions) for `buckets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer<T> {
    pub scheme: FeatureScheme,
    /// One `[regions, dim]` table per resolution; empty unless `buckets`.
    pub tables: Vec<Tensor<T>>,
}

impl<T: Scalar> Featurizer<T> {
    pub fn new<R: Rng + ?Sized>(
        scheme: FeatureScheme,
        bucket_dim: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Self {
        let mut f = Self::zeros(scheme, bucket_dim);
        for t in &mut f.tables {
            fill_normal(t, sigma, rng);
        }
        f
    }

    pub fn zeros(scheme: FeatureScheme, bucket_dim: usize) -> Self {
        let tables = match scheme {
            FeatureScheme::Buckets => bucket_counts()
                .iter()
                .map(|&n| Tensor::zeros(&[n, bucket_dim]))
                .collect(),
            _ => Vec::new(),
        };
        Featurizer { scheme, tables }
    }

    pub fn zeros_like(&self) -> Self {
        Featurizer {
            scheme: self.scheme,
            tables: self.tables.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn bucket_dim(&self) -> usize {
        self.tables.first().map(|t| t.cols()).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        match self.scheme {
            FeatureScheme::Raw => 3,
            FeatureScheme::Fourier => 54,
            FeatureScheme::Buckets => 3 * self.bucket_dim(),
        }
    }

    pub fn features(&self, c: &ColorHsv) -> Vec<T> {
        match self.scheme {
            FeatureScheme::Raw => raw_features(c).iter().map(|&x| T::of(x)).collect(),
            FeatureScheme::Fourier => fourier_features(c).iter().map(|&x| T::of(x)).collect(),
            FeatureScheme::Buckets => {
                let idx = bucket_index(c).as_array();
                let mut out = Vec::with_capacity(self.dim());
                for (t, &i) in self.tables.iter().zip(&idx) {
                    out.extend_from_slice(t.row(i));
                }
                out
            }
        }
    }

    /// Routes `dfeat` into the embedding rows that produced the features.
    pub fn backward(&self, c: &ColorHsv, dfeat: &[T], grad: &mut Featurizer<T>) {
        if self.scheme != FeatureScheme::Buckets {
            return;
        }
        let d = self.bucket_dim();
        let idx = bucket_index(c).as_array();
        for (r, (g, &i)) in grad.tables.iter_mut().zip(&idx).enumerate() {
            for (a, &b) in g.row_mut(i).iter_mut().zip(&dfeat[r * d..(r + 1) * d]) {
                *a += b;
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.tables.iter().map(Tensor::len).sum()
    }

    pub(crate) fn push_tensors<'a>(&'a self, out: &mut Vec<(&'a str, &'a Tensor<T>)>) {
        const NAMES: [&str; 3] = ["buckets.coarse", "buckets.mid", "buckets.global"];
        for (n, t) in NAMES.iter().zip(&self.tables) {
            out.push((n, t));
        }
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<(&'a str, &'a mut Tensor<T>)>) {
        const NAMES: [&str; 3] = ["buckets.coarse", "buckets.mid", "buckets.global"];
        for (n, t) in NAMES.iter().zip(&mut self.tables) {
            out.push((n, t));
        }
    }
}
