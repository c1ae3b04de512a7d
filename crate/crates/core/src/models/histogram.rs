//! Histogram ("HM-like") baseline: per-bucket description counts at the
//! 90×10×10, 45×5×5 and 1×1×1 resolutions with strict backoff to the finest
//! nonempty bucket and additive smoothing over the description inventory.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::corpus::{ColorHsv, Dataset, Description};
use crate::error::{Error, Result};
use crate::features::{grid_cell, BUCKET_RESOLUTIONS};

use super::atomic::Inventory;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketCounts {
    pub total: u64,
    /// inventory id → count
    pub counts: BTreeMap<usize, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramModel {
    pub inventory: Inventory,
    pub smoothing: f64,
    /// One sparse bucket map per resolution, finest first.
    pub levels: Vec<BTreeMap<usize, BucketCounts>>,
}

impl HistogramModel {
    pub fn fit(train: &Dataset, smoothing: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Corpus("cannot fit a histogram to an empty dataset".into()));
        }
        if smoothing.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config("smoothing constant must be > 0".into()));
        }
        let inventory = Inventory::build(train);
        let mut m = HistogramModel {
            inventory,
            smoothing,
            levels: vec![BTreeMap::new(); BUCKET_RESOLUTIONS.len()],
        };
        for item in &train.items {
            let id = m.inventory.id(&item.description).expect("built from train");
            m.add(&item.color, id, 1);
        }
        Ok(m)
    }

    pub fn empty(inventory: Inventory, smoothing: f64) -> Self {
        HistogramModel {
            inventory,
            smoothing,
            levels: vec![BTreeMap::new(); BUCKET_RESOLUTIONS.len()],
        }
    }

    pub(crate) fn add(&mut self, c: &ColorHsv, id: usize, n: u64) {
        for (level, res) in self.levels.iter_mut().zip(BUCKET_RESOLUTIONS) {
            let b = level.entry(grid_cell(c, res)).or_default();
            b.total += n;
            *b.counts.entry(id).or_default() += n;
        }
    }

    /// Adds counts for one bucket at one resolution (used when loading).
    pub(crate) fn insert_count(&mut self, level: usize, bucket: usize, id: usize, n: u64) {
        let b = self.levels[level].entry(bucket).or_default();
        b.total += n;
        *b.counts.entry(id).or_default() += n;
    }

    /// The finest nonempty bucket for `c`, with its resolution level.
    pub fn bucket_for(&self, c: &ColorHsv) -> Option<(usize, &BucketCounts)> {
        self.levels
            .iter()
            .zip(BUCKET_RESOLUTIONS)
            .enumerate()
            .find_map(|(lvl, (level, res))| {
                level
                    .get(&grid_cell(c, res))
                    .filter(|b| b.total > 0)
                    .map(|b| (lvl, b))
            })
    }

    fn smoothed(&self, bucket: Option<&BucketCounts>, id: Option<usize>) -> f64 {
        let (n, total) = match bucket {
            Some(b) => (
                id.and_then(|i| b.counts.get(&i)).copied().unwrap_or(0),
                b.total,
            ),
            None => (0, 0),
        };
        (n as f64 + self.smoothing) / (total as f64 + self.smoothing * self.inventory.len() as f64)
    }

    /// `P(d | c)`; descriptions outside the inventory get the smoothing
    /// floor of the chosen bucket.
    pub fn probability(&self, c: &ColorHsv, d: &Description) -> f64 {
        let bucket = self.bucket_for(c).map(|(_, b)| b);
        self.smoothed(bucket, self.inventory.id(d))
    }

    pub fn distribution(&self, c: &ColorHsv) -> Vec<f64> {
        let bucket = self.bucket_for(c).map(|(_, b)| b);
        (0..self.inventory.len())
            .map(|i| self.smoothed(bucket, Some(i)))
            .collect()
    }

    pub fn score_description(&self, c: &ColorHsv, d: &Description) -> Result<f64> {
        if d.tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(self.probability(c, d).ln())
    }

    pub fn predict_top1(&self, c: &ColorHsv) -> Description {
        let best = self
            .bucket_for(c)
            .and_then(|(_, b)| {
                b.counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(&id, _)| id)
            })
            .unwrap_or(0);
        self.inventory.description(best)
    }

    pub fn sample(&self, c: &ColorHsv, rng: &mut dyn RngCore) -> Description {
        let dist = self.distribution(c);
        let mut u = rng.random::<f64>();
        for (i, p) in dist.iter().enumerate() {
            if u < *p {
                return self.inventory.description(i);
            }
            u -= p;
        }
        self.inventory.description(dist.len() - 1)
    }

    /// Free probabilities: `inventory − 1` per nonempty bucket over all
    /// resolutions.
    pub fn count_params(&self) -> usize {
        let nonempty: usize = self
            .levels
            .iter()
            .map(|l| l.values().filter(|b| b.total > 0).count())
            .sum();
        nonempty * self.inventory.len().saturating_sub(1)
    }
}
