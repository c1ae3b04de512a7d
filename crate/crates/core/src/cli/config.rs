//! Run configuration assembled from defaults, a `key=value` file and
//! command-line flags, in increasing order of precedence.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::corpus::ColorSpace;
use crate::error::{Error, Result};
use crate::models::{ModelFamily, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub family: ModelFamily,
    /// Corpus manifest.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Color space of the corpus files; overrides the manifest's.
    pub space: Option<ColorSpace>,
    pub training: TrainingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: ModelFamily::Rnn,
            data: None,
            out: None,
            space: None,
            training: TrainingConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

impl RunConfig {
    /// Sets one key. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let t = &mut self.training;
        let path = || {
            let p = PathBuf::from(value);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        match key.as_str() {
            "family" => self.family = value.parse()?,
            "data" => self.data = Some(path()),
            "out" => self.out = Some(path()),
            "space" => self.space = Some(value.parse()?),
            "features" => t.features = value.parse()?,
            "conditioning" => t.conditioning = value.parse()?,
            "hidden" => t.hidden = parse(&key, value)?,
            "embedding_dim" => t.embedding_dim = parse(&key, value)?,
            "bucket_dim" => t.bucket_dim = parse(&key, value)?,
            "dropout" => t.dropout = parse(&key, value)?,
            "embedding_sigma" => t.embedding_sigma = parse(&key, value)?,
            "lstm_sigma" => t.lstm_sigma = parse(&key, value)?,
            "forget_bias" => t.forget_bias = parse(&key, value)?,
            "learning_rate" => t.learning_rate = parse(&key, value)?,
            "batch_size" => t.batch_size = parse(&key, value)?,
            "max_epochs" => t.max_epochs = parse(&key, value)?,
            "patience" => t.patience = parse(&key, value)?,
            "evals_per_epoch" => t.evals_per_epoch = parse(&key, value)?,
            "seed" => t.seed = parse(&key, value)?,
            "deterministic" => t.deterministic = parse_bool(&key, value)?,
            "smoothing" => t.smoothing = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `path`; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1))
            })?;
            self.set(k, v, base)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(())
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key `data` (corpus manifest)".into()))
    }
}
