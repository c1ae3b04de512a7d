//! Color/description pairs: parsing, tokenization, vocabulary and splits.
//!
//! Corpus files are UTF-8 delimited text with four columns
//! (`h,s,v,description` or `h,s,l,description`). The delimiter is a tab if
//! the first line contains one, otherwise a comma. A header line is optional
//! and is recognized by a non-numeric first field.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::hsl_to_hsv;

pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

pub const START_ID: usize = 0;
pub const END_ID: usize = 1;
pub const UNK_ID: usize = 2;

/// A color in HSV: hue in degrees `[0, 360)`, saturation and value in
/// percent `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorHsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// A color in HSL with the same unit conventions as [`ColorHsv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorHsl {
    pub h: f64,
    pub s: f64,
    pub l: f64,
}

fn canonical_hue(h: f64) -> f64 {
    let h = h.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

fn check_percent(name: &str, x: f64) -> Result<f64> {
    if !x.is_finite() || !(0.0..=100.0).contains(&x) {
        return Err(Error::Color(format!("{name}={x} is outside [0, 100]")));
    }
    Ok(x)
}

impl ColorHsv {
    /// Builds a canonical color: hue wraps into `[0, 360)`; saturation and
    /// value must already lie in `[0, 100]`.
    pub fn new(h: f64, s: f64, v: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::Color(format!("hue {h} is not finite")));
        }
        Ok(ColorHsv {
            h: canonical_hue(h),
            s: check_percent("s", s)?,
            v: check_percent("v", v)?,
        })
    }
}

impl ColorHsl {
    pub fn new(h: f64, s: f64, l: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::Color(format!("hue {h} is not finite")));
        }
        Ok(ColorHsl {
            h: canonical_hue(h),
            s: check_percent("s", s)?,
            l: check_percent("l", l)?,
        })
    }
}

impl fmt::Display for ColorHsv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hsv({}, {}, {})", self.h, self.s, self.v)
    }
}

/// Which color space the numeric columns of a corpus file are in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Hsv,
    Hsl,
}

impl std::str::FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsv" => Ok(ColorSpace::Hsv),
            "hsl" => Ok(ColorSpace::Hsl),
            other => Err(Error::Config(format!("unknown color space {other:?}"))),
        }
    }
}

/// Lowercases and splits on runs of whitespace.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.split_whitespace().map(str::to_lowercase).collect()
}

/// A description as written plus its normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Description {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Description {
    pub fn new(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        if tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(Description { raw, tokens })
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyDescription);
        }
        Ok(Description {
            raw: tokens.join(" "),
            tokens,
        })
    }

    /// Tokens joined by single spaces; the key used for exact-match
    /// comparisons and for the atomic/histogram inventories.
    pub fn normalized(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized())
    }
}

/// Token/id bijection. Ids 0, 1, 2 are `<s>`, `</s>` and `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3
            || tokens[START_ID] != START_TOKEN
            || tokens[END_ID] != END_TOKEN
            || tokens[UNK_ID] != UNK_TOKEN
        {
            return Err(Error::Corpus(
                "vocabulary must begin with <s>, </s>, <unk>".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Reserved tokens followed by `content` in the given order.
    pub fn with_content<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![START_TOKEN.to_string(), END_TOKEN.into(), UNK_TOKEN.into()];
        tokens.extend(content.into_iter().map(Into::into));
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_reserved(id: usize) -> bool {
        id <= UNK_ID
    }
}

/// Counts tokens in `train` and assigns content ids by descending count,
/// ties broken lexicographically.
pub fn build_vocabulary(train: &Dataset) -> Vocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for item in &train.items {
        for t in &item.description.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, _)| ![START_TOKEN, END_TOKEN, UNK_TOKEN].contains(t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::with_content(ranked.into_iter().map(|(t, _)| t.to_string()))
        .expect("reserved tokens are filtered out")
}

/// `[<s>] + ids + [</s>]`, mapping unknown tokens to `<unk>`.
pub fn encode(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    let mut ids = Vec::with_capacity(tokens.len() + 2);
    ids.push(START_ID);
    ids.extend(tokens.iter().map(|t| vocab.id(t).unwrap_or(UNK_ID)));
    ids.push(END_ID);
    ids
}

/// Inverse of [`encode`]: drops the sentinels and maps ids back to tokens.
pub fn decode(ids: &[usize], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .filter(|&&id| id != START_ID && id != END_ID)
        .map(|&id| vocab.token(id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub color: ColorHsv,
    pub description: Description,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub items: Vec<Item>,
    /// Records that failed to parse and were skipped at load time.
    pub skipped: usize,
}

impl Dataset {
    pub fn new(split: Split, items: Vec<Item>) -> Self {
        Dataset {
            split,
            items,
            skipped: 0,
        }
    }

    /// Builds a dataset from `(color, raw description)` pairs.
    pub fn from_pairs<I, S>(split: Split, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ColorHsv, S)>,
        S: Into<String>,
    {
        let items = pairs
            .into_iter()
            .map(|(color, raw)| {
                Ok(Item {
                    color,
                    description: Description::new(raw)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(split, items))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Parses a corpus file. Unparseable records are skipped and counted in
/// [`Dataset::skipped`]; a file with no valid records is an error.
pub fn load_corpus(path: &Path, space: ColorSpace, split: Split) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, space, split)
}

pub fn parse_corpus(text: &str, space: ColorSpace, split: Split) -> Result<Dataset> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let has_header = first
        .split(delimiter as char)
        .next()
        .map(|f| f.trim().parse::<f64>().is_err())
        .unwrap_or(false);

    if has_header {
        let ncols = first.split(delimiter as char).count();
        if ncols != 4 {
            return Err(Error::Corpus(format!(
                "header has {ncols} columns, expected 4 (h,s,v|l,description)"
            )));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(text.as_bytes());

    let mut items = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let parsed = record.ok().and_then(|r| parse_record(&r, delimiter, space));
        match parsed {
            Some(item) => items.push(item),
            None => skipped += 1,
        }
    }
    if items.is_empty() {
        return Err(Error::Corpus(format!(
            "no valid records ({skipped} skipped)"
        )));
    }
    Ok(Dataset {
        split,
        items,
        skipped,
    })
}

fn parse_record(r: &csv::StringRecord, delimiter: u8, space: ColorSpace) -> Option<Item> {
    if r.len() < 4 {
        return None;
    }
    let num = |i: usize| r.get(i)?.trim().parse::<f64>().ok();
    let (a, b, c) = (num(0)?, num(1)?, num(2)?);
    // unquoted delimiters inside the description spill into extra fields
    let sep = (delimiter as char).to_string();
    let raw = r.iter().skip(3).collect::<Vec<_>>().join(&sep);
    let description = Description::new(raw).ok()?;
    let color = match space {
        ColorSpace::Hsv => ColorHsv::new(a, b, c).ok()?,
        ColorSpace::Hsl => hsl_to_hsv(ColorHsl::new(a, b, c).ok()?),
    };
    Some(Item { color, description })
}

/// Paths to the train/dev/test files of a corpus, read from a `key=value`
/// manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub color_space: Option<ColorSpace>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut m = Manifest {
            train: None,
            dev: None,
            test: None,
            color_space: None,
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1))
            })?;
            let value = value.trim();
            let resolve = || {
                let p = PathBuf::from(value);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key.trim() {
                "train" => m.train = Some(resolve()),
                "dev" => m.dev = Some(resolve()),
                "test" => m.test = Some(resolve()),
                "color_space" => m.color_space = Some(value.parse()?),
                other => {
                    return Err(Error::Config(format!("unknown manifest key {other:?}")));
                }
            }
        }
        Ok(m)
    }

    pub fn path(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => self.train.as_deref(),
            Split::Dev => self.dev.as_deref(),
            Split::Test => self.test.as_deref(),
        }
    }

    pub fn load_split(&self, split: Split, default_space: ColorSpace) -> Result<Dataset> {
        let path = self
            .path(split)
            .ok_or_else(|| Error::Config(format!("manifest has no `{split}` entry")))?;
        load_corpus(path, self.color_space.unwrap_or(default_space), split)
    }
}

pub mod synthetic {
    //! A rule-based toy corpus for demos and tests. Names come from hue
    //! sectors with optional lightness/saturation modifiers, plus a small
    //! amount of label noise. "greenish" names the two vivid bands on
    //! either side of green, so its denotation is bimodal in hue.

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::ColorHsv;

    const HUES: [(f64, &str); 7] = [
        (15.0, "red"),
        (45.0, "orange"),
        (70.0, "yellow"),
        (160.0, "green"),
        (200.0, "teal"),
        (260.0, "blue"),
        (330.0, "purple"),
    ];

    /// The noiseless name for `c`.
    pub fn name(c: &ColorHsv) -> String {
        if c.s < 15.0 {
            return if c.v < 30.0 {
                "black".into()
            } else if c.v > 80.0 {
                "white".into()
            } else {
                "grey".into()
            };
        }
        let base = HUES
            .iter()
            .find(|(upper, _)| c.h < *upper)
            .map(|(_, n)| *n)
            .unwrap_or("red");
        let near_green = (58.0..70.0).contains(&c.h) || (160.0..175.0).contains(&c.h);
        if near_green && c.s >= 40.0 && c.v >= 40.0 {
            "greenish".into()
        } else if c.v < 40.0 {
            format!("dark {base}")
        } else if c.s < 40.0 {
            format!("pale {base}")
        } else if c.v > 85.0 && c.s < 70.0 {
            format!("light {base}")
        } else {
            base.to_string()
        }
    }

    /// `n` random colors with their names; `noise` is the probability that
    /// a name is replaced by a neighbouring hue's name.
    pub fn generate(n: usize, noise: f64, seed: u64) -> Vec<(ColorHsv, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = ColorHsv {
                    h: rng.random_range(0.0..360.0),
                    s: rng.random_range(0.0..=100.0),
                    v: rng.random_range(0.0..=100.0),
                };
                let mut label = name(&c);
                if rng.random::<f64>() < noise {
                    let shifted = ColorHsv {
                        h: (c.h + 40.0) % 360.0,
                        ..c
                    };
                    label = name(&shifted);
                }
                (c, label)
            })
            .collect()
    }
}
