//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "CLRDESC\0"
//! version      u32      1
//! family       u8       1 = rnn, 2 = atomic, 3 = hm
//! header_len   u32
//! header       JSON     hyperparameters, featurizer constants, vocabulary
//!                       or inventory, run metadata
//! n_tensors    u32
//! tensor × n:  name_len u16, name (UTF-8), rank u8, dims u32 × rank,
//!              values f32 × Π dims
//! crc32        u32      over every preceding byte
//! ```
//!
//! Histogram counts are stored as `[nnz, 3]` tensors of
//! `(bucket, inventory id, count)` rows, exact while each entry is below
//! 2²⁴.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::features::{FeatureScheme, BUCKET_RESOLUTIONS, FOURIER_SCALE, RAW_SCALE};
use crate::kernel::{Parameters, Tensor};

use super::atomic::{AtomicConfig, AtomicModel, Inventory};
use super::histogram::HistogramModel;
use super::sequence::{SequenceConfig, SequenceModel};
use super::{Model, ModelFamily, RunInfo};

pub const MAGIC: &[u8; 8] = b"CLRDESC\0";
pub const FORMAT_VERSION: u32 = 1;

const F32_EXACT_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeaturizerInfo {
    scheme: FeatureScheme,
    raw_scale: [f64; 3],
    fourier_scale: [f64; 3],
    bucket_resolutions: [[usize; 3]; 3],
}

impl FeaturizerInfo {
    fn current(scheme: FeatureScheme) -> Self {
        FeaturizerInfo {
            scheme,
            raw_scale: RAW_SCALE,
            fourier_scale: FOURIER_SCALE,
            bucket_resolutions: BUCKET_RESOLUTIONS,
        }
    }

    fn check(&self) -> Result<()> {
        if *self != Self::current(self.scheme) {
            return Err(Error::checkpoint(
                0,
                "featurizer constants differ from this build's",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<RunInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    featurizer: Option<FeaturizerInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequence: Option<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atomic: Option<AtomicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocabulary: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inventory: Option<Vec<String>>,
}

fn family_tag(f: ModelFamily) -> u8 {
    match f {
        ModelFamily::Rnn => 1,
        ModelFamily::Atomic => 2,
        ModelFamily::Hm => 3,
    }
}

fn write_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(t.shape().len() as u8);
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &x in t.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

fn histogram_tensors(m: &HistogramModel) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut out = Vec::new();
    for (lvl, level) in m.levels.iter().enumerate() {
        let mut rows = Vec::new();
        for (&bucket, counts) in level {
            for (&id, &n) in &counts.counts {
                for v in [bucket as u64, id as u64, n] {
                    if v >= F32_EXACT_LIMIT {
                        return Err(Error::checkpoint(0, format!("histogram entry {v} too large to store exactly")));
                    }
                    rows.push(v as f32);
                }
            }
        }
        let nnz = rows.len() / 3;
        out.push((format!("counts.{lvl}"), Tensor::from_vec(&[nnz, 3], rows)?));
    }
    Ok(out)
}

/// Serializes `model` into checkpoint bytes.
pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let (family, header, tensors): (ModelFamily, Header, Vec<(String, Tensor<f32>)>) = match model {
        Model::Sequence(m) => (
            ModelFamily::Rnn,
            Header {
                run: Some(m.run.clone()),
                featurizer: Some(FeaturizerInfo::current(m.config.features)),
                sequence: Some(m.config.clone()),
                atomic: None,
                smoothing: None,
                vocabulary: Some(m.vocab.tokens().to_vec()),
                inventory: None,
            },
            m.params
                .tensors()
                .into_iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        ),
        Model::Atomic(m) => (
            ModelFamily::Atomic,
            Header {
                run: Some(m.run.clone()),
                featurizer: Some(FeaturizerInfo::current(m.config.features)),
                sequence: None,
                atomic: Some(m.config.clone()),
                smoothing: None,
                vocabulary: None,
                inventory: Some(m.inventory.entries().to_vec()),
            },
            m.params
                .tensors()
                .into_iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        ),
        Model::Histogram(m) => (
            ModelFamily::Hm,
            Header {
                run: None,
                featurizer: Some(FeaturizerInfo::current(FeatureScheme::Buckets)),
                sequence: None,
                atomic: None,
                smoothing: Some(m.smoothing),
                vocabulary: None,
                inventory: Some(m.inventory.entries().to_vec()),
            },
            histogram_tensors(m)?,
        ),
    };
    let header = serde_json::to_vec(&header).expect("header is serializable");
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(family_tag(family));
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        write_tensor(&mut buf, name, t);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::checkpoint(
                self.pos as u64,
                format!(
                    "truncated while reading {what}: need {n} bytes, {} remain",
                    self.buf.len() - self.pos
                ),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }
}

struct Parsed {
    family: ModelFamily,
    header: Header,
    tensors: Vec<(String, Tensor<f32>)>,
}

fn parse(bytes: &[u8]) -> Result<Parsed> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::checkpoint(0, "bad magic: not a checkpoint file"));
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::checkpoint(
            8,
            format!("unsupported format version {version} (this build reads {FORMAT_VERSION})"),
        ));
    }
    let family = match r.u8("family tag")? {
        1 => ModelFamily::Rnn,
        2 => ModelFamily::Atomic,
        3 => ModelFamily::Hm,
        other => return Err(Error::checkpoint(12, format!("unknown family tag {other}"))),
    };
    let hlen = r.u32("header length")? as usize;
    let hpos = r.offset();
    let header: Header = serde_json::from_slice(r.take(hlen, "header")?)
        .map_err(|e| Error::checkpoint(hpos, format!("invalid header: {e}")))?;
    let count = r.u32("tensor count")?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let nlen = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(nlen, "tensor name")?)
            .map_err(|_| Error::checkpoint(at, "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dims")? as usize);
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4, &format!("values of `{name}`"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name, Tensor::from_vec(&dims, data)?));
    }
    let body_end = r.pos;
    let stored = r.u32("crc32 trailer")?;
    let actual = crc32fast::hash(&bytes[..body_end]);
    if stored != actual {
        return Err(Error::checkpoint(
            body_end as u64,
            format!("checksum mismatch (stored {stored:08x}, computed {actual:08x})"),
        ));
    }
    if r.pos != bytes.len() {
        return Err(Error::checkpoint(r.offset(), "trailing bytes after checksum"));
    }
    Ok(Parsed {
        family,
        header,
        tensors,
    })
}

fn missing(what: &str) -> Error {
    Error::checkpoint(0, format!("header lacks `{what}`"))
}

fn fill<P: Parameters<f32>>(params: &mut P, tensors: Vec<(String, Tensor<f32>)>) -> Result<()> {
    let mut slots = params.tensors_mut();
    if slots.len() != tensors.len() {
        return Err(Error::checkpoint(
            0,
            format!("expected {} tensors, found {}", slots.len(), tensors.len()),
        ));
    }
    for ((name, slot), (found, t)) in slots.iter_mut().zip(tensors) {
        if *name != found {
            return Err(Error::checkpoint(0, format!("expected tensor `{name}`, found `{found}`")));
        }
        if slot.shape() != t.shape() {
            return Err(Error::Shape(format!(
                "tensor `{name}` has shape {:?}, model expects {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        **slot = t;
    }
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let Parsed {
        family,
        header,
        tensors,
    } = parse(bytes)?;
    if let Some(f) = &header.featurizer {
        f.check()?;
    }
    let run = header.run.clone().unwrap_or_else(|| RunInfo::new(0));
    match family {
        ModelFamily::Rnn => {
            let config = header.sequence.ok_or_else(|| missing("sequence"))?;
            let vocab = Vocabulary::from_tokens(header.vocabulary.ok_or_else(|| missing("vocabulary"))?)?;
            let mut m = SequenceModel::<f32>::init(config, vocab, run.seed)?;
            fill(&mut m.params, tensors)?;
            m.run = run;
            Ok(Model::Sequence(m))
        }
        ModelFamily::Atomic => {
            let config = header.atomic.ok_or_else(|| missing("atomic"))?;
            let inv = Inventory::from_entries(header.inventory.ok_or_else(|| missing("inventory"))?)?;
            let mut m = AtomicModel::<f32>::init(config, inv, run.seed)?;
            fill(&mut m.params, tensors)?;
            m.run = run;
            Ok(Model::Atomic(m))
        }
        ModelFamily::Hm => {
            let inv = Inventory::from_entries(header.inventory.ok_or_else(|| missing("inventory"))?)?;
            let mut m = HistogramModel::empty(inv, header.smoothing.ok_or_else(|| missing("smoothing"))?);
            for (name, t) in tensors {
                let lvl: usize = name
                    .strip_prefix("counts.")
                    .and_then(|s| s.parse().ok())
                    .filter(|&l| l < BUCKET_RESOLUTIONS.len())
                    .ok_or_else(|| Error::checkpoint(0, format!("unexpected tensor `{name}`")))?;
                if t.shape().len() != 2 || t.shape()[1] != 3 {
                    return Err(Error::Shape(format!("`{name}` must be [nnz, 3]")));
                }
                for row in t.data().chunks_exact(3) {
                    let id = row[1] as usize;
                    if id >= m.inventory.len() {
                        return Err(Error::checkpoint(0, format!("inventory id {id} out of range")));
                    }
                    m.insert_count(lvl, row[0] as usize, id, row[2] as u64);
                }
            }
            Ok(Model::Histogram(m))
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Loads a checkpoint that must hold a sequence model.
pub fn load_sequence(path: &Path) -> Result<SequenceModel<f32>> {
    match load_checkpoint(path)? {
        Model::Sequence(m) => Ok(m),
        other => Err(Error::checkpoint(
            12,
            format!("expected an rnn checkpoint, found family `{}`", super::DescriptionModel::family(&other)),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ColorHsv, Dataset, Description, Split};
    use crate::models::sequence::Conditioning;
    use crate::models::DescriptionModel;

    fn seq_model(conditioning: Conditioning, features: FeatureScheme) -> Model {
        let vocab = Vocabulary::with_content(["red", "dark", "blue"]).unwrap();
        let config = SequenceConfig {
            features,
            conditioning,
            bucket_dim: 3,
            ..SequenceConfig::default()
        };
        Model::Sequence(SequenceModel::init(config, vocab, 17).unwrap())
    }

    fn probe() -> (ColorHsv, Description) {
        (
            ColorHsv::new(222.0, 40.0, 30.0).unwrap(),
            Description::new("dark blue").unwrap(),
        )
    }

    #[test]
    fn roundtrip_every_family() {
        let ds = Dataset::from_pairs(
            Split::Train,
            [(probe().0, "dark blue"), (ColorHsv::new(1.0, 90.0, 90.0).unwrap(), "red")],
        )
        .unwrap();
        let models = [
            seq_model(Conditioning::EveryStep, FeatureScheme::Fourier),
            seq_model(Conditioning::InitState, FeatureScheme::Buckets),
            Model::Atomic(AtomicModel::init(AtomicConfig::default(), Inventory::build(&ds), 2).unwrap()),
            Model::Histogram(HistogramModel::fit(&ds, 1.0).unwrap()),
        ];
        let (c, d) = probe();
        for m in models {
            let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(
                back.score_description(&c, &d).unwrap().to_bits(),
                m.score_description(&c, &d).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn truncation_names_offset() {
        let bytes = to_bytes(&seq_model(Conditioning::EveryStep, FeatureScheme::Raw)).unwrap();
        let cut = bytes.len() - 100;
        match from_bytes(&bytes[..cut]) {
            Err(Error::Checkpoint { offset, detail }) => {
                assert!(offset <= cut as u64);
                assert!(detail.contains("truncated"), "{detail}");
            }
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_magic_version_and_crc() {
        let bytes = to_bytes(&seq_model(Conditioning::EveryStep, FeatureScheme::Raw)).unwrap();
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(matches!(from_bytes(&b), Err(Error::Checkpoint { offset: 0, .. })));
        let mut b = bytes.clone();
        b[8] = 2;
        let err = from_bytes(&b).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
        let mut b = bytes.clone();
        let n = b.len();
        b[n - 10] ^= 0xff;
        let err = from_bytes(&b).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }

    #[test]
    fn cross_family_load_is_rejected() {
        let ds = Dataset::from_pairs(Split::Train, [(probe().0, "dark blue")]).unwrap();
        let m = Model::Atomic(AtomicModel::init(AtomicConfig::default(), Inventory::build(&ds), 2).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atomic.ckpt");
        save_checkpoint(&m, &path).unwrap();
        assert!(load_checkpoint(&path).is_ok());
        let err = load_sequence(&path).unwrap_err().to_string();
        assert!(err.contains("atomic"), "{err}");
    }

    #[test]
    fn saving_is_deterministic() {
        let m = seq_model(Conditioning::EveryStep, FeatureScheme::Fourier);
        assert_eq!(to_bytes(&m).unwrap(), to_bytes(&m).unwrap());
    }
}
