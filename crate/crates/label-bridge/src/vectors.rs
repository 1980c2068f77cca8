//! File-mode vector store: precomputed sentence and sub-word vectors keyed
//! by (model tag, granularity, label).
//!
//! Two encodings share one logical layout.
//!
//! TSV, one vector per row after a `#`-comment preamble and a header:
//!
//! ```text
//! model  granularity  label  token  vector
//! ```
//!
//! `token` is empty for sentence rows; sub-word rows of one label appear in
//! tokenizer order. `vector` holds space-separated decimal floats.
//!
//! Binary (`LBVS`), little-endian:
//!
//! ```text
//! magic     4 bytes  "LBVS"
//! version   u8       1
//! index_len u64      byte length of the text index
//! index     UTF-8    one line per vector: model \t granularity \t label \t token \t dim
//! data      f32 * Σdim, vectors in index order
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use label_bridge_core::dataset::ProviderError;
use label_bridge_core::scoring::{Embedding, SentenceEmbedder, SubwordEmbedder, SubwordVector};
use label_bridge_core::text::label_key;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LBVS";
pub const VERSION: u8 = 1;
pub const TSV_HEADER: &str = "model\tgranularity\tlabel\ttoken\tvector";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    Sentence,
    Subwords,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Sentence => "sentence",
            Granularity::Subwords => "subwords",
        }
    }
}

impl FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sentence" => Ok(Granularity::Sentence),
            "subwords" => Ok(Granularity::Subwords),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

type Key = (String, Granularity, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorStore {
    entries: BTreeMap<Key, Vec<(String, Vec<f32>)>>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_sentence(&mut self, model: &str, label: &str, vector: Vec<f32>) {
        self.entries
            .insert((model.into(), Granularity::Sentence, label_key(label)), vec![(String::new(), vector)]);
    }

    pub fn insert_subwords(&mut self, model: &str, label: &str, units: Vec<(String, Vec<f32>)>) {
        self.entries
            .insert((model.into(), Granularity::Subwords, label_key(label)), units);
    }

    pub fn sentence(&self, model: &str, label: &str) -> Option<&[f32]> {
        self.entries
            .get(&(model.into(), Granularity::Sentence, label_key(label)))
            .map(|v| v[0].1.as_slice())
    }

    pub fn subwords(&self, model: &str, label: &str) -> Option<&[(String, Vec<f32>)]> {
        self.entries
            .get(&(model.into(), Granularity::Subwords, label_key(label)))
            .map(Vec::as_slice)
    }

    /// Number of (model, granularity, label) entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn models(&self) -> Vec<(String, Granularity)> {
        let mut out: Vec<(String, Granularity)> = self.entries.keys().map(|(m, g, _)| (m.clone(), *g)).collect();
        out.dedup();
        out
    }

    /// Reads either encoding, detected by the magic bytes.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(MAGIC) {
            Self::from_binary(&bytes).map_err(|m| parse_err(path, 0, m))
        } else {
            let text = String::from_utf8(bytes).map_err(|e| parse_err(path, 0, e.to_string()))?;
            Self::from_tsv(&text).map_err(|(line, m)| parse_err(path, line, m))
        }
    }

    pub fn from_tsv(text: &str) -> Result<Self, (usize, String)> {
        let mut store = VectorStore::new();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h == TSV_HEADER => {}
            Some((i, h)) => return Err((i + 1, format!("expected header {TSV_HEADER:?}, found {h:?}"))),
            None => return Err((0, "empty vector store".into())),
        }
        let mut last: Option<Key> = None;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let n = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err((n, format!("expected 5 fields, found {}", f.len())));
            }
            let granularity: Granularity = f[1].parse().map_err(|e| (n, e))?;
            let vector = f[4]
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f32>().map_err(|e| (n, format!("bad component {s:?}: {e}"))))
                .collect::<Result<Vec<f32>, _>>()?;
            let key = (f[0].to_string(), granularity, label_key(f[2]));
            let continuing = last.as_ref() == Some(&key);
            let slot = store.entries.entry(key.clone()).or_default();
            match granularity {
                Granularity::Sentence if !slot.is_empty() => {
                    return Err((n, format!("duplicate sentence vector for {:?}", f[2])));
                }
                Granularity::Subwords if !slot.is_empty() && !continuing => {
                    return Err((n, format!("sub-word rows for {:?} are not contiguous", f[2])));
                }
                _ => {}
            }
            slot.push((f[3].to_string(), vector));
            last = Some(key);
        }
        Ok(store)
    }

    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for ((model, g, label), units) in &self.entries {
            for (token, v) in units {
                check_field(model)?;
                check_field(label)?;
                check_field(token)?;
                let _ = write!(out, "{model}\t{}\t{label}\t{token}\t", g.as_str());
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let _ = write!(out, "{x}");
                }
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let mut index = String::new();
        let mut data: Vec<u8> = Vec::new();
        for ((model, g, label), units) in &self.entries {
            for (token, v) in units {
                check_field(model)?;
                check_field(label)?;
                check_field(token)?;
                let _ = writeln!(index, "{model}\t{}\t{label}\t{token}\t{}", g.as_str(), v.len());
                for x in v {
                    data.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let mut out = Vec::with_capacity(13 + index.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(index.len() as u64).to_le_bytes());
        out.extend_from_slice(index.as_bytes());
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 13 || &bytes[..4] != MAGIC {
            return Err("not an LBVS vector store".into());
        }
        if bytes[4] != VERSION {
            return Err(format!("unsupported vector store version {}", bytes[4]));
        }
        let index_len = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
        let index_end = 13usize
            .checked_add(index_len)
            .filter(|&e| e <= bytes.len())
            .ok_or("truncated index")?;
        let index = std::str::from_utf8(&bytes[13..index_end]).map_err(|e| e.to_string())?;
        let mut data = &bytes[index_end..];
        let mut store = VectorStore::new();
        for (i, line) in index.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(format!("index line {}: expected 5 fields", i + 1));
            }
            let g: Granularity = f[1].parse()?;
            let dim: usize = f[4].parse().map_err(|_| format!("index line {}: bad dimension", i + 1))?;
            let need = dim.checked_mul(4).filter(|&n| n <= data.len()).ok_or("truncated vector data")?;
            let v = data[..need]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            data = &data[need..];
            store
                .entries
                .entry((f[0].to_string(), g, f[2].to_string()))
                .or_default()
                .push((f[3].to_string(), v));
        }
        if !data.is_empty() {
            return Err(format!("{} trailing bytes after vector data", data.len()));
        }
        Ok(store)
    }

    pub fn write(&self, path: &Path, binary: bool) -> Result<()> {
        if binary {
            let bytes = self.to_binary()?;
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        } else {
            crate::artifacts::write_text(path, &self.to_tsv()?)
        }
    }

    /// Embedding provider view for one model tag.
    pub fn embedder<'a>(&'a self, model: &str) -> StoreEmbedder<'a> {
        StoreEmbedder {
            store: self,
            model: model.to_string(),
        }
    }
}

fn check_field(s: &str) -> Result<()> {
    if s.contains(['\t', '\n', '\r']) {
        Err(Error::Data(format!("{s:?} contains a tab or newline")))
    } else {
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub struct StoreEmbedder<'a> {
    store: &'a VectorStore,
    model: String,
}

fn embedding(values: &[f32], model: &str) -> Result<Embedding, ProviderError> {
    Embedding::new(values.to_vec(), model).map_err(|e| ProviderError::Invalid(e.to_string()))
}

impl SentenceEmbedder for StoreEmbedder<'_> {
    fn embed_sentence(&self, text: &str) -> Result<Embedding, ProviderError> {
        let v = self
            .store
            .sentence(&self.model, text)
            .ok_or_else(|| ProviderError::Missing(format!("{}/sentence/{text}", self.model)))?;
        embedding(v, &self.model)
    }
}

impl SubwordEmbedder for StoreEmbedder<'_> {
    fn embed_subwords(&self, text: &str) -> Result<Vec<SubwordVector>, ProviderError> {
        let units = self
            .store
            .subwords(&self.model, text)
            .ok_or_else(|| ProviderError::Missing(format!("{}/subwords/{text}", self.model)))?;
        units
            .iter()
            .map(|(token, v)| {
                Ok(SubwordVector {
                    token: token.clone(),
                    vector: embedding(v, &self.model)?,
                })
            })
            .collect()
    }
}
