//! Line-oriented reader for Wikidata-style JSON entity dumps, plain or
//! gzip-compressed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use label_bridge_core::ingest::{classify, ClassGraph, ClassGraphBuilder, ClassRoots, EntityRecord, RawEntity};
use label_bridge_core::EntityId;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DumpItem {
    Entity(RawEntity),
    Diagnostic(Diagnostic),
}

#[derive(Deserialize)]
struct Doc {
    id: String,
    #[serde(default)]
    labels: BTreeMap<String, Term>,
    #[serde(default)]
    aliases: BTreeMap<String, Vec<Term>>,
    #[serde(default)]
    claims: Claims,
}

#[derive(Deserialize)]
struct Term {
    value: String,
}

#[derive(Deserialize, Default)]
struct Claims {
    #[serde(rename = "P31", default)]
    p31: Vec<Statement>,
    #[serde(rename = "P279", default)]
    p279: Vec<Statement>,
}

#[derive(Deserialize)]
struct Statement {
    mainsnak: Snak,
    #[serde(default)]
    rank: Option<String>,
}

#[derive(Deserialize)]
struct Snak {
    #[serde(default)]
    datavalue: Option<DataValue>,
}

#[derive(Deserialize)]
struct DataValue {
    value: serde_json::Value,
}

fn targets(statements: &[Statement]) -> Vec<EntityId> {
    let mut out = Vec::new();
    for s in statements {
        if s.rank.as_deref() == Some("deprecated") {
            continue;
        }
        let Some(dv) = &s.mainsnak.datavalue else { continue };
        let id = match dv.value.get("id").and_then(|v| v.as_str()) {
            Some(text) => text.parse().ok(),
            None => dv.value.get("numeric-id").and_then(|v| v.as_u64()).map(EntityId),
        };
        if let Some(id) = id {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

/// Parses one dump line. `Ok(None)` for array brackets, blank lines and
/// non-item documents (properties, lexemes).
pub fn parse_line(line: &str) -> Result<Option<RawEntity>, String> {
    let body = line.trim().trim_end_matches(',').trim_end();
    if body.is_empty() || body == "[" || body == "]" {
        return Ok(None);
    }
    let doc: Doc = serde_json::from_str(body).map_err(|e| format!("malformed entity line: {e}"))?;
    if !doc.id.starts_with('Q') {
        return Ok(None);
    }
    let id: EntityId = doc.id.parse().map_err(|e| format!("{e}"))?;
    Ok(Some(RawEntity {
        id,
        labels: doc
            .labels
            .into_iter()
            .map(|(l, t)| (l.to_lowercase(), t.value))
            .collect(),
        aliases: doc
            .aliases
            .into_iter()
            .map(|(l, ts)| (l.to_lowercase(), ts.into_iter().map(|t| t.value).collect()))
            .collect(),
        p31: targets(&doc.claims.p31),
        p279: targets(&doc.claims.p279),
    }))
}

/// Opens a dump file, detecting gzip by its magic bytes.
pub fn open(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Sequential iterator over entity lines and diagnostics, in dump order.
pub struct DumpReader<R> {
    reader: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(reader: R) -> Self {
        DumpReader {
            reader,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = std::io::Result<DumpItem>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
            self.line_no += 1;
            match parse_line(&self.buf) {
                Ok(Some(e)) => return Some(Ok(DumpItem::Entity(e))),
                Ok(None) => continue,
                Err(message) => {
                    return Some(Ok(DumpItem::Diagnostic(Diagnostic {
                        line: self.line_no,
                        message,
                    })))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub strict: bool,
    /// Lines read and parsed per parallel batch.
    pub chunk_lines: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            strict: false,
            chunk_lines: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub records: Vec<EntityRecord>,
    pub diagnostics: Vec<Diagnostic>,
    pub entities_seen: usize,
    pub graph: ClassGraph,
}

type Parsed = (usize, Result<Option<RawEntity>, String>);

/// Reads `path` in bounded chunks, parsing each chunk in parallel while
/// keeping dump order.
fn for_each_chunk(path: &Path, chunk_lines: usize, mut f: impl FnMut(Vec<Parsed>) -> Result<()>) -> Result<()> {
    let mut reader = open(path)?;
    let mut line_no = 0;
    loop {
        let mut lines = Vec::with_capacity(chunk_lines);
        for _ in 0..chunk_lines.max(1) {
            let mut buf = String::new();
            if reader.read_line(&mut buf).map_err(|e| Error::io(path, e))? == 0 {
                break;
            }
            line_no += 1;
            lines.push((line_no, buf));
        }
        if lines.is_empty() {
            return Ok(());
        }
        let parsed: Vec<Parsed> = lines.into_par_iter().map(|(n, l)| (n, parse_line(&l))).collect();
        f(parsed)?;
    }
}

/// Two passes over the dump: the first builds the subclass closures, the
/// second classifies instances and extracts their labels.
pub fn extract(path: &Path, roots: ClassRoots, options: ExtractOptions) -> Result<Extraction> {
    let mut builder = ClassGraphBuilder::new(roots);
    let mut diagnostics = Vec::new();
    let mut entities_seen = 0;
    for_each_chunk(path, options.chunk_lines, |chunk| {
        for (line, parsed) in chunk {
            match parsed {
                Ok(Some(e)) => {
                    entities_seen += 1;
                    builder.add(&e);
                }
                Ok(None) => {}
                Err(message) if options.strict => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message,
                    })
                }
                Err(message) => diagnostics.push(Diagnostic { line, message }),
            }
        }
        Ok(())
    })?;
    let graph = builder.finish();

    let mut records = Vec::new();
    for_each_chunk(path, options.chunk_lines, |chunk| {
        let found: Vec<EntityRecord> = chunk
            .into_par_iter()
            .filter_map(|(_, p)| p.ok().flatten())
            .filter_map(|e| classify(&e, &graph))
            .collect();
        records.extend(found);
        Ok(())
    })?;
    Ok(Extraction {
        records,
        diagnostics,
        entities_seen,
        graph,
    })
}
