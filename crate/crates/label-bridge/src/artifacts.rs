//! Stage artifacts: TSV tables and JSONL entity records, each preceded by
//! `#` provenance lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use label_bridge_core::evaluation::GroundTruthEntry;
use label_bridge_core::ingest::EntityRecord;
use label_bridge_core::matcher::BestMatchSet;
use label_bridge_core::{EntityId, LabelPair, Method, ScoredPair, ScorerId};

use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 7] = ["entity_id", "lang_1", "lang_2", "label_1", "label_2", "is_main_1", "is_main_2"];
pub const SCORED_HEADER: [&str; 7] = ["entity_id", "lang_1", "lang_2", "label_1", "label_2", "scorer_id", "score"];
pub const MATCHES_HEADER: [&str; 7] = ["entity_id", "lang_1", "lang_2", "label_1", "label_2", "scorer_id", "selected"];
pub const TRUTH_HEADER: [&str; 6] = ["entity_id", "lang_1", "lang_2", "label_1", "label_2", "best"];

/// Header lines identifying the tool, the configuration and the seeds that
/// produced an artifact. No timestamps, so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub artifact: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
}

impl Provenance {
    pub fn new(artifact: &str, config_hash: &str) -> Self {
        Provenance {
            artifact: artifact.to_string(),
            config_hash: config_hash.to_string(),
            seeds: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn lines(&self) -> String {
        let mut out = format!(
            "# tool: label-bridge {}\n# artifact: {}\n# config-sha256: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.artifact,
            self.config_hash
        );
        if self.seeds.is_empty() {
            out.push_str("# seeds: none\n");
        }
        for (name, seed) in &self.seeds {
            let _ = writeln!(out, "# seed.{name}: {seed}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "label-bridge",
            "version": env!("CARGO_PKG_VERSION"),
            "artifact": self.artifact,
            "config_sha256": self.config_hash,
            "seeds": self.seeds,
        })
    }
}

/// Fails with an error naming `producer` when `path` does not exist.
pub fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        })
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn check_label(label: &str) -> Result<&str> {
    if label.contains(['\t', '\n', '\r']) {
        Err(Error::Data(format!("label {label:?} contains a tab or newline and cannot be written as TSV")))
    } else {
        Ok(label)
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn pair_prefix(out: &mut String, p: &LabelPair) -> Result<()> {
    let _ = write!(
        out,
        "{}\t{}\t{}\t{}\t{}",
        p.entity_id,
        p.lang_1,
        p.lang_2,
        check_label(&p.label_1)?,
        check_label(&p.label_2)?
    );
    Ok(())
}

fn begin(prov: &Provenance, header: &[&str]) -> String {
    let mut out = prov.lines();
    out.push_str(&header.join("\t"));
    out.push('\n');
    out
}

/// Data rows of a TSV artifact after its provenance lines and header.
struct Rows<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
}

impl<'a> Rows<'a> {
    fn parse(path: &'a Path, text: &'a str, header: &[&str]) -> Result<Self> {
        let mut body = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.starts_with('#'));
        let expected = header.join("\t");
        match body.next() {
            Some((_, h)) if h == expected => {}
            Some((n, h)) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("expected header {expected:?}, found {h:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: "file has no header".into(),
                })
            }
        }
        Ok(Rows {
            path,
            lines: body.filter(|(_, l)| !l.is_empty()).collect(),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn fields(&self, line: usize, text: &'a str, n: usize) -> Result<Vec<&'a str>> {
        let f: Vec<&str> = text.split('\t').collect();
        if f.len() != n {
            return Err(self.err(line, format!("expected {n} fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn flag(&self, line: usize, s: &str) -> Result<bool> {
        match s {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(self.err(line, format!("expected 0 or 1, found {other:?}"))),
        }
    }

    fn pair(&self, line: usize, f: &[&str], main: (bool, bool)) -> Result<LabelPair> {
        let id: EntityId = f[0].parse().map_err(|e| self.err(line, format!("{e}")))?;
        if f[1] >= f[2] {
            return Err(self.err(line, format!("languages {} and {} are not in canonical order", f[1], f[2])));
        }
        LabelPair::new(id, (f[1], f[3], main.0), (f[2], f[4], main.1))
            .ok_or_else(|| self.err(line, "invalid label pair"))
    }
}

pub fn write_dataset(path: &Path, prov: &Provenance, pairs: &[LabelPair]) -> Result<()> {
    let mut out = begin(prov, &DATASET_HEADER);
    for p in pairs {
        pair_prefix(&mut out, p)?;
        let _ = writeln!(out, "\t{}\t{}", flag(p.is_main_1), flag(p.is_main_2));
    }
    write_text(path, &out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabelPair>> {
    let text = read_text(path)?;
    let rows = Rows::parse(path, &text, &DATASET_HEADER)?;
    rows.lines
        .iter()
        .map(|&(n, l)| {
            let f = rows.fields(n, l, 7)?;
            rows.pair(n, &f, (rows.flag(n, f[5])?, rows.flag(n, f[6])?))
        })
        .collect()
}

pub fn write_scored(path: &Path, prov: &Provenance, scored: &[ScoredPair]) -> Result<()> {
    let mut out = begin(prov, &SCORED_HEADER);
    for s in scored {
        pair_prefix(&mut out, &s.pair)?;
        let _ = writeln!(out, "\t{}\t{:.6}", s.scorer, s.score);
    }
    write_text(path, &out)
}

/// Scored pairs. Main-label flags are not part of this format and come
/// back as `false`.
pub fn read_scored(path: &Path) -> Result<Vec<ScoredPair>> {
    let text = read_text(path)?;
    let rows = Rows::parse(path, &text, &SCORED_HEADER)?;
    rows.lines
        .iter()
        .map(|&(n, l)| {
            let f = rows.fields(n, l, 7)?;
            let scorer: ScorerId = f[5].parse().map_err(|e| rows.err(n, format!("{e}")))?;
            let score: f64 = f[6]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| rows.err(n, format!("invalid score {:?}", f[6])))?;
            Ok(ScoredPair {
                pair: rows.pair(n, &f, (false, false))?,
                scorer,
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRow {
    pub method: Method,
    pub pair: LabelPair,
    pub selected: bool,
}

pub fn write_matches(path: &Path, prov: &Provenance, sets: &[(Method, Vec<BestMatchSet>)]) -> Result<()> {
    let mut out = begin(prov, &MATCHES_HEADER);
    for (method, groups) in sets {
        for g in groups {
            for (pair, selected) in g.decisions() {
                pair_prefix(&mut out, pair)?;
                let _ = writeln!(out, "\t{method}\t{}", flag(selected));
            }
        }
    }
    write_text(path, &out)
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchRow>> {
    let text = read_text(path)?;
    let rows = Rows::parse(path, &text, &MATCHES_HEADER)?;
    rows.lines
        .iter()
        .map(|&(n, l)| {
            let f = rows.fields(n, l, 7)?;
            Ok(MatchRow {
                method: f[5].parse().map_err(|e| rows.err(n, format!("{e}")))?,
                pair: rows.pair(n, &f, (false, false))?,
                selected: rows.flag(n, f[6])?,
            })
        })
        .collect()
}

/// Regroups match rows into one best-match set per method and group, in
/// file order of first appearance per method.
pub fn match_sets(rows: Vec<MatchRow>) -> Vec<(Method, Vec<BestMatchSet>)> {
    let mut methods: Vec<Method> = Vec::new();
    let mut sets: BTreeMap<(usize, label_bridge_core::GroupKey), BestMatchSet> = BTreeMap::new();
    for r in rows {
        let mi = match methods.iter().position(|m| *m == r.method) {
            Some(i) => i,
            None => {
                methods.push(r.method);
                methods.len() - 1
            }
        };
        let key = r.pair.group_key();
        let set = sets.entry((mi, key.clone())).or_insert_with(|| BestMatchSet {
            key,
            selected: Vec::new(),
            rejected: Vec::new(),
        });
        if r.selected {
            set.selected.push(r.pair);
        } else {
            set.rejected.push(r.pair);
        }
    }
    let mut out: Vec<(Method, Vec<BestMatchSet>)> = methods.into_iter().map(|m| (m, Vec::new())).collect();
    for ((mi, _), set) in sets {
        out[mi].1.push(set);
    }
    out
}

pub fn write_truth(path: &Path, prov: &Provenance, entries: &[GroundTruthEntry]) -> Result<()> {
    let mut out = begin(prov, &TRUTH_HEADER);
    for e in entries {
        pair_prefix(&mut out, &e.pair)?;
        let _ = writeln!(out, "\t{}", flag(e.best));
    }
    write_text(path, &out)
}

pub fn read_truth(path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let text = read_text(path)?;
    let rows = Rows::parse(path, &text, &TRUTH_HEADER)?;
    rows.lines
        .iter()
        .map(|&(n, l)| {
            let f = rows.fields(n, l, 6)?;
            Ok(GroundTruthEntry {
                pair: rows.pair(n, &f, (false, false))?,
                best: rows.flag(n, f[5])?,
            })
        })
        .collect()
}

pub fn write_records(path: &Path, prov: &Provenance, records: &[EntityRecord]) -> Result<()> {
    let mut out = prov.lines();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(Error::data)?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_records(path: &Path) -> Result<Vec<EntityRecord>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
