//! Binary classification of pairs (selected vs. annotated best match),
//! overall and per language.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::matcher::BestMatchSet;
use crate::types::{EntityId, LabelPair, Method};

/// A dataset pair with its binary annotation. Several best pairs may share
/// a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthEntry {
    pub pair: LabelPair,
    pub best: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    All,
    Language(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::All => f.write_str("ALL"),
            Scope::Language(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: Method,
    pub scope: Scope,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_confusion(method: Method, scope: Scope, confusion: Confusion) -> Self {
        EvalReport {
            method,
            scope,
            confusion,
            accuracy: confusion.accuracy(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            f1: confusion.f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    EmptyTruth,
    /// Predicted pairs with no ground-truth row, as `entity lang1 lang2 label1 label2`.
    MissingTruth(Vec<String>),
    ConflictingTruth(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyTruth => f.write_str("ground truth is empty"),
            EvalError::MissingTruth(keys) => {
                write!(f, "{} predicted pairs have no ground truth: ", keys.len())?;
                for (i, k) in keys.iter().take(10).enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    f.write_str(k)?;
                }
                if keys.len() > 10 {
                    f.write_str("; ...")?;
                }
                Ok(())
            }
            EvalError::ConflictingTruth(k) => write!(f, "conflicting ground truth rows for {k}"),
        }
    }
}

impl core::error::Error for EvalError {}

type JoinKey = (EntityId, String, String, String, String);

fn join_key(p: &LabelPair) -> JoinKey {
    (
        p.entity_id,
        p.lang_1.clone(),
        p.lang_2.clone(),
        p.label_1.clone(),
        p.label_2.clone(),
    )
}

fn describe(k: &JoinKey) -> String {
    alloc::format!("{} {} {} {} {}", k.0, k.1, k.2, k.3, k.4)
}

/// Ground truth indexed by the pair 5-tuple.
#[derive(Debug, Clone, Default)]
pub struct TruthIndex {
    rows: BTreeMap<JoinKey, bool>,
}

impl TruthIndex {
    pub fn new(entries: &[GroundTruthEntry]) -> Result<Self, EvalError> {
        if entries.is_empty() {
            return Err(EvalError::EmptyTruth);
        }
        let mut rows = BTreeMap::new();
        for e in entries {
            let k = join_key(&e.pair);
            if let Some(prev) = rows.insert(k.clone(), e.best) {
                if prev != e.best {
                    return Err(EvalError::ConflictingTruth(describe(&k)));
                }
            }
        }
        Ok(TruthIndex { rows })
    }

    pub fn get(&self, p: &LabelPair) -> Option<bool> {
        self.rows.get(&join_key(p)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reports for one method: `ALL` first, then one per language in code
/// order. A pair counts toward both of its languages.
pub fn evaluate(method: Method, predictions: &[BestMatchSet], truth: &TruthIndex) -> Result<Vec<EvalReport>, EvalError> {
    let mut missing = Vec::new();
    let mut all = Confusion::default();
    let mut per_lang: BTreeMap<String, Confusion> = BTreeMap::new();
    for set in predictions {
        for (pair, predicted) in set.decisions() {
            let Some(actual) = truth.get(pair) else {
                missing.push(describe(&join_key(pair)));
                continue;
            };
            all.record(predicted, actual);
            per_lang.entry(pair.lang_1.clone()).or_default().record(predicted, actual);
            per_lang.entry(pair.lang_2.clone()).or_default().record(predicted, actual);
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingTruth(missing));
    }
    let mut out = alloc::vec![EvalReport::from_confusion(method, Scope::All, all)];
    out.extend(
        per_lang
            .into_iter()
            .map(|(l, c)| EvalReport::from_confusion(method, Scope::Language(l), c)),
    );
    Ok(out)
}

/// Accuracy grid with one row per method and columns `ALL` then languages.
pub fn render_accuracy_table(reports: &[EvalReport]) -> String {
    let mut methods: Vec<Method> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let langs: BTreeSet<&str> = reports
        .iter()
        .filter_map(|r| match &r.scope {
            Scope::Language(l) => Some(l.as_str()),
            Scope::All => None,
        })
        .collect();
    let mut columns: Vec<Scope> = alloc::vec![Scope::All];
    columns.extend(langs.into_iter().map(|l| Scope::Language(l.into())));

    let mut out = String::new();
    let _ = write!(out, "{:<6}", "");
    for c in &columns {
        let _ = write!(out, " {:>6}", alloc::format!("{c}").to_uppercase());
    }
    out.push('\n');
    for m in methods {
        let _ = write!(out, "{:<6}", m.as_str());
        for c in &columns {
            match reports.iter().find(|r| r.method == m && &r.scope == c) {
                Some(r) => {
                    let _ = write!(out, " {:>6.3}", r.accuracy);
                }
                None => {
                    let _ = write!(out, " {:>6}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
