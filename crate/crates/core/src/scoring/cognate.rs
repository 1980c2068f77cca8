//! Character-overlap scoring of romanized sub-words.
//!
//! Both labels are case-folded, split into sub-words on whitespace and
//! hyphens and romanized. Sub-words are mapped reciprocally: a pair is
//! mapped when each side is the other's most similar remaining sub-word
//! (Levenshtein similarity, or 1.0 on a dictionary hit), and mapping is
//! repeated over the unmapped remainder until nothing new is found. The
//! score is the share of romanized characters covered by mapped sub-words,
//! each weighted by its similarity.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::levenshtein;
use super::translit::Romanizer;
use crate::text::normalize_label;

/// Bilingual word lexicon. A hit on either ordering counts as an exact
/// correspondence.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeSet<(String, String)>,
}

impl Lexicon {
    /// Inserts a translation pair; entries with non-positive probability
    /// are ignored. Words are stored case-folded.
    pub fn insert(&mut self, a: &str, b: &str, probability: f64) {
        if probability.is_nan() || probability <= 0.0 {
            return;
        }
        if let (Ok(a), Ok(b)) = (normalize_label(a), normalize_label(b)) {
            self.entries.insert((a, b));
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let key = |x: &str, y: &str| (String::from(x), String::from(y));
        self.entries.contains(&key(a, b)) || self.entries.contains(&key(b, a))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
struct SubWord {
    folded: String,
    romanized: String,
    len: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CognateScorer {
    romanizer: Romanizer,
    lexicon: Option<Lexicon>,
}

impl CognateScorer {
    pub fn new(romanizer: Romanizer, lexicon: Option<Lexicon>) -> Self {
        CognateScorer { romanizer, lexicon }
    }

    /// Built-in romanization tables, no dictionary.
    pub fn builtin() -> Self {
        CognateScorer::new(Romanizer::builtin(), None)
    }

    pub fn romanizer(&self) -> &Romanizer {
        &self.romanizer
    }

    fn subwords(&self, label: &str) -> Vec<SubWord> {
        let Ok(folded) = normalize_label(label) else {
            return Vec::new();
        };
        folded
            .split(|c: char| c.is_whitespace() || matches!(c, '-' | '\u{2010}' | '\u{2011}'))
            .filter(|w| !w.is_empty())
            .map(|w| {
                let romanized = self.romanizer.romanize(w);
                let len = romanized.chars().count();
                SubWord {
                    folded: w.into(),
                    romanized,
                    len,
                }
            })
            .filter(|w| w.len > 0)
            .collect()
    }

    fn similarity(&self, a: &SubWord, b: &SubWord) -> f64 {
        if let Some(lex) = &self.lexicon {
            if lex.contains(&a.folded, &b.folded) {
                return 1.0;
            }
        }
        levenshtein::similarity(&a.romanized, &b.romanized)
    }

    /// Similarity in `[0, 1]`; symmetric in its arguments.
    pub fn score(&self, label_1: &str, label_2: &str) -> f64 {
        let a = self.subwords(label_1);
        let b = self.subwords(label_2);
        if a.is_empty() || b.is_empty() {
            let same = normalize_label(label_1).ok() == normalize_label(label_2).ok();
            return if same { 1.0 } else { 0.0 };
        }
        let sim: Vec<f64> = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| (x, y)))
            .map(|(x, y)| self.similarity(x, y))
            .collect();
        let cols = b.len();

        let mut row_free = alloc::vec![true; a.len()];
        let mut col_free = alloc::vec![true; b.len()];
        let mut covered = 0.0;
        loop {
            let mapped = mutual_best(&sim, cols, &row_free, &col_free);
            if mapped.is_empty() {
                break;
            }
            for (i, j) in mapped {
                row_free[i] = false;
                col_free[j] = false;
                covered += sim[i * cols + j] * (a[i].len + b[j].len) as f64;
            }
        }
        let total: usize = a.iter().chain(b.iter()).map(|w| w.len).sum();
        (covered / total as f64).clamp(0.0, 1.0)
    }
}

/// Cells that are both the best of their row and of their column among the
/// free rows/columns. Ties resolve to the lowest index.
fn mutual_best(sim: &[f64], cols: usize, row_free: &[bool], col_free: &[bool]) -> Vec<(usize, usize)> {
    let best_in_row = |i: usize| {
        (0..cols)
            .filter(|&j| col_free[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if sim[i * cols + b] >= sim[i * cols + j] => Some(b),
                _ => Some(j),
            })
    };
    let best_in_col = |j: usize| {
        (0..row_free.len())
            .filter(|&i| row_free[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if sim[b * cols + j] >= sim[i * cols + j] => Some(b),
                _ => Some(i),
            })
    };
    (0..row_free.len())
        .filter(|&i| row_free[i])
        .filter_map(|i| best_in_row(i).map(|j| (i, j)))
        .filter(|&(i, j)| best_in_col(j) == Some(i))
        .collect()
}
