//! Romanization by per-script character maps.
//!
//! Tables map lowercase source sequences to Latin strings and are applied
//! longest-match-first. Anything not covered by a table passes through;
//! afterwards combining marks are stripped so that Latin diacritics fold
//! onto their base letters.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

const CYRILLIC: &str = include_str!("../../data/translit/cyrillic.tsv");
const GREEK: &str = include_str!("../../data/translit/greek.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "romanization table line {}: {}", self.line, self.message)
    }
}

impl core::error::Error for TableError {}

/// A set of romanization maps merged into one longest-match lookup.
#[derive(Debug, Clone, Default)]
pub struct Romanizer {
    map: BTreeMap<String, String>,
    longest: usize,
}

impl Romanizer {
    /// The shipped Cyrillic and Greek tables.
    pub fn builtin() -> Self {
        let mut r = Romanizer::default();
        for table in [CYRILLIC, GREEK] {
            r.add_table(table).expect("shipped tables parse");
        }
        r
    }

    /// Adds a `source<TAB>target` table. `#` starts a comment line; the
    /// target may be empty. Later entries override earlier ones.
    pub fn add_table(&mut self, table: &str) -> Result<(), TableError> {
        for (i, line) in table.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, target) = line.split_once('\t').ok_or_else(|| TableError {
                line: i + 1,
                message: "expected source<TAB>target".into(),
            })?;
            if source.is_empty() {
                return Err(TableError {
                    line: i + 1,
                    message: "empty source sequence".into(),
                });
            }
            let source: String = source.nfc().collect::<String>().to_lowercase();
            self.longest = self.longest.max(source.chars().count());
            self.map.insert(source, target.to_string());
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Romanizes already lowercased, NFC text.
    pub fn romanize(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut mapped = String::with_capacity(text.len());
        let mut i = 0;
        let mut probe = String::new();
        'outer: while i < chars.len() {
            let max = self.longest.min(chars.len() - i);
            for len in (1..=max).rev() {
                probe.clear();
                probe.extend(&chars[i..i + len]);
                if let Some(target) = self.map.get(&probe) {
                    mapped.push_str(target);
                    i += len;
                    continue 'outer;
                }
            }
            mapped.push(chars[i]);
            i += 1;
        }
        mapped.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
    }
}
