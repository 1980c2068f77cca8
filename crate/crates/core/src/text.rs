//! Label text normalization.
//!
//! Two levels: [`label_key`] is what dataset artifacts and embedding stores
//! are keyed by (NFC, trimmed, single spaces); [`normalize_label`] adds case
//! folding and is only used inside scorers.

use alloc::string::String;
use core::fmt;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyLabel;

impl fmt::Display for EmptyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("label is empty after whitespace normalization")
    }
}

impl core::error::Error for EmptyLabel {}

/// NFC + whitespace collapse. Casing is preserved.
pub fn label_key(label: &str) -> String {
    let nfc: String = label.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Scorer-internal normal form: [`label_key`] plus lowercase folding.
pub fn normalize_label(label: &str) -> Result<String, EmptyLabel> {
    let key = label_key(label);
    if key.is_empty() {
        return Err(EmptyLabel);
    }
    // Lowercasing can produce decomposed sequences (e.g. U+0130), so
    // recompose afterwards.
    Ok(key.to_lowercase().nfc().collect())
}

/// NFC + trim, the normal form for stored labels.
pub fn clean_label(label: &str) -> String {
    let nfc: String = label.nfc().collect();
    String::from(nfc.trim())
}
