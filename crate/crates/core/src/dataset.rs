//! Language ranking, entity filtering, label-language verification and
//! pair generation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ingest::EntityRecord;
use crate::types::LabelPair;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetError {
    NoEntities,
    TooFewLanguages { requested: usize, available: usize },
    InvalidCriteria(Vec<String>),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::NoEntities => f.write_str("no entities"),
            DatasetError::TooFewLanguages { requested, available } => write!(
                f,
                "cannot select {requested} languages, only {available} have statistics"
            ),
            DatasetError::InvalidCriteria(problems) => {
                write!(f, "invalid filter criteria: {}", problems.join("; "))
            }
        }
    }
}

impl core::error::Error for DatasetError {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct LanguageCounts {
    with_main: u64,
    with_alias: u64,
    alias_total: u64,
}

/// Mergeable per-language counts. Merging is associative and commutative,
/// so shards can be accumulated independently.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    entities: u64,
    languages: BTreeMap<String, LanguageCounts>,
}

impl StatsAccumulator {
    pub fn add(&mut self, record: &EntityRecord) {
        self.entities += 1;
        for lang in record.labels.keys() {
            self.languages.entry(lang.clone()).or_default().with_main += 1;
        }
        for (lang, aliases) in &record.aliases {
            if aliases.is_empty() {
                continue;
            }
            let c = self.languages.entry(lang.clone()).or_default();
            c.with_alias += 1;
            c.alias_total += aliases.len() as u64;
        }
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.entities += other.entities;
        for (lang, c) in other.languages {
            let mine = self.languages.entry(lang).or_default();
            mine.with_main += c.with_main;
            mine.with_alias += c.with_alias;
            mine.alias_total += c.alias_total;
        }
    }

    pub fn entities(&self) -> u64 {
        self.entities
    }

    /// Stats for `candidates`, or for every observed language when
    /// `candidates` is empty. Output is sorted by language code.
    pub fn finish(&self, candidates: &[String]) -> Result<Vec<LanguageStats>, DatasetError> {
        if self.entities == 0 {
            return Err(DatasetError::NoEntities);
        }
        let langs: BTreeSet<&str> = if candidates.is_empty() {
            self.languages.keys().map(String::as_str).collect()
        } else {
            candidates.iter().map(String::as_str).collect()
        };
        let counts: Vec<(&str, LanguageCounts)> = langs
            .into_iter()
            .map(|l| (l, self.languages.get(l).copied().unwrap_or_default()))
            .collect();

        // All three metrics share the denominator, so ranking on the integer
        // numerators is exact.
        let rank_main = min_ranks(counts.iter().map(|(_, c)| c.with_main));
        let rank_presence = min_ranks(counts.iter().map(|(_, c)| c.with_alias));
        let rank_mean = min_ranks(counts.iter().map(|(_, c)| c.alias_total));

        let n = self.entities as f64;
        Ok(counts
            .iter()
            .enumerate()
            .map(|(i, (lang, c))| LanguageStats {
                language: lang.to_string(),
                main_label_coverage: c.with_main as f64 / n,
                alias_presence: c.with_alias as f64 / n,
                mean_alias_count: c.alias_total as f64 / n,
                rank_main: rank_main[i],
                rank_presence: rank_presence[i],
                rank_mean: rank_mean[i],
                avg_rank: (rank_main[i] + rank_presence[i] + rank_mean[i]) as f64 / 3.0,
            })
            .collect())
    }
}

/// Descending competition ranks: ties share the smallest rank.
fn min_ranks(values: impl Iterator<Item = u64>) -> Vec<usize> {
    let values: Vec<u64> = values.collect();
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|&&o| o > *v).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageStats {
    pub language: String,
    pub main_label_coverage: f64,
    pub alias_presence: f64,
    pub mean_alias_count: f64,
    pub rank_main: usize,
    pub rank_presence: usize,
    pub rank_mean: usize,
    pub avg_rank: f64,
}

impl LanguageStats {
    fn rank_sum(&self) -> usize {
        self.rank_main + self.rank_presence + self.rank_mean
    }
}

pub fn compute_language_stats<'a, I>(
    records: I,
    candidates: &[String],
) -> Result<Vec<LanguageStats>, DatasetError>
where
    I: IntoIterator<Item = &'a EntityRecord>,
{
    let mut acc = StatsAccumulator::default();
    for r in records {
        acc.add(r);
    }
    acc.finish(candidates)
}

/// The `k` languages with the smallest average rank, best first. Ties go to
/// the lexicographically smaller code.
pub fn select_top_languages(stats: &[LanguageStats], k: usize) -> Result<Vec<String>, DatasetError> {
    if k > stats.len() {
        return Err(DatasetError::TooFewLanguages {
            requested: k,
            available: stats.len(),
        });
    }
    let mut order: Vec<&LanguageStats> = stats.iter().collect();
    order.sort_by(|a, b| {
        a.rank_sum()
            .cmp(&b.rank_sum())
            .then_with(|| a.language.cmp(&b.language))
    });
    Ok(order.into_iter().take(k).map(|s| s.language.clone()).collect())
}

/// Pairwise Pearson correlation of main-label presence indicators.
/// `None` where either language has zero variance.
pub fn presence_correlation<'a, I>(
    records: I,
    languages: &[String],
) -> Vec<(String, String, Option<f64>)>
where
    I: IntoIterator<Item = &'a EntityRecord>,
{
    let k = languages.len();
    let mut single = alloc::vec![0u64; k];
    let mut joint = alloc::vec![0u64; k * k];
    let mut n = 0u64;
    for r in records {
        n += 1;
        let present: Vec<bool> = languages.iter().map(|l| r.labels.contains_key(l)).collect();
        for i in 0..k {
            if !present[i] {
                continue;
            }
            single[i] += 1;
            for j in 0..k {
                if present[j] {
                    joint[i * k + j] += 1;
                }
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b, ab, n) = (single[i] as f64, single[j] as f64, joint[i * k + j] as f64, n as f64);
            let denom = libm::sqrt(a * (n - a) * b * (n - b));
            let r = if denom > 0.0 { Some((n * ab - a * b) / denom) } else { None };
            out.push((languages[i].clone(), languages[j].clone(), r));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterCriteria {
    pub min_languages_with_label: usize,
    pub min_alias_count: usize,
    pub min_languages_with_aliases: usize,
    pub selected_languages: Vec<String>,
}

impl FilterCriteria {
    pub fn with_languages(selected_languages: Vec<String>) -> Self {
        FilterCriteria {
            min_languages_with_label: 4,
            min_alias_count: 3,
            min_languages_with_aliases: 3,
            selected_languages,
        }
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("min_languages_with_label", self.min_languages_with_label),
            ("min_alias_count", self.min_alias_count),
            ("min_languages_with_aliases", self.min_languages_with_aliases),
        ] {
            if v < 1 {
                problems.push(alloc::format!("{name} must be at least 1"));
            }
        }
        if self.selected_languages.is_empty() {
            problems.push("selected_languages is empty".into());
        }
        let distinct: BTreeSet<&String> = self.selected_languages.iter().collect();
        if distinct.len() != self.selected_languages.len() {
            problems.push("selected_languages contains duplicates".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::InvalidCriteria(problems))
        }
    }
}

/// Applies the label-richness criteria. Kept records are projected onto the
/// selected languages.
pub fn filter_entity(record: &EntityRecord, criteria: &FilterCriteria) -> Option<EntityRecord> {
    let selected = &criteria.selected_languages;
    let with_label = selected.iter().filter(|l| record.labels.contains_key(*l)).count();
    if with_label < criteria.min_languages_with_label {
        return None;
    }
    let with_aliases = selected
        .iter()
        .filter(|l| record.aliases.get(*l).map_or(0, Vec::len) >= criteria.min_alias_count)
        .count();
    if with_aliases < criteria.min_languages_with_aliases {
        return None;
    }
    let mut kept = record.clone();
    kept.labels.retain(|l, _| selected.contains(l));
    kept.aliases.retain(|l, _| selected.contains(l));
    Some(kept)
}

pub fn filter_entities<'c, I>(
    records: I,
    criteria: &'c FilterCriteria,
) -> impl Iterator<Item = EntityRecord> + 'c
where
    I: IntoIterator<Item = EntityRecord>,
    I::IntoIter: 'c,
{
    records.into_iter().filter_map(move |r| filter_entity(&r, criteria))
}

/// Failure of an external model provider (language ID or embeddings).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Service down or unreachable; the request may be retried.
    Unavailable(String),
    /// The provider has no entry for this text.
    Missing(String),
    /// The provider answered with something unusable.
    Invalid(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Unavailable(_))
    }
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderError::Unavailable(why) => write!(f, "provider unavailable: {why}"),
            ProviderError::Missing(key) => write!(f, "provider has no entry for {key:?}"),
            ProviderError::Invalid(why) => write!(f, "invalid provider response: {why}"),
        }
    }
}

impl core::error::Error for ProviderError {}

/// Probability distribution over language codes for a string.
pub trait LanguageIdProvider {
    fn probabilities(&self, text: &str) -> Result<Vec<(String, f64)>, ProviderError>;
}

impl<P: LanguageIdProvider + ?Sized> LanguageIdProvider for &P {
    fn probabilities(&self, text: &str) -> Result<Vec<(String, f64)>, ProviderError> {
        (**self).probabilities(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanguageIdThresholds {
    /// A label is a drop candidate when its assigned language is below this.
    pub drop_threshold: f64,
    /// ...and the detector puts at least this much mass on its top language.
    pub ambiguity_threshold: f64,
}

impl Default for LanguageIdThresholds {
    fn default() -> Self {
        LanguageIdThresholds {
            drop_threshold: 0.01,
            ambiguity_threshold: 0.5,
        }
    }
}

impl LanguageIdThresholds {
    pub fn should_drop(&self, assigned: &str, distribution: &[(String, f64)]) -> bool {
        let p_assigned = distribution
            .iter()
            .find(|(l, _)| l == assigned)
            .map_or(0.0, |(_, p)| *p);
        let p_max = distribution.iter().map(|(_, p)| *p).fold(0.0, f64::max);
        p_assigned < self.drop_threshold && p_max >= self.ambiguity_threshold
    }
}

/// Removes labels and aliases the detector confidently places in another
/// language. Ambiguous labels are kept.
pub fn verify_label_languages<P: LanguageIdProvider>(
    record: &EntityRecord,
    provider: &P,
    thresholds: &LanguageIdThresholds,
) -> Result<EntityRecord, ProviderError> {
    let mut out = record.clone();
    out.labels.clear();
    for (lang, label) in &record.labels {
        if !thresholds.should_drop(lang, &provider.probabilities(label)?) {
            out.labels.insert(lang.clone(), label.clone());
        }
    }
    out.aliases.clear();
    for (lang, aliases) in &record.aliases {
        let mut kept = Vec::with_capacity(aliases.len());
        for a in aliases {
            if !thresholds.should_drop(lang, &provider.probabilities(a)?) {
                kept.push(a.clone());
            }
        }
        if !kept.is_empty() {
            out.aliases.insert(lang.clone(), kept);
        }
    }
    Ok(out)
}

/// Every cross-lingual pairing of the record's labels over unordered
/// language pairs. When `selected` is empty all languages participate.
pub fn generate_pairs(record: &EntityRecord, selected: &[String]) -> Vec<LabelPair> {
    let langs: Vec<&str> = record
        .languages()
        .into_iter()
        .filter(|l| selected.is_empty() || selected.iter().any(|s| s == l))
        .collect();
    let per_lang: Vec<Vec<(&str, bool)>> = langs.iter().map(|l| record.labels_in(l)).collect();

    let mut out = Vec::new();
    for i in 0..langs.len() {
        for j in (i + 1)..langs.len() {
            for &(a, main_a) in &per_lang[i] {
                for &(b, main_b) in &per_lang[j] {
                    out.extend(LabelPair::new(
                        record.id,
                        (langs[i], a, main_a),
                        (langs[j], b, main_b),
                    ));
                }
            }
        }
    }
    out
}
