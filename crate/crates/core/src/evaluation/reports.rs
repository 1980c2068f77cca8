//! Score distributions and per-language mean scores.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::types::{ScoredPair, ScorerId};

pub const HISTOGRAM_BINS: usize = 100;

/// Fixed-range histogram over a scorer's declared score range, normalized
/// so the densities integrate to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub scorer: ScorerId,
    pub low: f64,
    pub high: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(scorer: ScorerId) -> Self {
        let (low, high) = scorer.range();
        Histogram {
            scorer,
            low,
            high,
            counts: alloc::vec![0; HISTOGRAM_BINS],
            total: 0,
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.high - self.low) / self.counts.len() as f64
    }

    /// Bin index; the top edge falls into the last bin, values outside the
    /// range are clamped.
    pub fn bin_of(&self, score: f64) -> usize {
        let raw = libm::floor((score - self.low) / self.bin_width());
        (raw.max(0.0) as usize).min(self.counts.len() - 1)
    }

    pub fn add(&mut self, score: f64) {
        let b = self.bin_of(score);
        self.counts[b] += 1;
        self.total += 1;
    }

    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total as f64 * self.bin_width();
        self.counts
            .iter()
            .map(|&c| if self.total == 0 { 0.0 } else { c as f64 / norm })
            .collect()
    }

    /// `(bin_low, bin_high)` for bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.low + w * i as f64, self.low + w * (i + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageMean {
    pub scorer: ScorerId,
    pub language: String,
    pub mean: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub histograms: Vec<Histogram>,
    pub language_means: Vec<LanguageMean>,
}

/// Per scorer: a histogram of all scores and the mean score per language,
/// where a pair counts toward both of its languages.
pub fn score_reports<'a, I>(scored: I) -> ScoreReport
where
    I: IntoIterator<Item = &'a ScoredPair>,
{
    let mut histograms: BTreeMap<ScorerId, Histogram> = BTreeMap::new();
    let mut sums: BTreeMap<(ScorerId, String), (f64, u64)> = BTreeMap::new();
    for sp in scored {
        histograms
            .entry(sp.scorer)
            .or_insert_with(|| Histogram::new(sp.scorer))
            .add(sp.score);
        for lang in [&sp.pair.lang_1, &sp.pair.lang_2] {
            let e = sums.entry((sp.scorer, lang.clone())).or_insert((0.0, 0));
            e.0 += sp.score;
            e.1 += 1;
        }
    }
    ScoreReport {
        histograms: histograms.into_values().collect(),
        language_means: sums
            .into_iter()
            .map(|((scorer, language), (sum, count))| LanguageMean {
                scorer,
                language,
                mean: sum / count as f64,
                count,
            })
            .collect(),
    }
}
