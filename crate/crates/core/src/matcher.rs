//! Non-overlapping best-match selection per `(entity, lang 1, lang 2)`
//! group: the greedy matcher and the randomized and main-label baselines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::seq::SliceRandom;

use crate::seed::sub_rng;
use crate::types::{GroupKey, LabelPair, ScoredPair, ScorerId};

#[derive(Debug, Clone, PartialEq)]
pub enum MatchError {
    EmptyGroup,
    MixedKeys { expected: GroupKey, found: GroupKey },
    MixedScorers { expected: ScorerId, found: ScorerId },
    DuplicatePair { key: GroupKey, label_1: String, label_2: String },
    NonFiniteScore { key: GroupKey },
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchError::EmptyGroup => f.write_str("empty match group"),
            MatchError::MixedKeys { expected, found } => {
                write!(f, "pair for group {found} in group {expected}")
            }
            MatchError::MixedScorers { expected, found } => {
                write!(f, "group mixes scorers {expected} and {found}")
            }
            MatchError::DuplicatePair { key, label_1, label_2 } => {
                write!(f, "duplicate pair ({label_1:?}, {label_2:?}) in group {key}")
            }
            MatchError::NonFiniteScore { key } => write!(f, "non-finite score in group {key}"),
        }
    }
}

impl core::error::Error for MatchError {}

/// Pairs of one group, without scores. Input to the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGroup {
    pub key: GroupKey,
    pub pairs: Vec<LabelPair>,
}

impl PairGroup {
    pub fn new(pairs: Vec<LabelPair>) -> Result<Self, MatchError> {
        let key = pairs.first().ok_or(MatchError::EmptyGroup)?.group_key();
        let mut seen = BTreeSet::new();
        for p in &pairs {
            let k = p.group_key();
            if k != key {
                return Err(MatchError::MixedKeys { expected: key, found: k });
            }
            if !seen.insert((p.label_1.as_str(), p.label_2.as_str())) {
                return Err(MatchError::DuplicatePair {
                    key,
                    label_1: p.label_1.clone(),
                    label_2: p.label_2.clone(),
                });
            }
        }
        Ok(PairGroup { key, pairs })
    }
}

/// One scorer's scored pairs for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchGroup {
    pub key: GroupKey,
    pub scorer: ScorerId,
    pub pairs: Vec<ScoredPair>,
}

impl MatchGroup {
    pub fn new(pairs: Vec<ScoredPair>) -> Result<Self, MatchError> {
        let first = pairs.first().ok_or(MatchError::EmptyGroup)?;
        let scorer = first.scorer;
        let key = first.pair.group_key();
        for p in &pairs {
            if p.scorer != scorer {
                return Err(MatchError::MixedScorers {
                    expected: scorer,
                    found: p.scorer,
                });
            }
            if !p.score.is_finite() {
                return Err(MatchError::NonFiniteScore { key });
            }
        }
        PairGroup::new(pairs.iter().map(|p| p.pair.clone()).collect())?;
        Ok(MatchGroup { key, scorer, pairs })
    }

    pub fn labels(&self) -> PairGroup {
        PairGroup {
            key: self.key.clone(),
            pairs: self.pairs.iter().map(|p| p.pair.clone()).collect(),
        }
    }
}

/// Selected and rejected pairs of one group. `selected` is in selection
/// order; `rejected` keeps the visiting order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestMatchSet {
    pub key: GroupKey,
    pub selected: Vec<LabelPair>,
    pub rejected: Vec<LabelPair>,
}

impl BestMatchSet {
    pub fn is_selected(&self, pair: &LabelPair) -> bool {
        self.selected.iter().any(|p| p.label_1 == pair.label_1 && p.label_2 == pair.label_2)
    }

    /// Every pair with its selection flag, sorted by labels.
    pub fn decisions(&self) -> Vec<(&LabelPair, bool)> {
        let mut out: Vec<(&LabelPair, bool)> = self
            .selected
            .iter()
            .map(|p| (p, true))
            .chain(self.rejected.iter().map(|p| (p, false)))
            .collect();
        out.sort_by(|a, b| (&a.0.label_1, &a.0.label_2).cmp(&(&b.0.label_1, &b.0.label_2)));
        out
    }
}

/// Visits pairs in the given order and selects each pair whose labels are
/// both still unused.
fn select_in_order<'a>(key: &GroupKey, order: impl Iterator<Item = &'a LabelPair>) -> BestMatchSet {
    let mut used_1: BTreeSet<&str> = BTreeSet::new();
    let mut used_2: BTreeSet<&str> = BTreeSet::new();
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for p in order {
        if !used_1.contains(p.label_1.as_str()) && !used_2.contains(p.label_2.as_str()) {
            used_1.insert(&p.label_1);
            used_2.insert(&p.label_2);
            selected.push(p.clone());
        } else {
            rejected.push(p.clone());
        }
    }
    BestMatchSet {
        key: key.clone(),
        selected,
        rejected,
    }
}

/// Score descending, then `label_1`, then `label_2` ascending.
pub fn greedy_order(a: &ScoredPair, b: &ScoredPair) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.pair.label_1.cmp(&b.pair.label_1))
        .then_with(|| a.pair.label_2.cmp(&b.pair.label_2))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GreedyOptions {
    /// Pairs scoring below this are never selected. Off by default.
    pub min_score: Option<f64>,
}

pub fn greedy_best_match(group: &MatchGroup) -> BestMatchSet {
    greedy_best_match_with(group, GreedyOptions::default())
}

pub fn greedy_best_match_with(group: &MatchGroup, options: GreedyOptions) -> BestMatchSet {
    let mut order: Vec<&ScoredPair> = group.pairs.iter().collect();
    order.sort_by(|a, b| greedy_order(a, b));
    let (eligible, below): (Vec<&ScoredPair>, Vec<&ScoredPair>) = order
        .into_iter()
        .partition(|p| options.min_score.is_none_or(|t| p.score >= t));
    let mut set = select_in_order(&group.key, eligible.into_iter().map(|p| &p.pair));
    set.rejected.extend(below.into_iter().map(|p| p.pair.clone()));
    set
}

/// Same selection rule as the greedy matcher but visiting pairs in a
/// uniformly shuffled order. The shuffle is seeded per group from `seed`
/// and the group key, so results do not depend on group processing order.
pub fn randomized_baseline(group: &PairGroup, seed: u64) -> BestMatchSet {
    let mut order: Vec<&LabelPair> = group.pairs.iter().collect();
    order.sort_by(|a, b| (&a.label_1, &a.label_2).cmp(&(&b.label_1, &b.label_2)));
    let entity = group.key.entity_id.0.to_le_bytes();
    let mut rng = sub_rng(
        seed,
        &[&entity, group.key.lang_1.as_bytes(), group.key.lang_2.as_bytes()],
    );
    order.shuffle(&mut rng);
    select_in_order(&group.key, order.into_iter())
}

/// Selects exactly the pairs of two main labels.
pub fn main_label_baseline(group: &PairGroup) -> BestMatchSet {
    let (selected, rejected) = group
        .pairs
        .iter()
        .cloned()
        .partition(|p| p.is_main_1 && p.is_main_2);
    BestMatchSet {
        key: group.key.clone(),
        selected,
        rejected,
    }
}

/// Splits scored pairs into per-(scorer, group) match groups, ordered by
/// scorer then group key.
pub fn group_scored(pairs: Vec<ScoredPair>) -> Result<Vec<MatchGroup>, MatchError> {
    let mut buckets: BTreeMap<(ScorerId, GroupKey), Vec<ScoredPair>> = BTreeMap::new();
    for p in pairs {
        buckets.entry((p.scorer, p.pair.group_key())).or_default().push(p);
    }
    buckets.into_values().map(MatchGroup::new).collect()
}

/// Splits label pairs into groups ordered by key.
pub fn group_pairs(pairs: Vec<LabelPair>) -> Result<Vec<PairGroup>, MatchError> {
    let mut buckets: BTreeMap<GroupKey, Vec<LabelPair>> = BTreeMap::new();
    for p in pairs {
        buckets.entry(p.group_key()).or_default().push(p);
    }
    buckets.into_values().map(PairGroup::new).collect()
}
