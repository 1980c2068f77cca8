//! Comparison-pool preprocessing, applied in this fixed order:
//! outlier entities, singleton groups, identical-pair downsampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::seed::sub_rng;
use crate::types::{EntityId, LabelPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingletonRule {
    /// Remove only the single-pair groups.
    DropGroup,
    /// Remove every entity that has any single-pair group.
    DropEntity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolOptions {
    /// Outlier cut: group size > mean + `outlier_sigmas` · stddev, per
    /// language pair.
    pub outlier_sigmas: f64,
    pub singleton_rule: SingletonRule,
    /// Fraction of identical-pair entities retained.
    pub identical_keep_fraction: f64,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            outlier_sigmas: 3.0,
            singleton_rule: SingletonRule::DropGroup,
            identical_keep_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolOutcome {
    pub pairs: Vec<LabelPair>,
    pub outlier_entities: Vec<EntityId>,
    pub singleton_groups_removed: usize,
    pub singleton_entities_removed: Vec<EntityId>,
    pub identical_entities_removed: Vec<EntityId>,
}

type LangPair = (String, String);

pub fn preprocess_pool(pairs: Vec<LabelPair>, seed: u64, options: &PoolOptions) -> PoolOutcome {
    let mut outcome = PoolOutcome::default();

    // 1. outliers
    let mut sizes: BTreeMap<(EntityId, LangPair), usize> = BTreeMap::new();
    for p in &pairs {
        *sizes
            .entry((p.entity_id, (p.lang_1.clone(), p.lang_2.clone())))
            .or_default() += 1;
    }
    let mut per_lang: BTreeMap<&LangPair, Vec<f64>> = BTreeMap::new();
    for ((_, lp), &n) in &sizes {
        per_lang.entry(lp).or_default().push(n as f64);
    }
    let cut: BTreeMap<&LangPair, f64> = per_lang
        .into_iter()
        .map(|(lp, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            (lp, mean + options.outlier_sigmas * libm::sqrt(var))
        })
        .collect();
    let outliers: BTreeSet<EntityId> = sizes
        .iter()
        .filter(|((_, lp), &n)| n as f64 > cut[lp])
        .map(|((e, _), _)| *e)
        .collect();
    outcome.outlier_entities = outliers.iter().copied().collect();

    // 2. singletons
    let singleton_groups: BTreeSet<(EntityId, &LangPair)> = sizes
        .iter()
        .filter(|((e, _), &n)| n == 1 && !outliers.contains(e))
        .map(|((e, lp), _)| (*e, lp))
        .collect();
    let singleton_entities: BTreeSet<EntityId> = match options.singleton_rule {
        SingletonRule::DropEntity => singleton_groups.iter().map(|(e, _)| *e).collect(),
        SingletonRule::DropGroup => BTreeSet::new(),
    };
    outcome.singleton_entities_removed = singleton_entities.iter().copied().collect();

    let mut kept: Vec<LabelPair> = Vec::with_capacity(pairs.len());
    for p in pairs {
        if outliers.contains(&p.entity_id) || singleton_entities.contains(&p.entity_id) {
            continue;
        }
        let lp = (p.lang_1.clone(), p.lang_2.clone());
        if singleton_groups.contains(&(p.entity_id, &lp)) {
            outcome.singleton_groups_removed += 1;
            continue;
        }
        kept.push(p);
    }
    if options.singleton_rule == SingletonRule::DropEntity {
        outcome.singleton_groups_removed = singleton_groups.len();
    }

    // 3. identical-pair downsampling
    let identical: BTreeSet<EntityId> = kept.iter().filter(|p| p.is_identical()).map(|p| p.entity_id).collect();
    let mut candidates: Vec<EntityId> = identical.into_iter().collect();
    let keep = libm::ceil(candidates.len() as f64 * options.identical_keep_fraction) as usize;
    let mut rng = sub_rng(seed, &[b"identical-pairs"]);
    candidates.shuffle(&mut rng);
    let mut dropped: Vec<EntityId> = candidates.split_off(keep.min(candidates.len()));
    dropped.sort_unstable();
    let dropped_set: BTreeSet<EntityId> = dropped.iter().copied().collect();
    kept.retain(|p| !dropped_set.contains(&p.entity_id));
    outcome.identical_entities_removed = dropped;
    outcome.pairs = kept;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn group(entity: u64, l1: &str, l2: &str, n: usize, identical: bool) -> Vec<LabelPair> {
        (0..n)
            .map(|i| {
                let a = format!("a{i}");
                let b = if identical && i == 0 { a.clone() } else { format!("b{i}") };
                LabelPair::new(EntityId(entity), (l1, &a, i == 0), (l2, &b, i == 0)).unwrap()
            })
            .collect()
    }

    fn entities(pairs: &[LabelPair]) -> BTreeSet<u64> {
        pairs.iter().map(|p| p.entity_id.0).collect()
    }

    #[test]
    fn singleton_group_removed() {
        let mut pairs = group(1, "en", "fr", 1, false);
        pairs.extend(group(1, "de", "en", 3, false));
        let out = preprocess_pool(pairs, 0, &PoolOptions::default());
        assert_eq!(out.pairs.len(), 3);
        assert!(out.pairs.iter().all(|p| p.lang_1 == "de"));
        assert_eq!(out.singleton_groups_removed, 1);
    }

    #[test]
    fn singleton_entity_rule() {
        let mut pairs = group(1, "en", "fr", 1, false);
        pairs.extend(group(1, "de", "en", 3, false));
        pairs.extend(group(2, "de", "en", 3, false));
        let opts = PoolOptions {
            singleton_rule: SingletonRule::DropEntity,
            ..Default::default()
        };
        let out = preprocess_pool(pairs, 0, &opts);
        assert_eq!(entities(&out.pairs), BTreeSet::from([2]));
        assert_eq!(out.singleton_entities_removed, vec![EntityId(1)]);
    }

    #[test]
    fn outlier_entity_removed() {
        // 20 entities with 6..=8 PT-ZH pairs (mean about 7) and one with 42.
        let mut pairs = Vec::new();
        for e in 0..20u64 {
            pairs.extend(group(e, "pt", "zh", 6 + (e as usize % 3), false));
        }
        pairs.extend(group(99, "pt", "zh", 42, false));
        let out = preprocess_pool(pairs, 0, &PoolOptions::default());
        assert_eq!(out.outlier_entities, vec![EntityId(99)]);
        assert!(!entities(&out.pairs).contains(&99));
        assert_eq!(entities(&out.pairs).len(), 20);
    }

    #[test]
    fn identical_entities_halved() {
        let mut pairs = Vec::new();
        for e in 0..10u64 {
            pairs.extend(group(e, "en", "sv", 3, true));
        }
        for e in 10..14u64 {
            pairs.extend(group(e, "en", "sv", 3, false));
        }
        let out = preprocess_pool(pairs.clone(), 17, &PoolOptions::default());
        let survivors = entities(&out.pairs);
        assert_eq!(survivors.iter().filter(|&&e| e < 10).count(), 5);
        assert!((10..14).all(|e| survivors.contains(&e)));
        assert_eq!(out.identical_entities_removed.len(), 5);
        assert_eq!(out, preprocess_pool(pairs, 17, &PoolOptions::default()));
    }
}
