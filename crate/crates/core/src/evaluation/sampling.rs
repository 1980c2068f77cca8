//! Sample size for a proportion and stratified group sampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::seed::sub_rng;
use crate::types::{GroupKey, LabelPair};

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingError {
    NonPositivePopulation(i64),
    UnsupportedConfidence(f64),
    InvalidMargin(f64),
    SampleLargerThanPool { requested: usize, available: usize },
}

impl fmt::Display for SamplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingError::NonPositivePopulation(n) => write!(f, "population must be positive, got {n}"),
            SamplingError::UnsupportedConfidence(c) => {
                write!(f, "confidence {c} not supported (use 0.90, 0.95 or 0.99)")
            }
            SamplingError::InvalidMargin(m) => write!(f, "margin {m} must lie strictly between 0 and 1"),
            SamplingError::SampleLargerThanPool { requested, available } => {
                write!(f, "requested {requested} groups but the pool has {available}")
            }
        }
    }
}

impl core::error::Error for SamplingError {}

/// Two-sided z value for the supported confidence levels.
pub fn z_score(confidence: f64) -> Option<f64> {
    const TABLE: [(f64, f64); 3] = [(0.90, 1.645), (0.95, 1.96), (0.99, 2.576)];
    TABLE
        .iter()
        .find(|(c, _)| (c - confidence).abs() < 1e-9)
        .map(|(_, z)| *z)
}

/// Cochran's sample size for a proportion at p = 0.5 with finite
/// population correction, clamped to the population.
pub fn required_sample_size(population: i64, confidence: f64, margin: f64) -> Result<u64, SamplingError> {
    if population <= 0 {
        return Err(SamplingError::NonPositivePopulation(population));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(SamplingError::InvalidMargin(margin));
    }
    let z = z_score(confidence).ok_or(SamplingError::UnsupportedConfidence(confidence))?;
    let n0 = z * z * 0.25 / (margin * margin);
    let n = libm::ceil(n0 / (1.0 + (n0 - 1.0) / population as f64)) as u64;
    Ok(n.min(population as u64))
}

pub type Stratum = (String, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumAllocation {
    pub stratum: Stratum,
    pub available: usize,
    pub allocated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedSample {
    /// Sampled pairs sorted by group key then labels.
    pub pairs: Vec<LabelPair>,
    pub allocation: Vec<StratumAllocation>,
    pub warnings: Vec<String>,
}

/// Equal allocation of `n` units over strata with the given capacities.
/// The remainder goes to the largest strata; strata too small for their
/// share are taken whole and the shortfall is spread over the rest.
pub fn allocate(n: usize, capacities: &[usize]) -> Vec<usize> {
    let mut alloc_ = alloc::vec![0usize; capacities.len()];
    let mut by_capacity: Vec<usize> = (0..capacities.len()).collect();
    by_capacity.sort_by_key(|&i| (capacities[i], i));

    let mut remaining = n;
    let mut open = by_capacity.len();
    let mut first_open = 0;
    for &i in &by_capacity {
        let share = remaining / open;
        if capacities[i] > share {
            break;
        }
        alloc_[i] = capacities[i];
        remaining -= capacities[i];
        open -= 1;
        first_open += 1;
    }
    if open == 0 {
        return alloc_;
    }
    let rest = &by_capacity[first_open..];
    let share = remaining / open;
    let extra = remaining % open;
    for &i in rest {
        alloc_[i] = share;
    }
    // Largest strata first, ties by position.
    let mut largest: Vec<usize> = rest.to_vec();
    largest.sort_by(|&a, &b| capacities[b].cmp(&capacities[a]).then(a.cmp(&b)));
    for &i in largest.iter().take(extra) {
        alloc_[i] += 1;
    }
    alloc_
}

/// Samples `n` whole groups, stratified by language pair. Strata are the
/// unordered language pairs; the sampling unit is the `(entity, L1, L2)`
/// group so every sampled group is complete.
pub fn stratified_sample(pool: &[LabelPair], n: usize, seed: u64) -> Result<StratifiedSample, SamplingError> {
    let mut groups: BTreeMap<GroupKey, Vec<&LabelPair>> = BTreeMap::new();
    for p in pool {
        groups.entry(p.group_key()).or_default().push(p);
    }
    if n > groups.len() {
        return Err(SamplingError::SampleLargerThanPool {
            requested: n,
            available: groups.len(),
        });
    }
    let mut strata: BTreeMap<Stratum, Vec<&GroupKey>> = BTreeMap::new();
    for key in groups.keys() {
        strata
            .entry((key.lang_1.clone(), key.lang_2.clone()))
            .or_default()
            .push(key);
    }
    let capacities: Vec<usize> = strata.values().map(Vec::len).collect();
    let allocated = allocate(n, &capacities);
    let equal_share = if strata.is_empty() { 0 } else { n / strata.len() };

    let mut pairs = Vec::new();
    let mut allocation = Vec::new();
    let mut warnings = Vec::new();
    for ((stratum, mut keys), take) in strata.into_iter().zip(allocated) {
        if keys.len() < equal_share {
            warnings.push(alloc::format!(
                "stratum {}-{} has {} groups, fewer than its equal share {}; taken whole",
                stratum.0,
                stratum.1,
                keys.len(),
                equal_share
            ));
        }
        let mut rng = sub_rng(seed, &[stratum.0.as_bytes(), stratum.1.as_bytes()]);
        keys.shuffle(&mut rng);
        let mut chosen: Vec<&GroupKey> = keys[..take].to_vec();
        chosen.sort();
        for key in chosen {
            let mut members: Vec<LabelPair> = groups[key].iter().map(|p| (*p).clone()).collect();
            members.sort();
            pairs.extend(members);
        }
        allocation.push(StratumAllocation {
            stratum,
            available: keys.len(),
            allocated: take,
        });
    }
    pairs.sort();
    Ok(StratifiedSample {
        pairs,
        allocation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EntityId;
    use alloc::vec;

    #[test]
    fn cochran_values() {
        assert_eq!(required_sample_size(1_000_000_000, 0.95, 0.05).unwrap(), 385);
        assert_eq!(required_sample_size(1000, 0.95, 0.05).unwrap(), 278);
        assert_eq!(required_sample_size(10, 0.95, 0.05).unwrap(), 10);
    }

    #[test]
    fn cochran_errors() {
        assert!(matches!(required_sample_size(0, 0.95, 0.05), Err(SamplingError::NonPositivePopulation(0))));
        assert!(matches!(required_sample_size(-5, 0.95, 0.05), Err(SamplingError::NonPositivePopulation(-5))));
        assert!(matches!(required_sample_size(100, 0.8, 0.05), Err(SamplingError::UnsupportedConfidence(_))));
        assert!(matches!(required_sample_size(100, 0.95, 0.0), Err(SamplingError::InvalidMargin(_))));
        assert!(matches!(required_sample_size(100, 0.95, 1.0), Err(SamplingError::InvalidMargin(_))));
    }

    #[test]
    fn allocation_rules() {
        assert_eq!(allocate(10, &[20, 20]), vec![5, 5]);
        assert_eq!(allocate(11, &[20, 30]), vec![5, 6]);
        assert_eq!(allocate(10, &[2, 20, 20]), vec![2, 4, 4]);
        assert_eq!(allocate(9, &[2, 3, 4]), vec![2, 3, 4]);
        assert_eq!(allocate(0, &[2, 3]), vec![0, 0]);
        let a = allocate(385, &[50; 45]);
        assert_eq!(a.iter().sum::<usize>(), 385);
        assert!(a.iter().max().unwrap() - a.iter().min().unwrap() <= 1);
    }

    fn pool(strata: &[(&str, &str, usize)]) -> Vec<LabelPair> {
        let mut out = Vec::new();
        let mut id = 0;
        for &(l1, l2, groups) in strata {
            for _ in 0..groups {
                id += 1;
                for k in 0..2 {
                    let (a, b) = (alloc::format!("a{k}"), alloc::format!("b{k}"));
                    out.push(LabelPair::new(EntityId(id), (l1, &a, k == 0), (l2, &b, k == 0)).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn whole_pool() {
        let p = pool(&[("de", "en", 3), ("en", "fr", 4)]);
        let s = stratified_sample(&p, 7, 1).unwrap();
        let mut expected = p.clone();
        expected.sort();
        assert_eq!(s.pairs, expected);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn equal_allocation_two_strata() {
        let p = pool(&[("de", "en", 12), ("en", "fr", 9)]);
        let s = stratified_sample(&p, 10, 3).unwrap();
        let counts: Vec<usize> = s.allocation.iter().map(|a| a.allocated).collect();
        assert_eq!(counts, vec![5, 5]);
        assert_eq!(s.pairs.len(), 20);
        assert_eq!(s, stratified_sample(&p, 10, 3).unwrap());
    }

    #[test]
    fn small_stratum_warns_and_redistributes() {
        let p = pool(&[("de", "en", 2), ("en", "fr", 9), ("fr", "ru", 9)]);
        let s = stratified_sample(&p, 12, 3).unwrap();
        let counts: Vec<usize> = s.allocation.iter().map(|a| a.allocated).collect();
        assert_eq!(counts, vec![2, 5, 5]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn too_large_request() {
        let p = pool(&[("de", "en", 2)]);
        assert!(matches!(
            stratified_sample(&p, 3, 0),
            Err(SamplingError::SampleLargerThanPool { requested: 3, available: 2 })
        ));
    }
}
