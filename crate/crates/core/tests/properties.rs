use std::collections::{BTreeMap, BTreeSet};

use label_bridge_core::dataset::{
    compute_language_stats, filter_entity, generate_pairs, select_top_languages, FilterCriteria,
};
use label_bridge_core::evaluation::{preprocess_pool, stratified_sample, PoolOptions};
use label_bridge_core::ingest::{build_class_graph, classify, ClassRoots, EntityClass, EntityRecord, RawEntity};
use label_bridge_core::matcher::{greedy_best_match, randomized_baseline, MatchGroup};
use label_bridge_core::scoring::{align_subwords, AlignStrategy, CognateScorer, SimilarityMatrix};
use label_bridge_core::{EntityId, LabelPair, ScoredPair, ScorerId};
use proptest::prelude::*;

const ROOTS: [u64; 3] = [215_627, 43_229, 2_221_906];

/// Random class graph over ids 1..=n plus the three roots. Edges may form
/// cycles.
fn class_graph(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (3..=max_nodes).prop_flat_map(|n| {
        let total = n + 3;
        (Just(n), prop::collection::vec((0..total, 0..total), 0..(2 * total)))
    })
}

fn node_id(n: usize, i: usize) -> EntityId {
    if i < n {
        EntityId(i as u64 + 1)
    } else {
        EntityId(ROOTS[i - n])
    }
}

/// Reachability by Floyd–Warshall style transitive closure.
fn reachable(n_total: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n_total]; n_total];
    for &(a, b) in edges {
        if a != b {
            r[a][b] = true;
        }
    }
    for k in 0..n_total {
        for i in 0..n_total {
            if r[i][k] {
                let via = r[k].clone();
                for (cell, &v) in r[i].iter_mut().zip(&via) {
                    *cell |= v;
                }
            }
        }
    }
    r
}

proptest! {
    #[test]
    fn closure_matches_brute_force((n, edges) in class_graph(47), instances in prop::collection::vec(prop::collection::vec(0usize..50, 0..3), 1..10)) {
        let total = n + 3;
        let mut entities: BTreeMap<usize, RawEntity> = BTreeMap::new();
        for &(a, b) in &edges {
            let e = entities.entry(a).or_insert_with(|| RawEntity { id: node_id(n, a), ..Default::default() });
            e.p279.push(node_id(n, b));
        }
        let graph = build_class_graph(entities.values(), ClassRoots::default());
        let reach = reachable(total, &edges);
        for (ci, class) in EntityClass::PRIORITY.into_iter().enumerate() {
            let root = n + ci;
            let expected: BTreeSet<EntityId> = (0..total)
                .filter(|&i| i != root && reach[i][root])
                .map(|i| node_id(n, i))
                .collect();
            prop_assert_eq!(graph.subclasses(class), &expected);
        }
        // Soundness: every emitted record has a P31 target with a path to its root.
        for (k, targets) in instances.iter().enumerate() {
            let targets: Vec<usize> = targets.iter().map(|t| t % total).collect();
            let raw = RawEntity {
                id: EntityId(1_000_000 + k as u64),
                p31: targets.iter().map(|&t| node_id(n, t)).collect(),
                ..Default::default()
            };
            let expected = EntityClass::PRIORITY.into_iter().enumerate().find(|(ci, _)| {
                let root = n + ci;
                targets.iter().any(|&t| t == root || reach[t][root])
            }).map(|(_, c)| c);
            prop_assert_eq!(classify(&raw, &graph).map(|r| r.entity_class), expected);
        }
    }
}

fn label_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,6}( [a-zA-Z]{1,6}){0,2}",
        "[а-я]{1,6}( [а-я]{1,5})?",
        " {0,2}[a-z]{1,4} {0,2}",
        "[a-z]{1,3}-[a-z]{1,3}",
    ]
}

fn record_strategy() -> impl Strategy<Value = EntityRecord> {
    let langs = prop::sample::subsequence(vec!["de", "en", "fr", "ru", "sv", "zh"], 1..=6);
    (langs, any::<u64>()).prop_flat_map(|(langs, seed)| {
        let n = langs.len();
        (
            Just(langs),
            prop::collection::vec(prop::option::of(label_strategy()), n),
            prop::collection::vec(prop::collection::vec(label_strategy(), 0..5), n),
            Just(seed),
        )
            .prop_map(|(langs, mains, aliases, seed)| {
                let mut rec = EntityRecord {
                    id: EntityId(seed % 1000),
                    entity_class: EntityClass::Person,
                    labels: BTreeMap::new(),
                    aliases: BTreeMap::new(),
                };
                for (i, l) in langs.iter().enumerate() {
                    if let Some(m) = &mains[i] {
                        rec.labels.insert(l.to_string(), m.clone());
                    }
                    rec.aliases.insert(l.to_string(), aliases[i].clone());
                }
                rec.normalize();
                rec
            })
    })
}

proptest! {
    #[test]
    fn normalization_is_idempotent(rec in record_strategy()) {
        let mut again = rec.clone();
        again.normalize();
        prop_assert_eq!(again, rec);
    }

    #[test]
    fn pair_count_identity(rec in record_strategy()) {
        let pairs = generate_pairs(&rec, &[]);
        let langs: Vec<&str> = rec.languages().into_iter().collect();
        let mut expected = 0;
        for i in 0..langs.len() {
            for j in (i + 1)..langs.len() {
                expected += rec.labels_in(langs[i]).len() * rec.labels_in(langs[j]).len();
            }
        }
        prop_assert_eq!(pairs.len(), expected);
        let unique: BTreeSet<_> = pairs.iter().map(|p| p.join_key()).collect();
        prop_assert_eq!(unique.len(), pairs.len());
        prop_assert!(pairs.iter().all(|p| p.lang_1 < p.lang_2));
    }

    #[test]
    fn alias_order_does_not_change_pair_identity(rec in record_strategy()) {
        let mut shuffled = rec.clone();
        for list in shuffled.aliases.values_mut() {
            list.reverse();
        }
        let a: BTreeSet<LabelPair> = generate_pairs(&rec, &[]).into_iter().collect();
        let b: BTreeSet<LabelPair> = generate_pairs(&shuffled, &[]).into_iter().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn filter_is_monotone(recs in prop::collection::vec(record_strategy(), 1..20), bump in 0usize..3) {
        let langs: Vec<String> = ["de", "en", "fr", "ru", "sv", "zh"].iter().map(|s| s.to_string()).collect();
        let base = FilterCriteria {
            min_languages_with_label: 2,
            min_alias_count: 1,
            min_languages_with_aliases: 1,
            selected_languages: langs,
        };
        let mut stricter = base.clone();
        match bump {
            0 => stricter.min_languages_with_label += 1,
            1 => stricter.min_alias_count += 1,
            _ => stricter.min_languages_with_aliases += 1,
        }
        for r in &recs {
            if filter_entity(r, &stricter).is_some() {
                prop_assert!(filter_entity(r, &base).is_some());
            }
        }
    }

    #[test]
    fn language_selection_ignores_candidate_order(recs in prop::collection::vec(record_strategy(), 1..20), k in 1usize..6, rot in 0usize..6) {
        let mut cands: Vec<String> = ["de", "en", "fr", "ru", "sv", "zh"].iter().map(|s| s.to_string()).collect();
        let stats = compute_language_stats(&recs, &cands).unwrap();
        let a: BTreeSet<String> = select_top_languages(&stats, k).unwrap().into_iter().collect();
        cands.rotate_left(rot);
        cands.reverse();
        let stats = compute_language_stats(&recs, &cands).unwrap();
        let b: BTreeSet<String> = select_top_languages(&stats, k).unwrap().into_iter().collect();
        prop_assert_eq!(a, b);
    }
}

fn group_strategy() -> impl Strategy<Value = MatchGroup> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n1, n2)| {
        prop::collection::vec(0u8..=10, n1 * n2).prop_map(move |scores| {
            let mut pairs = Vec::new();
            for i in 0..n1 {
                for j in 0..n2 {
                    let (a, b) = (format!("a{i}"), format!("b{j}"));
                    pairs.push(ScoredPair {
                        pair: LabelPair::new(EntityId(5), ("de", &a, i == 0), ("en", &b, j == 0)).unwrap(),
                        scorer: ScorerId::SimM,
                        score: f64::from(scores[i * n2 + j]) / 10.0,
                    });
                }
            }
            MatchGroup::new(pairs).unwrap()
        })
    })
}

fn assert_one_to_one(selected: &[LabelPair]) -> Result<(), TestCaseError> {
    let l1: BTreeSet<&str> = selected.iter().map(|p| p.label_1.as_str()).collect();
    let l2: BTreeSet<&str> = selected.iter().map(|p| p.label_2.as_str()).collect();
    prop_assert_eq!(l1.len(), selected.len());
    prop_assert_eq!(l2.len(), selected.len());
    Ok(())
}

proptest! {
    #[test]
    fn greedy_dominance_by_replay(group in group_strategy()) {
        let set = greedy_best_match(&group);
        assert_one_to_one(&set.selected)?;
        let n1: BTreeSet<&str> = group.pairs.iter().map(|p| p.pair.label_1.as_str()).collect();
        let n2: BTreeSet<&str> = group.pairs.iter().map(|p| p.pair.label_2.as_str()).collect();
        prop_assert_eq!(set.selected.len(), n1.len().min(n2.len()));
        prop_assert_eq!(set.selected.len() + set.rejected.len(), group.pairs.len());

        let score = |p: &LabelPair| group.pairs.iter().find(|s| &s.pair == p).unwrap().score;
        let mut used1 = BTreeSet::new();
        let mut used2 = BTreeSet::new();
        for chosen in &set.selected {
            let best = group
                .pairs
                .iter()
                .filter(|s| !used1.contains(&s.pair.label_1) && !used2.contains(&s.pair.label_2))
                .map(|s| s.score)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(score(chosen), best);
            used1.insert(chosen.label_1.clone());
            used2.insert(chosen.label_2.clone());
        }
    }

    #[test]
    fn randomized_baseline_is_one_to_one(group in group_strategy(), seed in any::<u64>()) {
        let set = randomized_baseline(&group.labels(), seed);
        assert_one_to_one(&set.selected)?;
        prop_assert_eq!(set.selected.len() + set.rejected.len(), group.pairs.len());
    }
}

fn matrix_strategy(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec((0u8..=20).prop_map(|v| f64::from(v) * 0.05), c), r)
    })
}

fn brute_force_max(m: &[Vec<f64>]) -> f64 {
    fn go(m: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == m.len() {
            return 0.0;
        }
        // Skipping a row is allowed; with non-negative weights the optimum
        // is still attained by a maximum-cardinality matching.
        let mut best = go(m, row + 1, used);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(m[row][j] + go(m, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m[0].len()])
}

proptest! {
    #[test]
    fn match_strategy_is_optimal(rows in matrix_strategy(5)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let m = SimilarityMatrix::from_rows(&refs).unwrap();
        let matched = align_subwords(&m, AlignStrategy::Match);
        prop_assert_eq!(matched.len(), m.n_rows().min(m.n_cols()));
        let w = m.weight(&matched);
        prop_assert!((w - brute_force_max(&rows)).abs() < 1e-9);
        prop_assert!(w + 1e-12 >= m.weight(&align_subwords(&m, AlignStrategy::Argmax)));
        prop_assert!(w + 1e-12 >= m.weight(&align_subwords(&m, AlignStrategy::Itermax)));
    }

    #[test]
    fn cognate_symmetric_and_bounded(a in label_strategy(), b in label_strategy()) {
        let s = CognateScorer::builtin();
        let ab = s.score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - s.score(&b, &a)).abs() < 1e-9);
        prop_assert!(s.score(&a, &a) >= ab);
    }
}

fn pool_strategy() -> impl Strategy<Value = Vec<LabelPair>> {
    prop::collection::vec(record_strategy(), 1..15).prop_map(|recs| {
        let mut seen = BTreeSet::new();
        recs.into_iter()
            .filter(|r| seen.insert(r.id))
            .flat_map(|r| generate_pairs(&r, &[]))
            .collect()
    })
}

proptest! {
    #[test]
    fn sampling_is_deterministic(pool in pool_strategy(), seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let groups: BTreeSet<_> = pool.iter().map(|p| p.group_key()).collect();
        let n = (groups.len() as f64 * frac) as usize;
        let a = stratified_sample(&pool, n, seed).unwrap();
        let b = stratified_sample(&pool, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let sampled: BTreeSet<_> = a.pairs.iter().map(|p| p.group_key()).collect();
        prop_assert_eq!(sampled.len(), n);
        // whole groups only
        for key in &sampled {
            let full = pool.iter().filter(|p| &p.group_key() == key).count();
            let got = a.pairs.iter().filter(|p| &p.group_key() == key).count();
            prop_assert_eq!(full, got);
        }
    }

    #[test]
    fn pool_preprocessing_is_deterministic(pool in pool_strategy(), seed in any::<u64>()) {
        let opts = PoolOptions::default();
        let a = preprocess_pool(pool.clone(), seed, &opts);
        prop_assert_eq!(&a, &preprocess_pool(pool.clone(), seed, &opts));
        prop_assert!(a.pairs.iter().all(|p| pool.contains(p)));
    }
}
