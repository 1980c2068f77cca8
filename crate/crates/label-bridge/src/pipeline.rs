//! The pipeline stages. Each reads the previous stage's artifact from the
//! work directory and writes its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use label_bridge_core::dataset::{
    compute_language_stats, filter_entity, generate_pairs, presence_correlation, select_top_languages,
    verify_label_languages, LanguageIdProvider, ProviderError,
};
use label_bridge_core::evaluation::{
    evaluate as evaluate_method, preprocess_pool, render_accuracy_table, required_sample_size, score_reports,
    stratified_sample, EvalReport, TruthIndex,
};
use label_bridge_core::matcher::{
    greedy_best_match_with, group_pairs, group_scored, main_label_baseline, randomized_baseline, BestMatchSet,
    GreedyOptions,
};
use label_bridge_core::scoring::{
    score_cognate, score_sentence, score_subword, score_subword_mean_cosine, AlignConfig, AlignStrategy,
    CognateScorer, Embedding, Lexicon, Romanizer, SentenceEmbedder, SubwordEmbedder, SubwordVector,
};
use label_bridge_core::text::label_key;
use label_bridge_core::{GroupKey, LabelPair, Method, ScoredPair, ScorerId};
use rayon::prelude::*;

use crate::artifacts::{self, require, Provenance};
use crate::config::{PipelineConfig, Stage};
use crate::dump::{self, ExtractOptions};
use crate::error::{Error, Result};
use crate::providers::{HttpEmbedder, HttpLanguageId, HttpOptions, TsvLanguageId};
use crate::vectors::{Granularity, StoreEmbedder, VectorStore};

pub const ENTITIES: &str = "entities.jsonl";
pub const DIAGNOSTICS: &str = "extract_diagnostics.tsv";
pub const LANGUAGE_STATS: &str = "language_stats.tsv";
pub const LANGUAGE_CORRELATION: &str = "language_correlation.tsv";
pub const LANGUAGES: &str = "languages.txt";
pub const FILTERED: &str = "filtered_entities.jsonl";
pub const DATASET: &str = "dataset.tsv";
pub const SCORED: &str = "scored.tsv";
pub const MATCHES: &str = "matches.tsv";
pub const POOL: &str = "pool.tsv";
pub const SAMPLE: &str = "sample.tsv";
pub const ALLOCATION: &str = "sample_allocation.tsv";
pub const EVALUATION_JSON: &str = "evaluation.json";
pub const EVALUATION_TXT: &str = "evaluation.txt";
pub const HISTOGRAMS: &str = "histograms.csv";
pub const LANGUAGE_MEANS: &str = "language_means.csv";

fn provenance(cfg: &PipelineConfig, artifact: &str, seeded: bool) -> Provenance {
    let p = Provenance::new(artifact, &cfg.hash());
    match (seeded, cfg.seed) {
        (true, Some(s)) => p.with_seed("pipeline", s),
        _ => p,
    }
}

fn seed(cfg: &PipelineConfig) -> Result<u64> {
    cfg.seed
        .ok_or_else(|| Error::Config(vec!["seed is required for this stage".into()]))
}

fn input(cfg: &PipelineConfig, name: &str, producer: &'static str) -> Result<PathBuf> {
    let p = cfg.path(name);
    require(&p, producer)?;
    Ok(p)
}

pub struct ExtractSummary {
    pub entities_seen: usize,
    pub records: usize,
    pub diagnostics: usize,
}

pub fn extract(cfg: &PipelineConfig) -> Result<ExtractSummary> {
    cfg.validate(Stage::Extract)?;
    let dump_path = cfg.extract.dump.as_ref().expect("validated");
    let roots = cfg.roots().map_err(|e| Error::Config(vec![e]))?;
    let out = dump::extract(
        dump_path,
        roots,
        ExtractOptions {
            strict: cfg.extract.strict,
            chunk_lines: cfg.extract.chunk_lines,
        },
    )?;
    for d in &out.diagnostics {
        log::warn!("{}:{}: {}", dump_path.display(), d.line, d.message);
    }
    artifacts::write_records(&cfg.path(ENTITIES), &provenance(cfg, "entities", false), &out.records)?;
    let mut diag = provenance(cfg, "extract-diagnostics", false).lines();
    diag.push_str("line\tmessage\n");
    for d in &out.diagnostics {
        let _ = writeln!(diag, "{}\t{}", d.line, d.message.replace(['\t', '\n'], " "));
    }
    artifacts::write_text(&cfg.path(DIAGNOSTICS), &diag)?;
    Ok(ExtractSummary {
        entities_seen: out.entities_seen,
        records: out.records.len(),
        diagnostics: out.diagnostics.len(),
    })
}

pub fn rank_languages(cfg: &PipelineConfig) -> Result<Vec<String>> {
    cfg.validate(Stage::RankLangs)?;
    let records = artifacts::read_records(&input(cfg, ENTITIES, "extract")?)?;
    let stats = compute_language_stats(&records, &cfg.languages.candidates).map_err(Error::data)?;
    let selected = if cfg.languages.selected.is_empty() {
        select_top_languages(&stats, cfg.languages.top_k).map_err(Error::data)?
    } else {
        cfg.languages.selected.clone()
    };

    let mut out = provenance(cfg, "language-stats", false).lines();
    out.push_str(
        "language\tmain_label_coverage\talias_presence\tmean_alias_count\trank_main\trank_presence\trank_mean\tavg_rank\tselected\n",
    );
    let mut ordered: Vec<_> = stats.iter().collect();
    ordered.sort_by(|a, b| a.avg_rank.total_cmp(&b.avg_rank).then_with(|| a.language.cmp(&b.language)));
    for s in ordered {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{:.6}\t{}",
            s.language,
            s.main_label_coverage,
            s.alias_presence,
            s.mean_alias_count,
            s.rank_main,
            s.rank_presence,
            s.rank_mean,
            s.avg_rank,
            u8::from(selected.contains(&s.language))
        );
    }
    artifacts::write_text(&cfg.path(LANGUAGE_STATS), &out)?;

    let mut corr = provenance(cfg, "language-correlation", false).lines();
    corr.push_str("lang_1\tlang_2\tpearson\n");
    let mut sorted_sel = selected.clone();
    sorted_sel.sort();
    for (a, b, r) in presence_correlation(&records, &sorted_sel) {
        match r {
            Some(r) => writeln!(corr, "{a}\t{b}\t{r:.6}"),
            None => writeln!(corr, "{a}\t{b}\tNA"),
        }
        .expect("string write");
    }
    artifacts::write_text(&cfg.path(LANGUAGE_CORRELATION), &corr)?;

    let mut langs = provenance(cfg, "languages", false).lines();
    for l in &selected {
        langs.push_str(l);
        langs.push('\n');
    }
    artifacts::write_text(&cfg.path(LANGUAGES), &langs)?;
    Ok(selected)
}

fn read_languages(cfg: &PipelineConfig) -> Result<Vec<String>> {
    let path = input(cfg, LANGUAGES, "rank-langs")?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect())
}

enum LangId {
    Tsv(TsvLanguageId),
    Http(HttpLanguageId),
}

impl LanguageIdProvider for LangId {
    fn probabilities(&self, text: &str) -> Result<Vec<(String, f64)>, ProviderError> {
        match self {
            LangId::Tsv(p) => p.probabilities(text),
            LangId::Http(p) => p.probabilities(text),
        }
    }
}

pub struct DatasetSummary {
    pub kept_entities: usize,
    pub pairs: usize,
}

pub fn build_dataset(cfg: &PipelineConfig) -> Result<DatasetSummary> {
    cfg.validate(Stage::BuildDataset)?;
    let records = artifacts::read_records(&input(cfg, ENTITIES, "extract")?)?;
    let selected = read_languages(cfg)?;
    let criteria = cfg.criteria(selected.clone());
    criteria.validate().map_err(|e| Error::Config(vec![e.to_string()]))?;

    let mut kept: Vec<_> = records.iter().filter_map(|r| filter_entity(r, &criteria)).collect();

    if !cfg.langid.skip {
        let provider = match (&cfg.langid.url, &cfg.langid.tsv) {
            (Some(url), _) => {
                let p = HttpLanguageId::new(
                    url,
                    HttpOptions {
                        batch_size: cfg.scoring.batch_size,
                        ..HttpOptions::default()
                    },
                );
                let texts: Vec<&str> = kept
                    .iter()
                    .flat_map(|r| r.labels.values().chain(r.aliases.values().flatten()))
                    .map(String::as_str)
                    .collect();
                p.prefetch(&texts)?;
                LangId::Http(p)
            }
            (None, Some(tsv)) => LangId::Tsv(TsvLanguageId::read(tsv)?),
            (None, None) => unreachable!("validated"),
        };
        let thresholds = cfg.thresholds();
        kept = kept
            .par_iter()
            .map(|r| verify_label_languages(r, &provider, &thresholds))
            .collect::<Result<Vec<_>, _>>()?;
    }

    let mut pairs: Vec<LabelPair> = kept.iter().flat_map(|r| generate_pairs(r, &selected)).collect();
    pairs.sort();
    artifacts::write_records(&cfg.path(FILTERED), &provenance(cfg, "filtered-entities", false), &kept)?;
    artifacts::write_dataset(&cfg.path(DATASET), &provenance(cfg, "dataset", false), &pairs)?;
    Ok(DatasetSummary {
        kept_entities: kept.len(),
        pairs: pairs.len(),
    })
}

fn read_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lex = Lexicon::default();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let prob = match f.as_slice() {
            [_, _, p] => p.parse::<f64>().ok().filter(|p| p.is_finite()),
            [_, _] => Some(1.0),
            _ => None,
        };
        let Some(prob) = prob else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `word_1 word_2 [prob]`".into(),
            });
        };
        lex.insert(f[0], f[1], prob);
    }
    Ok(lex)
}

fn cognate_scorer(cfg: &PipelineConfig) -> Result<CognateScorer> {
    let mut romanizer = Romanizer::builtin();
    for t in &cfg.scoring.translit_tables {
        let text = fs::read_to_string(t).map_err(|e| Error::io(t, e))?;
        romanizer.add_table(&text).map_err(|e| Error::Parse {
            path: t.clone(),
            line: 0,
            message: e.to_string(),
        })?;
    }
    let lexicon = cfg.scoring.lexicon.as_deref().map(read_lexicon).transpose()?;
    Ok(CognateScorer::new(romanizer, lexicon))
}

enum Provider<'a> {
    Store(StoreEmbedder<'a>),
    Http(HttpEmbedder),
}

impl SentenceEmbedder for Provider<'_> {
    fn embed_sentence(&self, text: &str) -> Result<Embedding, ProviderError> {
        match self {
            Provider::Store(p) => p.embed_sentence(text),
            Provider::Http(p) => p.embed_sentence(text),
        }
    }
}

impl SubwordEmbedder for Provider<'_> {
    fn embed_subwords(&self, text: &str) -> Result<Vec<SubwordVector>, ProviderError> {
        match self {
            Provider::Store(p) => p.embed_subwords(text),
            Provider::Http(p) => p.embed_subwords(text),
        }
    }
}

fn granularity(id: ScorerId) -> Granularity {
    match id {
        ScorerId::SimA | ScorerId::SimM | ScorerId::SimI | ScorerId::SimC => Granularity::Subwords,
        _ => Granularity::Sentence,
    }
}

fn score_with(id: ScorerId, pair: &LabelPair, provider: &Provider<'_>, align: AlignConfig) -> Result<ScoredPair> {
    Ok(match id {
        ScorerId::SimA => score_subword(pair, provider, AlignStrategy::Argmax, align)?,
        ScorerId::SimM => score_subword(pair, provider, AlignStrategy::Match, align)?,
        ScorerId::SimI => score_subword(pair, provider, AlignStrategy::Itermax, align)?,
        ScorerId::SimC => score_subword_mean_cosine(pair, provider)?,
        ScorerId::Mpa => unreachable!("MPA needs no provider"),
        sentence => score_sentence(pair, provider, sentence)?,
    })
}

pub fn score(cfg: &PipelineConfig) -> Result<usize> {
    cfg.validate(Stage::Score)?;
    let pairs = artifacts::read_dataset(&input(cfg, DATASET, "build-dataset")?)?;
    let mut ids = cfg.scoring.scorer_ids();
    ids.sort();
    ids.dedup();
    let align = AlignConfig {
        itermax_rounds: cfg.scoring.itermax_rounds,
    };

    let store = match (&cfg.scoring.embed_url, &cfg.scoring.vectors) {
        (None, Some(p)) if ids.iter().any(|&i| i != ScorerId::Mpa) => Some(VectorStore::read(p)?),
        _ => None,
    };
    let labels: BTreeSet<String> = pairs
        .iter()
        .flat_map(|p| [label_key(&p.label_1), label_key(&p.label_2)])
        .collect();
    let labels: Vec<&str> = labels.iter().map(String::as_str).collect();

    let mut providers: BTreeMap<(String, Granularity), Provider<'_>> = BTreeMap::new();
    for &id in ids.iter().filter(|&&i| i != ScorerId::Mpa) {
        let model = cfg.scoring.model_for(id).expect("validated");
        let key = (model.to_string(), granularity(id));
        if providers.contains_key(&key) {
            continue;
        }
        let provider = match (&cfg.scoring.embed_url, &store) {
            (Some(url), _) => {
                let client = HttpEmbedder::new(
                    url,
                    model,
                    key.1,
                    HttpOptions {
                        batch_size: cfg.scoring.batch_size,
                        ..HttpOptions::default()
                    },
                );
                client.prefetch(&labels)?;
                Provider::Http(client)
            }
            (None, Some(store)) => Provider::Store(store.embedder(model)),
            (None, None) => unreachable!("validated"),
        };
        providers.insert(key, provider);
    }

    let cognate = if ids.contains(&ScorerId::Mpa) {
        Some(cognate_scorer(cfg)?)
    } else {
        None
    };
    let mut scored: Vec<ScoredPair> = Vec::with_capacity(pairs.len() * ids.len());
    for &id in &ids {
        let part: Vec<ScoredPair> = match (id, &cognate) {
            (ScorerId::Mpa, Some(c)) => pairs.par_iter().map(|p| score_cognate(p, c)).collect(),
            _ => {
                let provider = &providers[&(cfg.scoring.model_for(id).expect("validated").to_string(), granularity(id))];
                pairs
                    .par_iter()
                    .map(|p| score_with(id, p, provider, align))
                    .collect::<Result<_>>()?
            }
        };
        scored.extend(part);
    }
    scored.sort_by(|a, b| a.pair.cmp(&b.pair).then(a.scorer.cmp(&b.scorer)));
    artifacts::write_scored(&cfg.path(SCORED), &provenance(cfg, "scored", false), &scored)?;
    Ok(scored.len())
}

/// Best-match sets per method: each scorer present in `scored`, then the
/// randomized and main-label baselines when enabled.
pub fn match_all(
    cfg: &PipelineConfig,
    scored: Vec<ScoredPair>,
    dataset: Vec<LabelPair>,
) -> Result<Vec<(Method, Vec<BestMatchSet>)>> {
    let options = GreedyOptions {
        min_score: cfg.matching.min_score,
    };
    let groups = group_scored(scored).map_err(Error::data)?;
    let mut by_scorer: BTreeMap<ScorerId, Vec<BestMatchSet>> = BTreeMap::new();
    let sets: Vec<(ScorerId, BestMatchSet)> = groups
        .par_iter()
        .map(|g| (g.scorer, greedy_best_match_with(g, options)))
        .collect();
    for (s, set) in sets {
        by_scorer.entry(s).or_default().push(set);
    }
    let mut out: Vec<(Method, Vec<BestMatchSet>)> =
        by_scorer.into_iter().map(|(s, v)| (Method::Scored(s), v)).collect();
    if cfg.matching.baselines {
        let seed = seed(cfg)?;
        let groups = group_pairs(dataset).map_err(Error::data)?;
        out.push((
            Method::Randomized,
            groups.par_iter().map(|g| randomized_baseline(g, seed)).collect(),
        ));
        out.push((Method::MainLabel, groups.iter().map(main_label_baseline).collect()));
    }
    Ok(out)
}

pub fn run_match(cfg: &PipelineConfig) -> Result<usize> {
    cfg.validate(Stage::Match)?;
    let scored = artifacts::read_scored(&input(cfg, SCORED, "score")?)?;
    let dataset = artifacts::read_dataset(&input(cfg, DATASET, "build-dataset")?)?;
    let sets = match_all(cfg, scored, dataset)?;
    artifacts::write_matches(&cfg.path(MATCHES), &provenance(cfg, "matches", cfg.matching.baselines), &sets)?;
    Ok(sets.len())
}

pub struct SampleSummary {
    pub pool_groups: usize,
    pub sample_groups: usize,
    pub warnings: Vec<String>,
}

pub fn sample(cfg: &PipelineConfig) -> Result<SampleSummary> {
    cfg.validate(Stage::Sample)?;
    let seed = seed(cfg)?;
    let dataset = artifacts::read_dataset(&input(cfg, DATASET, "build-dataset")?)?;
    let pool = preprocess_pool(dataset, seed, &cfg.pool.options());
    let groups: BTreeSet<GroupKey> = pool.pairs.iter().map(LabelPair::group_key).collect();
    let n = match cfg.sampling.size {
        Some(n) => n,
        None if groups.is_empty() => 0,
        None => required_sample_size(groups.len() as i64, cfg.sampling.confidence, cfg.sampling.margin)
            .map_err(|e| Error::Config(vec![e.to_string()]))? as usize,
    };
    let sample = stratified_sample(&pool.pairs, n, seed).map_err(Error::data)?;
    for w in &sample.warnings {
        log::warn!("{w}");
    }
    let prov = |a: &str| provenance(cfg, a, true);
    artifacts::write_dataset(&cfg.path(POOL), &prov("pool"), &pool.pairs)?;
    artifacts::write_dataset(&cfg.path(SAMPLE), &prov("sample"), &sample.pairs)?;
    let mut alloc = prov("sample-allocation").lines();
    alloc.push_str("lang_1\tlang_2\tavailable\tallocated\n");
    for a in &sample.allocation {
        let _ = writeln!(alloc, "{}\t{}\t{}\t{}", a.stratum.0, a.stratum.1, a.available, a.allocated);
    }
    artifacts::write_text(&cfg.path(ALLOCATION), &alloc)?;
    Ok(SampleSummary {
        pool_groups: groups.len(),
        sample_groups: n,
        warnings: sample.warnings,
    })
}

fn report_json(r: &EvalReport) -> serde_json::Value {
    serde_json::json!({
        "method": r.method.to_string(),
        "scope": r.scope.to_string(),
        "tp": r.confusion.tp,
        "fp": r.confusion.fp,
        "tn": r.confusion.tn,
        "fn": r.confusion.fn_,
        "support": r.confusion.total(),
        "accuracy": r.accuracy,
        "precision": r.precision,
        "recall": r.recall,
        "f1": r.f1,
    })
}

/// Evaluates every method in the matches artifact against the ground
/// truth, restricted to sampled groups when a sample exists. Returns the
/// rendered accuracy grid.
pub fn evaluate(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate(Stage::Evaluate)?;
    let rows = artifacts::read_matches(&input(cfg, MATCHES, "match")?)?;
    let truth_path = cfg.evaluation.truth.as_ref().expect("validated");
    let truth = artifacts::read_truth(truth_path)?;
    let index = TruthIndex::new(&truth).map_err(|e| Error::Data(format!("{}: {e}", truth_path.display())))?;

    let sample_path = cfg.path(SAMPLE);
    let rows = if sample_path.is_file() {
        let sampled: BTreeSet<GroupKey> = artifacts::read_dataset(&sample_path)?
            .iter()
            .map(LabelPair::group_key)
            .collect();
        rows.into_iter().filter(|r| sampled.contains(&r.pair.group_key())).collect()
    } else {
        rows
    };
    if rows.is_empty() {
        return Err(Error::Data("no match rows to evaluate".into()));
    }

    let mut reports = Vec::new();
    for (method, sets) in artifacts::match_sets(rows) {
        reports.extend(evaluate_method(method, &sets, &index).map_err(Error::data)?);
    }
    let table = render_accuracy_table(&reports);
    let prov = provenance(cfg, "evaluation", cfg.seed.is_some());
    let json = serde_json::json!({
        "provenance": prov.to_json(),
        "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&json).map_err(Error::data)?;
    text.push('\n');
    artifacts::write_text(&cfg.path(EVALUATION_JSON), &text)?;
    artifacts::write_text(&cfg.path(EVALUATION_TXT), &format!("{}{table}", prov.lines()))?;
    Ok(table)
}

pub fn report(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate(Stage::Report)?;
    let scored = artifacts::read_scored(&input(cfg, SCORED, "score")?)?;
    if scored.is_empty() {
        return Err(Error::Data("scored artifact has no rows".into()));
    }
    let r = score_reports(&scored);
    let mut hist = provenance(cfg, "histograms", false).lines();
    hist.push_str("scorer,bin,bin_low,bin_high,count,density\n");
    for h in &r.histograms {
        let dens = h.densities();
        for (i, (&c, d)) in h.counts.iter().zip(dens).enumerate() {
            let (lo, hi) = h.edges(i);
            let _ = writeln!(hist, "{},{i},{lo:.6},{hi:.6},{c},{d:.6}", h.scorer);
        }
    }
    artifacts::write_text(&cfg.path(HISTOGRAMS), &hist)?;
    let mut means = provenance(cfg, "language-means", false).lines();
    means.push_str("scorer,language,mean,count\n");
    for m in &r.language_means {
        let _ = writeln!(means, "{},{},{:.6},{}", m.scorer, m.language, m.mean, m.count);
    }
    artifacts::write_text(&cfg.path(LANGUAGE_MEANS), &means)?;
    Ok(())
}
