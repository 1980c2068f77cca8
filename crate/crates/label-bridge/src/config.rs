//! Pipeline configuration: one TOML file, environment overrides, then
//! command-line flags.

use std::path::{Path, PathBuf};

use label_bridge_core::dataset::{FilterCriteria, LanguageIdThresholds};
use label_bridge_core::evaluation::{PoolOptions, SingletonRule};
use label_bridge_core::ingest::ClassRoots;
use label_bridge_core::scoring::AlignConfig;
use label_bridge_core::{EntityId, ScorerId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONFIG_ENV: &str = "LABEL_BRIDGE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every stochastic stage. Required by `match` and `sample`.
    pub seed: Option<u64>,
    pub workdir: PathBuf,
    pub extract: ExtractConfig,
    pub languages: LanguagesConfig,
    pub filter: FilterConfig,
    pub langid: LangIdConfig,
    pub scoring: ScoringConfig,
    pub matching: MatchingConfig,
    pub pool: PoolConfig,
    pub sampling: SamplingConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            workdir: PathBuf::from("work"),
            extract: ExtractConfig::default(),
            languages: LanguagesConfig::default(),
            filter: FilterConfig::default(),
            langid: LangIdConfig::default(),
            scoring: ScoringConfig::default(),
            matching: MatchingConfig::default(),
            pool: PoolConfig::default(),
            sampling: SamplingConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub dump: Option<PathBuf>,
    pub strict: bool,
    /// Person, Organisation, Place root classes, in priority order.
    pub roots: [String; 3],
    pub chunk_lines: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let r = ClassRoots::default().0;
        ExtractConfig {
            dump: None,
            strict: false,
            roots: [r[0].to_string(), r[1].to_string(), r[2].to_string()],
            chunk_lines: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguagesConfig {
    /// Fixed language selection. When empty, the top `top_k` ranked
    /// languages are used.
    pub selected: Vec<String>,
    pub top_k: usize,
    /// Languages considered by the ranking; empty means all observed.
    pub candidates: Vec<String>,
}

impl Default for LanguagesConfig {
    fn default() -> Self {
        LanguagesConfig {
            selected: Vec::new(),
            top_k: 10,
            candidates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_languages_with_label: usize,
    pub min_alias_count: usize,
    pub min_languages_with_aliases: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let c = FilterCriteria::with_languages(Vec::new());
        FilterConfig {
            min_languages_with_label: c.min_languages_with_label,
            min_alias_count: c.min_alias_count,
            min_languages_with_aliases: c.min_languages_with_aliases,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangIdConfig {
    pub skip: bool,
    pub tsv: Option<PathBuf>,
    pub url: Option<String>,
    pub drop_threshold: f64,
    pub ambiguity_threshold: f64,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        let t = LanguageIdThresholds::default();
        LangIdConfig {
            skip: false,
            tsv: None,
            url: None,
            drop_threshold: t.drop_threshold,
            ambiguity_threshold: t.ambiguity_threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelTags {
    /// Sentence model behind LS_C / LS_E.
    pub ls: Option<String>,
    /// Sentence model behind LB_C / LB_E.
    pub lb: Option<String>,
    /// Sub-word model behind the SIM_* scorers.
    pub sim: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub scorers: Vec<String>,
    /// File-mode vector store (TSV or LBVS binary).
    pub vectors: Option<PathBuf>,
    /// Sidecar base URL; takes precedence over `vectors`.
    pub embed_url: Option<String>,
    /// Optional bilingual lexicon for MPA, TSV `word_1 word_2 prob`.
    pub lexicon: Option<PathBuf>,
    /// Extra romanization tables, TSV `source target`.
    pub translit_tables: Vec<PathBuf>,
    pub itermax_rounds: usize,
    pub batch_size: usize,
    pub models: ModelTags,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            scorers: vec!["MPA".into()],
            vectors: None,
            embed_url: None,
            lexicon: None,
            translit_tables: Vec::new(),
            itermax_rounds: AlignConfig::default().itermax_rounds,
            batch_size: 64,
            models: ModelTags::default(),
        }
    }
}

impl ScoringConfig {
    /// Parsed scorer ids; unknown names are reported by `validate`.
    pub fn scorer_ids(&self) -> Vec<ScorerId> {
        self.scorers.iter().filter_map(|s| s.parse().ok()).collect()
    }

    pub fn model_for(&self, id: ScorerId) -> Option<&str> {
        match id {
            ScorerId::Mpa => None,
            ScorerId::SimA | ScorerId::SimM | ScorerId::SimI | ScorerId::SimC => self.models.sim.as_deref(),
            ScorerId::LsC | ScorerId::LsE => self.models.ls.as_deref(),
            ScorerId::LbC | ScorerId::LbE => self.models.lb.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    /// Pairs scoring below this are never selected. Off by default.
    pub min_score: Option<f64>,
    pub baselines: bool,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            min_score: None,
            baselines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub outlier_sigmas: f64,
    /// `drop-group` or `drop-entity`.
    pub singleton_rule: String,
    pub identical_keep_fraction: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        let o = PoolOptions::default();
        PoolConfig {
            outlier_sigmas: o.outlier_sigmas,
            singleton_rule: "drop-group".into(),
            identical_keep_fraction: o.identical_keep_fraction,
        }
    }
}

impl PoolConfig {
    pub fn options(&self) -> PoolOptions {
        PoolOptions {
            outlier_sigmas: self.outlier_sigmas,
            singleton_rule: if self.singleton_rule == "drop-entity" {
                SingletonRule::DropEntity
            } else {
                SingletonRule::DropGroup
            },
            identical_keep_fraction: self.identical_keep_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub confidence: f64,
    pub margin: f64,
    /// Fixed number of groups, overriding the computed sample size.
    pub size: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            confidence: 0.95,
            margin: 0.05,
            size: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub truth: Option<PathBuf>,
}

/// Command-line values that take precedence over file and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workdir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub langid_url: Option<String>,
    pub embed_url: Option<String>,
    pub skip_langid: bool,
    pub strict: bool,
}

/// Stages, for stage-specific validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    RankLangs,
    BuildDataset,
    Score,
    Match,
    Sample,
    Evaluate,
    Report,
}

impl PipelineConfig {
    /// Loads `path` (or `$LABEL_BRIDGE_CONFIG`, or defaults when neither is
    /// set), resolves relative paths against the file's directory, then
    /// applies environment overrides and `flags`.
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let path = path.map(Path::to_path_buf).or(env_path);
        let mut cfg = match &path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let mut cfg: PipelineConfig =
                    toml::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", p.display())]))?;
                cfg.resolve_relative(p.parent().unwrap_or(Path::new(".")));
                cfg
            }
            None => PipelineConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.apply_flags(flags);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.workdir);
        for p in [
            &mut self.extract.dump,
            &mut self.langid.tsv,
            &mut self.scoring.vectors,
            &mut self.scoring.lexicon,
            &mut self.evaluation.truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.scoring.translit_tables.iter_mut().for_each(fix);
    }

    /// `LABEL_BRIDGE_SEED`, `_WORKDIR`, `_DUMP`, `_LANGID_URL`,
    /// `_LANGID_TSV`, `_EMBED_URL`, `_VECTORS`, `_TRUTH`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        let mut errors = Vec::new();
        if let Some(s) = get("LABEL_BRIDGE_SEED") {
            match s.parse() {
                Ok(v) => self.seed = Some(v),
                Err(_) => errors.push(format!("LABEL_BRIDGE_SEED={s:?} is not an unsigned integer")),
            }
        }
        if let Some(v) = get("LABEL_BRIDGE_WORKDIR") {
            self.workdir = v.into();
        }
        if let Some(v) = get("LABEL_BRIDGE_DUMP") {
            self.extract.dump = Some(v.into());
        }
        if let Some(v) = get("LABEL_BRIDGE_LANGID_URL") {
            self.langid.url = Some(v);
        }
        if let Some(v) = get("LABEL_BRIDGE_LANGID_TSV") {
            self.langid.tsv = Some(v.into());
        }
        if let Some(v) = get("LABEL_BRIDGE_EMBED_URL") {
            self.scoring.embed_url = Some(v);
        }
        if let Some(v) = get("LABEL_BRIDGE_VECTORS") {
            self.scoring.vectors = Some(v.into());
        }
        if let Some(v) = get("LABEL_BRIDGE_TRUTH") {
            self.evaluation.truth = Some(v.into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn apply_flags(&mut self, flags: &Overrides) {
        if let Some(w) = &flags.workdir {
            self.workdir = w.clone();
        }
        if let Some(s) = flags.seed {
            self.seed = Some(s);
        }
        if let Some(u) = &flags.langid_url {
            self.langid.url = Some(u.clone());
        }
        if let Some(u) = &flags.embed_url {
            self.scoring.embed_url = Some(u.clone());
        }
        self.langid.skip |= flags.skip_langid;
        self.extract.strict |= flags.strict;
    }

    pub fn roots(&self) -> Result<ClassRoots, String> {
        let mut ids = [EntityId(0); 3];
        for (slot, s) in ids.iter_mut().zip(&self.extract.roots) {
            *slot = s.parse().map_err(|e| format!("extract.roots: {e}"))?;
        }
        Ok(ClassRoots(ids))
    }

    pub fn thresholds(&self) -> LanguageIdThresholds {
        LanguageIdThresholds {
            drop_threshold: self.langid.drop_threshold,
            ambiguity_threshold: self.langid.ambiguity_threshold,
        }
    }

    pub fn criteria(&self, selected: Vec<String>) -> FilterCriteria {
        FilterCriteria {
            min_languages_with_label: self.filter.min_languages_with_label,
            min_alias_count: self.filter.min_alias_count,
            min_languages_with_aliases: self.filter.min_languages_with_aliases,
            selected_languages: selected,
        }
    }

    /// Every problem relevant to `stage`, not only the first.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        let mut e = Vec::new();
        if let Err(m) = self.roots() {
            e.push(m);
        }
        if self.extract.chunk_lines == 0 {
            e.push("extract.chunk_lines must be positive".into());
        }
        if self.languages.selected.is_empty() && self.languages.top_k < 2 {
            e.push("languages.top_k must be at least 2 when languages.selected is empty".into());
        }
        if !self.languages.selected.is_empty() && self.languages.selected.len() < 2 {
            e.push("languages.selected needs at least 2 languages".into());
        }
        for (name, v) in [
            ("langid.drop_threshold", self.langid.drop_threshold),
            ("langid.ambiguity_threshold", self.langid.ambiguity_threshold),
            ("pool.identical_keep_fraction", self.pool.identical_keep_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                e.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if !(self.pool.outlier_sigmas.is_finite() && self.pool.outlier_sigmas > 0.0) {
            e.push(format!("pool.outlier_sigmas = {} must be positive", self.pool.outlier_sigmas));
        }
        if !["drop-group", "drop-entity"].contains(&self.pool.singleton_rule.as_str()) {
            e.push(format!(
                "pool.singleton_rule = {:?} must be \"drop-group\" or \"drop-entity\"",
                self.pool.singleton_rule
            ));
        }
        if label_bridge_core::evaluation::sampling::z_score(self.sampling.confidence).is_none() {
            e.push(format!(
                "sampling.confidence = {} must be 0.90, 0.95 or 0.99",
                self.sampling.confidence
            ));
        }
        if !(self.sampling.margin > 0.0 && self.sampling.margin < 1.0) {
            e.push(format!("sampling.margin = {} must lie in (0, 1)", self.sampling.margin));
        }
        if self.scoring.scorers.is_empty() {
            e.push("scoring.scorers is empty".into());
        }
        for s in &self.scoring.scorers {
            if s.parse::<ScorerId>().is_err() {
                e.push(format!("scoring.scorers: unknown scorer {s:?}"));
            }
        }
        if self.scoring.itermax_rounds == 0 {
            e.push("scoring.itermax_rounds must be positive".into());
        }
        if self.scoring.batch_size == 0 {
            e.push("scoring.batch_size must be positive".into());
        }
        if let Some(m) = self.matching.min_score {
            if !m.is_finite() {
                e.push("matching.min_score must be finite".into());
            }
        }

        let file = |e: &mut Vec<String>, name: &str, p: &Option<PathBuf>| match p {
            None => e.push(format!("{name} is not set")),
            Some(p) if !p.is_file() => e.push(format!("{name} = {} does not exist", p.display())),
            Some(_) => {}
        };
        match stage {
            Stage::Extract => file(&mut e, "extract.dump", &self.extract.dump),
            Stage::BuildDataset => {
                if !self.langid.skip {
                    match (&self.langid.tsv, &self.langid.url) {
                        (None, None) => e.push(
                            "language ID needs langid.tsv or langid.url (or --skip-langid)".into(),
                        ),
                        (Some(_), _) => file(&mut e, "langid.tsv", &self.langid.tsv),
                        _ => {}
                    }
                }
            }
            Stage::Score => {
                let ids = self.scoring.scorer_ids();
                let needs_vectors = ids.iter().any(|&id| id != ScorerId::Mpa);
                if needs_vectors {
                    match (&self.scoring.vectors, &self.scoring.embed_url) {
                        (None, None) => e.push(
                            "embedding scorers need scoring.vectors or scoring.embed_url".into(),
                        ),
                        (Some(_), _) => file(&mut e, "scoring.vectors", &self.scoring.vectors),
                        _ => {}
                    }
                }
                for id in ids {
                    if id != ScorerId::Mpa && self.scoring.model_for(id).is_none() {
                        let key = match id {
                            ScorerId::LsC | ScorerId::LsE => "ls",
                            ScorerId::LbC | ScorerId::LbE => "lb",
                            _ => "sim",
                        };
                        let msg = format!("scoring.models.{key} is required by {id}");
                        if !e.contains(&msg) {
                            e.push(msg);
                        }
                    }
                }
                if self.scoring.lexicon.is_some() {
                    file(&mut e, "scoring.lexicon", &self.scoring.lexicon);
                }
                for t in &self.scoring.translit_tables {
                    if !t.is_file() {
                        e.push(format!("scoring.translit_tables: {} does not exist", t.display()));
                    }
                }
            }
            Stage::Match | Stage::Sample => {
                if self.seed.is_none() && (stage == Stage::Sample || self.matching.baselines) {
                    e.push("seed is required for this stage (config `seed`, LABEL_BRIDGE_SEED or --seed)".into());
                }
            }
            Stage::Evaluate => file(&mut e, "evaluation.truth", &self.evaluation.truth),
            Stage::RankLangs | Stage::Report => {}
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    /// SHA-256 over the configuration with locations (paths, URLs) removed,
    /// so relocated runs of the same settings share a hash.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        strip_locations(&mut v);
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }
}

fn strip_locations(v: &mut serde_json::Value) {
    const KEYS: [&str; 9] = [
        "workdir",
        "dump",
        "tsv",
        "url",
        "vectors",
        "embed_url",
        "lexicon",
        "translit_tables",
        "truth",
    ];
    if let serde_json::Value::Object(map) = v {
        for k in KEYS {
            map.remove(k);
        }
        map.values_mut().for_each(strip_locations);
    }
}
