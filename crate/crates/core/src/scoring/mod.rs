//! Similarity scorers. Every scorer maps a [`LabelPair`] to a
//! [`ScoredPair`] whose score lies in [`ScorerId::range`].

pub mod align;
pub mod cognate;
pub mod embedding;
pub mod levenshtein;
pub mod translit;

use core::fmt;

use crate::dataset::ProviderError;
use crate::text::label_key;
use crate::types::{LabelPair, ScoredPair, ScorerId};

pub use align::{align_subwords, align_with, AlignConfig, AlignStrategy, SimilarityMatrix};
pub use cognate::{CognateScorer, Lexicon};
pub use embedding::{Embedding, EmbeddingError, SentenceEmbedder, SubwordEmbedder, SubwordVector};
pub use translit::Romanizer;

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    Provider(ProviderError),
    Embedding(EmbeddingError),
    EmptyTokenization(alloc::string::String),
    WrongScorer(ScorerId),
}

impl ScoreError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScoreError::Provider(p) if p.is_retryable())
    }
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::Provider(e) => write!(f, "{e}"),
            ScoreError::Embedding(e) => write!(f, "{e}"),
            ScoreError::EmptyTokenization(label) => {
                write!(f, "provider returned no sub-words for {label:?}")
            }
            ScoreError::WrongScorer(id) => write!(f, "{id} is not valid for this scoring function"),
        }
    }
}

impl core::error::Error for ScoreError {}

impl From<ProviderError> for ScoreError {
    fn from(e: ProviderError) -> Self {
        ScoreError::Provider(e)
    }
}

impl From<EmbeddingError> for ScoreError {
    fn from(e: EmbeddingError) -> Self {
        ScoreError::Embedding(e)
    }
}

impl From<align::MatrixError> for ScoreError {
    fn from(e: align::MatrixError) -> Self {
        match e {
            align::MatrixError::Embedding(e) => ScoreError::Embedding(e),
            other => ScoreError::EmptyTokenization(alloc::format!("{other}")),
        }
    }
}

fn scored(pair: &LabelPair, scorer: ScorerId, score: f64) -> ScoredPair {
    ScoredPair {
        pair: pair.clone(),
        scorer,
        score,
    }
}

pub fn score_cognate(pair: &LabelPair, scorer: &CognateScorer) -> ScoredPair {
    scored(pair, ScorerId::Mpa, scorer.score(&pair.label_1, &pair.label_2))
}

/// Builds the sub-word cosine matrix for a pair using the provider's own
/// tokenization. Labels are looked up by [`label_key`].
pub fn subword_matrix<P: SubwordEmbedder>(
    pair: &LabelPair,
    provider: &P,
) -> Result<SimilarityMatrix, ScoreError> {
    let a = provider.embed_subwords(&label_key(&pair.label_1))?;
    let b = provider.embed_subwords(&label_key(&pair.label_2))?;
    if a.is_empty() {
        return Err(ScoreError::EmptyTokenization(pair.label_1.clone()));
    }
    if b.is_empty() {
        return Err(ScoreError::EmptyTokenization(pair.label_2.clone()));
    }
    Ok(SimilarityMatrix::from_subwords(&a, &b)?)
}

/// Mean of the cosine cells selected by `strategy`; 0 when nothing is
/// selected.
pub fn subword_strategy_score(matrix: &SimilarityMatrix, strategy: AlignStrategy, config: AlignConfig) -> f64 {
    let cells = align_with(matrix, strategy, config);
    if cells.is_empty() {
        return 0.0;
    }
    (matrix.weight(&cells) / cells.len() as f64).clamp(-1.0, 1.0)
}

pub fn strategy_scorer(strategy: AlignStrategy) -> ScorerId {
    match strategy {
        AlignStrategy::Argmax => ScorerId::SimA,
        AlignStrategy::Match => ScorerId::SimM,
        AlignStrategy::Itermax => ScorerId::SimI,
    }
}

pub fn score_subword<P: SubwordEmbedder>(
    pair: &LabelPair,
    provider: &P,
    strategy: AlignStrategy,
    config: AlignConfig,
) -> Result<ScoredPair, ScoreError> {
    let m = subword_matrix(pair, provider)?;
    Ok(scored(pair, strategy_scorer(strategy), subword_strategy_score(&m, strategy, config)))
}

pub fn score_subword_mean_cosine<P: SubwordEmbedder>(
    pair: &LabelPair,
    provider: &P,
) -> Result<ScoredPair, ScoreError> {
    let m = subword_matrix(pair, provider)?;
    Ok(scored(pair, ScorerId::SimC, m.mean().clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentenceMetric {
    Cosine,
    InverseEuclidean,
}

impl SentenceMetric {
    pub fn apply(self, u: &Embedding, v: &Embedding) -> Result<f64, EmbeddingError> {
        match self {
            SentenceMetric::Cosine => u.cosine(v),
            SentenceMetric::InverseEuclidean => u.inverse_euclidean(v),
        }
    }
}

/// Which sentence-embedding family and metric a scorer id stands for.
pub fn sentence_metric(id: ScorerId) -> Option<SentenceMetric> {
    match id {
        ScorerId::LsC | ScorerId::LbC => Some(SentenceMetric::Cosine),
        ScorerId::LsE | ScorerId::LbE => Some(SentenceMetric::InverseEuclidean),
        _ => None,
    }
}

/// Whole-label embedding similarity for one of `LS_C`, `LS_E`, `LB_C`,
/// `LB_E`. The caller passes the provider of the matching model family.
pub fn score_sentence<P: SentenceEmbedder>(
    pair: &LabelPair,
    provider: &P,
    scorer: ScorerId,
) -> Result<ScoredPair, ScoreError> {
    let metric = sentence_metric(scorer).ok_or(ScoreError::WrongScorer(scorer))?;
    let u = provider.embed_sentence(&label_key(&pair.label_1))?;
    let v = provider.embed_sentence(&label_key(&pair.label_2))?;
    Ok(scored(pair, scorer, metric.apply(&u, &v)?))
}
