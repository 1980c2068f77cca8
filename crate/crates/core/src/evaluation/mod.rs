//! Ground-truth pool construction, sampling, and method comparison.

pub mod metrics;
pub mod pool;
pub mod reports;
pub mod sampling;

pub use metrics::{
    evaluate, render_accuracy_table, Confusion, EvalError, EvalReport, GroundTruthEntry, Scope, TruthIndex,
};
pub use pool::{preprocess_pool, PoolOptions, PoolOutcome, SingletonRule};
pub use reports::{score_reports, Histogram, LanguageMean, ScoreReport};
pub use sampling::{required_sample_size, stratified_sample, SamplingError, StratifiedSample};
