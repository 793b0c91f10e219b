//! Retrieval metrics and the benchmark runner.

mod benchmark;
mod metrics;

pub use benchmark::{
    rank_of_target, read_pairs_jsonl, run_benchmark, BenchmarkConfig, BenchmarkReport, QueryInput, QueryOutcome,
    QueryTag, QueryTargetPair, TagMetrics,
};
pub use metrics::{dcrr_at_10, mrr_at_10, recall_at_k, MetricError, Rank, RoundRecord, DCRR_GAMMA, RR_CUTOFF};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("pair {index}: target `{target_id}` is not in the snapshot")]
    UnresolvableTarget { index: usize, target_id: String },
    #[error("pairs line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io: {0}")]
    Io(String),
}
