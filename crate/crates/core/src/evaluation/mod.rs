//! Leakage metrics, membership inference, and the benchmark harness.

mod benchmark;
mod metrics;
mod mia;

pub use benchmark::{run_benchmark, Aggregates, BenchmarkSpec, EvaluationReport, Flags, QueryReport, StrategyOutcome};
pub use metrics::{
    auc_mann_whitney, lcs_len, leakage, mcs, paraphrase_leakage, rouge_l, rouge_l_recall, segment, truth_tokens,
    LeakageMeasure, Level,
};
pub use mia::{mia_eval, mia_features, segment_fluency};
