//! Ranking and rating metrics plus their item-level and shop-level
//! aggregation.

mod rank;
mod report;

pub use rank::{mae, ndcg_at_k, recall_at_k, Ndcg, RankedPrediction, RecallMode};
pub use report::{aggregate, aggregate_report, Aggregate, EvaluationReport, MetricBlock, MetricInput, QueryMetric, DEFAULT_THRESHOLDS};
