//! TREC-style ranking evaluation and pre-retrieval query performance
//! prediction.

mod correlation;
mod metrics;
mod qpp;
mod trec;

pub use correlation::{kendall_tau, pearson, pearson_p_value};
pub use metrics::{map_at_1000, mrr_at_10, ndcg_at_10, MetricValues, DEFAULT_MAP_MIN_GRADE};
pub use qpp::{qpp_correlate, qpp_predictor, qpp_predictor_with, QppRecord, QppReduction, QppReport};
pub use trec::{Qrels, Run, RunRecord};
