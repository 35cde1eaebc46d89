//! Ranking metrics: MRR@10, NDCG@10 and MAP over the top 1000.
//!
//! Conventions follow trec_eval: NDCG gain is `2^grade - 1` with a
//! `log2(rank+1)` discount, MAP divides by the total number of relevant
//! documents in the qrels (retrieved or not), and every metric averages over
//! the queries present in the run. A query whose judgments contain no
//! relevant document contributes zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::trec::{Qrels, Run};

/// MAP counts a document as relevant at this grade or above by default.
pub const DEFAULT_MAP_MIN_GRADE: i32 = 1;

/// Per-query metric values plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValues {
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

impl MetricValues {
    fn from_map(per_query: BTreeMap<String, f64>) -> Self {
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.values().sum::<f64>() / per_query.len() as f64
        };
        MetricValues { per_query, mean }
    }
}

fn check_queries(run: &Run, qrels: &Qrels) -> Result<()> {
    for qid in run.queries() {
        if !qrels.contains_query(qid) {
            return Err(Error::UnknownQuery(qid.to_string()));
        }
    }
    Ok(())
}

fn evaluate_with(run: &Run, qrels: &Qrels, f: impl Fn(&str) -> f64) -> MetricValues {
    let per_query: BTreeMap<String, f64> = run
        .queries()
        .map(|qid| (qid.to_string(), f(qid)))
        .collect();
    MetricValues::from_map(per_query)
}

/// Mean reciprocal rank of the first relevant document within the top 10.
pub fn mrr_at_10(run: &Run, qrels: &Qrels) -> Result<MetricValues> {
    check_queries(run, qrels)?;
    Ok(evaluate_with(run, qrels, |qid| {
        let records = run.records(qid).unwrap_or(&[]);
        for r in records.iter().take(10) {
            if qrels.grade(qid, &r.doc_id) >= 1 {
                return 1.0 / r.rank as f64;
            }
        }
        0.0
    }))
}

/// Normalized discounted cumulative gain at cutoff 10.
pub fn ndcg_at_10(run: &Run, qrels: &Qrels) -> Result<MetricValues> {
    check_queries(run, qrels)?;
    Ok(evaluate_with(run, qrels, |qid| {
        let records = run.records(qid).unwrap_or(&[]);
        let dcg: f64 = records
            .iter()
            .take(10)
            .map(|r| {
                let g = qrels.grade(qid, &r.doc_id);
                gain(g) / ((r.rank + 1) as f64).log2()
            })
            .sum();
        let mut grades: Vec<i32> = qrels
            .docs(qid)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = grades
            .iter()
            .take(10)
            .enumerate()
            .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
            .sum();
        if idcg > 0.0 {
            dcg / idcg
        } else {
            0.0
        }
    }))
}

fn gain(grade: i32) -> f64 {
    (2.0f64).powi(grade.max(0)) - 1.0
}

/// Mean average precision over the top 1000, binary relevance at `min_grade`.
pub fn map_at_1000(run: &Run, qrels: &Qrels, min_grade: i32) -> Result<MetricValues> {
    check_queries(run, qrels)?;
    Ok(evaluate_with(run, qrels, |qid| {
        let total_relevant = qrels.relevant_docs(qid, min_grade).len();
        if total_relevant == 0 {
            return 0.0;
        }
        let records = run.records(qid).unwrap_or(&[]);
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        for r in records.iter().take(1000) {
            if qrels.grade(qid, &r.doc_id) >= min_grade {
                hits += 1;
                precision_sum += hits as f64 / r.rank as f64;
            }
        }
        precision_sum / total_relevant as f64
    }))
}
