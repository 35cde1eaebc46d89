//! Pre-retrieval query performance prediction from learned variance vectors.
//!
//! The predictor reduces a query's variance vector to a scalar; its
//! correlation against per-query effectiveness is the QPP signal. The exact
//! reduction the signal should use is configurable because several natural
//! readings of "the norm of the covariance" exist for a diagonal matrix.

use crate::error::Result;
use crate::gaussian::GaussianEmbedding;

use super::correlation::{kendall_tau, pearson, pearson_p_value};

/// Scalar reduction applied to the query variance vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QppReduction {
    /// L2 norm of the variance vector (Frobenius norm of the diagonal
    /// covariance). The default.
    #[default]
    L2Norm,
    /// Sum of log variances, i.e. the log determinant of the covariance.
    SumLogVariance,
    /// Determinant of the covariance, exponentiated from the log sum.
    /// Saturates for extreme log sums; prefer `SumLogVariance` at large `k`.
    Determinant,
}

/// Default predictor: L2 norm of the variance vector.
pub fn qpp_predictor(query: &GaussianEmbedding) -> f64 {
    qpp_predictor_with(query, QppReduction::L2Norm)
}

pub fn qpp_predictor_with(query: &GaussianEmbedding, reduction: QppReduction) -> f64 {
    match reduction {
        QppReduction::L2Norm => query
            .variance()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt(),
        QppReduction::SumLogVariance => query.log_variance_sum(),
        QppReduction::Determinant => query.log_variance_sum().exp(),
    }
}

/// One query's predictor value paired with its measured effectiveness.
#[derive(Debug, Clone, PartialEq)]
pub struct QppRecord {
    pub query_id: String,
    pub predictor: f64,
    pub effectiveness: f64,
}

/// Correlation of predictor against effectiveness across queries.
#[derive(Debug, Clone, PartialEq)]
pub struct QppReport {
    pub n: usize,
    pub pearson: f64,
    pub pearson_p_value: f64,
    pub kendall: f64,
}

pub fn qpp_correlate(records: &[QppRecord]) -> Result<QppReport> {
    let xs: Vec<f64> = records.iter().map(|r| r.predictor).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.effectiveness).collect();
    let rho = pearson(&xs, &ys)?;
    Ok(QppReport {
        n: records.len(),
        pearson: rho,
        pearson_p_value: pearson_p_value(rho, records.len())?,
        kendall: kendall_tau(&xs, &ys)?,
    })
}
