//! Diagonal multivariate normal representations and their relevance scores.
//!
//! Queries and documents are `k`-variate normal distributions with diagonal
//! covariance, so each is fully described by a mean vector and a variance
//! vector. Relevance is negative KL divergence from the query distribution to
//! the document distribution; [`rank_score`] is the rank-equivalent form of
//! that score with query-only constants dropped, which is exactly the value
//! recovered by the inner-product reduction in [`crate::transform`].
//!
//! All variance products are carried as sums of logs. A product of hundreds
//! of variances leaves the double range long before the scores themselves
//! become meaningless, so no product of `k` variances is ever materialized
//! here; only ratios are exponentiated.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default number of random variables per representation: half of a 768-dim
/// budget minus the two scalar slots consumed by the inner-product reduction.
pub const DEFAULT_K: usize = 381;

/// Number of random variables in a representation.
///
/// A thin validated wrapper so configurations cannot carry a zero dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionK(usize);

impl DimensionK {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(DimensionK(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for DimensionK {
    fn default() -> Self {
        DimensionK(DEFAULT_K)
    }
}

/// A diagonal multivariate normal representation of one query or document.
///
/// Invariants enforced at construction: mean and variance have equal nonzero
/// length, all entries finite, every variance strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmbedding {
    id: String,
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl GaussianEmbedding {
    pub fn new(id: impl Into<String>, mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if mean.len() != variance.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: variance.len(),
            });
        }
        let id = id.into();
        if let Some(i) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("mean[{i}] of embedding {id}"),
            });
        }
        for (i, &v) in variance.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidVariance { index: i, value: v });
            }
        }
        Ok(GaussianEmbedding { id, mean, variance })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// Number of random variables.
    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Sum of per-dimension log variances: the log of the variance product,
    /// i.e. the log determinant of the diagonal covariance.
    pub fn log_variance_sum(&self) -> f64 {
        self.variance.iter().map(|v| v.ln()).sum()
    }

    fn check_same_k(&self, other: &GaussianEmbedding) -> Result<()> {
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: other.k(),
            });
        }
        Ok(())
    }
}

/// Log density of `x` under the embedding's distribution.
pub fn log_pdf(x: &[f64], g: &GaussianEmbedding) -> Result<f64> {
    if x.len() != g.k() {
        return Err(Error::DimensionMismatch {
            expected: g.k(),
            actual: x.len(),
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("x[{i}]"),
        });
    }
    let mut quad = 0.0;
    for i in 0..g.k() {
        let d = x[i] - g.mean[i];
        quad += d * d / g.variance[i];
    }
    Ok(-0.5 * (g.k() as f64 * (2.0 * PI).ln() + g.log_variance_sum() + quad))
}

/// Density of `x` under the embedding's distribution.
///
/// Evaluated in log space and exponentiated at the end, so large `k` cannot
/// underflow intermediate products.
pub fn pdf(x: &[f64], g: &GaussianEmbedding) -> Result<f64> {
    Ok(log_pdf(x, g)?.exp())
}

/// Exact KL divergence from `q` to `d` for diagonal Gaussians:
///
/// `0.5 * [ sum_i log(var_di / var_qi) - k + sum_i var_qi / var_di
///          + sum_i (mu_qi - mu_di)^2 / var_di ]`
///
/// Nonnegative up to rounding, zero when `q == d`.
pub fn kl_divergence(q: &GaussianEmbedding, d: &GaussianEmbedding) -> Result<f64> {
    q.check_same_k(d)?;
    let k = q.k();
    let mut log_ratio = 0.0;
    let mut trace = 0.0;
    let mut quad = 0.0;
    for i in 0..k {
        log_ratio += (d.variance[i] / q.variance[i]).ln();
        trace += q.variance[i] / d.variance[i];
        let dm = q.mean[i] - d.mean[i];
        quad += dm * dm / d.variance[i];
    }
    Ok(0.5 * (log_ratio - k as f64 + trace + quad))
}

/// Rank-equivalent relevance score: negative KL with query-only constants
/// dropped, on the scale whose inner-product reduction is exact:
///
/// `-( sum_i log var_di + prod_i var_qi / prod_i var_di
///     + sum_i (mu_qi - mu_di)^2 / var_di )`
///
/// The variance-product ratio is evaluated as the exponential of a
/// difference of log-sums and never materializes either product. For extreme
/// log-sum gaps the ratio saturates to `inf` and the score to `-inf`; the
/// function itself never fails on valid embeddings.
pub fn rank_score(q: &GaussianEmbedding, d: &GaussianEmbedding) -> Result<f64> {
    q.check_same_k(d)?;
    let log_prod_q = q.log_variance_sum();
    let log_prod_d = d.log_variance_sum();
    let mut quad = 0.0;
    for i in 0..q.k() {
        let dm = q.mean[i] - d.mean[i];
        quad += dm * dm / d.variance[i];
    }
    Ok(-(log_prod_d + (log_prod_q - log_prod_d).exp() + quad))
}
