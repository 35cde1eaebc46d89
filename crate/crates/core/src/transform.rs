//! Rank-exact reduction of the KL relevance score to an inner product.
//!
//! A query and a document each expand into a `(2k+2)`-dimensional vector
//! whose plain dot product equals [`crate::gaussian::rank_score`] bit for
//! bit, so any maximum-inner-product index retrieves by the KL score:
//!
//! ```text
//! q = [ 1,      P_q,      mu_q1^2 .. mu_qk^2,      mu_q1 .. mu_qk      ]
//! d = [ gamma_d, -1/P_d,  -1/var_d1 .. -1/var_dk,  2 mu_d1/var_d1 ..   ]
//! ```
//!
//! where `P = prod_i var_i` and `gamma_d = -sum_i (log var_di +
//! mu_di^2/var_di)` is the query-independent document prior. The augmented
//! vectors are never normalized: normalization would break the equality.
//!
//! Unlike the log-space exact scorer, these vectors must hold `P` and `1/P`
//! as plain doubles, so construction fails loudly once the variance log-sum
//! leaves a guard band inside the representable exponent range. A silent
//! `inf` inside an ANN index would corrupt every ranking it touches.

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;

/// Guard band for `|sum_i log var_i|` in natural-log units. `exp(600)` is
/// comfortably inside the double exponent range (~709) while leaving margin
/// for the downstream ratio arithmetic.
pub const LOG_PRODUCT_LIMIT: f64 = 600.0;

fn check_log_sum(log_sum: f64) -> Result<()> {
    if !log_sum.is_finite() || log_sum.abs() > LOG_PRODUCT_LIMIT {
        return Err(Error::LogSumOutOfRange {
            log_sum,
            limit: LOG_PRODUCT_LIMIT,
        });
    }
    Ok(())
}

/// Augmented query vector of length `2k+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedQuery {
    vec: Vec<f64>,
}

impl TransformedQuery {
    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    /// Underlying representation dimension `k`.
    pub fn k(&self) -> usize {
        (self.vec.len() - 2) / 2
    }
}

/// Augmented document vector of length `2k+2`, plus the document prior
/// `gamma_d` kept separately for inspection. `vec[0] == prior` always.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDoc {
    id: String,
    vec: Vec<f64>,
    prior: f64,
}

impl TransformedDoc {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    /// Query-independent prior score `gamma_d`.
    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn k(&self) -> usize {
        (self.vec.len() - 2) / 2
    }

    /// Reassemble from persisted parts. The prior sits in `vec[0]`.
    pub(crate) fn from_parts(id: String, vec: Vec<f64>) -> Self {
        let prior = vec[0];
        TransformedDoc { id, vec, prior }
    }
}

/// Expand a query embedding into its augmented vector.
pub fn transform_query(q: &GaussianEmbedding) -> Result<TransformedQuery> {
    let k = q.k();
    let log_sum = q.log_variance_sum();
    check_log_sum(log_sum)?;
    let mut vec = Vec::with_capacity(2 * k + 2);
    vec.push(1.0);
    vec.push(log_sum.exp());
    vec.extend(q.mean().iter().map(|m| m * m));
    vec.extend_from_slice(q.mean());
    Ok(TransformedQuery { vec })
}

/// Expand a document embedding into its augmented vector and prior.
pub fn transform_doc(d: &GaussianEmbedding) -> Result<TransformedDoc> {
    let k = d.k();
    let log_sum = d.log_variance_sum();
    check_log_sum(log_sum)?;
    let prior: f64 = -d
        .variance()
        .iter()
        .zip(d.mean())
        .map(|(v, m)| v.ln() + m * m / v)
        .sum::<f64>();
    let mut vec = Vec::with_capacity(2 * k + 2);
    vec.push(prior);
    vec.push(-(-log_sum).exp());
    vec.extend(d.variance().iter().map(|v| -1.0 / v));
    vec.extend(d.mean().iter().zip(d.variance()).map(|(m, v)| 2.0 * m / v));
    Ok(TransformedDoc {
        id: d.id().to_string(),
        vec,
        prior,
    })
}

/// Plain inner product of the two augmented vectors; equals
/// `rank_score(q, d)` for the embeddings they were built from.
pub fn dot_score(tq: &TransformedQuery, td: &TransformedDoc) -> Result<f64> {
    dot(tq.vec(), td.vec())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::rank_score;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g(id: &str, mean: &[f64], var: &[f64]) -> GaussianEmbedding {
        GaussianEmbedding::new(id, mean.to_vec(), var.to_vec()).unwrap()
    }

    #[test]
    fn query_layout_worked_examples() {
        let tq = transform_query(&g("q", &[2.0], &[1.0])).unwrap();
        assert_eq!(tq.vec(), &[1.0, 1.0, 4.0, 2.0]);

        let tq = transform_query(&g("q", &[0.0], &[1.0])).unwrap();
        assert_eq!(tq.vec(), &[1.0, 1.0, 0.0, 0.0]);

        let tq = transform_query(&g("q", &[1.0, -1.0], &[1.0, 4.0])).unwrap();
        assert_eq!(tq.vec(), &[1.0, 4.0, 1.0, 1.0, 1.0, -1.0]);
        assert_eq!(tq.k(), 2);
    }

    #[test]
    fn doc_layout_worked_examples() {
        let td = transform_doc(&g("d", &[1.0], &[2.0])).unwrap();
        let gamma = -(2.0f64.ln() + 0.5);
        assert_relative_eq!(td.prior(), gamma, max_relative = 1e-12);
        assert_relative_eq!(td.prior(), -1.193147, max_relative = 1e-6);
        assert_eq!(td.vec()[0], td.prior());
        assert_relative_eq!(td.vec()[1], -0.5, max_relative = 1e-12);
        assert_relative_eq!(td.vec()[2], -0.5, max_relative = 1e-12);
        assert_relative_eq!(td.vec()[3], 1.0, max_relative = 1e-12);

        let td = transform_doc(&g("d", &[0.0], &[1.0])).unwrap();
        assert_eq!(td.vec(), &[0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn dot_score_matches_rank_score_on_worked_pair() {
        let q = g("q", &[2.0], &[1.0]);
        let d = g("d", &[1.0], &[2.0]);
        let s = dot_score(&transform_query(&q).unwrap(), &transform_doc(&d).unwrap()).unwrap();
        assert_relative_eq!(s, -1.693147, max_relative = 1e-6);
        assert_relative_eq!(s, rank_score(&q, &d).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn dot_score_self_unit() {
        let e = g("e", &[0.0], &[1.0]);
        let s = dot_score(&transform_query(&e).unwrap(), &transform_doc(&e).unwrap()).unwrap();
        assert_eq!(s, -1.0);
    }

    #[test]
    fn dot_score_is_bilinear() {
        let q = g("q", &[2.0], &[1.0]);
        let d = g("d", &[1.0], &[2.0]);
        let tq = transform_query(&q).unwrap();
        let td = transform_doc(&d).unwrap();
        let doubled = TransformedQuery {
            vec: tq.vec().iter().map(|v| 2.0 * v).collect(),
        };
        assert_relative_eq!(
            dot_score(&doubled, &td).unwrap(),
            2.0 * dot_score(&tq, &td).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let tq = transform_query(&g("q", &[0.0], &[1.0])).unwrap();
        let td = transform_doc(&g("d", &[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!(matches!(
            dot_score(&tq, &td),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn overflow_guard_fires_loudly() {
        // 400 dims of variance 1e2 puts the log-sum at ~1842, far past the band.
        let k = 400;
        let e = g("big", &vec![0.0; k], &vec![1e2; k]);
        match transform_query(&e) {
            Err(Error::LogSumOutOfRange { log_sum, limit }) => {
                assert!(log_sum > limit);
            }
            other => panic!("expected LogSumOutOfRange, got {other:?}"),
        }
        assert!(matches!(
            transform_doc(&e),
            Err(Error::LogSumOutOfRange { .. })
        ));
    }

    #[test]
    fn doc_second_slot_is_negative_reciprocal_product() {
        let d = g("d", &[0.5, -0.25], &[0.5, 3.0]);
        let td = transform_doc(&d).unwrap();
        assert_relative_eq!(
            td.vec()[1],
            -(-d.log_variance_sum()).exp(),
            max_relative = 1e-12
        );
    }

    fn arb_embedding(k: usize) -> impl Strategy<Value = GaussianEmbedding> {
        (
            proptest::collection::vec(-3.0..3.0f64, k),
            proptest::collection::vec(0.1..10.0f64, k),
        )
            .prop_map(|(mean, var)| GaussianEmbedding::new("p", mean, var).unwrap())
    }

    proptest! {
        #[test]
        fn reconciliation_with_exact_scorer(q in arb_embedding(8), d in arb_embedding(8)) {
            let exact = rank_score(&q, &d).unwrap();
            let reduced =
                dot_score(&transform_query(&q).unwrap(), &transform_doc(&d).unwrap()).unwrap();
            let tol = 1e-9 * exact.abs().max(1.0);
            prop_assert!((exact - reduced).abs() <= tol, "exact={exact} reduced={reduced}");
        }

        #[test]
        fn query_vec_invariants(q in arb_embedding(6)) {
            let tq = transform_query(&q).unwrap();
            let k = tq.k();
            prop_assert_eq!(tq.vec().len(), 2 * k + 2);
            prop_assert_eq!(tq.vec()[0], 1.0);
            prop_assert!(tq.vec()[1] > 0.0);
            for i in 0..k {
                let sq = tq.vec()[2 + i];
                let m = tq.vec()[2 + k + i];
                prop_assert!((sq - m * m).abs() <= 1e-12 * sq.abs().max(1.0));
            }
        }

        #[test]
        fn doc_vec_invariants(d in arb_embedding(6)) {
            let td = transform_doc(&d).unwrap();
            let k = td.k();
            prop_assert_eq!(td.vec().len(), 2 * k + 2);
            prop_assert!(td.vec()[1] < 0.0);
            for i in 0..k {
                prop_assert!(td.vec()[2 + i] < 0.0);
            }
            prop_assert_eq!(td.vec()[0], td.prior());
        }

        #[test]
        fn prior_is_query_independent(d in arb_embedding(4)) {
            // transform_doc consults nothing but the document, so two calls
            // agree; this pins the separability contract.
            let a = transform_doc(&d).unwrap();
            let b = transform_doc(&d).unwrap();
            prop_assert_eq!(a.prior(), b.prior());
            prop_assert_eq!(a.vec()[1], b.vec()[1]);
        }
    }
}
