//! Exact inner-product scan over the whole corpus.
//!
//! Linear in corpus size, exact by construction. Used directly for small
//! corpora and as the recall oracle for [`super::GraphIndex`].

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;
use crate::transform::{dot, TransformedDoc, TransformedQuery};

use super::{check_top_k, sort_results, transform_corpus, SearchResult};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    k: usize,
    docs: Vec<TransformedDoc>,
}

impl FlatIndex {
    /// Transform and store every document. Fails on an empty corpus, mixed
    /// dimensions or duplicate ids.
    pub fn build(docs: &[GaussianEmbedding]) -> Result<Self> {
        let (k, transformed) = transform_corpus(docs)?;
        Ok(FlatIndex {
            k,
            docs: transformed,
        })
    }

    pub(crate) fn from_parts(k: usize, docs: Vec<TransformedDoc>) -> Self {
        FlatIndex { k, docs }
    }

    pub(crate) fn docs(&self) -> &[TransformedDoc] {
        &self.docs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Exact top-k by inner product. Requesting more results than the corpus
    /// holds returns the full ranking.
    pub fn search(&self, query: &TransformedQuery, top_k: usize) -> Result<Vec<SearchResult>> {
        check_top_k(top_k)?;
        if query.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: query.k(),
            });
        }
        let mut results: Vec<SearchResult> = self
            .docs
            .iter()
            .map(|d| {
                Ok(SearchResult {
                    doc_id: d.id().to_string(),
                    score: dot(query.vec(), d.vec())?,
                })
            })
            .collect::<Result<_>>()?;
        sort_results(&mut results);
        results.truncate(top_k);
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::rank_score;
    use crate::transform::transform_query;

    fn g(id: &str, mean: &[f64], var: &[f64]) -> GaussianEmbedding {
        GaussianEmbedding::new(id, mean.to_vec(), var.to_vec()).unwrap()
    }

    #[test]
    fn two_doc_worked_example() {
        // Scores for the query (mu=2, var=1): d1 -> -1.0 (itself with unit
        // variance would be -1), d2 -> -1.693...
        let q = g("q", &[2.0], &[1.0]);
        let d1 = g("d1", &[2.0], &[1.0]);
        let d2 = g("d2", &[1.0], &[2.0]);
        let ix = FlatIndex::build(&[d2.clone(), d1.clone()]).unwrap();
        let hits = ix.search(&transform_query(&q).unwrap(), 2).unwrap();
        assert_eq!(hits[0].doc_id, "d1");
        assert_eq!(hits[1].doc_id, "d2");
        assert!((hits[0].score - (-1.0)).abs() < 1e-12);
        assert!((hits[1].score - (-1.693147)).abs() < 1e-5);
    }

    #[test]
    fn full_ranking_matches_sorted_rank_scores() {
        let q = g("q", &[0.4, -0.2], &[1.1, 0.7]);
        let docs: Vec<GaussianEmbedding> = (0..25)
            .map(|i| {
                let t = i as f64;
                g(
                    &format!("d{i:02}"),
                    &[(t * 0.37).sin(), (t * 0.91).cos()],
                    &[0.5 + 0.1 * t, 2.0 - 0.05 * t],
                )
            })
            .collect();
        let ix = FlatIndex::build(&docs).unwrap();
        let hits = ix.search(&transform_query(&q).unwrap(), docs.len()).unwrap();

        let mut oracle: Vec<(String, f64)> = docs
            .iter()
            .map(|d| (d.id().to_string(), rank_score(&q, d).unwrap()))
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        assert_eq!(hits.len(), oracle.len());
        for (hit, (id, score)) in hits.iter().zip(&oracle) {
            assert_eq!(&hit.doc_id, id);
            assert!((hit.score - score).abs() <= 1e-9 * score.abs().max(1.0));
        }
    }

    #[test]
    fn oversized_top_k_returns_whole_corpus() {
        let docs = [g("a", &[0.0], &[1.0]), g("b", &[1.0], &[1.0])];
        let ix = FlatIndex::build(&docs).unwrap();
        let q = transform_query(&g("q", &[0.0], &[1.0])).unwrap();
        assert_eq!(ix.search(&q, 100).unwrap().len(), 2);
    }

    #[test]
    fn tie_break_is_ascending_doc_id() {
        let docs = [g("b", &[1.0], &[1.0]), g("a", &[1.0], &[1.0])];
        let ix = FlatIndex::build(&docs).unwrap();
        let q = transform_query(&g("q", &[0.0], &[1.0])).unwrap();
        let hits = ix.search(&q, 2).unwrap();
        assert_eq!(hits[0].doc_id, "a");
        assert_eq!(hits[1].doc_id, "b");
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn build_rejects_bad_corpora() {
        assert!(matches!(FlatIndex::build(&[]), Err(Error::EmptyCorpus)));
        let dup = [g("x", &[0.0], &[1.0]), g("x", &[1.0], &[1.0])];
        assert!(matches!(
            FlatIndex::build(&dup),
            Err(Error::DuplicateId(id)) if id == "x"
        ));
        let mixed = [g("a", &[0.0], &[1.0]), g("b", &[0.0, 0.0], &[1.0, 1.0])];
        assert!(matches!(
            FlatIndex::build(&mixed),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn search_rejects_bad_queries() {
        let ix = FlatIndex::build(&[g("a", &[0.0], &[1.0])]).unwrap();
        let q2 = transform_query(&g("q", &[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!(matches!(
            ix.search(&q2, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        let q1 = transform_query(&g("q", &[0.0], &[1.0])).unwrap();
        assert!(ix.search(&q1, 0).is_err());
    }
}
