//! Document-side storage and top-K retrieval over transformed vectors.
//!
//! Two index types share one contract: [`FlatIndex`] is an exact
//! inner-product scan and serves as the ranking oracle, [`GraphIndex`] is a
//! layered proximity graph for sublinear approximate retrieval. Both store
//! the augmented document vectors of [`crate::transform`], so the scores
//! they return are the KL-based relevance scores.
//!
//! After construction (or [`load`]) an index is immutable; concurrent
//! searches from many threads need no synchronization.

mod flat;
mod graph;
mod storage;

pub use flat::FlatIndex;
pub use graph::{GraphIndex, GraphParams};
pub use storage::{load, persist};

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;
use crate::transform::{transform_doc, TransformedDoc, TransformedQuery};

/// One retrieved document with its inner-product (= relevance) score.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub doc_id: String,
    pub score: f64,
}

/// Sort results by score descending, ties by ascending doc id.
pub(crate) fn sort_results(results: &mut [SearchResult]) {
    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}

/// Validate a corpus (nonempty, uniform dimension, unique ids) and transform
/// every document. Returns the shared `k` and the transformed vectors.
pub(crate) fn transform_corpus(docs: &[GaussianEmbedding]) -> Result<(usize, Vec<TransformedDoc>)> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let k = docs[0].k();
    let mut seen = HashSet::with_capacity(docs.len());
    let mut transformed = Vec::with_capacity(docs.len());
    for d in docs {
        if d.k() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: d.k(),
            });
        }
        if !seen.insert(d.id().to_string()) {
            return Err(Error::DuplicateId(d.id().to_string()));
        }
        transformed.push(transform_doc(d)?);
    }
    Ok((k, transformed))
}

fn check_top_k(top_k: usize) -> Result<()> {
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    Ok(())
}

/// A persistable index of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorIndex {
    Flat(FlatIndex),
    Graph(GraphIndex),
}

impl VectorIndex {
    pub fn search(&self, query: &TransformedQuery, top_k: usize) -> Result<Vec<SearchResult>> {
        match self {
            VectorIndex::Flat(ix) => ix.search(query, top_k),
            VectorIndex::Graph(ix) => ix.search(query, top_k),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            VectorIndex::Flat(ix) => ix.k(),
            VectorIndex::Graph(ix) => ix.k(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VectorIndex::Flat(ix) => ix.len(),
            VectorIndex::Graph(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<()> {
        persist(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VectorIndex> {
        load(path)
    }
}

impl From<FlatIndex> for VectorIndex {
    fn from(ix: FlatIndex) -> Self {
        VectorIndex::Flat(ix)
    }
}

impl From<GraphIndex> for VectorIndex {
    fn from(ix: GraphIndex) -> Self {
        VectorIndex::Graph(ix)
    }
}
