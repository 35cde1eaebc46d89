//! Candidate pools: qrel positives, ingested first-stage negatives, and
//! hard negatives re-mined from the current student on a fixed cadence.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;
use crate::index::FlatIndex;
use crate::trainer::encoder::{encode, EncoderParams};
use crate::transform::transform_query;

/// Mining depth: negatives come from the top 100 of their source ranking.
pub const POOL_DEPTH: usize = 100;

/// Per-query candidate pools.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    /// Positive doc ids from the qrels.
    pub positives: Vec<String>,
    /// Top-ranked docs from the ingested first-stage run, positives removed.
    pub bm25_pool: Vec<String>,
    /// Top-ranked docs from the current student, positives removed. Empty
    /// until the first refresh.
    pub hard_pool: Vec<String>,
    /// How many docs to sample from each pool per step.
    pub m_bm25: usize,
    pub m_hard: usize,
}

impl CandidatePool {
    /// Build a pool from qrel positives and an ingested ranking; the ranking
    /// is deduplicated against the positives and truncated to [`POOL_DEPTH`].
    pub fn new(
        positives: Vec<String>,
        first_stage_ranking: &[String],
        m_bm25: usize,
        m_hard: usize,
    ) -> Self {
        let positive_set: HashSet<&str> = positives.iter().map(String::as_str).collect();
        let bm25_pool: Vec<String> = first_stage_ranking
            .iter()
            .filter(|d| !positive_set.contains(d.as_str()))
            .take(POOL_DEPTH)
            .cloned()
            .collect();
        CandidatePool {
            positives,
            bm25_pool,
            hard_pool: Vec::new(),
            m_bm25,
            m_hard,
        }
    }

    /// Sample `m_bm25` + `m_hard` negatives without replacement from the two
    /// pools (fewer when a pool is short).
    pub fn sample_negatives(&self, rng: &mut impl Rng) -> Vec<String> {
        let mut out = Vec::with_capacity(self.m_bm25 + self.m_hard);
        Self::sample_from(&self.bm25_pool, self.m_bm25, rng, &mut out);
        Self::sample_from(&self.hard_pool, self.m_hard, rng, &mut out);
        out.dedup();
        out
    }

    fn sample_from(pool: &[String], m: usize, rng: &mut impl Rng, out: &mut Vec<String>) {
        let take = m.min(pool.len());
        if take == 0 {
            return;
        }
        let mut picked: Vec<usize> = sample(rng, pool.len(), take).into_iter().collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| pool[i].clone()));
    }
}

/// Re-mine hard negatives from the current student when the step counter
/// sits on the cadence. Returns whether a refresh happened.
///
/// On refresh, every query's `hard_pool` becomes the student's current
/// top-[`POOL_DEPTH`] over the corpus, positives excluded. Off cadence the
/// pools are left untouched.
pub fn refresh_hard_negatives(
    params: &EncoderParams,
    corpus: &BTreeMap<String, Vec<f64>>,
    queries: &BTreeMap<String, Vec<f64>>,
    pools: &mut BTreeMap<String, CandidatePool>,
    step: u64,
    every_n_steps: u64,
) -> Result<bool> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if every_n_steps == 0 || step == 0 || step % every_n_steps != 0 {
        return Ok(false);
    }

    let embedded: Vec<GaussianEmbedding> = corpus
        .iter()
        .map(|(id, features)| encode(params, id, features))
        .collect::<Result<_>>()?;
    let index = FlatIndex::build(&embedded)?;

    for (query_id, features) in queries {
        let pool = match pools.get_mut(query_id) {
            Some(p) => p,
            None => continue,
        };
        let query = encode(params, query_id, features)?;
        let tq = transform_query(&query)?;
        let positives: HashSet<&str> = pool.positives.iter().map(String::as_str).collect();
        let hits = index.search(&tq, POOL_DEPTH + positives.len())?;
        pool.hard_pool = hits
            .into_iter()
            .map(|h| h.doc_id)
            .filter(|d| !positives.contains(d.as_str()))
            .take(POOL_DEPTH)
            .collect();
    }
    Ok(true)
}
