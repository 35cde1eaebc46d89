//! Layered proximity-graph index (HNSW-style) over augmented document
//! vectors, searched by inner product.
//!
//! Neighbor selection treats the negative inner product as a distance; no
//! metric-space transformation is applied. Construction is sequential and
//! fully deterministic for a given seed: level assignment draws from a
//! seeded RNG, every heap and sort breaks ties by node id, and edges are
//! kept symmetric throughout (pruning one direction always removes the
//! reverse edge). A final repair pass reconnects any node that pruning left
//! isolated on the base layer.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;
use crate::transform::{TransformedDoc, TransformedQuery};

use super::{check_top_k, sort_results, transform_corpus, SearchResult};

/// Construction and search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphParams {
    /// Max neighbors per node per layer (layer 0 allows twice this).
    pub max_degree: usize,
    /// Beam width while inserting.
    pub ef_construction: usize,
    /// Default beam width while searching.
    pub ef_search: usize,
    /// Seed for level assignment.
    pub seed: u64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            max_degree: 16,
            ef_construction: 200,
            ef_search: 100,
            seed: 0,
        }
    }
}

impl GraphParams {
    fn validate(&self) -> Result<()> {
        if self.max_degree < 2 {
            return Err(Error::InvalidConfig("max_degree must be at least 2".into()));
        }
        if self.ef_construction == 0 || self.ef_search == 0 {
            return Err(Error::InvalidConfig(
                "ef_construction and ef_search must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Candidate ordered by ascending distance, ties by ascending node id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    node: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphIndex {
    k: usize,
    docs: Vec<TransformedDoc>,
    /// adjacency[node][level] = neighbor ids; node's top level is
    /// `adjacency[node].len() - 1`.
    adjacency: Vec<Vec<Vec<u32>>>,
    entry_point: u32,
    max_level: u32,
    params: GraphParams,
}

impl GraphIndex {
    /// Build the layered graph over the transformed corpus.
    pub fn build(docs: &[GaussianEmbedding], params: GraphParams) -> Result<Self> {
        params.validate()?;
        let (k, transformed) = transform_corpus(docs)?;
        Ok(Builder::new(k, transformed, params).build())
    }

    pub(crate) fn from_parts(
        k: usize,
        docs: Vec<TransformedDoc>,
        adjacency: Vec<Vec<Vec<u32>>>,
        entry_point: u32,
        max_level: u32,
        params: GraphParams,
    ) -> Self {
        GraphIndex {
            k,
            docs,
            adjacency,
            entry_point,
            max_level,
            params,
        }
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

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub(crate) fn docs(&self) -> &[TransformedDoc] {
        &self.docs
    }

    pub(crate) fn adjacency(&self) -> &[Vec<Vec<u32>>] {
        &self.adjacency
    }

    pub(crate) fn entry_point(&self) -> u32 {
        self.entry_point
    }

    pub(crate) fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Approximate top-k with the index's default beam width.
    pub fn search(&self, query: &TransformedQuery, top_k: usize) -> Result<Vec<SearchResult>> {
        self.search_with_ef(query, top_k, self.params.ef_search)
    }

    /// Approximate top-k with an explicit beam width (clamped up to `top_k`).
    pub fn search_with_ef(
        &self,
        query: &TransformedQuery,
        top_k: usize,
        ef: usize,
    ) -> Result<Vec<SearchResult>> {
        check_top_k(top_k)?;
        if query.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: query.k(),
            });
        }
        let ef = ef.max(top_k);
        let dist = |node: u32| neg_dot(query.vec(), self.docs[node as usize].vec());

        let mut ep = self.entry_point;
        for level in (1..=self.max_level).rev() {
            ep = greedy_descent(&self.adjacency, &dist, ep, level as usize);
        }
        let found = beam_search(&self.adjacency, &dist, &[ep], ef, 0, self.docs.len());

        let mut results: Vec<SearchResult> = found
            .into_iter()
            .map(|c| SearchResult {
                doc_id: self.docs[c.node as usize].id().to_string(),
                score: -c.dist,
            })
            .collect();
        sort_results(&mut results);
        results.truncate(top_k);
        Ok(results)
    }
}

fn neg_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    -acc
}

/// Greedy hill climb on one layer, returning the locally closest node.
fn greedy_descent(
    adjacency: &[Vec<Vec<u32>>],
    dist: &impl Fn(u32) -> f64,
    start: u32,
    level: usize,
) -> u32 {
    let mut current = start;
    let mut current_dist = dist(current);
    loop {
        let mut improved = false;
        if let Some(neighbors) = adjacency[current as usize].get(level) {
            for &n in neighbors {
                let d = dist(n);
                if d < current_dist || (d == current_dist && n < current) {
                    current = n;
                    current_dist = d;
                    improved = true;
                }
            }
        }
        if !improved {
            return current;
        }
    }
}

/// Best-first beam search on one layer. Returns up to `ef` closest nodes.
fn beam_search(
    adjacency: &[Vec<Vec<u32>>],
    dist: &impl Fn(u32) -> f64,
    entry_points: &[u32],
    ef: usize,
    level: usize,
    node_count: usize,
) -> Vec<Candidate> {
    let mut visited = vec![false; node_count];
    // min-heap of nodes to expand, max-heap of current best results.
    let mut frontier: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    let mut best: BinaryHeap<Candidate> = BinaryHeap::new();

    for &ep in entry_points {
        if !visited[ep as usize] {
            visited[ep as usize] = true;
            let c = Candidate {
                dist: dist(ep),
                node: ep,
            };
            frontier.push(Reverse(c));
            best.push(c);
        }
    }

    while let Some(Reverse(current)) = frontier.pop() {
        let worst = best.peek().map(|c| c.dist).unwrap_or(f64::INFINITY);
        if best.len() >= ef && current.dist > worst {
            break;
        }
        if let Some(neighbors) = adjacency[current.node as usize].get(level) {
            for &n in neighbors {
                if visited[n as usize] {
                    continue;
                }
                visited[n as usize] = true;
                let d = dist(n);
                let worst = best.peek().map(|c| c.dist).unwrap_or(f64::INFINITY);
                if best.len() < ef || d < worst {
                    let c = Candidate { dist: d, node: n };
                    frontier.push(Reverse(c));
                    best.push(c);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
    }

    let mut out = best.into_vec();
    out.sort();
    out
}

struct Builder {
    k: usize,
    docs: Vec<TransformedDoc>,
    adjacency: Vec<Vec<Vec<u32>>>,
    levels: Vec<u32>,
    entry_point: u32,
    max_level: u32,
    params: GraphParams,
}

impl Builder {
    fn new(k: usize, docs: Vec<TransformedDoc>, params: GraphParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let ml = 1.0 / (params.max_degree as f64).ln();
        let levels: Vec<u32> = (0..docs.len())
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                ((-u.ln() * ml).floor() as u32).min(30)
            })
            .collect();
        let adjacency = levels
            .iter()
            .map(|&l| vec![Vec::new(); l as usize + 1])
            .collect();
        Builder {
            k,
            docs,
            adjacency,
            levels,
            entry_point: 0,
            max_level: 0,
            params,
        }
    }

    fn cap(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.params.max_degree
        } else {
            self.params.max_degree
        }
    }

    fn doc_dist(&self, a: u32, b: u32) -> f64 {
        neg_dot(self.docs[a as usize].vec(), self.docs[b as usize].vec())
    }

    fn build(mut self) -> GraphIndex {
        self.max_level = self.levels[0];
        for node in 1..self.docs.len() as u32 {
            self.insert(node);
        }
        self.repair_isolated();
        GraphIndex {
            k: self.k,
            docs: self.docs,
            adjacency: self.adjacency,
            entry_point: self.entry_point,
            max_level: self.max_level,
            params: self.params,
        }
    }

    fn insert(&mut self, node: u32) {
        let level = self.levels[node as usize];
        let dist = |n: u32| self.doc_dist(node, n);

        let mut ep = self.entry_point;
        for l in (level + 1..=self.max_level).rev() {
            ep = greedy_descent(&self.adjacency, &dist, ep, l as usize);
        }

        let mut entry_points = vec![ep];
        for l in (0..=level.min(self.max_level)).rev() {
            let candidates = beam_search(
                &self.adjacency,
                &dist,
                &entry_points,
                self.params.ef_construction,
                l as usize,
                self.docs.len(),
            );
            let chosen: Vec<u32> = candidates
                .iter()
                .take(self.params.max_degree)
                .map(|c| c.node)
                .collect();
            for &n in &chosen {
                self.connect(node, n, l as usize);
            }
            entry_points = candidates.iter().map(|c| c.node).collect();
        }

        if level > self.max_level {
            self.max_level = level;
            self.entry_point = node;
        }
    }

    /// Add the symmetric edge a<->b, then shrink either endpoint that went
    /// over its cap. Shrinking removes the reverse edge as well, so the
    /// adjacency stays symmetric at every step.
    fn connect(&mut self, a: u32, b: u32, level: usize) {
        if a == b {
            return;
        }
        let pushed_a = Self::push_unique(&mut self.adjacency[a as usize][level], b);
        let pushed_b = Self::push_unique(&mut self.adjacency[b as usize][level], a);
        if !(pushed_a || pushed_b) {
            return;
        }
        let cap = self.cap(level);
        self.shrink_to_cap(a, level, cap, None);
        self.shrink_to_cap(b, level, cap, None);
    }

    fn push_unique(list: &mut Vec<u32>, value: u32) -> bool {
        if list.contains(&value) {
            false
        } else {
            list.push(value);
            true
        }
    }

    fn shrink_to_cap(&mut self, node: u32, level: usize, cap: usize, protect: Option<u32>) {
        if self.adjacency[node as usize][level].len() <= cap {
            return;
        }
        let mut scored: Vec<Candidate> = self.adjacency[node as usize][level]
            .iter()
            .map(|&n| Candidate {
                dist: self.doc_dist(node, n),
                node: n,
            })
            .collect();
        scored.sort();
        let mut kept: Vec<u32> = Vec::with_capacity(cap);
        if let Some(p) = protect {
            kept.push(p);
        }
        for c in &scored {
            if kept.len() >= cap {
                break;
            }
            if Some(c.node) != protect {
                kept.push(c.node);
            }
        }
        let dropped: Vec<u32> = scored
            .iter()
            .map(|c| c.node)
            .filter(|n| !kept.contains(n))
            .collect();
        self.adjacency[node as usize][level] = kept;
        for d in dropped {
            self.adjacency[d as usize][level].retain(|&n| n != node);
        }
    }

    /// Post-construction repair: symmetric pruning can strand a node with an
    /// empty base-layer list. Reconnect each such node to its exact nearest
    /// neighbors by brute-force scan.
    fn repair_isolated(&mut self) {
        if self.docs.len() < 2 {
            return;
        }
        let cap = self.cap(0);
        for _ in 0..4 {
            let isolated: Vec<u32> = (0..self.docs.len() as u32)
                .filter(|&n| self.adjacency[n as usize][0].is_empty())
                .collect();
            if isolated.is_empty() {
                break;
            }
            for node in isolated {
                let mut scored: Vec<Candidate> = (0..self.docs.len() as u32)
                    .filter(|&n| n != node)
                    .map(|n| Candidate {
                        dist: self.doc_dist(node, n),
                        node: n,
                    })
                    .collect();
                scored.sort();
                for c in scored.iter().take(self.params.max_degree.min(4)) {
                    Self::push_unique(&mut self.adjacency[node as usize][0], c.node);
                    Self::push_unique(&mut self.adjacency[c.node as usize][0], node);
                    self.shrink_to_cap(c.node, 0, cap, Some(node));
                }
            }
        }
    }
}
