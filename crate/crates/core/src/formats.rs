//! Interchange formats: JSONL embeddings and feature vectors, tab-separated
//! teacher scores, and per-query metric tables.
//!
//! Embedding ingestion is strict: every line must parse, all records in a
//! file must share one dimension, and variance entries below
//! [`VARIANCE_FLOOR`] are rejected rather than clamped, because clamping
//! would silently change scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Run;
use crate::gaussian::GaussianEmbedding;

/// Smallest variance accepted from an external file.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// One JSONL embedding line: `{"id": ..., "mean": [...], "var": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn from_embedding(e: &GaussianEmbedding) -> Self {
        EmbeddingRecord {
            id: e.id().to_string(),
            mean: e.mean().to_vec(),
            var: e.variance().to_vec(),
        }
    }

    /// Validate and convert; applies the ingestion variance floor.
    pub fn into_embedding(self) -> Result<GaussianEmbedding> {
        for (i, &v) in self.var.iter().enumerate() {
            if v.is_finite() && v > 0.0 && v < VARIANCE_FLOOR {
                return Err(Error::VarianceBelowFloor {
                    index: i,
                    value: v,
                    floor: VARIANCE_FLOOR,
                });
            }
        }
        GaussianEmbedding::new(self.id, self.mean, self.var)
    }
}

/// Read a JSONL embedding file, enforcing a consistent dimension.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<GaussianEmbedding>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut out = Vec::new();
    let mut k: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let id = record.id.clone();
        let embedding = record.into_embedding().map_err(|e| Error::InvalidRecord {
            id: format!("{id} ({display}:{})", lineno + 1),
            message: e.to_string(),
        })?;
        match k {
            None => k = Some(embedding.k()),
            Some(expected) if expected != embedding.k() => {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: lineno + 1,
                    message: format!(
                        "dimension {} differs from earlier dimension {expected}",
                        embedding.k()
                    ),
                });
            }
            _ => {}
        }
        out.push(embedding);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

pub fn write_embeddings(
    path: impl AsRef<Path>,
    embeddings: &[GaussianEmbedding],
) -> Result<()> {
    let mut out = String::new();
    for e in embeddings {
        let line = serde_json::to_string(&EmbeddingRecord::from_embedding(e))
            .expect("embedding record serialize");
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// One JSONL feature line: `{"id": ..., "features": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub features: Vec<f64>,
}

/// Read a JSONL feature file into an id-keyed map, enforcing one dimension.
pub fn read_features(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut out = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: FeatureRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if let Some(i) = record.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                id: record.id,
                message: format!("non-finite feature {i}"),
            });
        }
        match dim {
            None => dim = Some(record.features.len()),
            Some(expected) if expected != record.features.len() => {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: lineno + 1,
                    message: format!(
                        "feature dimension {} differs from earlier dimension {expected}",
                        record.features.len()
                    ),
                });
            }
            _ => {}
        }
        if out.insert(record.id.clone(), record.features).is_some() {
            return Err(Error::DuplicateId(record.id));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

pub fn write_features(
    path: impl AsRef<Path>,
    features: &BTreeMap<String, Vec<f64>>,
) -> Result<()> {
    let mut out = String::new();
    for (id, feats) in features {
        let record = FeatureRecord {
            id: id.clone(),
            features: feats.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("feature record serialize"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read tab-separated teacher scores: `query_id<TAB>doc_id<TAB>score`.
pub fn read_teacher_scores(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let score: f64 = fields[2].parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: format!("bad score {:?}", fields[2]),
        })?;
        if !score.is_finite() {
            return Err(Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("non-finite score {score}"),
            });
        }
        out.entry(fields[0].to_string())
            .or_default()
            .insert(fields[1].to_string(), score);
    }
    Ok(out)
}

pub fn write_teacher_scores(
    path: impl AsRef<Path>,
    scores: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<()> {
    let mut out = String::new();
    for (qid, docs) in scores {
        for (docid, score) in docs {
            writeln!(out, "{qid}\t{docid}\t{score}").unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-query metric table: `query_id<TAB>metric<TAB>value` (3 columns) or
/// `query_id<TAB>value` (2 columns). With 3 columns, only rows matching
/// `metric` are kept.
pub fn read_per_query_metrics(
    path: impl AsRef<Path>,
    metric: &str,
) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (qid, value_str) = match fields.len() {
            2 => (fields[0], fields[1]),
            3 => {
                if fields[1] != metric {
                    continue;
                }
                (fields[0], fields[2])
            }
            n => {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: lineno + 1,
                    message: format!("expected 2 or 3 tab-separated fields, got {n}"),
                })
            }
        };
        let value: f64 = value_str.parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: format!("bad value {value_str:?}"),
        })?;
        out.insert(qid.to_string(), value);
    }
    Ok(out)
}

pub fn write_per_query_metrics(
    path: impl AsRef<Path>,
    rows: &[(String, String, f64)],
) -> Result<()> {
    let mut out = String::new();
    for (qid, metric, value) in rows {
        writeln!(out, "{qid}\t{metric}\t{value}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Ranked doc ids per query from a run, in rank order.
pub fn run_to_rankings(run: &Run) -> BTreeMap<String, Vec<String>> {
    run.queries()
        .map(|qid| {
            let docs = run
                .records(qid)
                .unwrap_or(&[])
                .iter()
                .map(|r| r.doc_id.clone())
                .collect();
            (qid.to_string(), docs)
        })
        .collect()
}
