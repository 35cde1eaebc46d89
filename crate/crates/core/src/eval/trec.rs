//! TREC qrels and run file artifacts.
//!
//! Qrels lines are `qid 0 docid grade`, run lines are
//! `qid Q0 docid rank score tag`, both whitespace-delimited. Within a query
//! a run must carry ranks 1..n without gaps and non-increasing scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Relevance judgments: query id -> doc id -> integer grade.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, i32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    pub fn add(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: i32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade.max(0));
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> i32 {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(doc_id).copied())
            .unwrap_or(0)
    }

    pub fn docs(&self, query_id: &str) -> Option<&BTreeMap<String, i32>> {
        self.judgments.get(query_id)
    }

    /// Doc ids judged relevant at `min_grade` or above for one query.
    pub fn relevant_docs(&self, query_id: &str, min_grade: i32) -> Vec<&str> {
        self.judgments
            .get(query_id)
            .map(|m| {
                m.iter()
                    .filter(|(_, &g)| g >= min_grade)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let grade: i32 = fields[3].parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                message: format!("bad grade {:?}", fields[3]),
            })?;
            if grade < 0 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: format!("negative grade {grade}"),
                });
            }
            qrels.add(fields[0], fields[2], grade);
        }
        Ok(qrels)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (qid, docs) in &self.judgments {
            for (docid, grade) in docs {
                writeln!(out, "{qid} 0 {docid} {grade}").unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_trec_string())?;
        Ok(())
    }
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub query_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// A full system run: per query, records ordered by rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    by_query: BTreeMap<String, Vec<RunRecord>>,
}

impl Run {
    pub fn new() -> Self {
        Run::default()
    }

    /// Build a run from per-query ranked doc lists, assigning ranks 1..n.
    pub fn from_rankings(
        rankings: impl IntoIterator<Item = (String, Vec<(String, f64)>)>,
    ) -> Result<Self> {
        let mut run = Run::new();
        for (qid, docs) in rankings {
            let records: Vec<RunRecord> = docs
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| RunRecord {
                    query_id: qid.clone(),
                    doc_id,
                    rank: i + 1,
                    score,
                })
                .collect();
            run.insert_query(qid, records)?;
        }
        Ok(run)
    }

    fn insert_query(&mut self, qid: String, records: Vec<RunRecord>) -> Result<()> {
        for (i, r) in records.iter().enumerate() {
            if r.rank != i + 1 {
                return Err(Error::InvalidRecord {
                    id: qid.clone(),
                    message: format!("rank {} at position {}, expected {}", r.rank, i, i + 1),
                });
            }
            if i > 0 && records[i - 1].score < r.score {
                return Err(Error::InvalidRecord {
                    id: qid.clone(),
                    message: format!(
                        "scores increase at rank {}: {} < {}",
                        r.rank,
                        records[i - 1].score,
                        r.score
                    ),
                });
            }
        }
        self.by_query.insert(qid, records);
        Ok(())
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn records(&self, query_id: &str) -> Option<&[RunRecord]> {
        self.by_query.get(query_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let rank: usize = fields[3].parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                message: format!("bad rank {:?}", fields[3]),
            })?;
            let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                message: format!("bad score {:?}", fields[4]),
            })?;
            grouped.entry(fields[0].to_string()).or_default().push(RunRecord {
                query_id: fields[0].to_string(),
                doc_id: fields[2].to_string(),
                rank,
                score,
            });
        }
        let mut run = Run::new();
        for (qid, mut records) in grouped {
            records.sort_by_key(|r| r.rank);
            run.insert_query(qid, records)?;
        }
        Ok(run)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_trec_string(&self, tag: &str) -> String {
        let mut out = String::new();
        for records in self.by_query.values() {
            for r in records {
                writeln!(
                    out,
                    "{} Q0 {} {} {} {}",
                    r.query_id, r.doc_id, r.rank, r.score, tag
                )
                .unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>, tag: &str) -> Result<()> {
        fs::write(path, self.to_trec_string(tag))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_round_trip() {
        let text = "q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n";
        let qrels = Qrels::parse(text, "test").unwrap();
        assert_eq!(qrels.grade("q1", "d1"), 1);
        assert_eq!(qrels.grade("q1", "missing"), 0);
        assert_eq!(qrels.len(), 2);
        let reparsed = Qrels::parse(&qrels.to_trec_string(), "test").unwrap();
        assert_eq!(qrels, reparsed);
    }

    #[test]
    fn qrels_parse_errors_carry_line_numbers() {
        let err = Qrels::parse("q1 0 d1\n", "f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Qrels::parse("q1 0 d1 1\nq1 0 d2 x\n", "f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn run_round_trip() {
        let run = Run::from_rankings(vec![(
            "q1".to_string(),
            vec![("d1".to_string(), 2.0), ("d2".to_string(), 1.0)],
        )])
        .unwrap();
        let text = run.to_trec_string("testtag");
        assert!(text.contains("q1 Q0 d1 1 2 testtag"));
        let reparsed = Run::parse(&text, "test").unwrap();
        assert_eq!(run, reparsed);
    }

    #[test]
    fn run_validation_rejects_gaps_and_increasing_scores() {
        let text = "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 3 1.0 t\n";
        assert!(Run::parse(text, "f").is_err());
        let text = "q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 2.0 t\n";
        assert!(Run::parse(text, "f").is_err());
    }
}
