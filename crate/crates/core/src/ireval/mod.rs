//! Retrieval and translation quality metrics.
//!
//! Retrieval metrics (P@k, AP/MAP, NDCG@k, interpolated P-R curves) score a
//! [`RankedRun`] against binary-relevance [`Qrels`]. Translation quality is
//! corpus-level BLEU-4, and paired per-query scores are compared with the
//! Wilcoxon signed-rank test.
//!
//! File formats follow the classic judgment conventions:
//! qrels lines are `query_id 0 doc_id relevance`, run lines are
//! `query_id doc_id rank score`, both whitespace-separated.

mod bleu;
mod rank;
mod wilcoxon;

pub use bleu::{bleu4, sentence_bleu4_smoothed};
pub use rank::{average_precision, ndcg_at_k, pr_curve, precision_at_k, MetricResult};
pub use wilcoxon::{
    wilcoxon_exact_p, wilcoxon_normal_approx_p, wilcoxon_signed_rank, WilcoxonMethod,
    WilcoxonResult,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no judged queries with relevant documents")]
    NoJudgedQueries,
    #[error("too few pairs: {available} non-zero differences (need at least 5)")]
    TooFewPairs { available: usize },
    #[error("hypothesis and reference lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Binary relevance judgments: query id → set of relevant document ids.
/// Queries judged entirely non-relevant are remembered so they can be
/// reported as excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, query_id: &str, doc_id: &str, relevant: bool) {
        let docs = self.relevant.entry(query_id.to_string()).or_default();
        if relevant {
            docs.insert(doc_id.to_string());
        }
    }

    pub fn relevant_docs(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query_id)
    }

    /// All judged queries in deterministic order.
    pub fn queries(&self) -> impl Iterator<Item = &String> {
        self.relevant.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    /// Parse `query_id 0 doc_id relevance` lines. A relevance above zero
    /// marks the document relevant; repeated (query, doc) lines keep the
    /// last label.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, EvalError> {
        let mut qrels = Self::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(EvalError::Parse {
                    line: idx + 1,
                    reason: "expected `query_id 0 doc_id relevance`".into(),
                });
            }
            let rel: i64 = fields[3].parse().map_err(|_| EvalError::Parse {
                line: idx + 1,
                reason: "relevance is not an integer".into(),
            })?;
            if rel > 0 {
                qrels.add(fields[0], fields[2], true);
            } else {
                qrels.add(fields[0], fields[2], false);
                // Keep the last label when a document is re-judged.
                if let Some(docs) = qrels.relevant.get_mut(fields[0]) {
                    docs.remove(fields[2]);
                }
            }
        }
        Ok(qrels)
    }
}

/// Ranked retrieval results: query id → document ids, rank 1 first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankedRun {
    rankings: BTreeMap<String, Vec<String>>,
}

impl RankedRun {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set the full ranking for one query. Duplicate documents are invalid.
    pub fn set_ranking(&mut self, query_id: &str, docs: Vec<String>) -> Result<(), EvalError> {
        let mut seen = BTreeSet::new();
        for doc in &docs {
            if !seen.insert(doc.clone()) {
                return Err(EvalError::InvalidParameter(format!(
                    "duplicate document {doc:?} for query {query_id:?}"
                )));
            }
        }
        self.rankings.insert(query_id.to_string(), docs);
        Ok(())
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[String]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = &String> {
        self.rankings.keys()
    }

    /// Parse `query_id doc_id rank score` lines. Rows are ordered by rank
    /// (score descending breaks ties); duplicate documents per query are
    /// rejected.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, EvalError> {
        let mut rows: BTreeMap<String, Vec<(u64, f64, String)>> = BTreeMap::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(EvalError::Parse {
                    line: idx + 1,
                    reason: "expected `query_id doc_id rank score`".into(),
                });
            }
            let rank: u64 = fields[2].parse().map_err(|_| EvalError::Parse {
                line: idx + 1,
                reason: "rank is not a positive integer".into(),
            })?;
            if rank == 0 {
                return Err(EvalError::Parse {
                    line: idx + 1,
                    reason: "rank must start at 1".into(),
                });
            }
            let score: f64 = fields[3].parse().map_err(|_| EvalError::Parse {
                line: idx + 1,
                reason: "score is not a number".into(),
            })?;
            rows.entry(fields[0].to_string()).or_default().push((
                rank,
                score,
                fields[1].to_string(),
            ));
        }
        let mut run = Self::new();
        for (query_id, mut docs) in rows {
            docs.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then_with(|| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
                    .then_with(|| a.2.cmp(&b.2))
            });
            let ordered: Vec<String> = docs.into_iter().map(|(_, _, d)| d).collect();
            run.set_ranking(&query_id, ordered)
                .map_err(|_| EvalError::Parse {
                    line: 0,
                    reason: format!("duplicate document in ranking for query {query_id:?}"),
                })?;
        }
        Ok(run)
    }
}

/// Knobs shared by the retrieval metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Evaluation depth cut applied to AP and P-R curves.
    pub depth: usize,
    /// Skip queries absent from the run instead of scoring them zero.
    pub skip_missing: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            depth: 1000,
            skip_missing: false,
        }
    }
}

/// The standard 11 recall levels 0.0, 0.1, …, 1.0.
pub fn eleven_point_levels() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Bundled retrieval scores for one system, ready for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub system: String,
    pub k: usize,
    pub p_at_k: MetricResult,
    pub map: MetricResult,
    pub ndcg_at_k: MetricResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr_curve: Option<Vec<(f64, f64)>>,
}

impl EvalReport {
    pub fn compute(
        system: &str,
        run: &RankedRun,
        qrels: &Qrels,
        k: usize,
        options: MetricOptions,
        with_pr_curve: bool,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            system: system.to_string(),
            k,
            p_at_k: precision_at_k(run, qrels, k, options)?,
            map: average_precision(run, qrels, options)?,
            ndcg_at_k: ndcg_at_k(run, qrels, k, options)?,
            pr_curve: if with_pr_curve {
                Some(pr_curve(run, qrels, &eleven_point_levels(), options)?)
            } else {
                None
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV row per system: `system,P@k,MAP,NDCG@k`.
    pub fn write_csv_header<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "system,P@{k},MAP,NDCG@{k}", k = self.k)
    }

    pub fn write_csv_row<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6}",
            self.system, self.p_at_k.mean, self.map.mean, self.ndcg_at_k.mean
        )
    }
}
