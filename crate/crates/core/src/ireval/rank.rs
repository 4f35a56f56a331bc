//! Ranked-retrieval metrics over binary relevance.

use serde::Serialize;

use super::{EvalError, MetricOptions, Qrels, RankedRun};

/// Per-query scores plus their mean.
///
/// Only queries with at least one relevant document enter the mean.
/// Queries judged entirely non-relevant are counted in
/// `excluded_no_relevant`; queries absent from the run are scored zero
/// unless `skip_missing` is set, in which case they are counted in
/// `skipped_missing` and left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricResult {
    pub per_query: Vec<(String, f64)>,
    pub mean: f64,
    pub excluded_no_relevant: u64,
    pub skipped_missing: u64,
}

fn score_queries<F>(
    run: &RankedRun,
    qrels: &Qrels,
    options: MetricOptions,
    mut score: F,
) -> Result<MetricResult, EvalError>
where
    F: FnMut(&[String], &std::collections::BTreeSet<String>) -> f64,
{
    let mut per_query = Vec::new();
    let mut excluded_no_relevant = 0u64;
    let mut skipped_missing = 0u64;
    for query_id in qrels.queries() {
        let relevant = qrels.relevant_docs(query_id).expect("query listed");
        if relevant.is_empty() {
            excluded_no_relevant += 1;
            continue;
        }
        let ranking = run.ranking(query_id);
        if ranking.is_none() && options.skip_missing {
            skipped_missing += 1;
            continue;
        }
        let ranking = ranking.unwrap_or(&[]);
        per_query.push((query_id.clone(), score(ranking, relevant)));
    }
    if per_query.is_empty() {
        return Err(EvalError::NoJudgedQueries);
    }
    let mean = per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64;
    Ok(MetricResult {
        per_query,
        mean,
        excluded_no_relevant,
        skipped_missing,
    })
}

/// Precision at rank `k`: relevant documents in the top `k` divided by `k`.
/// Rankings shorter than `k` are padded as non-relevant.
pub fn precision_at_k(
    run: &RankedRun,
    qrels: &Qrels,
    k: usize,
    options: MetricOptions,
) -> Result<MetricResult, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidParameter("k must be at least 1".into()));
    }
    score_queries(run, qrels, options, |ranking, relevant| {
        let hits = ranking
            .iter()
            .take(k)
            .filter(|doc| relevant.contains(*doc))
            .count();
        hits as f64 / k as f64
    })
}

/// Average precision: mean of precision at each relevant retrieved rank,
/// divided by the total number of relevant documents. Unretrieved relevant
/// documents contribute zero. The mean over queries is MAP.
pub fn average_precision(
    run: &RankedRun,
    qrels: &Qrels,
    options: MetricOptions,
) -> Result<MetricResult, EvalError> {
    score_queries(run, qrels, options, |ranking, relevant| {
        let mut hits = 0u64;
        let mut sum = 0.0;
        for (i, doc) in ranking.iter().take(options.depth).enumerate() {
            if relevant.contains(doc) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        sum / relevant.len() as f64
    })
}

/// NDCG at `k` with binary gains: `DCG@k = Σ gain_i / log2(i + 1)` over
/// ranks `i = 1..k`, normalized by the ideal ordering of the judged
/// relevant documents.
pub fn ndcg_at_k(
    run: &RankedRun,
    qrels: &Qrels,
    k: usize,
    options: MetricOptions,
) -> Result<MetricResult, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidParameter("k must be at least 1".into()));
    }
    score_queries(run, qrels, options, |ranking, relevant| {
        let dcg: f64 = ranking
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, doc)| relevant.contains(*doc))
            .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
            .sum();
        let ideal = relevant.len().min(k);
        let idcg: f64 = (0..ideal).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        dcg / idcg
    })
}

/// Interpolated precision-recall curve averaged over queries: for each
/// recall level, the maximum precision attained at any rank whose recall
/// is at least that level.
pub fn pr_curve(
    run: &RankedRun,
    qrels: &Qrels,
    levels: &[f64],
    options: MetricOptions,
) -> Result<Vec<(f64, f64)>, EvalError> {
    if levels.is_empty()
        || levels.windows(2).any(|w| w[0] >= w[1])
        || levels.iter().any(|l| !(0.0..=1.0).contains(l))
    {
        return Err(EvalError::InvalidParameter(
            "recall levels must be increasing values in [0,1]".into(),
        ));
    }
    // Per query, precision/recall points at each relevant retrieved rank.
    let result = score_queries(run, qrels, options, |_, _| 0.0)?;
    let mut sums = vec![0.0f64; levels.len()];
    let mut count = 0usize;
    for (query_id, _) in &result.per_query {
        let relevant = qrels.relevant_docs(query_id).expect("query listed");
        let ranking = run.ranking(query_id).unwrap_or(&[]);
        let mut points = Vec::new();
        let mut hits = 0u64;
        for (i, doc) in ranking.iter().take(options.depth).enumerate() {
            if relevant.contains(doc) {
                hits += 1;
                points.push((
                    hits as f64 / relevant.len() as f64,
                    hits as f64 / (i + 1) as f64,
                ));
            }
        }
        for (slot, level) in levels.iter().enumerate() {
            let interp = points
                .iter()
                .filter(|(recall, _)| *recall >= *level - 1e-12)
                .map(|(_, precision)| *precision)
                .fold(0.0f64, f64::max);
            sums[slot] += interp;
        }
        count += 1;
    }
    Ok(levels
        .iter()
        .zip(sums)
        .map(|(level, sum)| (*level, sum / count as f64))
        .collect())
}
