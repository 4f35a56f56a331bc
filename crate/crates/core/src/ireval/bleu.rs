//! Corpus-level BLEU-4: modified n-gram precision with clipping, geometric
//! mean over n = 1..4, and the brevity penalty `exp(1 - r/c)` when the
//! hypothesis corpus is shorter than the reference corpus.

use std::collections::HashMap;

use super::EvalError;
use crate::clickstream::normalize;

const MAX_N: usize = 4;

fn tokenize(text: &str) -> Vec<String> {
    match normalize(text) {
        Ok(norm) => norm.as_str().split(' ').map(str::to_string).collect(),
        Err(_) => Vec::new(),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Unsmoothed corpus BLEU-4 in `[0, 1]`.
///
/// Any order with zero clipped matches anywhere in the corpus zeroes the
/// whole score, as does a corpus too short to contain a 4-gram.
pub fn bleu4<H, R>(hypotheses: &[H], references: &[R]) -> Result<f64, EvalError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }

    let mut matches = [0u64; MAX_N];
    let mut totals = [0u64; MAX_N];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp_tokens = tokenize(hyp.as_ref());
        let ref_tokens = tokenize(reference.as_ref());
        hyp_len += hyp_tokens.len() as u64;
        ref_len += ref_tokens.len() as u64;
        for n in 1..=MAX_N {
            let hyp_counts = ngram_counts(&hyp_tokens, n);
            let ref_counts = ngram_counts(&ref_tokens, n);
            for (gram, count) in &hyp_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += (*count).min(clip);
            }
            totals[n - 1] += hyp_tokens.len().saturating_sub(n - 1) as u64;
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_precision_sum = 0.0;
    for n in 0..MAX_N {
        if matches[n] == 0 || totals[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matches[n] as f64 / totals[n] as f64).ln();
    }
    let brevity_penalty = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(brevity_penalty * (log_precision_sum / MAX_N as f64).exp())
}

/// Sentence-level BLEU-4 with add-one smoothing on the precisions for
/// n >= 2. Diagnostic variant; corpus reporting uses [`bleu4`].
pub fn sentence_bleu4_smoothed(hypothesis: &str, reference: &str) -> f64 {
    let hyp_tokens = tokenize(hypothesis);
    let ref_tokens = tokenize(reference);
    if hyp_tokens.is_empty() {
        return 0.0;
    }
    let mut log_precision_sum = 0.0;
    for n in 1..=MAX_N {
        let hyp_counts = ngram_counts(&hyp_tokens, n);
        let ref_counts = ngram_counts(&ref_tokens, n);
        let mut matched = 0u64;
        for (gram, count) in &hyp_counts {
            matched += (*count).min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        let total = hyp_tokens.len().saturating_sub(n - 1) as u64;
        let (num, den) = if n == 1 {
            (matched as f64, total as f64)
        } else {
            (matched as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 || den == 0.0 {
            return 0.0;
        }
        log_precision_sum += (num / den).ln();
    }
    let brevity_penalty = if hyp_tokens.len() < ref_tokens.len() {
        (1.0 - ref_tokens.len() as f64 / hyp_tokens.len() as f64).exp()
    } else {
        1.0
    };
    brevity_penalty * (log_precision_sum / MAX_N as f64).exp()
}
