//! Case-sensitive BLEU over whitespace tokens.
//!
//! Corpus BLEU accumulates clipped n-gram matches (n = 1..=4) over all lines
//! before taking precisions. An order with no hypothesis n-grams at all has
//! precision 0, which makes the score 0. Sentence BLEU adds one to both the
//! numerator and denominator of every order above unigrams.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub value: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
}

impl BleuScore {
    /// `value<TAB>p1<TAB>p2<TAB>p3<TAB>p4<TAB>bp`
    pub fn to_tsv_row(&self) -> String {
        let mut cols = vec![format!("{:.6}", self.value)];
        cols.extend(self.precisions.iter().map(|p| format!("{p:.6}")));
        cols.push(format!("{:.6}", self.brevity_penalty));
        cols.join("\t")
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NgramStats {
    matches: [u64; MAX_ORDER],
    totals: [u64; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

impl NgramStats {
    fn add(&mut self, other: &NgramStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

fn sentence_stats<H: AsRef<str>, R: AsRef<str>>(hyp: &[H], reference: &[R]) -> NgramStats {
    let mut stats = NgramStats {
        hyp_len: hyp.len(),
        ref_len: reference.len(),
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp, n);
        let ref_counts = ngram_counts(reference, n);
        let mut matches = 0;
        let mut total = 0;
        for (gram, count) in &hyp_counts {
            total += count;
            matches += (*count).min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        stats.matches[n - 1] = matches;
        stats.totals[n - 1] = total;
    }
    stats
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn combine(precisions: [f64; MAX_ORDER], bp: f64) -> f64 {
    if precisions.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    (bp * log_mean.exp()).clamp(0.0, 1.0)
}

/// Corpus-level 4-gram BLEU with one reference per line.
pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<BleuScore>
where
    H: AsRef<[String]>,
    R: AsRef<[String]>,
{
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut stats = NgramStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(&sentence_stats(h.as_ref(), r.as_ref()));
    }
    let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| {
        if stats.totals[n] > 0 {
            stats.matches[n] as f64 / stats.totals[n] as f64
        } else {
            0.0
        }
    });
    let bp = brevity_penalty(stats.hyp_len, stats.ref_len);
    Ok(BleuScore {
        value: combine(precisions, bp),
        precisions,
        brevity_penalty: bp,
        hypothesis_length: stats.hyp_len,
        reference_length: stats.ref_len,
    })
}

/// Sentence BLEU with add-one smoothing on orders 2..=4.
pub fn sentence_bleu<H: AsRef<str>, R: AsRef<str>>(hypothesis: &[H], reference: &[R]) -> f64 {
    let stats = sentence_stats(hypothesis, reference);
    let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| match n {
        0 if stats.totals[0] == 0 => 0.0,
        0 => stats.matches[0] as f64 / stats.totals[0] as f64,
        _ => (stats.matches[n] as f64 + 1.0) / (stats.totals[n] as f64 + 1.0),
    });
    combine(precisions, brevity_penalty(stats.hyp_len, stats.ref_len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let h = vec![toks("a b c d"), toks("e f g h i")];
        let s = corpus_bleu(&h, &h).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.brevity_penalty, 1.0);
    }

    #[test]
    fn short_hypothesis_brevity_penalty() {
        let s = corpus_bleu(&[toks("a b c d")], &[toks("a b c d e")]).unwrap();
        assert_eq!(s.precisions, [1.0; 4]);
        let bp = (1.0f64 - 5.0 / 4.0).exp();
        assert!((s.brevity_penalty - bp).abs() < 1e-12);
        assert!((s.value - bp).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(matches!(
            corpus_bleu(&empty, &empty),
            Err(Error::EmptyEvaluation)
        ));
        assert!(matches!(
            corpus_bleu(&[toks("a")], &[toks("a"), toks("b")]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn sentence_bleu_limits() {
        assert_eq!(sentence_bleu(&toks("x y z"), &toks("x y z")), 1.0);
        assert_eq!(sentence_bleu(&toks("a"), &toks("a")), 1.0);
        assert_eq!(sentence_bleu(&toks("a b c"), &toks("x y z")), 0.0);
        let empty: Vec<String> = Vec::new();
        assert_eq!(sentence_bleu(&empty, &toks("a")), 0.0);
    }

    #[test]
    fn sentence_bleu_is_case_sensitive() {
        assert_eq!(sentence_bleu(&toks("A b"), &toks("a B")), 0.0);
    }
}
