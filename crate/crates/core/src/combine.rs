//! Cluster-center combination of per-source translations.
//!
//! For every line, the candidate with the largest summed similarity to the
//! other candidates is taken as the combined output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{LineId, ParallelText};
use crate::error::{Error, Result};
use crate::eval::sentence_bleu;

/// Centralities within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Symmetrized smoothed sentence BLEU. Two empty sentences are identical.
pub fn similarity<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    (sentence_bleu(a, b) + sentence_bleu(b, a)) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationCluster {
    pub line_id: LineId,
    pub candidates: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentroidChoice {
    pub line_id: LineId,
    pub chosen_language: String,
    pub chosen_tokens: Vec<String>,
    pub centrality: f64,
}

/// Summed similarity of each candidate to all the others.
pub fn centralities<S: AsRef<[String]>>(candidates: &[S]) -> Vec<f64> {
    let k = candidates.len();
    let mut sim = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let s = similarity(candidates[i].as_ref(), candidates[j].as_ref());
            sim[i * k + j] = s;
            sim[j * k + i] = s;
        }
    }
    (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| sim[i * k + j]).sum())
        .collect()
}

/// Picks the first candidate whose centrality is within [`TIE_TOLERANCE`] of
/// the maximum. A singleton cluster returns its only candidate with centrality 0.
pub fn select_center(cluster: &TranslationCluster) -> Result<CentroidChoice> {
    if cluster.candidates.is_empty() {
        return Err(Error::Ragged {
            line_id: cluster.line_id.to_string(),
            problem: "has no candidates".into(),
        });
    }
    let tokens: Vec<&Vec<String>> = cluster.candidates.iter().map(|(_, t)| t).collect();
    let scores = centralities(&tokens);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = scores
        .iter()
        .position(|&s| s >= max - TIE_TOLERANCE)
        .expect("non-empty");
    let (lang, toks) = &cluster.candidates[best];
    Ok(CentroidChoice {
        line_id: cluster.line_id.clone(),
        chosen_language: lang.clone(),
        chosen_tokens: toks.clone(),
        centrality: scores[best],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombineReport {
    pub choices: Vec<(LineId, String, f64)>,
    /// Language → number of lines it supplied.
    pub histogram: BTreeMap<String, usize>,
}

impl CombineReport {
    /// `line_id<TAB>chosen_language<TAB>centrality`
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, lang, c) in &self.choices {
            writeln!(out, "{id}\t{lang}\t{c:.6}").unwrap();
        }
        out
    }

    /// `language<TAB>lines`
    pub fn histogram_tsv(&self) -> String {
        let mut out = String::new();
        for (lang, n) in &self.histogram {
            writeln!(out, "{lang}\t{n}").unwrap();
        }
        out
    }
}

/// Combines line-aligned translations, one text per source language, into a
/// single text labelled `language`.
///
/// Every input must carry exactly the line ids of the first, which also fixes
/// the output order.
pub fn combine_corpus(
    translations: &[ParallelText],
    language: &str,
) -> Result<(ParallelText, CombineReport)> {
    let Some(first) = translations.first() else {
        return Err(Error::TooFewTexts { needed: 1, got: 0 });
    };
    for t in &translations[1..] {
        if let Some(id) = first.ids().find(|id| !t.contains(id)) {
            return Err(Error::Ragged {
                line_id: id.to_string(),
                problem: format!("is missing from `{}`", t.language()),
            });
        }
        if let Some(id) = t.ids().find(|id| !first.contains(id)) {
            return Err(Error::Ragged {
                line_id: id.to_string(),
                problem: format!("appears only in `{}`", t.language()),
            });
        }
    }
    let ids: Vec<&LineId> = first.ids().collect();
    let choices: Vec<CentroidChoice> = ids
        .par_iter()
        .map(|id| {
            let cluster = TranslationCluster {
                line_id: (*id).clone(),
                candidates: translations
                    .iter()
                    .map(|t| {
                        (
                            t.language().to_owned(),
                            t.get(id).expect("checked above").to_vec(),
                        )
                    })
                    .collect(),
            };
            select_center(&cluster)
        })
        .collect::<Result<_>>()?;

    let mut lines = IndexMap::with_capacity(choices.len());
    let mut histogram: BTreeMap<String, usize> = translations
        .iter()
        .map(|t| (t.language().to_owned(), 0))
        .collect();
    let mut rows = Vec::with_capacity(choices.len());
    for c in choices {
        *histogram.entry(c.chosen_language.clone()).or_insert(0) += 1;
        rows.push((c.line_id.clone(), c.chosen_language, c.centrality));
        lines.insert(c.line_id, c.chosen_tokens);
    }
    Ok((
        ParallelText::from_map(language.to_owned(), lines),
        CombineReport {
            choices: rows,
            histogram,
        },
    ))
}
