//! Lexical-translation alignment trained by expectation-maximization.
//!
//! The model is IBM-Model-1 style with an explicit null word: every target
//! token is generated either by the null word (prior `p_null`) or by one of
//! the `l` source tokens (prior `(1 - p_null) / l` each), then drawn from that
//! word's translation row. Rows are initialised uniformly over the target
//! types a source type co-occurs with and stay sparse, so unseen pairs only
//! ever see the `epsilon` floor at lookup time.
//!
//! Hard Viterbi links feed [`collect_statistics`], which measures per source
//! type how often an aligned occurrence has fertility one and how often it
//! continues the previous link monotonically (distortion zero).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, LineId, ParallelText};
use crate::error::{Error, Result};

/// Name used for the null word in serialized models.
pub const NULL_WORD: &str = "__NULL__";

const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub p_null: f64,
    pub epsilon: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            p_null: 0.08,
            epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Sentence pairs in the source→target direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitext {
    pub pairs: Vec<SentencePair>,
}

impl Bitext {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        Bitext { pairs }
    }

    /// Splits each side on whitespace.
    pub fn from_strs<S: AsRef<str>, T: AsRef<str>>(pairs: &[(S, T)]) -> Self {
        Bitext {
            pairs: pairs
                .iter()
                .map(|(s, t)| SentencePair {
                    source: corpus::tokenize(s.as_ref()),
                    target: corpus::tokenize(t.as_ref()),
                })
                .collect(),
        }
    }

    /// Joins two texts on the ids they share, in `source` order.
    pub fn from_texts(source: &ParallelText, target: &ParallelText) -> Self {
        let pairs = source
            .iter()
            .filter_map(|(id, s)| {
                target.get(id).map(|t| SentencePair {
                    source: s.to_vec(),
                    target: t.to_vec(),
                })
            })
            .collect();
        Bitext { pairs }
    }

    /// Joins two texts on an explicit id list; ids missing from either side are skipped.
    pub fn from_ids(source: &ParallelText, target: &ParallelText, ids: &[LineId]) -> Self {
        let pairs = ids
            .iter()
            .filter_map(|id| {
                Some(SentencePair {
                    source: source.get(id)?.to_vec(),
                    target: target.get(id)?.to_vec(),
                })
            })
            .collect();
        Bitext { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &[String]> + '_ {
        self.pairs.iter().map(|p| p.source.as_slice())
    }

    pub fn targets(&self) -> impl Iterator<Item = &[String]> + '_ {
        self.pairs.iter().map(|p| p.target.as_slice())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    fn len(&self) -> usize {
        self.words.len()
    }
}

/// Translation table `t(target | source)` plus the null word's row.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    source_vocab: Vocab,
    target_vocab: Vocab,
    /// Row 0 is the null word; source id `k` lives at row `k + 1`.
    rows: Vec<HashMap<u32, f64>>,
    config: AlignConfig,
    iterations: usize,
    log_likelihood: Vec<f64>,
    skipped: usize,
}

/// Hard one-best alignment: `(source index, target index)` links ordered by
/// target index. Each target index appears at most once; targets without a
/// link are aligned to null.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceAlignment {
    pub links: Vec<(usize, usize)>,
}

impl SentenceAlignment {
    /// Number of target tokens linked to each source position.
    pub fn fertilities(&self, source_len: usize) -> Vec<usize> {
        let mut fert = vec![0; source_len];
        for &(i, _) in &self.links {
            fert[i] += 1;
        }
        fert
    }

    /// Distortion of every link, in link order: `(i - i_prev) - 1`, where
    /// `i_prev` is the source index of the previous linked target token and
    /// `-1` before the first link.
    pub fn distortions(&self) -> Vec<i64> {
        let mut prev = -1i64;
        self.links
            .iter()
            .map(|&(i, _)| {
                let d = i as i64 - prev - 1;
                prev = i as i64;
                d
            })
            .collect()
    }
}

type EncodedPair = (Vec<u32>, Vec<u32>);
type LinkCounts = HashMap<(u32, u32), f64>;

fn encode(bitext: &Bitext) -> (Vocab, Vocab, Vec<EncodedPair>, usize) {
    let mut src = Vocab::default();
    let mut tgt = Vocab::default();
    let mut pairs = Vec::with_capacity(bitext.len());
    let mut skipped = 0;
    for pair in &bitext.pairs {
        if pair.source.is_empty() || pair.target.is_empty() {
            skipped += 1;
            continue;
        }
        let s = pair.source.iter().map(|w| src.intern(w)).collect();
        let t = pair.target.iter().map(|w| tgt.intern(w)).collect();
        pairs.push((s, t));
    }
    (src, tgt, pairs, skipped)
}

/// Trains the translation table for `iterations` rounds of EM.
///
/// Empty pairs are skipped (and counted); a bitext with nothing left is an error.
pub fn train_alignment(
    bitext: &Bitext,
    iterations: usize,
    config: AlignConfig,
) -> Result<AlignmentModel> {
    if !(0.0..1.0).contains(&config.p_null) {
        return Err(Error::Config(format!(
            "p_null must lie in [0, 1), got {}",
            config.p_null
        )));
    }
    if iterations == 0 {
        return Err(Error::Config(
            "alignment needs at least one iteration".into(),
        ));
    }
    let (source_vocab, target_vocab, pairs, skipped) = encode(bitext);
    if pairs.is_empty() {
        return Err(Error::NoSentencePairs { skipped });
    }
    if skipped > 0 {
        warn!("skipped {skipped} sentence pair(s) with an empty side");
    }

    let mut cooc: Vec<Vec<u32>> = vec![Vec::new(); source_vocab.len() + 1];
    for (s, t) in &pairs {
        cooc[0].extend_from_slice(t);
        for &sw in s {
            cooc[sw as usize + 1].extend_from_slice(t);
        }
    }
    let rows: Vec<HashMap<u32, f64>> = cooc
        .into_iter()
        .map(|mut targets| {
            targets.sort_unstable();
            targets.dedup();
            let p = 1.0 / targets.len() as f64;
            targets.into_iter().map(|t| (t, p)).collect()
        })
        .collect();

    let mut model = AlignmentModel {
        source_vocab,
        target_vocab,
        rows,
        config,
        iterations,
        log_likelihood: Vec::with_capacity(iterations + 1),
        skipped,
    };

    for _ in 0..iterations {
        let (ll, counts) = model.expectation(&pairs);
        model.log_likelihood.push(ll);
        model.maximize(counts);
    }
    let final_ll = model.encoded_log_likelihood(&pairs);
    model.log_likelihood.push(final_ll);
    Ok(model)
}

impl AlignmentModel {
    fn row(&self, source: Option<u32>) -> &HashMap<u32, f64> {
        &self.rows[source.map_or(0, |s| s as usize + 1)]
    }

    fn t(&self, source: Option<u32>, target: u32) -> f64 {
        self.row(source).get(&target).copied().unwrap_or(0.0)
    }

    fn pair_log_likelihood(&self, s: &[u32], t: &[u32]) -> f64 {
        let share = (1.0 - self.config.p_null) / s.len() as f64;
        t.iter()
            .map(|&tw| {
                let p = self.config.p_null * self.t(None, tw)
                    + share * s.iter().map(|&sw| self.t(Some(sw), tw)).sum::<f64>();
                p.max(self.config.epsilon).ln()
            })
            .sum()
    }

    fn encoded_log_likelihood(&self, pairs: &[EncodedPair]) -> f64 {
        let partial: Vec<f64> = pairs
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|(s, t)| self.pair_log_likelihood(s, t))
                    .sum()
            })
            .collect();
        partial.into_iter().sum()
    }

    /// Expected link counts under the current table, merged in chunk order so
    /// the result does not depend on the worker count.
    fn expectation(&self, pairs: &[EncodedPair]) -> (f64, LinkCounts) {
        let partial: Vec<(f64, LinkCounts)> = pairs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ll = 0.0;
                let mut counts: LinkCounts = HashMap::new();
                let mut scratch = Vec::new();
                for (s, t) in chunk {
                    let share = (1.0 - self.config.p_null) / s.len() as f64;
                    for &tw in t {
                        scratch.clear();
                        let null = self.config.p_null * self.t(None, tw);
                        let mut denom = null;
                        for &sw in s {
                            let p = share * self.t(Some(sw), tw);
                            scratch.push(p);
                            denom += p;
                        }
                        ll += denom.max(self.config.epsilon).ln();
                        if denom <= 0.0 {
                            continue;
                        }
                        // row key 0 = null, source id k -> k + 1
                        *counts.entry((0, tw)).or_insert(0.0) += null / denom;
                        for (&sw, &p) in s.iter().zip(&scratch) {
                            *counts.entry((sw + 1, tw)).or_insert(0.0) += p / denom;
                        }
                    }
                }
                (ll, counts)
            })
            .collect();

        let mut ll = 0.0;
        let mut merged: LinkCounts = HashMap::new();
        for (chunk_ll, counts) in partial {
            ll += chunk_ll;
            for (k, v) in counts {
                *merged.entry(k).or_insert(0.0) += v;
            }
        }
        (ll, merged)
    }

    fn maximize(&mut self, counts: LinkCounts) {
        let mut totals = vec![0.0; self.rows.len()];
        let mut entries: Vec<((u32, u32), f64)> = counts.into_iter().collect();
        // fixed summation order for the row totals
        entries.sort_unstable_by_key(|&(k, _)| k);
        for &((row, _), c) in &entries {
            totals[row as usize] += c;
        }
        let mut rows: Vec<HashMap<u32, f64>> = vec![HashMap::new(); self.rows.len()];
        for ((row, tw), c) in entries {
            let total = totals[row as usize];
            if total > 0.0 && c > 0.0 {
                rows[row as usize].insert(tw, c / total);
            }
        }
        // a row with no mass (cannot happen for co-occurring types) keeps its old values
        for (new, old) in rows.iter_mut().zip(&self.rows) {
            if new.is_empty() {
                *new = old.clone();
            }
        }
        self.rows = rows;
    }

    pub fn config(&self) -> AlignConfig {
        self.config
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Pairs skipped during training because one side was empty.
    pub fn skipped_pairs(&self) -> usize {
        self.skipped
    }

    /// Corpus log-likelihood before each EM iteration, plus the value after
    /// the last one (`iterations + 1` entries).
    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_likelihood
    }

    /// `t(target | source)`, floored at epsilon for unseen pairs.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        let p = match (self.source_vocab.get(source), self.target_vocab.get(target)) {
            (Some(s), Some(t)) => self.t(Some(s), t),
            _ => 0.0,
        };
        if p > 0.0 {
            p
        } else {
            self.config.epsilon
        }
    }

    /// `t(target | null)`, floored at epsilon.
    pub fn null_prob(&self, target: &str) -> f64 {
        let p = self
            .target_vocab
            .get(target)
            .map_or(0.0, |t| self.t(None, t));
        if p > 0.0 {
            p
        } else {
            self.config.epsilon
        }
    }

    pub fn source_words(&self) -> impl Iterator<Item = &str> + '_ {
        self.source_vocab.words.iter().map(String::as_str)
    }

    pub fn knows_source(&self, word: &str) -> bool {
        self.source_vocab.get(word).is_some()
    }

    /// Non-zero entries of a source word's row, sorted by target word.
    pub fn translations(&self, source: &str) -> Vec<(&str, f64)> {
        let Some(s) = self.source_vocab.get(source) else {
            return Vec::new();
        };
        self.sorted_row(Some(s))
    }

    fn sorted_row(&self, source: Option<u32>) -> Vec<(&str, f64)> {
        let mut row: Vec<(&str, f64)> = self
            .row(source)
            .iter()
            .map(|(&t, &p)| (self.target_vocab.word(t), p))
            .collect();
        row.sort_unstable_by(|a, b| a.0.cmp(b.0));
        row
    }

    /// Most probable target word for `source`; ties go to the smaller word.
    pub fn best_translation(&self, source: &str) -> Option<(&str, f64)> {
        let s = self.source_vocab.get(source)?;
        self.row(Some(s))
            .iter()
            .map(|(&t, &p)| (self.target_vocab.word(t), p))
            .fold(None, |best: Option<(&str, f64)>, (w, p)| match best {
                Some((bw, bp)) if bp > p || (bp == p && bw <= w) => Some((bw, bp)),
                _ => Some((w, p)),
            })
    }

    /// Sum of each row (null row first), for checking row-stochasticity.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.values().sum()).collect()
    }

    /// Links each target token to its most probable source token, or to null
    /// when null scores higher or no source token has a table entry for it.
    /// Source ties go to the lowest index.
    pub fn viterbi_align<S: AsRef<str>, T: AsRef<str>>(
        &self,
        source: &[S],
        target: &[T],
    ) -> SentenceAlignment {
        let mut links = Vec::new();
        if source.is_empty() {
            return SentenceAlignment { links };
        }
        let src: Vec<Option<u32>> = source
            .iter()
            .map(|w| self.source_vocab.get(w.as_ref()))
            .collect();
        let share = (1.0 - self.config.p_null) / source.len() as f64;
        for (j, tw) in target.iter().enumerate() {
            let Some(tw) = self.target_vocab.get(tw.as_ref()) else {
                continue;
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, sw) in src.iter().enumerate() {
                let Some(sw) = sw else { continue };
                let Some(&p) = self.rows[*sw as usize + 1].get(&tw) else {
                    continue;
                };
                let score = share * p;
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((i, score));
                }
            }
            let null = self.config.p_null * self.t(None, tw);
            if let Some((i, score)) = best {
                if score >= null {
                    links.push((i, j));
                }
            }
        }
        SentenceAlignment { links }
    }

    /// Plain-text form: `#key<TAB>value` header lines, then
    /// `source<TAB>target<TAB>prob` rows sorted by source then target, with
    /// the null word first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "#p_null\t{}", self.config.p_null).unwrap();
        writeln!(out, "#epsilon\t{}", self.config.epsilon).unwrap();
        writeln!(out, "#iterations\t{}", self.iterations).unwrap();
        for (t, p) in self.sorted_row(None) {
            writeln!(out, "{NULL_WORD}\t{t}\t{p}").unwrap();
        }
        let mut sources: Vec<(&str, u32)> = self
            .source_vocab
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        sources.sort_unstable();
        for (w, id) in sources {
            for (t, p) in self.sorted_row(Some(id)) {
                writeln!(out, "{w}\t{t}\t{p}").unwrap();
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, path)
    }

    fn parse(raw: &str, path: &Path) -> Result<Self> {
        let malformed = |line: usize, message: String| Error::Malformed {
            path: path.into(),
            line,
            message,
        };
        let mut config = AlignConfig::default();
        let mut iterations = 0;
        let mut source_vocab = Vocab::default();
        let mut target_vocab = Vocab::default();
        let mut rows: Vec<HashMap<u32, f64>> = vec![HashMap::new()];
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if let Some(key) = cols[0].strip_prefix('#') {
                let value = cols
                    .get(1)
                    .ok_or_else(|| malformed(n + 1, "header without value".into()))?;
                let bad = || malformed(n + 1, format!("bad value for `{key}`"));
                match key {
                    "p_null" => config.p_null = value.parse().map_err(|_| bad())?,
                    "epsilon" => config.epsilon = value.parse().map_err(|_| bad())?,
                    "iterations" => iterations = value.parse().map_err(|_| bad())?,
                    _ => {}
                }
                continue;
            }
            let [s, t, p] = cols[..] else {
                return Err(malformed(n + 1, "expected 3 tab-separated columns".into()));
            };
            let p: f64 = p
                .parse()
                .map_err(|_| malformed(n + 1, format!("bad probability `{p}`")))?;
            let tw = target_vocab.intern(t);
            let row = if s == NULL_WORD {
                0
            } else {
                let id = source_vocab.intern(s) as usize + 1;
                if rows.len() <= id {
                    rows.resize_with(id + 1, HashMap::new);
                }
                id
            };
            rows[row].insert(tw, p);
        }
        Ok(AlignmentModel {
            source_vocab,
            target_vocab,
            rows,
            config,
            iterations,
            log_likelihood: Vec::new(),
            skipped: 0,
        })
    }
}

/// Per-source-type counts over Viterbi-aligned occurrences.
///
/// An occurrence is aligned when at least one target token links to it. Its
/// distortion is that of its first (leftmost-target) link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WordStatistics {
    pub n_obs: usize,
    pub n_fert1: usize,
    pub n_dist0: usize,
    pub n_joint: usize,
}

impl WordStatistics {
    fn ratio(&self, k: usize) -> f64 {
        if self.n_obs == 0 {
            0.0
        } else {
            k as f64 / self.n_obs as f64
        }
    }

    /// Empirical P(F = 1).
    pub fn p_fert1(&self) -> f64 {
        self.ratio(self.n_fert1)
    }

    /// Empirical P(D = 0).
    pub fn p_dist0(&self) -> f64 {
        self.ratio(self.n_dist0)
    }

    /// Empirical P(F = 1, D = 0).
    pub fn p_joint(&self) -> f64 {
        self.ratio(self.n_joint)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentStatistics {
    pub words: BTreeMap<String, WordStatistics>,
    /// Source sentence length → number of sentences.
    pub source_lengths: BTreeMap<usize, usize>,
}

impl AlignmentStatistics {
    pub fn get(&self, word: &str) -> Option<&WordStatistics> {
        self.words.get(word)
    }

    /// `p_joint` for a word, 0 when unknown.
    pub fn p_joint(&self, word: &str) -> f64 {
        self.words.get(word).map_or(0.0, WordStatistics::p_joint)
    }

    pub fn total_observations(&self) -> usize {
        self.words.values().map(|w| w.n_obs).sum()
    }

    /// Adds one sentence's alignment to the counts.
    pub fn record<S: AsRef<str>>(&mut self, source: &[S], alignment: &SentenceAlignment) {
        *self.source_lengths.entry(source.len()).or_insert(0) += 1;
        let fert = alignment.fertilities(source.len());
        let mut first_distortion: Vec<Option<i64>> = vec![None; source.len()];
        for (&(i, _), d) in alignment.links.iter().zip(alignment.distortions()) {
            first_distortion[i].get_or_insert(d);
        }
        for (i, word) in source.iter().enumerate() {
            let entry = self.words.entry(word.as_ref().to_owned()).or_default();
            if fert[i] == 0 {
                continue;
            }
            entry.n_obs += 1;
            let f1 = fert[i] == 1;
            let d0 = first_distortion[i] == Some(0);
            entry.n_fert1 += f1 as usize;
            entry.n_dist0 += d0 as usize;
            entry.n_joint += (f1 && d0) as usize;
        }
    }

    /// `word<TAB>n_obs<TAB>p_fert1<TAB>p_dist0<TAB>p_joint`, sorted by word.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, s) in &self.words {
            writeln!(
                out,
                "{w}\t{}\t{}\t{}\t{}",
                s.n_obs,
                s.p_fert1(),
                s.p_dist0(),
                s.p_joint()
            )
            .unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Viterbi-aligns every pair and tallies fertility and distortion per source type.
///
/// Every source type of the model gets an entry, with zero counts when it is
/// never aligned.
pub fn collect_statistics(model: &AlignmentModel, bitext: &Bitext) -> AlignmentStatistics {
    let alignments: Vec<SentenceAlignment> = bitext
        .pairs
        .par_iter()
        .map(|p| model.viterbi_align(&p.source, &p.target))
        .collect();
    let mut stats = AlignmentStatistics::default();
    for w in model.source_words() {
        stats.words.entry(w.to_owned()).or_default();
    }
    for (pair, alignment) in bitext.pairs.iter().zip(&alignments) {
        if pair.source.is_empty() {
            continue;
        }
        stats.record(&pair.source, alignment);
    }
    stats
}
