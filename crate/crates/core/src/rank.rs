//! Ranking candidate source languages by closeness to a low-resource target.
//!
//! Each candidate is aligned (candidate → target) on the lines it shares with
//! the target data. FAMD scores a candidate by how often aligned words keep
//! monotone order; FAMP scores it by the BLEU of a word-replacement
//! translation on held-out lines.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignConfig, AlignmentModel, AlignmentStatistics, Bitext};
use crate::corpus::{self, LineId, ParallelText, SplitSpec};
use crate::error::{Error, Result};
use crate::eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "FAMD", alias = "famd")]
    Famd,
    #[serde(rename = "FAMP", alias = "famp")]
    Famp,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Famd => "FAMD",
            Metric::Famp => "FAMP",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "famd" => Ok(Metric::Famd),
            "famp" => Ok(Metric::Famp),
            other => Err(Error::Config(format!(
                "unknown metric `{other}` (expected famd or famp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageScore {
    pub language: String,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedCandidate {
    pub language: String,
    pub shared_lines: usize,
    pub reason: String,
}

/// Scores sorted by descending value, ties by ascending language code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageRanking {
    metric: Metric,
    entries: Vec<LanguageScore>,
    skipped: Vec<SkippedCandidate>,
}

impl LanguageRanking {
    pub fn new(metric: Metric, scores: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (language, value) in scores {
            if !seen.insert(language.clone()) {
                return Err(Error::Config(format!("language `{language}` ranked twice")));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "score {value} for `{language}` is outside [0, 1]"
                )));
            }
            entries.push(LanguageScore {
                language,
                metric,
                value,
            });
        }
        entries.sort_by(|a, b| {
            b.value
                .total_cmp(&a.value)
                .then_with(|| a.language.cmp(&b.language))
        });
        Ok(LanguageRanking {
            metric,
            entries,
            skipped: Vec::new(),
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn entries(&self) -> &[LanguageScore] {
        &self.entries
    }

    pub fn skipped(&self) -> &[SkippedCandidate] {
        &self.skipped
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.language.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `rank<TAB>language<TAB>metric<TAB>score`, ranks from 1.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}",
                i + 1,
                e.language,
                e.metric,
                e.value
            )
            .unwrap();
        }
        out
    }

    /// `language<TAB>shared_lines<TAB>reason`
    pub fn skip_report_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.skipped {
            writeln!(out, "{}\t{}\t{}", s.language, s.shared_lines, s.reason).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyProvenance {
    #[serde(rename = "FAMD")]
    Famd,
    #[serde(rename = "FAMP")]
    Famp,
    #[serde(rename = "FAMO+")]
    FamoPlus,
}

impl From<Metric> for FamilyProvenance {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Famd => FamilyProvenance::Famd,
            Metric::Famp => FamilyProvenance::Famp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilyOfChoice {
    pub target: String,
    pub members: Vec<String>,
    pub provenance: FamilyProvenance,
}

impl FamilyOfChoice {
    /// A manually curated family (FAMO+).
    pub fn famo_plus(target: &str, members: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &members {
            if m == target {
                return Err(Error::Config(format!(
                    "family member `{m}` is the target language"
                )));
            }
            if !seen.insert(m) {
                return Err(Error::Config(format!("family member `{m}` listed twice")));
            }
        }
        if members.is_empty() {
            return Err(Error::Config("family list is empty".into()));
        }
        Ok(FamilyOfChoice {
            target: target.to_owned(),
            members,
            provenance: FamilyProvenance::FamoPlus,
        })
    }
}

/// Reads a FAMO+ list: one language code per line, `#` comments allowed.
pub fn load_family_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankConfig {
    pub iterations: usize,
    pub align: AlignConfig,
    /// Fraction of shared lines held out for FAMP, taken from the end.
    pub heldout_fraction: f64,
    pub min_shared_lines: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            iterations: 10,
            align: AlignConfig::default(),
            heldout_fraction: 0.1,
            min_shared_lines: 50,
        }
    }
}

/// Replaces each token by its most probable translation when the word has a
/// table row and a non-zero `P(F = 1, D = 0)`; otherwise copies it through.
pub fn word_replacement_translate<S: AsRef<str>>(
    model: &AlignmentModel,
    stats: &AlignmentStatistics,
    sentence: &[S],
) -> Vec<String> {
    sentence
        .iter()
        .map(|s| {
            let s = s.as_ref();
            let joint = stats.p_joint(s);
            match model.best_translation(s) {
                // argmax of t(x|s) * joint(s) is the argmax of t(x|s) for joint > 0
                Some((t, p)) if joint > 0.0 && p * joint > 0.0 => t.to_owned(),
                _ => s.to_owned(),
            }
        })
        .collect()
}

/// Token-weighted mean of `P(D = 0)` over source types.
pub fn famd_score(stats: &AlignmentStatistics) -> Result<f64> {
    let mut total = 0usize;
    let mut dist0 = 0usize;
    for w in stats.words.values() {
        total += w.n_obs;
        dist0 += w.n_dist0;
    }
    if total == 0 {
        return Err(Error::NoAlignedTokens);
    }
    // n_obs * (n_dist0 / n_obs) summed = Σ n_dist0
    Ok(dist0 as f64 / total as f64)
}

/// Corpus BLEU of word-replacement translations of the held-out sources.
pub fn famp_score(
    model: &AlignmentModel,
    stats: &AlignmentStatistics,
    heldout: &Bitext,
) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let hyps: Vec<Vec<String>> = heldout
        .sources()
        .map(|s| word_replacement_translate(model, stats, s))
        .collect();
    let refs: Vec<&[String]> = heldout.targets().collect();
    Ok(eval::corpus_bleu(&hyps, &refs)?.value)
}

enum Outcome {
    Scored(f64),
    Skipped(SkippedCandidate),
}

fn score_candidate(
    target: &ParallelText,
    candidate: &ParallelText,
    metric: Metric,
    config: &RankConfig,
) -> Result<Outcome> {
    let shared: Vec<LineId> = corpus::shared_ids(&[target.clone(), candidate.clone()]);
    let skip = |reason: String| {
        Ok(Outcome::Skipped(SkippedCandidate {
            language: candidate.language().to_owned(),
            shared_lines: shared.len(),
            reason,
        }))
    };
    if shared.len() < config.min_shared_lines {
        return skip(format!(
            "fewer than {} shared lines",
            config.min_shared_lines
        ));
    }
    let value = match metric {
        Metric::Famd => {
            let bitext = Bitext::from_ids(candidate, target, &shared);
            let model = align::train_alignment(&bitext, config.iterations, config.align)?;
            let stats = align::collect_statistics(&model, &bitext);
            match famd_score(&stats) {
                Ok(v) => v,
                Err(Error::NoAlignedTokens) => return skip("no aligned tokens".into()),
                Err(e) => return Err(e),
            }
        }
        Metric::Famp => {
            let spec = SplitSpec::contiguous([
                ("train", 1.0 - config.heldout_fraction),
                ("heldout", config.heldout_fraction),
            ]);
            let parts = spec.assign(&shared)?;
            let train = Bitext::from_ids(candidate, target, &parts[0].1);
            let heldout = Bitext::from_ids(candidate, target, &parts[1].1);
            let model = align::train_alignment(&train, config.iterations, config.align)?;
            let stats = align::collect_statistics(&model, &train);
            famp_score(&model, &stats, &heldout)?
        }
    };
    debug!("{} {metric} = {value:.6}", candidate.language());
    Ok(Outcome::Scored(value))
}

/// Scores every candidate against `target` and sorts them.
///
/// Candidates sharing fewer than `min_shared_lines` ids with the target, or
/// carrying the target's own language code, end up in the skip report.
pub fn rank_languages(
    target: &ParallelText,
    candidates: &[ParallelText],
    metric: Metric,
    config: &RankConfig,
) -> Result<LanguageRanking> {
    let outcomes: Vec<Result<Outcome>> = candidates
        .par_iter()
        .map(|c| {
            if c.language() == target.language() {
                return Ok(Outcome::Skipped(SkippedCandidate {
                    language: c.language().to_owned(),
                    shared_lines: 0,
                    reason: "candidate is the target language".into(),
                }));
            }
            score_candidate(target, c, metric, config)
        })
        .collect();
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for (c, outcome) in candidates.iter().zip(outcomes) {
        match outcome? {
            Outcome::Scored(v) => scores.push((c.language().to_owned(), v)),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    skipped.sort_by(|a, b| a.language.cmp(&b.language));
    let mut ranking = LanguageRanking::new(metric, scores)?;
    ranking.skipped = skipped;
    info!(
        "ranked {} candidate(s) by {metric}, skipped {}",
        ranking.len(),
        ranking.skipped.len()
    );
    Ok(ranking)
}

/// The top `k` languages of a ranking.
pub fn select_family(ranking: &LanguageRanking, target: &str, k: usize) -> Result<FamilyOfChoice> {
    if k == 0 || ranking.len() < k {
        return Err(Error::FamilyTooSmall {
            requested: k,
            available: ranking.len(),
        });
    }
    Ok(FamilyOfChoice {
        target: target.to_owned(),
        members: ranking.languages().take(k).map(str::to_owned).collect(),
        provenance: ranking.metric.into(),
    })
}
