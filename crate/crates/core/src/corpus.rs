//! Line-aligned multilingual text.
//!
//! Every language is held as a [`ParallelText`]: an ordered map from an opaque
//! [`LineId`] to a whitespace-tokenized sentence. Identical ids across
//! languages denote translations of the same content, so all downstream
//! modules join languages through ids rather than file positions.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(String);

impl LineId {
    pub fn new(id: impl Into<String>) -> Self {
        LineId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LineId {
    fn from(s: &str) -> Self {
        LineId(s.to_owned())
    }
}

impl From<String> for LineId {
    fn from(s: String) -> Self {
        LineId(s)
    }
}

/// Splits on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// One language's sentences keyed by line id, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelText {
    language: String,
    lines: IndexMap<LineId, Vec<String>>,
}

impl ParallelText {
    pub fn new(language: impl Into<String>) -> Self {
        ParallelText {
            language: language.into(),
            lines: IndexMap::new(),
        }
    }

    /// Builds a text from `(id, sentence)` pairs. Blank sentences are dropped;
    /// a repeated id is rejected.
    pub fn from_pairs<I, K, S>(language: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, S)>,
        K: Into<LineId>,
        S: AsRef<str>,
    {
        let mut text = ParallelText::new(language);
        for (n, (id, sentence)) in pairs.into_iter().enumerate() {
            let id = id.into();
            let tokens = tokenize(sentence.as_ref());
            if tokens.is_empty() {
                continue;
            }
            if text.lines.contains_key(&id) {
                return Err(Error::DuplicateId {
                    path: format!("<{}>", text.language).into(),
                    line: n + 1,
                    id: id.0,
                });
            }
            text.lines.insert(id, tokens);
        }
        Ok(text)
    }

    /// Builds a text whose ids are the zero-based positions of `sentences`.
    pub fn from_sentences<I, S>(language: impl Into<String>, sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let pairs = sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| (LineId(i.to_string()), s));
        // positional ids cannot collide
        ParallelText::from_pairs(language, pairs).expect("positional ids are unique")
    }

    pub(crate) fn from_map(language: String, lines: IndexMap<LineId, Vec<String>>) -> Self {
        ParallelText { language, lines }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn get(&self, id: &LineId) -> Option<&[String]> {
        self.lines.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &LineId) -> bool {
        self.lines.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &LineId> + '_ {
        self.lines.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LineId, &[String])> + '_ {
        self.lines.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[String]> + '_ {
        self.lines.values().map(Vec::as_slice)
    }

    /// Inserts or replaces one line. Empty token lists are ignored.
    pub fn insert(&mut self, id: LineId, tokens: Vec<String>) {
        if !tokens.is_empty() {
            self.lines.insert(id, tokens);
        }
    }

    /// Keeps only the given ids, in the order given. Ids absent here are skipped.
    pub fn restrict<'a, I>(&self, ids: I) -> ParallelText
    where
        I: IntoIterator<Item = &'a LineId>,
    {
        let lines = ids
            .into_iter()
            .filter_map(|id| self.lines.get(id).map(|t| (id.clone(), t.clone())))
            .collect();
        ParallelText::from_map(self.language.clone(), lines)
    }

    /// Renders the `ID<TAB>text` format, one line per sentence.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, tokens) in &self.lines {
            out.push_str(id.as_str());
            out.push('\t');
            out.push_str(&tokens.join(" "));
            out.push('\n');
        }
        out
    }

    /// Renders bare text, one sentence per line.
    pub fn to_plain(&self) -> String {
        let mut out = String::new();
        for tokens in self.lines.values() {
            out.push_str(&tokens.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Reads `ID<TAB>text` lines, or bare text when no line carries a tab.
///
/// Bare lines get their zero-based line number as id. Blank lines are skipped
/// in both formats without shifting the numbering.
pub fn load_text(path: impl AsRef<Path>, language: &str) -> Result<ParallelText> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_text(&raw, language, path)
}

pub(crate) fn parse_text(raw: &str, language: &str, path: &Path) -> Result<ParallelText> {
    let lines: Vec<&str> = raw.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(Error::EmptyFile { path: path.into() });
    }
    let with_ids = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .all(|l| l.contains('\t'));

    let mut map = IndexMap::new();
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = if with_ids {
            let (id, body) = line.split_once('\t').expect("checked above");
            if id.trim().is_empty() {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: n + 1,
                    message: "empty line id".into(),
                });
            }
            (LineId::new(id), body)
        } else {
            (LineId(n.to_string()), *line)
        };
        let tokens = tokenize(body);
        if tokens.is_empty() {
            continue;
        }
        if map.contains_key(&id) {
            return Err(Error::DuplicateId {
                path: path.into(),
                line: n + 1,
                id: id.0,
            });
        }
        map.insert(id, tokens);
    }
    if map.is_empty() {
        return Err(Error::EmptyFile { path: path.into() });
    }
    Ok(ParallelText::from_map(language.to_owned(), map))
}

pub fn save_text(text: &ParallelText, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text.to_tsv()).map_err(|e| Error::io(path, e))
}

/// Restricts every text to the line ids they all share, ordered as in the
/// first text.
pub fn intersect(texts: &[ParallelText]) -> Result<Vec<ParallelText>> {
    if texts.len() < 2 {
        return Err(Error::TooFewTexts {
            needed: 2,
            got: texts.len(),
        });
    }
    let shared = shared_ids(texts);
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(texts.iter().map(|t| t.restrict(&shared)).collect())
}

pub(crate) fn shared_ids(texts: &[ParallelText]) -> Vec<LineId> {
    let Some((first, rest)) = texts.split_first() else {
        return Vec::new();
    };
    first
        .ids()
        .filter(|id| rest.iter().all(|t| t.contains(id)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Contiguous,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: Vec<(String, f64)>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SplitMode,
}

impl SplitSpec {
    pub fn contiguous<S: Into<String>>(ratios: impl IntoIterator<Item = (S, f64)>) -> Self {
        SplitSpec {
            ratios: ratios.into_iter().map(|(n, r)| (n.into(), r)).collect(),
            seed: 0,
            mode: SplitMode::Contiguous,
        }
    }

    pub fn shuffled<S: Into<String>>(
        ratios: impl IntoIterator<Item = (S, f64)>,
        seed: u64,
    ) -> Self {
        SplitSpec {
            mode: SplitMode::Shuffled,
            seed,
            ..SplitSpec::contiguous(ratios)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::InvalidSplit("no ratios given".into()));
        }
        let mut names = HashSet::new();
        for (name, r) in &self.ratios {
            if !(0.0..=1.0).contains(r) || r.is_nan() {
                return Err(Error::InvalidSplit(format!(
                    "fraction for `{name}` is {r}, outside [0, 1]"
                )));
            }
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidSplit(format!("split `{name}` listed twice")));
            }
        }
        let sum: f64 = self.ratios.iter().map(|(_, r)| r).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    /// Line counts per split: floor for every split but the last, which takes
    /// the remainder.
    pub fn sizes(&self, total: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.ratios.len());
        let mut used = 0;
        for (i, (_, r)) in self.ratios.iter().enumerate() {
            if i + 1 == self.ratios.len() {
                sizes.push(total - used);
            } else {
                // absorb representation error such as 0.29 * 100 = 28.999…
                let n = ((total as f64) * r + 1e-9).floor() as usize;
                let n = n.min(total - used);
                used += n;
                sizes.push(n);
            }
        }
        sizes
    }

    /// Partitions `ids` into named groups; each group keeps document order.
    pub fn assign(&self, ids: &[LineId]) -> Result<Vec<(String, Vec<LineId>)>> {
        self.validate()?;
        let mut order: Vec<usize> = (0..ids.len()).collect();
        if self.mode == SplitMode::Shuffled {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            order.shuffle(&mut rng);
        }
        let mut out = Vec::with_capacity(self.ratios.len());
        let mut start = 0;
        for ((name, _), size) in self.ratios.iter().zip(self.sizes(ids.len())) {
            if size == 0 {
                return Err(Error::EmptySplit {
                    name: name.clone(),
                    total: ids.len(),
                });
            }
            let mut chunk: Vec<usize> = order[start..start + size].to_vec();
            chunk.sort_unstable();
            out.push((
                name.clone(),
                chunk.into_iter().map(|i| ids[i].clone()).collect(),
            ));
            start += size;
        }
        Ok(out)
    }
}

/// Partitions a text according to `spec`, returning splits in spec order.
pub fn split(text: &ParallelText, spec: &SplitSpec) -> Result<IndexMap<String, ParallelText>> {
    let ids: Vec<LineId> = text.ids().cloned().collect();
    Ok(spec
        .assign(&ids)?
        .into_iter()
        .map(|(name, ids)| {
            let part = text.restrict(&ids);
            (name, part)
        })
        .collect())
}
