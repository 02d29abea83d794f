//! Training-data emission for the three pretraining stages.
//!
//! Stage 1 trains on the complete graph of family languages over their full
//! shared text. Stage 2 adds the low-resource language and restricts every
//! language to the low-resource line ids. Stage 3 keeps that subset but only
//! translates from each family language into the low-resource one.
//!
//! Every source line is prefixed with its direction tag
//! (`__opt_src_<src> __opt_tgt_<tgt>`). Examples are emitted pair-major,
//! line-minor, so output is stable and diffable.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{LineId, ParallelText, SplitSpec};
use crate::error::{Error, Result};
use crate::lexicon::{self, LexiconTable, TaggedSentence, Tagger};

pub const SRC_TAG_PREFIX: &str = "__opt_src_";
pub const TGT_TAG_PREFIX: &str = "__opt_tgt_";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DirectionTag {
    src: String,
    tgt: String,
}

impl DirectionTag {
    pub fn new(src: &str, tgt: &str) -> Result<Self> {
        if src == tgt {
            return Err(Error::InvalidDirection(format!(
                "{src} → {tgt} is not a translation"
            )));
        }
        if src.is_empty()
            || tgt.is_empty()
            || src.contains(char::is_whitespace)
            || tgt.contains(char::is_whitespace)
        {
            return Err(Error::InvalidDirection(format!(
                "bad language code in `{src}` → `{tgt}`"
            )));
        }
        Ok(DirectionTag {
            src: src.to_owned(),
            tgt: tgt.to_owned(),
        })
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    pub fn tgt(&self) -> &str {
        &self.tgt
    }

    pub fn tokens(&self) -> [String; 2] {
        [
            format!("{SRC_TAG_PREFIX}{}", self.src),
            format!("{TGT_TAG_PREFIX}{}", self.tgt),
        ]
    }

    /// Reads the tag off the front of an emitted source line.
    pub fn parse_prefix(line: &str) -> Option<(DirectionTag, &str)> {
        let mut parts = line.splitn(3, ' ');
        let src = parts.next()?.strip_prefix(SRC_TAG_PREFIX)?;
        let tgt = parts.next()?.strip_prefix(TGT_TAG_PREFIX)?;
        let rest = parts.next().unwrap_or("");
        Some((DirectionTag::new(src, tgt).ok()?, rest))
    }
}

impl fmt::Display for DirectionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{SRC_TAG_PREFIX}{} {TGT_TAG_PREFIX}{}",
            self.src, self.tgt
        )
    }
}

/// One language's text, optionally with the entity tagging of each line.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageData {
    pub text: ParallelText,
    tags: Option<IndexMap<LineId, TaggedSentence>>,
}

impl LanguageData {
    pub fn plain(text: ParallelText) -> Self {
        LanguageData { text, tags: None }
    }

    /// Replaces every line by its placeholder template and keeps the bindings.
    pub fn lexiconized(text: &ParallelText, table: &LexiconTable, edit_threshold: usize) -> Self {
        let tagger = Tagger::new(table, text.language(), edit_threshold);
        let tagged: Vec<(LineId, TaggedSentence)> = text
            .iter()
            .map(|(id, toks)| (id.clone(), tagger.tag(toks)))
            .collect();
        let mut templates = ParallelText::new(text.language());
        for (id, t) in &tagged {
            templates.insert(id.clone(), t.template.clone());
        }
        LanguageData {
            text: templates,
            tags: Some(tagged.into_iter().collect()),
        }
    }

    pub fn language(&self) -> &str {
        self.text.language()
    }

    pub fn tags(&self) -> Option<&IndexMap<LineId, TaggedSentence>> {
        self.tags.as_ref()
    }

    fn restrict(&self, ids: &[LineId]) -> Self {
        LanguageData {
            text: self.text.restrict(ids),
            tags: self.tags.as_ref().map(|tags| {
                ids.iter()
                    .filter_map(|id| tags.get(id).map(|t| (id.clone(), t.clone())))
                    .collect()
            }),
        }
    }
}

/// Several languages restricted to one shared list of line ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusView {
    line_ids: Vec<LineId>,
    languages: IndexMap<String, LanguageData>,
}

impl CorpusView {
    /// Intersects the inputs on their shared ids (order of the first input).
    pub fn intersect(data: Vec<LanguageData>) -> Result<Self> {
        let texts: Vec<ParallelText> = data.iter().map(|d| d.text.clone()).collect();
        let ids = match texts.len() {
            0 => return Err(Error::TooFewTexts { needed: 1, got: 0 }),
            1 => texts[0].ids().cloned().collect(),
            _ => crate::corpus::shared_ids(&texts),
        };
        if ids.is_empty() {
            return Err(Error::EmptyIntersection);
        }
        Self::build(ids, data)
    }

    /// Restricts every source to exactly the low-resource ids; a source that
    /// lacks any of them is an error.
    pub fn symmetrize(low: LanguageData, sources: Vec<LanguageData>) -> Result<Self> {
        let ids: Vec<LineId> = low.text.ids().cloned().collect();
        for s in &sources {
            let missing: Vec<&LineId> = ids.iter().filter(|id| !s.text.contains(id)).collect();
            if let Some(first) = missing.first() {
                return Err(Error::MissingLines {
                    language: s.language().to_owned(),
                    count: missing.len(),
                    first: first.to_string(),
                });
            }
        }
        let mut all = sources;
        all.push(low);
        Self::build(ids, all)
    }

    fn build(line_ids: Vec<LineId>, data: Vec<LanguageData>) -> Result<Self> {
        let mut languages = IndexMap::new();
        for d in data {
            let lang = d.language().to_owned();
            if languages.contains_key(&lang) {
                return Err(Error::Config(format!("language `{lang}` given twice")));
            }
            languages.insert(lang, d.restrict(&line_ids));
        }
        Ok(CorpusView {
            line_ids,
            languages,
        })
    }

    pub fn line_ids(&self) -> &[LineId] {
        &self.line_ids
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> + '_ {
        self.languages.keys().map(String::as_str)
    }

    pub fn text(&self, language: &str) -> Option<&ParallelText> {
        self.languages.get(language).map(|d| &d.text)
    }

    /// The same languages restricted to a subset of this view's ids.
    pub fn restrict(&self, ids: &[LineId]) -> CorpusView {
        let keep: HashSet<&LineId> = ids.iter().collect();
        let line_ids: Vec<LineId> = self
            .line_ids
            .iter()
            .filter(|id| keep.contains(id))
            .cloned()
            .collect();
        let languages = self
            .languages
            .iter()
            .map(|(k, d)| (k.clone(), d.restrict(&line_ids)))
            .collect();
        CorpusView {
            line_ids,
            languages,
        }
    }

    fn data(&self, language: &str) -> Result<&LanguageData> {
        self.languages
            .get(language)
            .ok_or_else(|| Error::MissingLanguage(language.to_owned()))
    }

    fn example(&self, tag: &DirectionTag, id: &LineId) -> Result<Example> {
        let src = self.data(&tag.src)?;
        let tgt = self.data(&tag.tgt)?;
        let missing = |lang: &str| Error::MissingLines {
            language: lang.to_owned(),
            count: 1,
            first: id.to_string(),
        };
        let source = src.text.get(id).ok_or_else(|| missing(&tag.src))?.to_vec();
        let target = match (src.tags.as_ref(), tgt.tags.as_ref()) {
            (Some(st), Some(tt)) => {
                let s = st.get(id).ok_or_else(|| missing(&tag.src))?;
                let t = tt.get(id).ok_or_else(|| missing(&tag.tgt))?;
                lexicon::align_placeholders(s, t).template
            }
            _ => tgt.text.get(id).ok_or_else(|| missing(&tag.tgt))?.to_vec(),
        };
        Ok(Example {
            line_id: id.clone(),
            tag: tag.clone(),
            source,
            target,
        })
    }

    fn emit(&self, directions: &[DirectionTag]) -> Result<Dataset> {
        for d in directions {
            self.data(&d.src)?;
            self.data(&d.tgt)?;
        }
        let blocks: Vec<Vec<Example>> = directions
            .par_iter()
            .map(|d| {
                self.line_ids
                    .iter()
                    .map(|id| self.example(d, id))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            examples: blocks.into_iter().flatten().collect(),
        })
    }
}

/// Spec-level wrapper: restrict plain texts to the low-resource ids.
pub fn symmetrize(low: &ParallelText, sources: &[ParallelText]) -> Result<CorpusView> {
    CorpusView::symmetrize(
        LanguageData::plain(low.clone()),
        sources.iter().cloned().map(LanguageData::plain).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub line_id: LineId,
    pub tag: DirectionTag,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl Example {
    pub fn source_line(&self) -> String {
        let mut line = self.tag.to_string();
        for t in &self.source {
            line.push(' ');
            line.push_str(t);
        }
        line
    }

    pub fn target_line(&self) -> String {
        self.target.join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn src_text(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&e.source_line());
            out.push('\n');
        }
        out
    }

    pub fn tgt_text(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&e.target_line());
            out.push('\n');
        }
        out
    }

    pub fn directions(&self) -> BTreeSet<DirectionTag> {
        self.examples.iter().map(|e| e.tag.clone()).collect()
    }
}

/// All ordered pairs of distinct languages, in list order.
pub fn complete_directions(languages: &[String]) -> Result<Vec<DirectionTag>> {
    if languages.len() < 2 {
        return Err(Error::TooFewTexts {
            needed: 2,
            got: languages.len(),
        });
    }
    let mut out = Vec::with_capacity(languages.len() * (languages.len() - 1));
    for s in languages {
        for t in languages {
            if s != t {
                out.push(DirectionTag::new(s, t)?);
            }
        }
    }
    Ok(out)
}

pub fn star_directions(sources: &[String], target: &str) -> Result<Vec<DirectionTag>> {
    if sources.is_empty() {
        return Err(Error::TooFewTexts { needed: 1, got: 0 });
    }
    if sources.iter().any(|s| s == target) {
        return Err(Error::InvalidDirection(format!(
            "target `{target}` is also listed as a source"
        )));
    }
    sources
        .iter()
        .map(|s| DirectionTag::new(s, target))
        .collect()
}

/// Many-to-many: `k (k - 1) n` examples for `k` languages over `n` lines.
pub fn emit_complete(languages: &[String], view: &CorpusView) -> Result<Dataset> {
    view.emit(&complete_directions(languages)?)
}

/// Many-to-one: `|sources| n` examples, all into `target`.
pub fn emit_star(sources: &[String], target: &str, view: &CorpusView) -> Result<Dataset> {
    view.emit(&star_directions(sources, target)?)
}

/// Repeats lines cyclically up to `target_size`; ids get a `_r<replica>` suffix.
pub fn replicate_asymmetric(low: &ParallelText, target_size: usize) -> Result<ParallelText> {
    if target_size < low.len() {
        return Err(Error::Config(format!(
            "replication target {target_size} is smaller than the {} input lines",
            low.len()
        )));
    }
    let lines: Vec<(&LineId, &[String])> = low.iter().collect();
    let mut out = ParallelText::new(low.language());
    for i in 0..target_size {
        let (id, toks) = lines[i % lines.len()];
        out.insert(
            LineId::new(format!("{id}_r{}", i / lines.len())),
            toks.to_vec(),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// Shared vocabulary: direction-tag tokens (sorted), then `__NE0..__NE{max_ne-1}`,
/// then every corpus token by descending frequency and ascending text.
pub fn build_vocab(
    texts: &[ParallelText],
    low: &ParallelText,
    tags: &[DirectionTag],
    max_ne: usize,
) -> Vocabulary {
    let specials_tags: BTreeSet<String> = tags.iter().flat_map(DirectionTag::tokens).collect();
    let mut tokens: Vec<String> = specials_tags.into_iter().collect();
    tokens.extend((0..max_ne).map(lexicon::placeholder));
    let specials: HashSet<String> = tokens.iter().cloned().collect();

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for text in texts.iter().chain(std::iter::once(low)) {
        for sentence in text.sentences() {
            for tok in sentence {
                *freq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut rest: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|(t, _)| !specials.contains(*t))
        .collect();
    rest.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    tokens.extend(rest.into_iter().map(|(t, _)| t.to_owned()));
    Vocabulary { tokens }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    One,
    Two,
    Three,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::One, Stage::Two, Stage::Three];

    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
            Stage::Three => 3,
        }
    }

    pub fn dir_name(self) -> String {
        format!("stage{}", self.number())
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            3 => Ok(Stage::Three),
            _ => Err(format!("stage must be 1, 2 or 3, got {n}")),
        }
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s.number()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub stage: Stage,
    /// Family members, never including the low-resource language.
    pub languages: Vec<String>,
    pub low_resource: String,
    pub split: SplitSpec,
}

/// Every language of a run after lexicon tagging, keyed by code.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    data: IndexMap<String, LanguageData>,
}

impl PreparedCorpus {
    /// Tags every text when a lexicon is given; otherwise keeps them as is.
    pub fn new(
        texts: Vec<ParallelText>,
        lexicon: Option<&LexiconTable>,
        edit_threshold: usize,
    ) -> Self {
        let data: Vec<LanguageData> = texts
            .par_iter()
            .map(|t| match lexicon {
                Some(table) => LanguageData::lexiconized(t, table, edit_threshold),
                None => LanguageData::plain(t.clone()),
            })
            .collect();
        PreparedCorpus {
            data: data
                .into_iter()
                .map(|d| (d.language().to_owned(), d))
                .collect(),
        }
    }

    fn get(&self, language: &str) -> Result<&LanguageData> {
        self.data
            .get(language)
            .ok_or_else(|| Error::MissingLanguage(language.to_owned()))
    }

    pub fn text(&self, language: &str) -> Result<&ParallelText> {
        self.get(language).map(|d| &d.text)
    }

    /// Upper bound on placeholder indices any example can use: per line, the
    /// number of distinct entities across all languages.
    pub fn placeholder_bound(&self) -> usize {
        let mut per_line: HashMap<&LineId, HashSet<&str>> = HashMap::new();
        for d in self.data.values() {
            let Some(tags) = &d.tags else { continue };
            for (id, t) in tags {
                let set = per_line.entry(id).or_default();
                set.extend(t.source_dict.values().map(|b| b.entity.as_str()));
            }
        }
        per_line.values().map(HashSet::len).max().unwrap_or(0)
    }

    /// One vocabulary for all stages over the family and low-resource texts.
    pub fn vocabulary(&self, family: &[String], low: &str, max_ne: usize) -> Result<Vocabulary> {
        let texts: Vec<ParallelText> = family
            .iter()
            .map(|l| self.text(l).cloned())
            .collect::<Result<_>>()?;
        let mut all = family.to_vec();
        all.push(low.to_owned());
        let mut tags = complete_directions(&all)?;
        tags.sort();
        let max_ne = max_ne.max(self.placeholder_bound());
        Ok(build_vocab(&texts, self.text(low)?, &tags, max_ne))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    pub stage: Stage,
    pub languages: Vec<String>,
    pub low_resource: String,
    pub directions: Vec<DirectionTag>,
    pub splits: IndexMap<String, Dataset>,
}

/// Builds one stage's datasets from a prepared corpus.
pub fn emit_stage(spec: &StageSpec, corpus: &PreparedCorpus) -> Result<StageData> {
    if spec.languages.iter().any(|l| l == &spec.low_resource) {
        return Err(Error::Config(format!(
            "low-resource language `{}` must not be listed among the family",
            spec.low_resource
        )));
    }
    let family: Vec<LanguageData> = spec
        .languages
        .iter()
        .map(|l| corpus.get(l).cloned())
        .collect::<Result<_>>()?;

    let (view, directions) = match spec.stage {
        Stage::One => (
            CorpusView::intersect(family)?,
            complete_directions(&spec.languages)?,
        ),
        Stage::Two | Stage::Three => {
            let low = corpus.get(&spec.low_resource)?.clone();
            let view = CorpusView::symmetrize(low, family)?;
            let directions = if spec.stage == Stage::Two {
                let mut all = spec.languages.clone();
                all.push(spec.low_resource.clone());
                complete_directions(&all)?
            } else {
                star_directions(&spec.languages, &spec.low_resource)?
            };
            (view, directions)
        }
    };

    let mut splits = IndexMap::new();
    for (name, ids) in spec.split.assign(view.line_ids())? {
        let part = view.restrict(&ids);
        splits.insert(name, part.emit(&directions)?);
    }
    Ok(StageData {
        stage: spec.stage,
        languages: spec.languages.clone(),
        low_resource: spec.low_resource.clone(),
        directions,
        splits,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub lines: usize,
    pub examples: usize,
    pub src_sha256: String,
    pub tgt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: u8,
    pub languages: Vec<String>,
    pub low_resource: String,
    pub directions: usize,
    pub splits: Vec<SplitManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabManifest {
    pub path: String,
    pub tokens: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub target: String,
    pub family: Vec<String>,
    pub family_provenance: String,
    pub vocab: VocabManifest,
    pub stages: Vec<StageManifest>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Writes `<root>/stageN/<split>.src|.tgt` and returns their manifest entry.
pub fn write_stage(root: &Path, data: &StageData) -> Result<StageManifest> {
    let dir = root.join(data.stage.dir_name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut splits = Vec::new();
    for (name, ds) in &data.splits {
        let src = ds.src_text();
        let tgt = ds.tgt_text();
        write_file(&dir.join(format!("{name}.src")), &src)?;
        write_file(&dir.join(format!("{name}.tgt")), &tgt)?;
        let lines = ds
            .examples
            .iter()
            .map(|e| &e.line_id)
            .collect::<HashSet<_>>()
            .len();
        splits.push(SplitManifest {
            name: name.clone(),
            lines,
            examples: ds.len(),
            src_sha256: sha256_hex(src.as_bytes()),
            tgt_sha256: sha256_hex(tgt.as_bytes()),
        });
    }
    Ok(StageManifest {
        stage: data.stage.number(),
        languages: data.languages.clone(),
        low_resource: data.low_resource.clone(),
        directions: data.directions.len(),
        splits,
    })
}

pub fn write_vocab(root: &Path, vocab: &Vocabulary) -> Result<VocabManifest> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let text = vocab.to_text();
    write_file(&root.join("vocab.txt"), &text)?;
    Ok(VocabManifest {
        path: "vocab.txt".into(),
        tokens: vocab.len(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    write_file(&root.join("manifest.json"), &manifest.to_json())
}
