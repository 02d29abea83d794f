//! Order-preserving named-entity lexiconization.
//!
//! Entities found in a sentence are replaced by `__NE0`, `__NE1`, … in order
//! of first appearance. After translation the placeholders are substituted
//! with the entity's surface form in the target language.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use crate::corpus::LineId;
use crate::error::{Error, Result};

pub const PLACEHOLDER_PREFIX: &str = "__NE";

pub fn placeholder(index: usize) -> String {
    format!("{PLACEHOLDER_PREFIX}{index}")
}

/// Index of a token that is exactly a placeholder.
pub fn placeholder_index(token: &str) -> Option<usize> {
    let digits = token.strip_prefix(PLACEHOLDER_PREFIX)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// entity id → language → surface forms, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconTable {
    entities: IndexMap<String, IndexMap<String, Vec<String>>>,
}

impl LexiconTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds forms for `(entity, language)`, merging with any already present.
    pub fn insert<S: AsRef<str>>(
        &mut self,
        entity: &str,
        language: &str,
        forms: &[S],
    ) -> Result<()> {
        let forms: Vec<String> = forms
            .iter()
            .map(|f| f.as_ref().split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        if forms.is_empty() || forms.iter().any(String::is_empty) {
            return Err(Error::Config(format!(
                "entity `{entity}` has an empty surface form for `{language}`"
            )));
        }
        let slot = self
            .entities
            .entry(entity.to_owned())
            .or_default()
            .entry(language.to_owned())
            .or_default();
        for f in forms {
            if !slot.contains(&f) {
                slot.push(f);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn forms(&self, entity: &str, language: &str) -> Option<&[String]> {
        self.entities.get(entity)?.get(language).map(Vec::as_slice)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entities.keys().map(String::as_str)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (entity, langs) in &self.entities {
            for (lang, forms) in langs {
                writeln!(out, "{entity}\t{lang}\t{}", forms.join("||")).unwrap();
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads `entity_id<TAB>language<TAB>form1||form2…` rows. Blank lines and
/// lines starting with `#` are ignored; repeated `(entity, language)` rows merge.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<LexiconTable> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&raw, path)
}

pub(crate) fn parse_lexicon(raw: &str, path: &Path) -> Result<LexiconTable> {
    let mut table = LexiconTable::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: &str| Error::Malformed {
            path: path.into(),
            line: n + 1,
            message: message.into(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [entity, lang, forms] = cols[..] else {
            return Err(malformed("expected entity<TAB>language<TAB>forms"));
        };
        if entity.trim().is_empty() || lang.trim().is_empty() {
            return Err(malformed("empty entity id or language"));
        }
        let forms: Vec<&str> = forms.split("||").map(str::trim).collect();
        if forms.iter().any(|f| f.is_empty()) {
            return Err(malformed("empty surface form"));
        }
        table
            .insert(entity.trim(), lang.trim(), &forms)
            .map_err(|_| malformed("empty surface form"))?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Binding {
    pub entity: String,
    pub surface: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaggedSentence {
    pub template: Vec<String>,
    /// Placeholder → binding, ordered `__NE0`, `__NE1`, …
    pub source_dict: IndexMap<String, Binding>,
}

impl TaggedSentence {
    pub fn entity_count(&self) -> usize {
        self.source_dict.len()
    }

    fn placeholder_for(&self, entity: &str) -> Option<&str> {
        self.source_dict
            .iter()
            .find(|(_, b)| b.entity == entity)
            .map(|(p, _)| p.as_str())
    }
}

/// Placeholder → target surface.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TargetDictionary {
    pub entries: IndexMap<String, String>,
}

struct FuzzyForm {
    chars: Vec<char>,
    entity: usize,
}

/// Lookup structures for one language of a lexicon.
pub struct Tagger<'a> {
    table: &'a LexiconTable,
    exact: HashMap<Vec<String>, (usize, String)>,
    longest: usize,
    fuzzy: Vec<FuzzyForm>,
    edit_threshold: usize,
}

impl<'a> Tagger<'a> {
    pub fn new(table: &'a LexiconTable, language: &str, edit_threshold: usize) -> Self {
        let mut exact = HashMap::new();
        let mut fuzzy = Vec::new();
        let mut longest = 0;
        for (idx, langs) in table.entities.values().enumerate() {
            let Some(forms) = langs.get(language) else {
                continue;
            };
            for form in forms {
                let key: Vec<String> = form.split(' ').map(str::to_owned).collect();
                longest = longest.max(key.len());
                if key.len() == 1 {
                    fuzzy.push(FuzzyForm {
                        chars: form.to_lowercase().chars().collect(),
                        entity: idx,
                    });
                }
                // first entity in table order owns a shared surface form
                exact.entry(key).or_insert((idx, form.clone()));
            }
        }
        Tagger {
            table,
            exact,
            longest,
            fuzzy,
            edit_threshold,
        }
    }

    fn entity_id(&self, idx: usize) -> &str {
        self.table
            .entities
            .get_index(idx)
            .expect("index from table")
            .0
    }

    fn exact_match<S: AsRef<str>>(&self, tokens: &[S], start: usize) -> Option<(usize, usize)> {
        let max = self.longest.min(tokens.len() - start);
        (1..=max).rev().find_map(|len| {
            let key: Vec<String> = tokens[start..start + len]
                .iter()
                .map(|t| t.as_ref().to_owned())
                .collect();
            self.exact.get(&key).map(|&(idx, _)| (idx, len))
        })
    }

    /// Nearest single-token form within the edit cap whose first letter
    /// agrees with the token (case-insensitively).
    fn fuzzy_match(&self, token: &str) -> Option<usize> {
        let chars: Vec<char> = token.to_lowercase().chars().collect();
        let cap = self.edit_threshold.min(chars.len().div_ceil(3));
        if cap == 0 {
            return None;
        }
        let mut best: Option<(usize, usize)> = None;
        for form in &self.fuzzy {
            if form.chars.len().abs_diff(chars.len()) > cap || form.chars.first() != chars.first() {
                continue;
            }
            let d = levenshtein(&chars, &form.chars);
            if d <= cap && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, form.entity));
            }
        }
        best.map(|(_, e)| e)
    }

    /// Scans left to right. At each position the longest exact surface match
    /// wins; failing that, a single token may match by edit distance. Repeated
    /// mentions of an entity share its placeholder.
    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> TaggedSentence {
        let mut out = TaggedSentence::default();
        let mut numbering: HashMap<usize, String> = HashMap::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = self
                .exact_match(tokens, i)
                .or_else(|| self.fuzzy_match(tokens[i].as_ref()).map(|e| (e, 1)));
            let Some((entity, len)) = hit else {
                out.template.push(tokens[i].as_ref().to_owned());
                i += 1;
                continue;
            };
            let surface = tokens[i..i + len]
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ");
            let next = numbering.len();
            let ph = numbering
                .entry(entity)
                .or_insert_with(|| placeholder(next))
                .clone();
            out.source_dict
                .entry(ph.clone())
                .or_insert_with(|| Binding {
                    entity: self.entity_id(entity).to_owned(),
                    surface,
                });
            out.template.push(ph);
            i += len;
        }
        out
    }
}

/// One-off tagging; build a [`Tagger`] when tagging many sentences.
pub fn tag_sentence<S: AsRef<str>>(
    tokens: &[S],
    source_language: &str,
    table: &LexiconTable,
    edit_threshold: usize,
) -> TaggedSentence {
    Tagger::new(table, source_language, edit_threshold).tag(tokens)
}

/// Maps each placeholder to the first target-language form of its entity, or
/// to the matched source surface when the entity has no target form.
pub fn build_target_dictionary(
    tagged: &TaggedSentence,
    target_language: &str,
    table: &LexiconTable,
) -> TargetDictionary {
    let entries = tagged
        .source_dict
        .iter()
        .map(|(ph, b)| {
            let surface = table
                .forms(&b.entity, target_language)
                .and_then(|f| f.first())
                .unwrap_or(&b.surface);
            (ph.clone(), surface.clone())
        })
        .collect();
    TargetDictionary { entries }
}

/// Renumbers the placeholders of a target-side tagging so entities shared
/// with `source` carry the source's placeholder. Entities only on the target
/// side are numbered after the source's, in order of first appearance.
pub fn align_placeholders(source: &TaggedSentence, target: &TaggedSentence) -> TaggedSentence {
    let mut next = source.entity_count();
    let mut rename: HashMap<&str, String> = HashMap::new();
    let mut dict = IndexMap::new();
    for (ph, b) in &target.source_dict {
        let new = match source.placeholder_for(&b.entity) {
            Some(p) => p.to_owned(),
            None => {
                next += 1;
                placeholder(next - 1)
            }
        };
        rename.insert(ph.as_str(), new.clone());
        dict.insert(new, b.clone());
    }
    dict.sort_by(|a, _, b, _| placeholder_index(a).cmp(&placeholder_index(b)));
    let template = target
        .template
        .iter()
        .map(|t| rename.get(t.as_str()).cloned().unwrap_or_else(|| t.clone()))
        .collect();
    TaggedSentence {
        template,
        source_dict: dict,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DetagReport {
    pub substituted: usize,
    /// Placeholders found in the template but missing from the dictionary.
    pub dropped: Vec<String>,
}

/// Finds `__NE<digits>` spans inside a token.
fn placeholder_spans(token: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(pos) = token[from..].find(PLACEHOLDER_PREFIX) {
        let start = from + pos;
        let digits_start = start + PLACEHOLDER_PREFIX.len();
        let digits = token[digits_start..]
            .bytes()
            .take_while(u8::is_ascii_digit)
            .count();
        if digits > 0 {
            spans.push((start, digits_start + digits));
            from = digits_start + digits;
        } else {
            from = digits_start;
        }
    }
    spans
}

/// Substitutes every placeholder in a (model-produced) template.
///
/// Placeholders may stand alone or be glued to neighbouring text, as in
/// unsegmented scripts. Placeholders missing from `dict` are deleted and listed
/// in the report; everything else is kept verbatim.
pub fn detag<S: AsRef<str>>(template: &[S], dict: &TargetDictionary) -> (Vec<String>, DetagReport) {
    let mut report = DetagReport::default();
    let mut out = Vec::with_capacity(template.len());
    for token in template {
        let token = token.as_ref();
        let spans = placeholder_spans(token);
        if spans.is_empty() {
            out.push(token.to_owned());
            continue;
        }
        let mut rebuilt = String::new();
        let mut last = 0;
        for (start, end) in spans {
            rebuilt.push_str(&token[last..start]);
            let ph = &token[start..end];
            match dict.entries.get(ph) {
                Some(surface) => {
                    rebuilt.push_str(surface);
                    report.substituted += 1;
                }
                None => report.dropped.push(ph.to_owned()),
            }
            last = end;
        }
        rebuilt.push_str(&token[last..]);
        out.extend(rebuilt.split_whitespace().map(str::to_owned));
    }
    (out, report)
}

/// Rows `line_id<TAB>placeholder<TAB>entity_id<TAB>source_surface`.
pub fn source_dicts_to_tsv<'a, I>(tagged: I) -> String
where
    I: IntoIterator<Item = (&'a LineId, &'a TaggedSentence)>,
{
    let mut out = String::new();
    for (id, t) in tagged {
        for (ph, b) in &t.source_dict {
            writeln!(out, "{id}\t{ph}\t{}\t{}", b.entity, b.surface).unwrap();
        }
    }
    out
}

/// Inverse of [`source_dicts_to_tsv`]: line id → tagged sentence with an
/// empty template.
pub fn load_source_dicts(path: impl AsRef<Path>) -> Result<BTreeMap<LineId, TaggedSentence>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<LineId, TaggedSentence> = BTreeMap::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, ph, entity, surface] = cols[..] else {
            return Err(Error::Malformed {
                path: path.into(),
                line: n + 1,
                message: "expected line_id<TAB>placeholder<TAB>entity<TAB>surface".into(),
            });
        };
        out.entry(LineId::new(id)).or_default().source_dict.insert(
            ph.to_owned(),
            Binding {
                entity: entity.to_owned(),
                surface: surface.to_owned(),
            },
        );
    }
    Ok(out)
}
