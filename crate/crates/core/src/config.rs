//! Declarative run configuration, checked in full before any work starts.
//!
//! ```toml
//! target = "xlo"
//! corpus_dir = "corpus"        # one <language>.txt per language, target included
//! lexicon = "lexicon.tsv"      # optional
//! family = "famd"              # "famd" | "famp" | ["a", "b"] | { file = "famo.txt" }
//! k = 10
//! edit_threshold = 2
//! output_dir = "out"
//! seed = 7
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::SplitSpec;
use crate::datagen::Stage;
use crate::error::{Error, Result};
use crate::rank::{Metric, RankConfig};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FamilySource {
    Ranked(Metric),
    List(Vec<String>),
    File { file: PathBuf },
}

fn default_k() -> usize {
    10
}

fn default_edit_threshold() -> usize {
    2
}

fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub target: String,
    pub corpus_dir: PathBuf,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    pub family: FamilySource,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_edit_threshold")]
    pub edit_threshold: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Minimum number of placeholder tokens in the vocabulary.
    #[serde(default)]
    pub max_ne: usize,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub rank: RankConfig,
    /// Defaults to train/val/test 0.8/0.1/0.1, shuffled with `seed`.
    #[serde(default)]
    pub stage1_split: Option<SplitSpec>,
    /// Defaults to train/val 0.95/0.05, contiguous.
    #[serde(default)]
    pub stage23_split: Option<SplitSpec>,
}

impl PipelineConfig {
    /// Parses and validates; paths come back absolute (relative to the file).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(raw: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_dir);
        fix(&mut self.output_dir);
        if let Some(l) = &mut self.lexicon {
            fix(l);
        }
        if let FamilySource::File { file } = &mut self.family {
            fix(file);
        }
    }

    pub fn stage1_split(&self) -> SplitSpec {
        self.stage1_split.clone().unwrap_or_else(|| {
            SplitSpec::shuffled([("train", 0.8), ("val", 0.1), ("test", 0.1)], self.seed)
        })
    }

    pub fn stage23_split(&self) -> SplitSpec {
        self.stage23_split
            .clone()
            .unwrap_or_else(|| SplitSpec::contiguous([("train", 0.95), ("val", 0.05)]))
    }

    pub fn target_path(&self) -> PathBuf {
        self.corpus_dir.join(format!("{}.txt", self.target))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.target.trim().is_empty() {
            return fail("target language is empty".into());
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !self.corpus_dir.is_dir() {
            return fail(format!(
                "corpus_dir {} is not a directory",
                self.corpus_dir.display()
            ));
        }
        if !self.target_path().is_file() {
            return fail(format!(
                "target data {} does not exist",
                self.target_path().display()
            ));
        }
        if let Some(l) = &self.lexicon {
            if !l.is_file() {
                return fail(format!("lexicon {} does not exist", l.display()));
            }
        }
        match &self.family {
            FamilySource::File { file } if !file.is_file() => {
                return fail(format!("family list {} does not exist", file.display()));
            }
            FamilySource::List(list) => {
                for lang in list {
                    let p = self.corpus_dir.join(format!("{lang}.txt"));
                    if !p.is_file() {
                        return fail(format!(
                            "family member `{lang}` has no file {}",
                            p.display()
                        ));
                    }
                }
            }
            _ => {}
        }
        if self.stages.is_empty() {
            return fail("no stages selected".into());
        }
        if self.rank.iterations == 0 {
            return fail("rank.iterations must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rank.heldout_fraction) || self.rank.heldout_fraction == 0.0 {
            return fail("rank.heldout_fraction must lie in (0, 1)".into());
        }
        self.stage1_split().validate()?;
        self.stage23_split().validate()?;
        Ok(())
    }
}
