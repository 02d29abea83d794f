//! End-to-end run: rank → select family → emit stages 1–3.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::config::{FamilySource, PipelineConfig};
use crate::corpus::{self, ParallelText};
use crate::datagen::{self, Manifest, PreparedCorpus, Stage, StageSpec};
use crate::error::{Error, Result};
use crate::lexicon::{self, LexiconTable};
use crate::rank::{self, FamilyOfChoice, LanguageRanking};

/// Loads every `<language>.txt` in `dir`, sorted by language code.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<ParallelText>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt") && p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let lang = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Config(format!("bad file name {}", p.display())))?;
            corpus::load_text(p, lang)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub ranking: Option<LanguageRanking>,
    pub family: FamilyOfChoice,
    pub manifest: Manifest,
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Resolves the family from the config, ranking candidates when asked to.
pub fn choose_family(
    cfg: &PipelineConfig,
    target: &ParallelText,
    candidates: &[ParallelText],
) -> Result<(FamilyOfChoice, Option<LanguageRanking>)> {
    match &cfg.family {
        FamilySource::Ranked(metric) => {
            let ranking = rank::rank_languages(target, candidates, *metric, &cfg.rank)?;
            let family = rank::select_family(&ranking, &cfg.target, cfg.k)?;
            Ok((family, Some(ranking)))
        }
        FamilySource::List(list) => {
            Ok((FamilyOfChoice::famo_plus(&cfg.target, list.clone())?, None))
        }
        FamilySource::File { file } => Ok((
            FamilyOfChoice::famo_plus(&cfg.target, rank::load_family_list(file)?)?,
            None,
        )),
    }
}

/// Emits the configured stages plus `vocab.txt` and `manifest.json` under
/// `cfg.output_dir` for an already chosen family.
pub fn generate(
    cfg: &PipelineConfig,
    family: &FamilyOfChoice,
    texts: &[ParallelText],
    lexicon: Option<&LexiconTable>,
) -> Result<Manifest> {
    let mut selected: Vec<ParallelText> = Vec::new();
    for lang in family.members.iter().chain(std::iter::once(&cfg.target)) {
        let t = texts
            .iter()
            .find(|t| t.language() == lang)
            .ok_or_else(|| Error::MissingLanguage(lang.clone()))?;
        selected.push(t.clone());
    }
    let prepared = PreparedCorpus::new(selected, lexicon, cfg.edit_threshold);
    let vocab = prepared.vocabulary(&family.members, &cfg.target, cfg.max_ne)?;

    let root = &cfg.output_dir;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut stages = Vec::new();
    let mut wanted = cfg.stages.clone();
    wanted.sort();
    wanted.dedup();
    for stage in wanted {
        let split = match stage {
            Stage::One => cfg.stage1_split(),
            _ => cfg.stage23_split(),
        };
        let spec = StageSpec {
            stage,
            languages: family.members.clone(),
            low_resource: cfg.target.clone(),
            split,
        };
        let data = datagen::emit_stage(&spec, &prepared)?;
        let m = datagen::write_stage(root, &data)?;
        info!(
            "{}: {} directions, {} examples",
            stage.dir_name(),
            m.directions,
            m.splits.iter().map(|s| s.examples).sum::<usize>()
        );
        stages.push(m);
    }
    let vocab = datagen::write_vocab(root, &vocab)?;
    let manifest = Manifest {
        target: cfg.target.clone(),
        family: family.members.clone(),
        family_provenance: serde_json::to_value(family.provenance)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        vocab,
        stages,
    };
    datagen::write_manifest(root, &manifest)?;
    Ok(manifest)
}

/// The whole pipeline. Writes `ranking.tsv`/`skipped.tsv` (when ranking),
/// `family.txt`, the stage directories, `vocab.txt` and `manifest.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let texts = load_corpus_dir(&cfg.corpus_dir)?;
    let target = texts
        .iter()
        .find(|t| t.language() == cfg.target)
        .ok_or_else(|| Error::MissingLanguage(cfg.target.clone()))?;
    let candidates: Vec<ParallelText> = texts
        .iter()
        .filter(|t| t.language() != cfg.target)
        .cloned()
        .collect();
    let lexicon = cfg
        .lexicon
        .as_ref()
        .map(lexicon::load_lexicon)
        .transpose()?;

    let (family, ranking) = choose_family(cfg, target, &candidates)?;
    info!("family of choice: {}", family.members.join(" "));

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    if let Some(r) = &ranking {
        write(&cfg.output_dir.join("ranking.tsv"), &r.to_tsv())?;
        write(&cfg.output_dir.join("skipped.tsv"), &r.skip_report_tsv())?;
    }
    let mut fam = family.members.join("\n");
    fam.push('\n');
    write(&cfg.output_dir.join("family.txt"), &fam)?;

    let manifest = generate(cfg, &family, &texts, lexicon.as_ref())?;
    Ok(PipelineOutcome {
        ranking,
        family,
        manifest,
    })
}
