use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use ipml_core::align::{self, AlignConfig, Bitext};
use ipml_core::combine;
use ipml_core::config::{FamilySource, PipelineConfig};
use ipml_core::corpus::{self, ParallelText};
use ipml_core::eval;
use ipml_core::lexicon::{self, TaggedSentence, Tagger};
use ipml_core::pipeline;
use ipml_core::rank::{self, FamilyOfChoice, Metric, RankConfig};

#[derive(Parser)]
#[command(
    name = "ipml",
    version,
    about = "Low-resource translation data toolkit"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "IPML_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a lexical alignment model and collect fertility/distortion statistics.
    Align {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = AlignConfig::default().p_null)]
        p_null: f64,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Rank candidate source languages against a target text.
    Rank {
        #[arg(long)]
        target: PathBuf,
        /// Directory of `<language>.txt` files.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value = "famd")]
        metric: Metric,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Also write the top-k family to `--family-out`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        family_out: Option<PathBuf>,
        /// Ranking TSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        skip_report: Option<PathBuf>,
    },
    /// Replace named entities by order-preserving placeholders.
    Tag {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        language: String,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 2)]
        edit_threshold: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dict_out: PathBuf,
    },
    /// Decode placeholders in translated templates.
    Detag {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        source_dict: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        target_language: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Emit stage datasets for an explicit family given in the config.
    Gen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pick the cluster-center translation of every line.
    Combine {
        /// One translation per source language; the file stem names the language.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Corpus BLEU of a hypothesis file against a reference file.
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Rank, select the family and emit stages 1-3 from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .with_context(|| format!("cannot derive a language code from {}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Align {
            source,
            target,
            iterations,
            p_null,
            model_out,
            stats_out,
        } => {
            let src = corpus::load_text(&source, &stem(&source)?)?;
            let tgt = corpus::load_text(&target, &stem(&target)?)?;
            let bitext = Bitext::from_texts(&src, &tgt);
            let config = AlignConfig {
                p_null,
                ..AlignConfig::default()
            };
            let model = align::train_alignment(&bitext, iterations, config)?;
            model.save(&model_out)?;
            if let Some(path) = stats_out {
                align::collect_statistics(&model, &bitext).save(path)?;
            }
            info!(
                "aligned {} pairs ({} skipped)",
                bitext.len(),
                model.skipped_pairs()
            );
        }
        Command::Rank {
            target,
            candidates,
            metric,
            iterations,
            k,
            family_out,
            out,
            skip_report,
        } => {
            let code = stem(&target)?;
            let target_text = corpus::load_text(&target, &code)?;
            let texts = pipeline::load_corpus_dir(&candidates)?;
            let config = RankConfig {
                iterations,
                ..RankConfig::default()
            };
            let ranking = rank::rank_languages(&target_text, &texts, metric, &config)?;
            match out {
                Some(path) => write(&path, &ranking.to_tsv())?,
                None => print!("{}", ranking.to_tsv()),
            }
            if let Some(path) = skip_report {
                write(&path, &ranking.skip_report_tsv())?;
            }
            match (k, family_out) {
                (Some(k), Some(path)) => {
                    let family = rank::select_family(&ranking, &code, k)?;
                    write(&path, &format!("{}\n", family.members.join("\n")))?;
                }
                (None, Some(_)) => bail!("--family-out needs --k"),
                _ => {}
            }
        }
        Command::Tag {
            input,
            language,
            lexicon,
            edit_threshold,
            out,
            dict_out,
        } => {
            let text = corpus::load_text(&input, &language)?;
            let table = lexicon::load_lexicon(&lexicon)?;
            let tagger = Tagger::new(&table, &language, edit_threshold);
            let tagged: Vec<_> = text
                .iter()
                .map(|(id, s)| (id.clone(), tagger.tag(s)))
                .collect();
            let templates = ParallelText::from_pairs(
                language.as_str(),
                tagged
                    .iter()
                    .map(|(id, t)| (id.clone(), t.template.join(" "))),
            )?;
            write(&out, &templates.to_tsv())?;
            write(
                &dict_out,
                &lexicon::source_dicts_to_tsv(tagged.iter().map(|(id, t)| (id, t))),
            )?;
            let entities: usize = tagged.iter().map(|(_, t)| t.entity_count()).sum();
            info!("tagged {entities} entities in {} lines", tagged.len());
        }
        Command::Detag {
            input,
            source_dict,
            lexicon,
            target_language,
            out,
            report,
        } => {
            let templates = corpus::load_text(&input, &target_language)?;
            let dicts = lexicon::load_source_dicts(&source_dict)?;
            let table = lexicon::load_lexicon(&lexicon)?;
            let empty = TaggedSentence::default();
            let mut lines = String::new();
            let mut rows = String::new();
            for (id, template) in templates.iter() {
                let tagged = dicts.get(id).unwrap_or(&empty);
                let dict = lexicon::build_target_dictionary(tagged, &target_language, &table);
                let (tokens, r) = lexicon::detag(template, &dict);
                writeln!(lines, "{id}\t{}", tokens.join(" "))?;
                writeln!(rows, "{id}\t{}\t{}", r.substituted, r.dropped.join(","))?;
            }
            write(&out, &lines)?;
            if let Some(path) = report {
                write(&path, &rows)?;
            }
        }
        Command::Gen { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let members = match &cfg.family {
                FamilySource::List(list) => list.clone(),
                FamilySource::File { file } => rank::load_family_list(file)?,
                FamilySource::Ranked(m) => {
                    bail!("gen needs an explicit family list; use `pipeline` to rank by {m}")
                }
            };
            let family = FamilyOfChoice::famo_plus(&cfg.target, members)?;
            let texts = pipeline::load_corpus_dir(&cfg.corpus_dir)?;
            let table = cfg
                .lexicon
                .as_ref()
                .map(lexicon::load_lexicon)
                .transpose()?;
            pipeline::generate(&cfg, &family, &texts, table.as_ref())?;
        }
        Command::Combine {
            inputs,
            out,
            report,
            histogram,
        } => {
            let texts = inputs
                .iter()
                .map(|p| Ok(corpus::load_text(p, &stem(p)?)?))
                .collect::<Result<Vec<_>>>()?;
            let language = stem(&out)?;
            let (combined, rep) = combine::combine_corpus(&texts, &language)?;
            write(&out, &combined.to_tsv())?;
            if let Some(path) = report {
                write(&path, &rep.to_tsv())?;
            }
            if let Some(path) = histogram {
                write(&path, &rep.histogram_tsv())?;
            }
        }
        Command::Score { hyp, reference } => {
            let h = corpus::load_text(&hyp, "hyp")?;
            let r = corpus::load_text(&reference, "ref")?;
            let hs: Vec<&[String]> = h.sentences().collect();
            let rs: Vec<&[String]> = r.sentences().collect();
            let score = eval::corpus_bleu(&hs, &rs)?;
            println!("bleu\tp1\tp2\tp3\tp4\tbp");
            println!("{}", score.to_tsv_row());
        }
        Command::Pipeline { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            info!(
                "wrote {} stage(s) to {}",
                outcome.manifest.stages.len(),
                cfg.output_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IPML_LOG", "info"))
        .target(env_logger::Target::Stderr)
        .init();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
