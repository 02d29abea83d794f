//! Regenerates the bundled synthetic corpus.
//!
//! ```text
//! cargo run -p ipml-cli --example make_fixture -- crates/cli/tests/fixtures/synthetic
//! ```

use std::path::PathBuf;
use std::{env, fs};

use ipml_core::corpus;
use ipml_core::synth;

const SEED: u64 = 7;

const CONFIG: &str = r#"target = "xlo"
corpus_dir = "corpus"
lexicon = "lexicon.tsv"
family = "famd"
k = 3
edit_threshold = 2
output_dir = "out"
seed = 7
"#;

fn main() -> ipml_core::Result<()> {
    let root: PathBuf = env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/cli/tests/fixtures/synthetic".into())
        .into();
    let dir = root.join("corpus");
    fs::create_dir_all(&dir).expect("create fixture directory");
    let fixture = synth::fixture(SEED);
    for text in &fixture.texts {
        corpus::save_text(text, dir.join(format!("{}.txt", text.language())))?;
    }
    fixture.lexicon.save(root.join("lexicon.tsv"))?;
    fs::write(root.join("config.toml"), CONFIG).expect("write config");
    Ok(())
}
