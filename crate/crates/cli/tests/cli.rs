use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipml_core::corpus;
use ipml_core::synth;

fn ipml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipml"))
        .args(args)
        .env("IPML_LOG", "warn")
        .output()
        .expect("run ipml")
}

fn ok(args: &[&str]) -> Output {
    let out = ipml(args);
    assert!(
        out.status.success(),
        "ipml {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn committed_fixture_is_reproducible() {
    let f = synth::fixture(7);
    for text in &f.texts {
        let path = fixture()
            .join("corpus")
            .join(format!("{}.txt", text.language()));
        assert_eq!(
            fs::read_to_string(path).unwrap(),
            text.to_tsv(),
            "{}",
            text.language()
        );
    }
    assert_eq!(
        fs::read_to_string(fixture().join("lexicon.tsv")).unwrap(),
        f.lexicon.to_tsv()
    );
}

#[test]
fn unknown_flags_exit_with_usage() {
    let out = ipml(&["rank", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(ipml(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn module_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = ipml(&["score", "--hyp", s(&missing), "--ref", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
}

#[test]
fn rank_writes_sorted_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ranking.tsv");
    let skipped = dir.path().join("skipped.tsv");
    let family = dir.path().join("family.txt");
    let target = fixture().join("corpus/xlo.txt");
    ok(&[
        "rank",
        "--target",
        s(&target),
        "--candidates",
        s(&fixture().join("corpus")),
        "--metric",
        "famp",
        "--k",
        "2",
        "--family-out",
        s(&family),
        "--out",
        s(&out),
        "--skip-report",
        s(&skipped),
    ]);
    let tsv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = tsv.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 5);
    // the target file sits in the candidate directory and is skipped
    assert!(fs::read_to_string(&skipped).unwrap().contains("xlo"));
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(rows.iter().all(|r| r[2] == "FAMP"));
    let fam = fs::read_to_string(&family).unwrap();
    assert_eq!(fam.lines().collect::<Vec<_>>(), [rows[0][1], rows[1][1]]);
}

#[test]
fn align_writes_model_and_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.tsv");
    let stats = dir.path().join("stats.tsv");
    ok(&[
        "align",
        "--source",
        s(&fixture().join("corpus/xna.txt")),
        "--target",
        s(&fixture().join("corpus/xlo.txt")),
        "--iterations",
        "3",
        "--model-out",
        s(&model),
        "--stats-out",
        s(&stats),
    ]);
    let loaded = ipml_core::align::AlignmentModel::load(&model).unwrap();
    assert_eq!(loaded.iterations(), 3);
    assert!(fs::read_to_string(&stats).unwrap().lines().count() > 10);
}

#[test]
fn tag_then_detag_restores_names() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("en.txt");
    let lexicon = dir.path().join("lex.tsv");
    fs::write(
        &input,
        "1\tFatma asks her sister Wati to call Yi , the brother of Andika\n2\tno names here\n",
    )
    .unwrap();
    fs::write(
        &lexicon,
        "fatma\ten\tFatma\nwati\ten\tWati\nyi\ten\tYi\nandika\ten\tAndika\nandika\tde\tAndika\n",
    )
    .unwrap();
    let tagged = dir.path().join("tagged.txt");
    let dict = dir.path().join("dict.tsv");
    ok(&[
        "tag",
        "--input",
        s(&input),
        "--language",
        "en",
        "--lexicon",
        s(&lexicon),
        "--out",
        s(&tagged),
        "--dict-out",
        s(&dict),
    ]);
    assert_eq!(
        fs::read_to_string(&tagged).unwrap(),
        "1\t__NE0 asks her sister __NE1 to call __NE2 , the brother of __NE3\n2\tno names here\n"
    );

    let translated = dir.path().join("de.tagged.txt");
    fs::write(
        &translated,
        "1\t__NE0 bittet ihre Schwester __NE1 darum , __NE2 , den Bruder __NE3 , anzurufen __NE7\n2\tkeine Namen\n",
    )
    .unwrap();
    let out = dir.path().join("de.txt");
    let report = dir.path().join("report.tsv");
    ok(&[
        "detag",
        "--input",
        s(&translated),
        "--source-dict",
        s(&dict),
        "--lexicon",
        s(&lexicon),
        "--target-language",
        "de",
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "1\tFatma bittet ihre Schwester Wati darum , Yi , den Bruder Andika , anzurufen\n2\tkeine Namen\n"
    );
    assert_eq!(
        fs::read_to_string(&report).unwrap(),
        "1\t4\t__NE7\n2\t0\t\n"
    );
}

#[test]
fn combine_picks_centers() {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        (
            "a.txt",
            "1\tthe cat sat on the mat\n2\tone two three four\n",
        ),
        ("b.txt", "1\tthe cat sat on a mat\n2\tone two three four\n"),
        ("c.txt", "1\tdog stood\n2\tfive six\n"),
    ];
    let mut args = vec!["combine".to_owned(), "--inputs".to_owned()];
    for (name, body) in files {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        args.push(s(&p).to_owned());
    }
    let out = dir.path().join("combined.txt");
    let report = dir.path().join("report.tsv");
    let hist = dir.path().join("hist.tsv");
    for (flag, p) in [
        ("--out", &out),
        ("--report", &report),
        ("--histogram", &hist),
    ] {
        args.push(flag.to_owned());
        args.push(s(p).to_owned());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "1\tthe cat sat on the mat\n2\tone two three four\n"
    );
    assert_eq!(fs::read_to_string(&hist).unwrap(), "a\t2\nb\t0\nc\t0\n");
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 2);
}

#[test]
fn score_prints_bleu_row() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("hyp.txt");
    let reference = dir.path().join("ref.txt");
    fs::write(&hyp, "a b c d\n").unwrap();
    fs::write(&reference, "a b c d e\n").unwrap();
    let out = ok(&["score", "--hyp", s(&hyp), "--ref", s(&reference)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = stdout
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(&row[1..5], &[1.0; 4]);
    assert!((row[5] - (-0.25f64).exp()).abs() < 1e-6);
    assert!((row[0] - row[5]).abs() < 1e-6);
}

fn write_config(dir: &Path, family: &str, out: &Path) -> PathBuf {
    let cfg = dir.join("config.toml");
    fs::write(
        &cfg,
        format!(
            "target = \"xlo\"\ncorpus_dir = {:?}\nlexicon = {:?}\nfamily = {family}\nk = 3\noutput_dir = {:?}\nseed = 7\n",
            fixture().join("corpus"),
            fixture().join("lexicon.tsv"),
            out
        ),
    )
    .unwrap();
    cfg
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_is_deterministic_and_stays_in_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg_a = write_config(dir.path(), "\"famd\"", &a);
    ok(&["--workers", "1", "pipeline", "--config", s(&cfg_a)]);
    let cfg_b = write_config(dir.path(), "\"famd\"", &b);
    ok(&["--workers", "4", "pipeline", "--config", s(&cfg_b)]);
    let ta = tree(&a);
    assert_eq!(ta, tree(&b));
    let names: Vec<String> = ta.iter().map(|(p, _)| p.display().to_string()).collect();
    for expected in [
        "manifest.json",
        "vocab.txt",
        "ranking.tsv",
        "family.txt",
        "stage1/train.src",
        "stage3/val.tgt",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    let mut top: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    top.sort();
    assert_eq!(top, ["a", "b", "config.toml"]);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["family_provenance"], "FAMD");
    assert_eq!(manifest["stages"].as_array().unwrap().len(), 3);
}

#[test]
fn gen_uses_an_explicit_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[\"xna\", \"xmc\"]", &out);
    ok(&["gen", "--config", s(&cfg)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["family"], serde_json::json!(["xna", "xmc"]));
    assert_eq!(manifest["family_provenance"], "FAMO+");
    // stage 3: star from two sources into the 120 low-resource lines
    let stage3: usize = manifest["stages"][2]["splits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["examples"].as_u64().unwrap() as usize)
        .sum();
    assert_eq!(stage3, 2 * 120);
    let low = corpus::load_text(fixture().join("corpus/xlo.txt"), "xlo").unwrap();
    assert_eq!(low.len(), 120);

    let ranked = write_config(dir.path(), "\"famp\"", &out);
    let fail = ipml(&["gen", "--config", s(&ranked)]);
    assert!(!fail.status.success());
}

#[test]
fn config_is_checked_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(
        &cfg,
        format!(
            "target = \"xlo\"\ncorpus_dir = {:?}\nfamily = \"famd\"\nk = 0\noutput_dir = \"out\"\n",
            fixture().join("corpus")
        ),
    )
    .unwrap();
    let out = ipml(&["pipeline", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains('k'));
    assert!(!dir.path().join("out").exists());
}
