//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ipml_core::align::{self, AlignConfig, Bitext};
use ipml_core::combine::{self, TranslationCluster};
use ipml_core::corpus::{LineId, ParallelText};
use ipml_core::datagen::{self, CorpusView, DirectionTag, LanguageData};
use ipml_core::eval;
use ipml_core::lexicon::{self, LexiconTable, Tagger};
use ipml_core::rank::{self, Metric, RankConfig};
use ipml_core::synth;

type Corpus = Vec<Vec<String>>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn em_monotonicity() -> Outcome {
    let src = synth::unique_word_text("src", 200, 60, (4, 12), 11);
    let noisy = synth::add_noise(&synth::relabel(&src, "tgt", "x_"), "tgt", 0.2, 30, 12);
    let tgt = synth::shuffle_words(&noisy, "tgt", 13);
    let bitext = Bitext::from_texts(&src, &tgt);
    let start = Instant::now();
    let model = match align::train_alignment(&bitext, 10, AlignConfig::default()) {
        Ok(m) => m,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let trace = model.log_likelihood_trace();
    let worst = trace
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let pass = bitext.len() == 200
        && trace.len() == 11
        && worst >= -1e-9
        && elapsed < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "pairs={} LL {:.4} -> {:.4}, min step {worst:.3e}, {:.3}s",
            bitext.len(),
            trace[0],
            trace[trace.len() - 1],
            elapsed.as_secs_f64()
        ),
    )
}

fn self_alignment() -> Outcome {
    let text = synth::unique_word_text("tgt", 200, 40, (4, 10), 21);
    let copy = text.clone().with_language("cpy");
    let config = RankConfig::default();
    let famd = rank::rank_languages(&text, std::slice::from_ref(&copy), Metric::Famd, &config);
    let famp = rank::rank_languages(&text, std::slice::from_ref(&copy), Metric::Famp, &config);
    match (famd, famp) {
        (Ok(d), Ok(p)) => {
            let d = d.entries()[0].value;
            let p = p.entries()[0].value;
            outcome(
                d >= 0.99 && (p - 1.0).abs() <= 1e-6,
                format!("lines={} FAMD={d:.6} FAMP={p:.8}", text.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn ranking_discrimination() -> Outcome {
    let config = RankConfig::default();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let target = synth::unique_word_text("tgt", 300, 50, (5, 12), seed * 100);
        let candidates = vec![
            target.clone().with_language("copy"),
            synth::add_noise(&target, "noised", 0.25, 200, seed * 100 + 1),
            synth::shuffle_words(&target, "shuffled", seed * 100 + 2),
            synth::random_text(&target, "random", 50, seed * 100 + 3),
        ];
        let score = |m: Metric| -> Result<HashMap<String, f64>, String> {
            let r = rank::rank_languages(&target, &candidates, m, &config)
                .map_err(|e| e.to_string())?;
            Ok(r.entries()
                .iter()
                .map(|e| (e.language.clone(), e.value))
                .collect())
        };
        let (famp, famd) = match (score(Metric::Famp), score(Metric::Famd)) {
            (Ok(p), Ok(d)) => (p, d),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e),
        };
        let ok_p = famp["copy"] > famp["noised"] && famp["noised"] > famp["random"];
        let ok_d = famd["shuffled"] < famd["copy"];
        if !(ok_p && ok_d) {
            failures.push(seed);
        }
        rows.push(format!(
            "s{seed}: P {:.3}>{:.3}>{:.3} D {:.3}>{:.3}",
            famp["copy"], famp["noised"], famp["random"], famd["copy"], famd["shuffled"]
        ));
    }
    outcome(
        failures.is_empty(),
        format!("failing seeds {failures:?}; {}", rows.join("; ")),
    )
}

fn lexicon_round_trip() -> Outcome {
    const ENTITIES: usize = 50;
    let mut table = LexiconTable::new();
    let mut src_forms: Vec<Vec<String>> = Vec::new();
    let mut tgt_forms: Vec<String> = Vec::new();
    for e in 0..ENTITIES {
        // every fifth entity is a two-token name
        let src = if e % 5 == 0 {
            format!("Nam{e} Ker")
        } else {
            format!("Nam{e}")
        };
        let tgt = format!("Zet{e}");
        table
            .insert(&format!("e{e}"), "src", std::slice::from_ref(&src))
            .unwrap();
        table
            .insert(&format!("e{e}"), "tgt", std::slice::from_ref(&tgt))
            .unwrap();
        src_forms.push(toks(&src));
        tgt_forms.push(tgt);
    }
    let mut r = ChaCha8Rng::seed_from_u64(31);
    let tagger = Tagger::new(&table, "src", 2);
    let mut failures = 0;
    let mut entities = 0;
    for _ in 0..1000 {
        let mut sentence = Vec::new();
        let mut expected_src = Vec::new();
        let mut expected_tgt = Vec::new();
        for _ in 0..r.gen_range(3..15) {
            if r.gen_bool(0.3) {
                let e = r.gen_range(0..ENTITIES);
                sentence.extend(src_forms[e].iter().cloned());
                expected_src.extend(src_forms[e].iter().cloned());
                expected_tgt.push(tgt_forms[e].clone());
                entities += 1;
            } else {
                let w = format!("w{}", r.gen_range(0..100));
                sentence.push(w.clone());
                expected_src.push(w.clone());
                expected_tgt.push(w);
            }
        }
        let tagged = tagger.tag(&sentence);
        // identity translation of the template
        let template = tagged.template.clone();
        let into_tgt = lexicon::build_target_dictionary(&tagged, "tgt", &table);
        let into_src = lexicon::build_target_dictionary(&tagged, "src", &table);
        let (out_tgt, rep_tgt) = lexicon::detag(&template, &into_tgt);
        let (out_src, rep_src) = lexicon::detag(&template, &into_src);
        let joined_src: Vec<String> = toks(&out_src.join(" "));
        if out_tgt != expected_tgt
            || joined_src != expected_src
            || !rep_tgt.dropped.is_empty()
            || !rep_src.dropped.is_empty()
        {
            failures += 1;
        }
    }

    let mut fatma = LexiconTable::new();
    for (id, name) in [
        ("fatma", "Fatma"),
        ("wati", "Wati"),
        ("yi", "Yi"),
        ("andika", "Andika"),
    ] {
        fatma.insert(id, "en", &[name]).unwrap();
    }
    let tagged = lexicon::tag_sentence(
        &toks("Fatma asks her sister Wati to call Yi , the brother of Andika"),
        "en",
        &fatma,
        2,
    );
    let tag = DirectionTag::new("en", "zh").unwrap();
    let line = format!("{} {}", tag, tagged.template.join(" "));
    let expected_line =
        "__opt_src_en __opt_tgt_zh __NE0 asks her sister __NE1 to call __NE2 , the brother of __NE3";
    let dict = lexicon::build_target_dictionary(&tagged, "zh", &fatma);
    let (zh, _) = lexicon::detag(&["__NE0叫她的姐妹__NE1去打电话给__NE3的兄弟__NE2"], &dict);
    let fatma_ok = line == expected_line && zh == ["Fatma叫她的姐妹Wati去打电话给Andika的兄弟Yi"];

    outcome(
        failures == 0 && fatma_ok,
        format!(
            "1000 sentences, {entities} entities, {failures} failures; four-entity template {}",
            if fatma_ok { "matches" } else { "differs" }
        ),
    )
}

fn languages(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("l{i:02}")).collect()
}

fn texts(langs: &[String], n: usize) -> Vec<ParallelText> {
    langs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            synth::relabel(
                &synth::unique_word_text(l, n, 20, (2, 6), i as u64),
                l,
                &format!("{l}_"),
            )
        })
        .collect()
}

fn dataset_counts() -> Outcome {
    let mut bad = Vec::new();
    let mut cases = 0;
    for k in [2usize, 3, 11] {
        for n in [1usize, 10, 1038] {
            let langs = languages(k);
            let run = || -> ipml_core::Result<(usize, usize, String, String)> {
                let ts = texts(&langs, n);
                let view =
                    CorpusView::intersect(ts.iter().cloned().map(LanguageData::plain).collect())?;
                let complete = datagen::emit_complete(&langs, &view)?;
                let low = synth::unique_word_text("low", n, 20, (2, 6), 99);
                let star_view = CorpusView::symmetrize(
                    LanguageData::plain(low),
                    ts.into_iter().map(LanguageData::plain).collect(),
                )?;
                let star = datagen::emit_star(&langs, "low", &star_view)?;
                Ok((
                    complete.len(),
                    star.len(),
                    complete.src_text() + &complete.tgt_text(),
                    star.src_text() + &star.tgt_text(),
                ))
            };
            cases += 1;
            match (run(), run()) {
                (Ok(a), Ok(b)) => {
                    if a.0 != k * (k - 1) * n || a.1 != k * n || a != b {
                        bad.push(format!("k={k} n={n}: {} / {}", a.0, a.1));
                    }
                }
                (Err(e), _) | (_, Err(e)) => bad.push(format!("k={k} n={n}: {e}")),
            }
        }
    }
    outcome(bad.is_empty(), format!("{cases} cases, mismatches {bad:?}"))
}

/// Add-one smoothed sentence BLEU, counted by direct enumeration.
fn oracle_sentence_bleu(h: &[String], r: &[String]) -> f64 {
    let grams = |s: &[String], n: usize| -> Vec<Vec<String>> {
        if s.len() < n {
            return Vec::new();
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let hg = grams(h, n);
        let mut rg = grams(r, n);
        let mut matched = 0.0;
        for g in &hg {
            if let Some(p) = rg.iter().position(|x| x == g) {
                rg.remove(p);
                matched += 1.0;
            }
        }
        let total = hg.len() as f64;
        let p = if n == 1 {
            if total == 0.0 {
                0.0
            } else {
                matched / total
            }
        } else {
            (matched + 1.0) / (total + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let (c, rl) = (h.len() as f64, r.len() as f64);
    let bp = if c > rl { 1.0 } else { (1.0 - rl / c).exp() };
    bp * (log_sum / 4.0).exp()
}

fn combiner_oracle() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(41);
    let mut mismatches = 0;
    for c in 0..500 {
        let k = r.gen_range(1..=10);
        let cands: Vec<Vec<String>> = (0..k)
            .map(|_| {
                let len = r.gen_range(0..8);
                (0..len)
                    .map(|_| format!("t{}", r.gen_range(0..6)))
                    .collect()
            })
            .collect();
        let sim = |a: &[String], b: &[String]| {
            if a.is_empty() && b.is_empty() {
                1.0
            } else {
                (oracle_sentence_bleu(a, b) + oracle_sentence_bleu(b, a)) / 2.0
            }
        };
        let mut scores = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    scores[i] += sim(&cands[i], &cands[j]);
                }
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let want = scores.iter().position(|&s| s >= max - 1e-12).unwrap();
        let cluster = TranslationCluster {
            line_id: LineId::new(c.to_string()),
            candidates: cands
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("l{i}"), t.clone()))
                .collect(),
        };
        let got = combine::select_center(&cluster).unwrap();
        let got_index: usize = got.chosen_language[1..].parse().unwrap();
        let same = got_index == want || (scores[got_index] - scores[want]).abs() < 1e-9;
        if !same || (got.centrality - scores[got_index]).abs() > 1e-9 {
            mismatches += 1;
        }
    }

    let mut majority_fail = 0;
    for c in 0..500 {
        let k = r.gen_range(3..=10);
        let copies = k / 2 + 1;
        let dup: Vec<String> = (0..r.gen_range(1..8))
            .map(|_| format!("t{}", r.gen_range(0..6)))
            .collect();
        let mut cands = vec![dup.clone(); copies];
        while cands.len() < k {
            let o: Vec<String> = (0..r.gen_range(0..8))
                .map(|_| format!("t{}", r.gen_range(0..6)))
                .collect();
            if o != dup {
                cands.push(o);
            }
        }
        cands.shuffle(&mut r);
        let cluster = TranslationCluster {
            line_id: LineId::new(c.to_string()),
            candidates: cands
                .into_iter()
                .enumerate()
                .map(|(i, t)| (format!("l{i}"), t))
                .collect(),
        };
        if combine::select_center(&cluster).unwrap().chosen_tokens != dup {
            majority_fail += 1;
        }
    }
    outcome(
        mismatches == 0 && majority_fail == 0,
        format!("500 random clusters: {mismatches} mismatches; 500 majority clusters: {majority_fail} misses"),
    )
}

fn bleu_oracle() -> Outcome {
    let lines = |v: &[&str]| v.iter().map(|s| toks(s)).collect::<Vec<_>>();
    let geo = |p: [f64; 4]| (p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 4.0).exp();
    // hand-counted clipped n-gram precisions and lengths
    let cases: Vec<(Corpus, Corpus, f64)> = vec![
        (
            lines(&["a b c d"]),
            lines(&["a b c d e"]),
            (1.0f64 - 5.0 / 4.0).exp(),
        ),
        (
            lines(&["a b c d e"]),
            lines(&["a b c d x"]),
            geo([4.0 / 5.0, 3.0 / 4.0, 2.0 / 3.0, 1.0 / 2.0]),
        ),
        (
            lines(&["the cat sat on the mat", "the the the the"]),
            lines(&["the cat sat on the mat", "the cat"]),
            geo([7.0 / 10.0, 5.0 / 8.0, 4.0 / 6.0, 3.0 / 4.0]),
        ),
        (
            lines(&["the cat sat on"]),
            lines(&["the cat sat on the mat"]),
            (1.0f64 - 6.0 / 4.0).exp(),
        ),
        (
            lines(&["b a b a c", "x y z w"]),
            lines(&["a b a b d", "x y z w"]),
            geo([8.0 / 9.0, 5.0 / 7.0, 4.0 / 5.0, 1.0 / 3.0]),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (h, r, want) in &cases {
        match eval::corpus_bleu(h, r) {
            Ok(s) => worst = worst.max((s.value - want).abs()),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let h = lines(&["a b c d e", "f g h", "i j k l"]);
    let selfscore = eval::corpus_bleu(&h, &h).map(|s| s.value).unwrap_or(0.0);
    let sent = eval::sentence_bleu(&toks("the cat sat"), &toks("the cat sat down"));
    let sent_want = (-1.0f64 / 3.0).exp();
    outcome(
        worst <= 1e-4 && selfscore == 1.0 && (sent - sent_want).abs() <= 1e-4,
        format!(
            "5 pairs, max |diff| {worst:.2e}; self {selfscore}; sentence {sent:.6} vs {sent_want:.6}"
        ),
    )
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn end_to_end() -> Outcome {
    let fixture = fixture_dir();
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = tmp.path().join("out");
    let config = tmp.path().join("config.toml");
    let raw = fs::read_to_string(fixture.join("config.toml")).expect("fixture config");
    let raw = raw
        .replace("\"corpus\"", &format!("{:?}", fixture.join("corpus")))
        .replace(
            "\"lexicon.tsv\"",
            &format!("{:?}", fixture.join("lexicon.tsv")),
        )
        .replace("\"out\"", &format!("{out:?}"));
    fs::write(&config, raw).expect("write config");

    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_ipml"))
        .args(["pipeline", "--config"])
        .arg(&config)
        .env("IPML_LOG", "warn")
        .status()
        .expect("run ipml");
    let elapsed = start.elapsed();
    if !status.success() {
        return outcome(false, format!("pipeline exited with {status}"));
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap_or_default();
    let golden = fs::read_to_string(fixture.join("golden_manifest.json")).unwrap_or_default();
    let stages_present = (1..=3).all(|s| out.join(format!("stage{s}")).is_dir());
    outcome(
        manifest == golden && stages_present && elapsed < Duration::from_secs(60),
        format!(
            "{:.2}s, stage dirs {}, manifest {} golden",
            elapsed.as_secs_f64(),
            if stages_present { "present" } else { "missing" },
            if manifest == golden {
                "matches"
            } else {
                "differs from"
            }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("em-monotonicity", em_monotonicity),
        ("self-alignment", self_alignment),
        ("ranking-discrimination", ranking_discrimination),
        ("lexicon-round-trip", lexicon_round_trip),
        ("dataset-counts", dataset_counts),
        ("combiner-oracle", combiner_oracle),
        ("bleu-oracle", bleu_oracle),
        ("end-to-end-fixture", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
