//! Deterministic synthetic corpora for tests, demos and the bundled fixture.
//!
//! Everything here is driven by explicit seeds through ChaCha8, so the same
//! arguments always produce the same text.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LineId, ParallelText};
use crate::lexicon::LexiconTable;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn line_id(i: usize) -> LineId {
    LineId::new(format!("L{i:04}"))
}

/// `n_lines` sentences over `w0..w{vocab-1}` with no word repeated inside a
/// sentence; lengths drawn uniformly from `min_len..=max_len`.
pub fn unique_word_text(
    language: &str,
    n_lines: usize,
    vocab: usize,
    (min_len, max_len): (usize, usize),
    seed: u64,
) -> ParallelText {
    assert!(min_len >= 1 && min_len <= max_len && max_len <= vocab);
    let mut r = rng(seed, 0);
    let words: Vec<usize> = (0..vocab).collect();
    let mut out = ParallelText::new(language);
    for i in 0..n_lines {
        let len = r.gen_range(min_len..=max_len);
        let toks = words
            .choose_multiple(&mut r, len)
            .map(|w| format!("w{w}"))
            .collect();
        out.insert(line_id(i), toks);
    }
    out
}

/// Renames every token through `f`, keeping ids and order.
pub fn map_tokens(text: &ParallelText, language: &str, f: impl Fn(&str) -> String) -> ParallelText {
    let mut out = ParallelText::new(language);
    for (id, toks) in text.iter() {
        out.insert(id.clone(), toks.iter().map(|t| f(t)).collect());
    }
    out
}

/// Bijective relabelling: every token gets `prefix` prepended.
pub fn relabel(text: &ParallelText, language: &str, prefix: &str) -> ParallelText {
    map_tokens(text, language, |t| format!("{prefix}{t}"))
}

/// Replaces each token independently with probability `q` by one of
/// `noise_vocab` tokens that never occur in clean text.
pub fn add_noise(
    text: &ParallelText,
    language: &str,
    q: f64,
    noise_vocab: usize,
    seed: u64,
) -> ParallelText {
    let mut r = rng(seed, 1);
    let mut out = ParallelText::new(language);
    for (id, toks) in text.iter() {
        let noisy = toks
            .iter()
            .map(|t| {
                if r.gen_bool(q) {
                    format!("noise{}", r.gen_range(0..noise_vocab))
                } else {
                    t.clone()
                }
            })
            .collect();
        out.insert(id.clone(), noisy);
    }
    out
}

/// Permutes the tokens of every sentence.
pub fn shuffle_words(text: &ParallelText, language: &str, seed: u64) -> ParallelText {
    let mut r = rng(seed, 2);
    let mut out = ParallelText::new(language);
    for (id, toks) in text.iter() {
        let mut t = toks.to_vec();
        t.shuffle(&mut r);
        out.insert(id.clone(), t);
    }
    out
}

/// Same ids and sentence lengths as `like`, filled with uniform draws from a
/// vocabulary disjoint from every other generator here.
pub fn random_text(like: &ParallelText, language: &str, vocab: usize, seed: u64) -> ParallelText {
    let mut r = rng(seed, 3);
    let mut out = ParallelText::new(language);
    for (id, toks) in like.iter() {
        let t = (0..toks.len())
            .map(|_| format!("rnd{}", r.gen_range(0..vocab)))
            .collect();
        out.insert(id.clone(), t);
    }
    out
}

const CONTENT_ONSETS: [&str; 6] = ["k", "t", "p", "m", "n", "h"];
const CONTENT_VOWELS: [&str; 2] = ["a", "o"];
const NAME_ONSETS: [&str; 6] = ["L", "R", "S", "D", "B", "G"];
const NAME_LOWER_ONSETS: [&str; 6] = ["l", "r", "s", "d", "b", "g"];
const NAME_VOWELS: [&str; 3] = ["i", "e", "u"];

fn pseudo_word(r: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| {
            format!(
                "{}{}",
                CONTENT_ONSETS.choose(r).unwrap(),
                CONTENT_VOWELS.choose(r).unwrap()
            )
        })
        .collect()
}

fn pseudo_name(r: &mut ChaCha8Rng) -> String {
    let mut s = String::from(*NAME_ONSETS.choose(r).unwrap());
    s.push_str(NAME_VOWELS.choose(r).unwrap());
    for _ in 0..2 {
        s.push_str(NAME_LOWER_ONSETS.choose(r).unwrap());
        s.push_str(NAME_VOWELS.choose(r).unwrap());
    }
    s
}

/// How a fixture language realises the shared meaning of each line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordOrder {
    Same,
    SwapPairs,
    Reverse,
}

#[derive(Debug, Clone)]
pub struct FixtureLanguage {
    pub code: &'static str,
    pub order: WordOrder,
    /// Fraction of concepts that share the low-resource word form.
    pub cognates: f64,
}

/// A multilingual corpus with one low-resource language holding a subset of lines.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub low_resource: String,
    pub texts: Vec<ParallelText>,
    pub lexicon: LexiconTable,
}

pub const FIXTURE_LANGUAGES: [FixtureLanguage; 6] = [
    FixtureLanguage {
        code: "xlo",
        order: WordOrder::Same,
        cognates: 1.0,
    },
    FixtureLanguage {
        code: "xna",
        order: WordOrder::Same,
        cognates: 0.6,
    },
    FixtureLanguage {
        code: "xnb",
        order: WordOrder::Same,
        cognates: 0.3,
    },
    FixtureLanguage {
        code: "xmc",
        order: WordOrder::SwapPairs,
        cognates: 0.3,
    },
    FixtureLanguage {
        code: "xfd",
        order: WordOrder::Reverse,
        cognates: 0.1,
    },
    FixtureLanguage {
        code: "xfe",
        order: WordOrder::Reverse,
        cognates: 0.0,
    },
];

/// Six languages over 300 shared lines with 20 named entities; the first
/// language is the low-resource one and keeps 120 of the lines.
pub fn fixture(seed: u64) -> Fixture {
    const LINES: usize = 300;
    const CONCEPTS: usize = 80;
    const ENTITIES: usize = 20;

    let mut r = rng(seed, 10);
    // low-resource word forms, one per concept
    let mut base_forms: Vec<String> = Vec::new();
    while base_forms.len() < CONCEPTS {
        let syl = r.gen_range(2..=3);
        let w = pseudo_word(&mut r, syl);
        if !base_forms.contains(&w) {
            base_forms.push(w);
        }
    }
    let mut names: Vec<String> = Vec::new();
    while names.len() < ENTITIES {
        let n = pseudo_name(&mut r);
        let chars: Vec<char> = n.to_lowercase().chars().collect();
        let far = names.iter().all(|m| {
            let mc: Vec<char> = m.to_lowercase().chars().collect();
            crate::lexicon::levenshtein(&chars, &mc) >= 3
        });
        if far {
            names.push(n);
        }
    }

    // meaning of each line: concept indices plus entity slots (as usize::MAX - e)
    let mut meanings: Vec<Vec<usize>> = Vec::with_capacity(LINES);
    for _ in 0..LINES {
        let len = r.gen_range(4..=8);
        let concepts: Vec<usize> = (0..CONCEPTS).collect();
        let mut m: Vec<usize> = concepts.choose_multiple(&mut r, len).copied().collect();
        let n_ent = r.gen_range(0..=2);
        for _ in 0..n_ent {
            let e = r.gen_range(0..ENTITIES);
            let pos = r.gen_range(0..=m.len());
            m.insert(pos, usize::MAX - e);
        }
        meanings.push(m);
    }

    let mut lexicon = LexiconTable::new();
    let mut texts = Vec::new();
    for (li, lang) in FIXTURE_LANGUAGES.iter().enumerate() {
        let mut lr = rng(seed, 100 + li as u64);
        let forms: Vec<String> = base_forms
            .iter()
            .enumerate()
            .map(|(c, w)| {
                if lr.gen_bool(lang.cognates) {
                    w.clone()
                } else {
                    let syl = lr.gen_range(2..=3);
                    format!("{}{}", pseudo_word(&mut lr, syl), c % 10)
                }
            })
            .collect();
        // every language spells a name its own way; some lack an entry
        let mut entity_forms: Vec<Option<String>> = Vec::new();
        for (e, name) in names.iter().enumerate() {
            let form = match (li + e) % 4 {
                0 if li > 0 => format!("{name}{}", ["a", "o"][e % 2]),
                _ => name.clone(),
            };
            let listed = li == 0 || (li * 7 + e) % 9 != 0;
            if listed {
                lexicon
                    .insert(
                        &format!("ent{e:02}"),
                        lang.code,
                        std::slice::from_ref(&form),
                    )
                    .expect("non-empty form");
            }
            entity_forms.push(Some(form));
        }

        let mut text = ParallelText::new(lang.code);
        for (i, m) in meanings.iter().enumerate() {
            if li == 0 && i % 5 >= 2 {
                continue;
            }
            let mut toks: Vec<String> = m
                .iter()
                .map(|&slot| {
                    if slot > CONCEPTS {
                        entity_forms[usize::MAX - slot].clone().unwrap()
                    } else {
                        forms[slot].clone()
                    }
                })
                .collect();
            match lang.order {
                WordOrder::Same => {}
                WordOrder::SwapPairs => {
                    for pair in toks.chunks_mut(2) {
                        pair.reverse();
                    }
                }
                WordOrder::Reverse => toks.reverse(),
            }
            text.insert(line_id(i), toks);
        }
        texts.push(text);
    }
    Fixture {
        low_resource: FIXTURE_LANGUAGES[0].code.to_owned(),
        texts,
        lexicon,
    }
}
