#![allow(dead_code)]

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vforge_core::text::{is_negation, tokenize};

#[rustfmt::skip]
const FILLER: &[&str] = &[
    "the", "council", "did", "approve", "plan", "residents", "were", "pleased", "with", "delay",
    "mayor", "said", "it", "was", "clear", "that", "city", "would", "fund", "new", "roads", "and",
    "schools", "officials", "have", "been", "told", "budget", "will", "be", "ready", "by", "march",
    "police", "reported", "a", "rise", "in", "thefts", "last", "year", "but", "numbers", "are",
    "still", "low", "water", "prices", "could", "go", "up",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Word list for fuzzed articles: news-ish filler plus alphabetic terms
/// from `extra`, never a negation.
pub fn vocabulary(extra: &[String]) -> Vec<String> {
    let mut words: Vec<String> = FILLER.iter().map(|w| w.to_string()).collect();
    words.extend(
        extra
            .iter()
            .filter(|w| w.len() > 1 && w.chars().all(|c| c.is_ascii_lowercase()) && !is_negation(w))
            .cloned(),
    );
    words
}

/// Random article of `words` words (counting negations) with at least
/// `min_negations` "not"/"no" tokens.
pub fn article(
    rng: &mut ChaCha8Rng,
    vocab: &[String],
    words: usize,
    min_negations: usize,
) -> String {
    let mut tokens: Vec<String> = (0..words)
        .map(|_| {
            if rng.random_bool(0.05) {
                if rng.random_bool(0.7) { "not" } else { "no" }.to_string()
            } else {
                vocab[rng.random_range(0..vocab.len())].clone()
            }
        })
        .collect();
    let mut have = tokens.iter().filter(|t| is_negation(t)).count();
    while have < min_negations.min(words) {
        let i = rng.random_range(0..words);
        if !is_negation(&tokens[i]) {
            tokens[i] = "not".into();
            have += 1;
        }
    }
    let mut out = String::new();
    let mut since_stop = 0;
    for (i, t) in tokens.iter().enumerate() {
        let starts = i == 0 || since_stop == 0;
        if i > 0 {
            out.push(' ');
        }
        if starts {
            let mut c = t.chars();
            let first = c.next().expect("non-empty word").to_ascii_uppercase();
            out.push(first);
            out.push_str(c.as_str());
        } else {
            out.push_str(t);
        }
        since_stop += 1;
        let last = i + 1 == words;
        if last || (since_stop >= 4 && rng.random_bool(0.12)) {
            out.push(if rng.random_bool(0.9) { '.' } else { '?' });
            since_stop = 0;
        } else if since_stop >= 3 && rng.random_bool(0.05) {
            out.push(',');
        }
    }
    debug_assert_eq!(tokenize(&out).word_count(), words);
    out
}

pub fn write_articles(dir: &Path, articles: &[String]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, a) in articles.iter().enumerate() {
        std::fs::write(dir.join(format!("a{i:04}.txt")), a).unwrap();
    }
}
