//! Fixtures shared by the benchmarks.

use vforge_core::dataset::{Dataset, Label, LabeledExample, Scenario};
use vforge_core::text::Document;

pub const CORPUS: &str = include_str!("../../../data/corpus/alice29.txt");

/// The first `words` words of the bundled text, with every fourth "the"
/// replaced by "not" so modification always has negations to delete.
pub fn article(words: usize) -> Document {
    let mut out = Vec::with_capacity(words);
    let mut thes = 0;
    for w in CORPUS.split_whitespace().take(words) {
        if w == "the" {
            thes += 1;
            if thes % 4 == 0 {
                out.push("not");
                continue;
            }
        }
        out.push(w);
    }
    Document::new(out.join(" "))
}

/// Deterministic pseudo-random scores and labels.
pub fn scored(n: usize) -> (Vec<f64>, Vec<Label>) {
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut scores = Vec::with_capacity(n);
    let mut golds = Vec::with_capacity(n);
    for i in 0..n {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        scores.push((x % 1000) as f64 / 1000.0);
        golds.push(if i % 2 == 0 { Label::Real } else { Label::Fake });
    }
    (scores, golds)
}

pub fn dataset(n: usize) -> Dataset {
    let examples = (0..n)
        .map(|i| {
            let label = if i % 3 == 0 { Label::Fake } else { Label::Real };
            LabeledExample::new(format!("e{i}"), "text", label, Scenario::FullGeneration)
        })
        .collect();
    Dataset::assemble(examples).expect("unique ids")
}
