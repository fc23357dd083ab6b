//! Next-token probability sources.
//!
//! [`Scorer`] is the seam the negation attack scores insertions through. The
//! crate ships an interpolated word n-gram model; remote neural scorers plug
//! in through the same trait.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{LmError, ScorerError};
use crate::text::Document;

pub const MODEL_MAGIC: &str = "VFORGE-NGRAM-1";
const MAGIC_PREFIX: &str = "VFORGE-NGRAM-";

/// Symbol out-of-vocabulary terms map to.
pub const UNKNOWN: &str = "<unk>";

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_LAMBDAS: [f64; 3] = [0.1, 0.3, 0.6];

/// Conditional next-token probabilities over lower-cased word terms.
pub trait Scorer {
    /// `P(candidate | context)`.
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError>;

    /// Probabilities for several candidates sharing one context, in order.
    fn candidate_probs(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, ScorerError> {
        candidates
            .iter()
            .map(|c| self.next_token_prob(context, c))
            .collect()
    }

    /// How many trailing context terms influence the result, if bounded.
    /// Callers may trim longer contexts to this length.
    fn context_window(&self) -> Option<usize> {
        None
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError> {
        (**self).next_token_prob(context, candidate)
    }
    fn candidate_probs(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, ScorerError> {
        (**self).candidate_probs(context, candidates)
    }
    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError> {
        (**self).next_token_prob(context, candidate)
    }
    fn candidate_probs(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, ScorerError> {
        (**self).candidate_probs(context, candidates)
    }
    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError> {
        (**self).next_token_prob(context, candidate)
    }
    fn candidate_probs(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, ScorerError> {
        (**self).candidate_probs(context, candidates)
    }
    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Continuations {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Linearly interpolated word n-gram model.
///
/// `P(t | c) = sum_k lambda_k * P_k(t | last k-1 terms of c)`, where `P_1` is
/// the add-one smoothed unigram distribution over the vocabulary plus
/// [`UNKNOWN`], and `P_k` for `k > 1` is the maximum-likelihood estimate for
/// the history, or `P_(k-1)` when the history was never observed. Every level
/// is a normalized distribution, so the mixture is too.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    lambdas: Vec<f64>,
    // id 0 is UNKNOWN; terms[id - 1] for the rest.
    terms: Vec<String>,
    ids: HashMap<String, u32>,
    unigrams: Vec<u64>,
    total: u64,
    // histories[k - 1] maps length-k histories to their continuations.
    histories: Vec<HashMap<Vec<u32>, Continuations>>,
}

fn check_lambdas(order: usize, lambdas: &[f64]) -> Result<(), LmError> {
    if order == 0 {
        return Err(LmError::BadWeights("order must be at least 1".into()));
    }
    if lambdas.len() != order {
        return Err(LmError::BadWeights(format!(
            "expected {order} weights, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(LmError::BadWeights(format!(
            "{lambdas:?} has a negative or non-finite weight"
        )));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(LmError::BadWeights(format!("{lambdas:?} sums to {sum}")));
    }
    Ok(())
}

/// Train on the word terms of every document.
pub fn train_ngram(
    corpus: &[Document],
    order: usize,
    lambdas: &[f64],
) -> Result<NgramModel, LmError> {
    let sequences: Vec<Vec<String>> = corpus.iter().map(Document::terms).collect();
    NgramModel::train(&sequences, order, lambdas)
}

impl NgramModel {
    pub fn train<S: AsRef<str>>(
        sequences: &[Vec<S>],
        order: usize,
        lambdas: &[f64],
    ) -> Result<Self, LmError> {
        check_lambdas(order, lambdas)?;
        let vocab: BTreeSet<String> = sequences
            .iter()
            .flatten()
            .map(|t| t.as_ref().to_lowercase())
            .collect();
        if vocab.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let mut model = NgramModel::empty(order, lambdas.to_vec(), vocab.into_iter().collect());
        for seq in sequences {
            let ids: Vec<u32> = seq.iter().map(|t| model.id(t.as_ref())).collect();
            for (j, &id) in ids.iter().enumerate() {
                model.unigrams[id as usize] += 1;
                model.total += 1;
                for k in 1..order.min(j + 1) {
                    let entry = model.histories[k - 1]
                        .entry(ids[j - k..j].to_vec())
                        .or_default();
                    entry.total += 1;
                    *entry.next.entry(id).or_default() += 1;
                }
            }
        }
        Ok(model)
    }

    fn empty(order: usize, lambdas: Vec<f64>, terms: Vec<String>) -> Self {
        let ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 1))
            .collect();
        NgramModel {
            order,
            lambdas,
            unigrams: vec![0; terms.len() + 1],
            terms,
            ids,
            total: 0,
            histories: vec![HashMap::new(); order - 1],
        }
    }

    fn id(&self, term: &str) -> u32 {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        self.ids.get(&term.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Training vocabulary, sorted, without [`UNKNOWN`].
    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.id(term) != 0
    }

    /// Number of training tokens.
    pub fn token_total(&self) -> u64 {
        self.total
    }

    pub fn prob(&self, context: &[String], candidate: &str) -> f64 {
        let keep = context.len().min(self.order - 1);
        let history: Vec<u32> = context[context.len() - keep..]
            .iter()
            .map(|t| self.id(t))
            .collect();
        self.prob_ids(&history, self.id(candidate))
    }

    fn prob_ids(&self, history: &[u32], target: u32) -> f64 {
        let vocab = self.terms.len() as f64;
        let unigram =
            (self.unigrams[target as usize] as f64 + 1.0) / (self.total as f64 + vocab + 1.0);
        let mut lower = unigram;
        let mut p = self.lambdas[0] * unigram;
        for k in 1..self.order {
            let level = if history.len() >= k {
                match self.histories[k - 1].get(&history[history.len() - k..]) {
                    Some(c) => c.next.get(&target).copied().unwrap_or(0) as f64 / c.total as f64,
                    None => lower,
                }
            } else {
                lower
            };
            p += self.lambdas[k] * level;
            lower = level;
        }
        p
    }

    /// Write the versioned text dump.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MODEL_MAGIC}")?;
        writeln!(out, "order {}", self.order)?;
        let lambdas: Vec<String> = self.lambdas.iter().map(f64::to_string).collect();
        writeln!(out, "lambdas {}", lambdas.join(" "))?;
        writeln!(out, "vocab {}", self.terms.len())?;
        for t in &self.terms {
            writeln!(out, "{t}")?;
        }
        for (id, &c) in self.unigrams.iter().enumerate() {
            if c > 0 {
                writeln!(out, "u {id} {c}")?;
            }
        }
        for level in &self.histories {
            let mut rows: Vec<(&Vec<u32>, u32, u64)> = level
                .iter()
                .flat_map(|(h, c)| c.next.iter().map(move |(&t, &n)| (h, t, n)))
                .collect();
            rows.sort_unstable();
            for (h, t, n) in rows {
                let h: Vec<String> = h.iter().map(u32::to_string).collect();
                writeln!(out, "h {} {t} {n}", h.join(" "))?;
            }
        }
        out.flush()
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, LmError> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), LmError> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?)),
                None => Err(LmError::Malformed {
                    line: 0,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let (_, header) = next("header")?;
        if header != MODEL_MAGIC {
            return Err(if header.starts_with(MAGIC_PREFIX) {
                LmError::UnsupportedVersion(header)
            } else {
                LmError::Malformed {
                    line: 1,
                    message: "missing model header".into(),
                }
            });
        }
        let bad = |line: usize, message: &str| LmError::Malformed {
            line,
            message: message.to_string(),
        };
        let (n, l) = next("order")?;
        let order: usize = l
            .strip_prefix("order ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(n, "expected `order <n>`"))?;
        let (n, l) = next("lambdas")?;
        let lambdas: Vec<f64> = l
            .strip_prefix("lambdas ")
            .ok_or_else(|| bad(n, "expected `lambdas ...`"))?
            .split(' ')
            .map(|v| v.parse().map_err(|_| bad(n, "bad lambda")))
            .collect::<Result<_, _>>()?;
        check_lambdas(order, &lambdas)?;
        let (n, l) = next("vocab")?;
        let size: usize = l
            .strip_prefix("vocab ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(n, "expected `vocab <n>`"))?;
        let mut terms = Vec::with_capacity(size);
        for _ in 0..size {
            terms.push(next("vocabulary term")?.1);
        }
        let mut model = NgramModel::empty(order, lambdas, terms);
        let limit = model.unigrams.len() as u64;
        for (n, l) in lines {
            let l = l?;
            let nums: Vec<u64> = l
                .get(2..)
                .unwrap_or_default()
                .split(' ')
                .map(|v| v.parse().map_err(|_| bad(n, "bad number")))
                .collect::<Result<_, _>>()?;
            if nums.iter().rev().skip(1).any(|&id| id >= limit) {
                return Err(bad(n, "term id out of range"));
            }
            match (l.get(..2), nums.as_slice()) {
                (Some("u "), &[id, count]) => {
                    model.unigrams[id as usize] = count;
                    model.total += count;
                }
                (Some("h "), [history @ .., target, count])
                    if !history.is_empty() && history.len() < order =>
                {
                    let entry = model.histories[history.len() - 1]
                        .entry(history.iter().map(|&h| h as u32).collect())
                        .or_default();
                    entry.total += count;
                    entry.next.insert(*target as u32, *count);
                }
                _ => return Err(bad(n, "unrecognized record")),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

impl Scorer for NgramModel {
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError> {
        Ok(self.prob(context, candidate))
    }

    fn context_window(&self) -> Option<usize> {
        Some(self.order - 1)
    }
}

/// Same probability for every term; handy as a reference scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl Scorer for UniformScorer {
    fn next_token_prob(&self, _context: &[String], _candidate: &str) -> Result<f64, ScorerError> {
        Ok(1.0 / self.vocab_size as f64)
    }

    fn context_window(&self) -> Option<usize> {
        Some(0)
    }
}
