//! Statement inversion by moving negations around an article.
//!
//! `m/2` existing "not"/"no" tokens are deleted at random, then `m/2` new
//! ones are inserted at the sampled positions where a language model finds
//! them most plausible. The score of inserting `w` before token `i` is
//! `P(w | prefix) * P(token_i | prefix, w)`. The total number of negations in
//! the article never changes.
//!
//! Every edit is logged as a byte splice so the original text can be rebuilt
//! exactly from the modified one.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AttackError, ScorerError};
use crate::lm::Scorer;
use crate::text::{is_negation, negation_occurrences, Document};

pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Negation {
    Not,
    No,
}

impl Negation {
    /// Scoring order; earlier wins ties.
    pub const ALL: [Negation; 2] = [Negation::Not, Negation::No];

    pub fn as_str(self) -> &'static str {
        match self {
            Negation::Not => "not",
            Negation::No => "no",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        if token.eq_ignore_ascii_case("not") {
            Some(Negation::Not)
        } else if token.eq_ignore_ascii_case("no") {
            Some(Negation::No)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Deletion,
    Insertion,
}

/// One deletion or insertion.
///
/// `token_position` indexes the token sequence the edit's phase started from:
/// the original article for deletions, the post-deletion article for
/// insertions. `offset`, `before` and `after` describe the edit as a splice
/// on the text at the moment it was applied: `before` at `offset` was
/// replaced by `after`. Edits are stored in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub kind: EditKind,
    pub token_position: usize,
    pub word: Negation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub offset: usize,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModificationConfig {
    /// Total edits; half deletions, half insertions.
    pub m: usize,
    /// Number of insertion positions sampled per article.
    pub candidates: usize,
    pub seed: u64,
}

impl ModificationConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        ModificationConfig {
            m,
            candidates: DEFAULT_CANDIDATES,
            seed,
        }
    }

    pub fn with_candidates(mut self, candidates: usize) -> Self {
        self.candidates = candidates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn half(&self) -> usize {
        self.m / 2
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.m < 2 || !self.m.is_multiple_of(2) {
            return Err(AttackError::BadConfig(format!(
                "m must be an even number >= 2, got {}",
                self.m
            )));
        }
        if self.candidates < self.half() {
            return Err(AttackError::BadConfig(format!(
                "candidate count {} is below m/2 = {}",
                self.candidates,
                self.half()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedArticle {
    pub original: Document,
    pub modified: Document,
    pub edits: Vec<EditRecord>,
    /// Insertion positions that were sampled and scored, ascending.
    pub candidate_positions: Vec<usize>,
}

impl ModifiedArticle {
    pub fn deletions(&self) -> impl Iterator<Item = &EditRecord> {
        self.edits.iter().filter(|e| e.kind == EditKind::Deletion)
    }

    pub fn insertions(&self) -> impl Iterator<Item = &EditRecord> {
        self.edits.iter().filter(|e| e.kind == EditKind::Insertion)
    }
}

/// Per-article seed so articles can be processed independently and in any order.
pub fn derive_seed(seed: u64, article_id: &str) -> u64 {
    // FNV-1a over the id, folded into the seed, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in article_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn splice(text: &str, offset: usize, before_len: usize, after: &str) -> String {
    let mut out = String::with_capacity(text.len() + after.len());
    out.push_str(&text[..offset]);
    out.push_str(after);
    out.push_str(&text[offset + before_len..]);
    out
}

fn upper_first(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Lower-cases the first letter unless the word looks like an acronym.
fn lower_first(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if word != "I" && !chars.clone().any(char::is_uppercase) => {
            c.to_lowercase().chain(chars).collect()
        }
        _ => word.to_string(),
    }
}

/// Whether `position` holds the first word of its sentence, possibly after
/// opening punctuation such as a quote.
fn opens_sentence(doc: &Document, position: usize) -> bool {
    let sentence = &doc.sentences()[doc.sentence_of(position)];
    (sentence.tokens.start..position).all(|i| !doc.is_word(i))
}

fn delete_one(doc: &Document, position: usize) -> (Document, EditRecord) {
    let text = doc.text();
    let span = doc.tokens()[position];
    let word = Negation::parse(doc.token_str(position)).expect("deleting a non-negation token");
    let (start, mut end) = if text[span.end..].starts_with(' ') {
        (span.start, span.end + 1)
    } else if text[..span.start].ends_with(' ') {
        (span.start - 1, span.end)
    } else {
        (span.start, span.end)
    };
    let mut after = String::new();
    let follower = position + 1;
    if opens_sentence(doc, position)
        && follower < doc.token_count()
        && doc.sentence_of(follower) == doc.sentence_of(position)
        && doc.is_word(follower)
    {
        let next = doc.tokens()[follower];
        after.push_str(&text[end..next.start]);
        after.push_str(&upper_first(doc.token_str(follower)));
        end = next.end;
    }
    let before = text[start..end].to_string();
    let edit = EditRecord {
        kind: EditKind::Deletion,
        token_position: position,
        word,
        score: None,
        offset: start,
        before,
        after,
    };
    let next = Document::new(splice(text, edit.offset, edit.before.len(), &edit.after));
    (next, edit)
}

fn insert_one(
    doc: &Document,
    position: usize,
    word: Negation,
    score: f64,
) -> (Document, EditRecord) {
    let text = doc.text();
    let span = doc.tokens()[position];
    let (before, after) = if opens_sentence(doc, position) {
        let follower = doc.token_str(position);
        (
            follower.to_string(),
            format!("{} {}", upper_first(word.as_str()), lower_first(follower)),
        )
    } else {
        (String::new(), format!("{} ", word.as_str()))
    };
    let edit = EditRecord {
        kind: EditKind::Insertion,
        token_position: position,
        word,
        score: Some(score),
        offset: span.start,
        before,
        after,
    };
    let next = Document::new(splice(text, edit.offset, edit.before.len(), &edit.after));
    (next, edit)
}

/// Remove `count` negations chosen uniformly without replacement.
pub fn delete_negations<R: Rng + ?Sized>(
    doc: &Document,
    count: usize,
    rng: &mut R,
) -> Result<(Document, Vec<EditRecord>), AttackError> {
    let occurrences = negation_occurrences(doc);
    if count > occurrences.len() {
        return Err(AttackError::InsufficientNegations {
            available: occurrences.len(),
        });
    }
    let mut chosen: Vec<usize> = index::sample(rng, occurrences.len(), count)
        .into_iter()
        .map(|i| occurrences[i])
        .collect();
    chosen.sort_unstable();

    // Right to left keeps earlier token indices and byte offsets valid.
    let mut current = doc.clone();
    let mut edits = Vec::with_capacity(count);
    for &position in chosen.iter().rev() {
        let (next, edit) = delete_one(&current, position);
        current = next;
        edits.push(edit);
    }
    Ok((current, edits))
}

/// Positions where a negation may be inserted: before any word token that is
/// not itself a negation.
pub fn eligible_positions(doc: &Document) -> Vec<usize> {
    (0..doc.token_count())
        .filter(|&i| doc.is_word(i) && !is_negation(doc.token_str(i)))
        .collect()
}

/// Up to `k` distinct eligible positions, uniformly without replacement, ascending.
pub fn sample_candidate_positions<R: Rng + ?Sized>(
    doc: &Document,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, AttackError> {
    let eligible = eligible_positions(doc);
    if eligible.is_empty() {
        return Err(AttackError::NoEligiblePositions);
    }
    let amount = k.min(eligible.len());
    let mut picked: Vec<usize> = index::sample(rng, eligible.len(), amount)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Scored (position, negation) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position: usize,
    pub word: Negation,
    pub score: f64,
}

/// Caches the document's word terms so many positions can be scored cheaply.
pub struct InsertionScorer<'a, S: ?Sized> {
    doc: &'a Document,
    scorer: &'a S,
    terms: Vec<String>,
    // words_before[i]: number of word tokens before token i
    words_before: Vec<usize>,
}

fn check_prob(p: f64) -> Result<f64, ScorerError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ScorerError(format!("probability {p} outside [0, 1]")))
    }
}

impl<'a, S: Scorer + ?Sized> InsertionScorer<'a, S> {
    pub fn new(doc: &'a Document, scorer: &'a S) -> Self {
        let mut terms = Vec::new();
        let mut words_before = Vec::with_capacity(doc.token_count());
        for i in 0..doc.token_count() {
            words_before.push(terms.len());
            if doc.is_word(i) {
                terms.push(doc.term(i));
            }
        }
        InsertionScorer {
            doc,
            scorer,
            terms,
            words_before,
        }
    }

    fn context(&self, position: usize) -> &[String] {
        let end = self.words_before[position];
        let start = match self.scorer.context_window() {
            Some(w) => end.saturating_sub(w),
            None => 0,
        };
        &self.terms[start..end]
    }

    fn check(&self, position: usize) -> Result<(), AttackError> {
        if position < self.doc.token_count()
            && self.doc.is_word(position)
            && !is_negation(self.doc.token_str(position))
        {
            Ok(())
        } else {
            Err(AttackError::IneligiblePosition(position))
        }
    }

    pub fn score(&self, position: usize, word: Negation) -> Result<f64, AttackError> {
        self.check(position)?;
        let context = self.context(position);
        let follower = &self.terms[self.words_before[position]];
        let p_word = check_prob(self.scorer.next_token_prob(context, word.as_str())?)?;
        let mut extended = context.to_vec();
        extended.push(word.as_str().to_string());
        let p_follow = check_prob(self.scorer.next_token_prob(&extended, follower)?)?;
        Ok(p_word * p_follow)
    }

    /// Scores for both negations at `position`, in [`Negation::ALL`] order.
    pub fn score_both(&self, position: usize) -> Result<[Candidate; 2], AttackError> {
        self.check(position)?;
        let context = self.context(position);
        let follower = self.terms[self.words_before[position]].as_str();
        let words = Negation::ALL.map(Negation::as_str);
        let p_words = self.scorer.candidate_probs(context, &words)?;
        if p_words.len() != 2 {
            return Err(
                ScorerError(format!("expected 2 probabilities, got {}", p_words.len())).into(),
            );
        }
        let mut extended = context.to_vec();
        extended.push(String::new());
        let mut out = [Candidate {
            position,
            word: Negation::Not,
            score: 0.0,
        }; 2];
        for (slot, (word, p_word)) in Negation::ALL.into_iter().zip(p_words).enumerate() {
            *extended.last_mut().unwrap() = word.as_str().to_string();
            let p_follow = check_prob(self.scorer.next_token_prob(&extended, follower)?)?;
            out[slot] = Candidate {
                position,
                word,
                score: check_prob(p_word)? * p_follow,
            };
        }
        Ok(out)
    }
}

/// `P(word | tokens before pos) * P(token at pos | tokens before pos, word)`.
pub fn score_insertion<S: Scorer + ?Sized>(
    doc: &Document,
    position: usize,
    word: Negation,
    scorer: &S,
) -> Result<f64, AttackError> {
    InsertionScorer::new(doc, scorer).score(position, word)
}

/// Best `count` insertions among `positions`, one per position.
///
/// Each position keeps its better negation ("not" on ties); positions are then
/// ranked by score, lower position first on ties. The result is sorted by
/// position.
pub fn choose_insertions<S: Scorer + ?Sized>(
    doc: &Document,
    positions: &[usize],
    count: usize,
    scorer: &S,
) -> Result<Vec<Candidate>, AttackError> {
    if count > positions.len() {
        return Err(AttackError::InsufficientCandidates {
            requested: count,
            available: positions.len(),
        });
    }
    let scoring = InsertionScorer::new(doc, scorer);
    let mut best = Vec::with_capacity(positions.len());
    for &p in positions {
        let [not, no] = scoring.score_both(p)?;
        best.push(if no.score > not.score { no } else { not });
    }
    best.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.position.cmp(&b.position))
    });
    best.truncate(count);
    best.sort_by_key(|c| c.position);
    Ok(best)
}

/// Sample candidate positions and insert the `count` best-scoring negations.
pub fn insert_negations<S: Scorer + ?Sized, R: Rng + ?Sized>(
    doc: &Document,
    count: usize,
    cfg: &ModificationConfig,
    scorer: &S,
    rng: &mut R,
) -> Result<(Document, Vec<EditRecord>), AttackError> {
    let positions = sample_candidate_positions(doc, cfg.candidates, rng)?;
    let (doc, edits) = insert_at(doc, &positions, count, scorer)?;
    Ok((doc, edits))
}

fn insert_at<S: Scorer + ?Sized>(
    doc: &Document,
    positions: &[usize],
    count: usize,
    scorer: &S,
) -> Result<(Document, Vec<EditRecord>), AttackError> {
    let chosen = choose_insertions(doc, positions, count, scorer)?;
    let mut current = doc.clone();
    let mut edits = Vec::with_capacity(chosen.len());
    for c in chosen.iter().rev() {
        let (next, edit) = insert_one(&current, c.position, c.word, c.score);
        current = next;
        edits.push(edit);
    }
    Ok((current, edits))
}

/// Delete `m/2` negations, then insert `m/2` at the best sampled positions.
pub fn modify_article<S: Scorer + ?Sized>(
    doc: &Document,
    cfg: &ModificationConfig,
    scorer: &S,
) -> Result<ModifiedArticle, AttackError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.half();
    let (deleted, mut edits) = delete_negations(doc, half, &mut rng)?;
    let positions = sample_candidate_positions(&deleted, cfg.candidates, &mut rng)?;
    let (modified, insertions) = insert_at(&deleted, &positions, half, scorer)?;
    edits.extend(insertions);
    Ok(ModifiedArticle {
        original: doc.clone(),
        modified,
        edits,
        candidate_positions: positions,
    })
}

/// Undo `edits` (in reverse application order) to recover the original text.
pub fn revert_edits(modified: &str, edits: &[EditRecord]) -> Result<String, AttackError> {
    let mut text = modified.to_string();
    for edit in edits.iter().rev() {
        let end = edit.offset + edit.after.len();
        if text.get(edit.offset..end) != Some(edit.after.as_str()) {
            return Err(AttackError::BadEdit(format!(
                "expected {:?} at byte {}",
                edit.after, edit.offset
            )));
        }
        text = splice(&text, edit.offset, edit.after.len(), &edit.before);
    }
    Ok(text)
}
