//! Tokenization, sentence segmentation and TF-IDF similarity.
//!
//! Every pipeline in the crate works on a [`Document`]: the original text plus
//! byte spans for its tokens and sentences. Tokens are maximal runs of
//! letters, digits and apostrophes; every other non-whitespace character is a
//! token on its own. Whitespace is never part of a token, so the text between
//! two consecutive token spans is always pure whitespace.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::TextError;

/// Half-open byte range into a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// A sentence: its byte span and the range of token indices it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub span: Span,
    pub tokens: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    text: String,
    tokens: Vec<Span>,
    sentences: Vec<Sentence>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn is_terminator(s: &str) -> bool {
    matches!(s, "." | "!" | "?")
}

/// Closing quotes and brackets that stay with the sentence they close.
fn is_closer(s: &str) -> bool {
    matches!(s, "\"" | ")" | "]" | "\u{201D}" | "\u{2019}" | "'")
}

impl Document {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = scan_tokens(&text);
        let sentences = segment(&text, &tokens);
        Document {
            text,
            tokens,
            sentences,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Span] {
        &self.tokens
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_str(&self, index: usize) -> &str {
        let span = self.tokens[index];
        &self.text[span.start..span.end]
    }

    /// A word token contains at least one letter or digit.
    pub fn is_word(&self, index: usize) -> bool {
        self.token_str(index).chars().any(char::is_alphanumeric)
    }

    pub fn word_count(&self) -> usize {
        (0..self.tokens.len()).filter(|&i| self.is_word(i)).count()
    }

    /// Lower-cased text of the token at `index`.
    pub fn term(&self, index: usize) -> String {
        self.token_str(index).to_lowercase()
    }

    /// Lower-cased word tokens, in order. Punctuation is skipped.
    pub fn terms(&self) -> Vec<String> {
        self.terms_in(0..self.tokens.len())
    }

    pub fn sentence_terms(&self, sentence: usize) -> Vec<String> {
        self.terms_in(self.sentences[sentence].tokens.clone())
    }

    fn terms_in(&self, range: Range<usize>) -> Vec<String> {
        range
            .filter(|&i| self.is_word(i))
            .map(|i| self.term(i))
            .collect()
    }

    pub fn sentence_text(&self, sentence: usize) -> &str {
        let span = self.sentences[sentence].span;
        &self.text[span.start..span.end]
    }

    /// Index of the sentence owning token `index`.
    pub fn sentence_of(&self, index: usize) -> usize {
        self.sentences.partition_point(|s| s.tokens.end <= index)
    }

    /// Whether token `index` opens its sentence.
    pub fn starts_sentence(&self, index: usize) -> bool {
        self.sentences
            .get(self.sentence_of(index))
            .is_some_and(|s| s.tokens.start == index)
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

impl From<&str> for Document {
    fn from(text: &str) -> Self {
        Document::new(text)
    }
}

impl From<String> for Document {
    fn from(text: String) -> Self {
        Document::new(text)
    }
}

pub fn tokenize(text: &str) -> Document {
    Document::new(text)
}

fn scan_tokens(text: &str) -> Vec<Span> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(Span::new(start, i));
        }
        if !c.is_whitespace() {
            tokens.push(Span::new(i, i + c.len_utf8()));
        }
    }
    if let Some(start) = run_start {
        tokens.push(Span::new(start, text.len()));
    }
    tokens
}

/// Upper-case letter, possibly behind an opening quote or bracket.
fn opens_sentence(text: &str, tokens: &[Span], i: usize) -> bool {
    let starts_upper = |i: usize| {
        text[tokens[i].start..]
            .chars()
            .next()
            .is_some_and(char::is_uppercase)
    };
    if starts_upper(i) {
        return true;
    }
    let opener = &text[tokens[i].start..tokens[i].end];
    matches!(opener, "\"" | "(" | "[" | "\u{201C}")
        && i + 1 < tokens.len()
        && tokens[i + 1].start == tokens[i].end
        && starts_upper(i + 1)
}

fn segment(text: &str, tokens: &[Span]) -> Vec<Sentence> {
    let tok = |i: usize| &text[tokens[i].start..tokens[i].end];
    let adjacent = |i: usize| i > 0 && tokens[i - 1].end == tokens[i].start;

    let mut sentences = Vec::new();
    let mut first = 0;
    let mut i = 0;
    while i < tokens.len() {
        if !is_terminator(tok(i)) {
            i += 1;
            continue;
        }
        // "U.S." style abbreviations: a lone letter glued to the dot.
        let abbreviation = tok(i) == "." && adjacent(i) && {
            let mut chars = tok(i - 1).chars();
            matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
        };
        let mut last = i;
        while last + 1 < tokens.len()
            && adjacent(last + 1)
            && (is_terminator(tok(last + 1)) || is_closer(tok(last + 1)))
        {
            last += 1;
        }
        let boundary = !abbreviation
            && (last + 1 == tokens.len()
                || (!adjacent(last + 1) && opens_sentence(text, tokens, last + 1)));
        if boundary {
            sentences.push(Sentence {
                span: Span::new(tokens[first].start, tokens[last].end),
                tokens: first..last + 1,
            });
            first = last + 1;
        }
        i = last + 1;
    }
    if first < tokens.len() {
        sentences.push(Sentence {
            span: Span::new(tokens[first].start, tokens[tokens.len() - 1].end),
            tokens: first..tokens.len(),
        });
    }
    sentences
}

pub fn is_negation(token: &str) -> bool {
    token.eq_ignore_ascii_case("not") || token.eq_ignore_ascii_case("no")
}

/// Token indices whose lower-cased text is exactly "not" or "no".
pub fn negation_occurrences(doc: &Document) -> Vec<usize> {
    (0..doc.token_count())
        .filter(|&i| is_negation(doc.token_str(i)))
        .collect()
}

/// Inverse document frequencies computed over the sentences of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    weights: BTreeMap<String, f64>,
    sentence_count: usize,
}

impl IdfTable {
    pub fn from_weights(weights: BTreeMap<String, f64>, sentence_count: usize) -> Self {
        IdfTable {
            weights,
            sentence_count,
        }
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    /// Weight for `term`; unseen terms weigh as if they occurred in one sentence.
    pub fn weight(&self, term: &str) -> f64 {
        self.get(term).unwrap_or_else(|| self.fallback())
    }

    pub fn fallback(&self) -> f64 {
        (self.sentence_count.max(1) as f64).ln()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_count
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, &w)| (t.as_str(), w))
    }
}

pub fn idf_from_sentences(doc: &Document) -> Result<IdfTable, TextError> {
    let n = doc.sentences().len();
    if n == 0 {
        return Err(TextError::EmptyDocument);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for s in 0..n {
        let mut terms = doc.sentence_terms(s);
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    let weights = df
        .into_iter()
        .map(|(t, d)| (t, (n as f64 / d as f64).ln()))
        .collect();
    Ok(IdfTable::from_weights(weights, n))
}

/// Sparse term weights. Terms that are absent weigh zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfidfVector {
    weights: BTreeMap<String, f64>,
}

impl TfidfVector {
    pub fn get(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, &w)| (t.as_str(), w))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for TfidfVector {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        TfidfVector {
            weights: iter.into_iter().map(|(t, w)| (t.into(), w)).collect(),
        }
    }
}

/// `weight(t) = count(t) * idf(t)`.
pub fn tfidf_vector<S: AsRef<str>>(terms: &[S], idf: &IdfTable) -> TfidfVector {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in terms {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 * idf.weight(t)))
        .collect()
}

pub fn cosine_similarity(a: &TfidfVector, b: &TfidfVector) -> f64 {
    let sq = |v: &TfidfVector| v.iter().map(|(_, w)| w * w).sum::<f64>();
    let (sa, sb) = (sq(a), sq(b));
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().map(|(t, w)| w * large.get(t)).sum();
    (dot / (sa * sb).sqrt()).clamp(0.0, 1.0)
}

/// Sentence whose TF-IDF vector is closest (cosine) to the query terms.
/// Ties resolve to the lowest sentence index.
pub fn most_similar_sentence<S: AsRef<str>>(
    doc: &Document,
    query_terms: &[S],
) -> Result<usize, TextError> {
    let idf = idf_from_sentences(doc)?;
    let query = tfidf_vector(query_terms, &idf);
    let mut best = (0, f64::NEG_INFINITY);
    for s in 0..doc.sentences().len() {
        let score = cosine_similarity(&tfidf_vector(&doc.sentence_terms(s), &idf), &query);
        if score > best.1 {
            best = (s, score);
        }
    }
    Ok(best.0)
}

/// Prefix of `doc` holding its first `n` word tokens, plus any punctuation
/// glued directly to the last one.
pub fn truncate_words(doc: &Document, n: usize) -> Document {
    if n == 0 {
        return Document::new("");
    }
    let Some(last_word) = (0..doc.token_count())
        .filter(|&i| doc.is_word(i))
        .nth(n - 1)
    else {
        return doc.clone();
    };
    let tokens = doc.tokens();
    let mut end = tokens[last_word].end;
    for (i, span) in tokens.iter().enumerate().skip(last_word + 1) {
        if span.start != end || doc.is_word(i) {
            break;
        }
        end = span.end;
    }
    Document::new(&doc.text()[..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(doc: &Document) -> Vec<&str> {
        (0..doc.token_count()).map(|i| doc.token_str(i)).collect()
    }

    #[test]
    fn empty_text() {
        let doc = tokenize("");
        assert_eq!(doc.token_count(), 0);
        assert!(doc.sentences().is_empty());
    }

    #[test]
    fn short_sentences_split() {
        let doc = tokenize("No. Not now.");
        assert_eq!(toks(&doc), ["No", ".", "Not", "now", "."]);
        assert_eq!(doc.sentences().len(), 2);
        assert_eq!(doc.sentence_text(0), "No.");
        assert_eq!(doc.sentence_text(1), "Not now.");
    }

    #[test]
    fn abbreviation_does_not_split() {
        let doc = tokenize("U.S. Capitol");
        assert_eq!(toks(&doc), ["U", ".", "S", ".", "Capitol"]);
        assert_eq!(doc.sentences().len(), 1);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        let doc = tokenize("It was 5 p.m. and late. then more");
        assert_eq!(doc.sentences().len(), 1);
    }

    #[test]
    fn closing_quote_stays_with_sentence() {
        let doc = tokenize("He said \"no.\" Then he left!");
        assert_eq!(doc.sentences().len(), 2);
        assert_eq!(doc.sentence_text(0), "He said \"no.\"");
    }

    #[test]
    fn opening_quote_starts_sentence() {
        let doc = tokenize("He left. \"Where now?\" she asked.");
        assert_eq!(doc.sentences().len(), 2);
        assert_eq!(doc.sentence_text(1), "\"Where now?\" she asked.");
    }

    #[test]
    fn apostrophes_join_words() {
        let doc = tokenize("don't stop, O'Neil");
        assert_eq!(toks(&doc), ["don't", "stop", ",", "O'Neil"]);
    }

    #[test]
    fn negations() {
        assert_eq!(negation_occurrences(&tokenize("Not a chance")), [0]);
        assert!(negation_occurrences(&tokenize("nothing here")).is_empty());
        let doc = tokenize("No, not now, no");
        assert_eq!(toks(&doc), ["No", ",", "not", "now", ",", "no"]);
        assert_eq!(negation_occurrences(&doc), [0, 2, 5]);
    }

    #[test]
    fn tfidf_counts_times_idf() {
        let idf =
            IdfTable::from_weights([("a".to_string(), 1.0), ("b".to_string(), 2.0)].into(), 2);
        let v = tfidf_vector(&["a", "a", "b"], &idf);
        assert_eq!(v.get("a"), 2.0);
        assert_eq!(v.get("b"), 2.0);
        assert!(tfidf_vector::<&str>(&[], &idf).is_empty());

        let zero = IdfTable::from_weights([("a".to_string(), 0.0)].into(), 1);
        let v = tfidf_vector(&["a"], &zero);
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("a"), 0.0);
    }

    #[test]
    fn unknown_terms_use_ln_n() {
        let doc = tokenize("Alpha beta. Gamma delta. Epsilon.");
        let idf = idf_from_sentences(&doc).unwrap();
        assert_eq!(idf.weight("zeta"), 3f64.ln());
    }

    #[test]
    fn idf_values() {
        let one = idf_from_sentences(&tokenize("a b c")).unwrap();
        assert!(one.iter().all(|(_, w)| w == 0.0));

        let two = idf_from_sentences(&tokenize("Red fish here. Red dog.")).unwrap();
        assert_eq!(two.get("red"), Some(0.0));
        assert!((two.get("fish").unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(two.get("cat"), None);

        assert_eq!(
            idf_from_sentences(&tokenize("")),
            Err(TextError::EmptyDocument)
        );
    }

    #[test]
    fn cosine_cases() {
        let a: TfidfVector = [("a", 1.0), ("b", 1.0)].into_iter().collect();
        let b: TfidfVector = [("a", 1.0)].into_iter().collect();
        let c: TfidfVector = [("c", 3.0)].into_iter().collect();
        assert!((cosine_similarity(&a, &b) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine_similarity(&a, &a), 1.0);
        assert_eq!(cosine_similarity(&a, &c), 0.0);
        assert_eq!(cosine_similarity(&a, &TfidfVector::default()), 0.0);
    }

    #[test]
    fn most_similar_picks_verbatim_sentence() {
        let doc = tokenize("Cats purr loudly. Dogs bark often. Birds sing sweetly.");
        let q = tokenize("Birds sing sweetly.").terms();
        assert_eq!(most_similar_sentence(&doc, &q).unwrap(), 2);
        let disjoint = ["zebra", "quartz"];
        assert_eq!(most_similar_sentence(&doc, &disjoint).unwrap(), 0);
        assert_eq!(
            most_similar_sentence(&tokenize(""), &disjoint),
            Err(TextError::EmptyDocument)
        );
    }

    #[test]
    fn truncation() {
        let doc = tokenize("One two three. Four.");
        assert_eq!(truncate_words(&doc, 0).text(), "");
        assert_eq!(truncate_words(&doc, 3).text(), "One two three.");
        assert_eq!(truncate_words(&doc, 4), doc);
        assert_eq!(truncate_words(&doc, 40), doc);
        let quoted = tokenize("One two. \"Three four");
        assert_eq!(truncate_words(&quoted, 2).text(), "One two.");
    }

    #[test]
    fn sentence_lookup() {
        let doc = tokenize("No. Not now.");
        assert_eq!(doc.sentence_of(0), 0);
        assert_eq!(doc.sentence_of(1), 0);
        assert_eq!(doc.sentence_of(2), 1);
        assert!(doc.starts_sentence(2));
        assert!(!doc.starts_sentence(3));
    }
}
