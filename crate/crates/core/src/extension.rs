//! Article extension: question-answer prompting and plain auto-completion.

use serde::{Deserialize, Serialize};

use crate::error::{ExtensionError, GeneratorError};
use crate::text::{most_similar_sentence, truncate_words, Document};

/// Line that introduces the question in a QA prompt.
pub const QA_TEMPLATE: &str = "We attempt to answer: ";
/// Closes every QA prompt; the generator continues from here.
pub const ANSWER_CUE: &str = "\nAnswer:";

pub const DEFAULT_PREFIX_WORDS: usize = 500;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_TOP_K: usize = 40;
pub const DEFAULT_MAX_SENTENCES: usize = 32;

/// Request sent to a text generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub prompt: String,
    pub max_sentences: usize,
    pub temperature: f64,
    pub top_k: usize,
}

/// Produces a continuation for a prompt.
pub trait Generator {
    fn generate(&self, request: &GeneratorRequest) -> Result<String, GeneratorError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn generate(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for std::sync::Arc<G> {
    fn generate(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        (**self).generate(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_k: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: DEFAULT_TEMPERATURE,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    pub prefix_words: usize,
    /// Target share of machine-written words, in (0, 1].
    pub g_target: f64,
    pub sampling: Sampling,
    /// Sentences requested per generator call.
    pub max_sentences: usize,
    /// Generator calls allowed before giving up on reaching `g_target`.
    pub max_rounds: usize,
}

impl ExtensionConfig {
    pub fn new(g_target: f64) -> Self {
        ExtensionConfig {
            prefix_words: DEFAULT_PREFIX_WORDS,
            g_target,
            sampling: Sampling::default(),
            max_sentences: DEFAULT_MAX_SENTENCES,
            max_rounds: 8,
        }
    }

    pub fn validate(&self) -> Result<(), ExtensionError> {
        if !(self.g_target > 0.0 && self.g_target <= 1.0) {
            return Err(ExtensionError::BadConfig(format!(
                "g must lie in (0, 1], got {}",
                self.g_target
            )));
        }
        if self.sampling.temperature.is_nan() || self.sampling.temperature <= 0.0 {
            return Err(ExtensionError::BadConfig(
                "temperature must be positive".into(),
            ));
        }
        if self.max_sentences == 0 || self.max_rounds == 0 {
            return Err(ExtensionError::BadConfig(
                "max_sentences and max_rounds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Article text, a newline, the question line, and the answer cue.
pub fn build_qa_prompt(article: &Document, question: &str) -> Result<String, ExtensionError> {
    if question.trim().is_empty() {
        return Err(ExtensionError::EmptyQuestion);
    }
    Ok(format!(
        "{}\n{QA_TEMPLATE}{question}{ANSWER_CUE}",
        article.text()
    ))
}

/// First sentence of the generated continuation, trimmed.
pub fn extract_answer(generated: &str) -> Result<String, ExtensionError> {
    let trimmed = generated.trim();
    if trimmed.is_empty() {
        return Err(ExtensionError::EmptyGeneration);
    }
    let doc = Document::new(trimmed);
    match doc.sentences().first() {
        Some(_) => Ok(doc.sentence_text(0).to_string()),
        None => Ok(trimmed.to_string()),
    }
}

/// Text with sentence `index` cut out along with the whitespace that follows
/// it (or precedes it, for the last sentence).
pub fn remove_sentence(doc: &Document, index: usize) -> Document {
    let sentences = doc.sentences();
    let text = doc.text();
    let span = sentences[index].span;
    let (start, end) = match (sentences.get(index + 1), index.checked_sub(1)) {
        (Some(next), _) => (span.start, next.span.start),
        (None, Some(prev)) => (sentences[prev].span.end, span.end),
        (None, None) => (span.start, span.end),
    };
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..start]);
    out.push_str(&text[end..]);
    Document::new(out)
}

/// Drop the sentence most similar to `question + " " + answer`.
pub fn remove_answer_sentence(
    article: &Document,
    question: &str,
    answer: &str,
) -> Result<(Document, usize), ExtensionError> {
    let n = article.sentences().len();
    if n < 2 {
        return Err(ExtensionError::TooFewSentences(n));
    }
    let query = Document::new(format!("{question} {answer}")).terms();
    let index = most_similar_sentence(article, &query).expect("article has sentences");
    Ok((remove_sentence(article, index), index))
}

/// An article whose answer-bearing sentence was removed, with the prompt and
/// the generated answer.
#[derive(Debug, Clone, PartialEq)]
pub struct QaExtension {
    pub article: Document,
    pub question: String,
    pub answer: String,
    pub prompt: String,
    pub removed_sentence_index: usize,
}

impl QaExtension {
    /// What a detector gets to see: the prompt followed by the answer.
    pub fn example_text(&self) -> String {
        format!(
            "{} {}",
            build_qa_prompt(&self.article, &self.question).expect("question checked"),
            self.answer
        )
    }
}

/// Prompt the generator with the full article and question, keep the first
/// generated sentence as the answer, then drop the article sentence closest to
/// question + answer.
pub fn qa_extend<G: Generator + ?Sized>(
    article: &Document,
    question: &str,
    sampling: Sampling,
    generator: &G,
) -> Result<QaExtension, ExtensionError> {
    let prompt = build_qa_prompt(article, question)?;
    let generated = generator.generate(&GeneratorRequest {
        prompt: prompt.clone(),
        max_sentences: 1,
        temperature: sampling.temperature,
        top_k: sampling.top_k,
    })?;
    let answer = match extract_answer(&generated) {
        Err(ExtensionError::EmptyGeneration) => return Err(ExtensionError::GeneratorEmpty),
        other => other?,
    };
    let (article, removed_sentence_index) = remove_answer_sentence(article, question, &answer)?;
    Ok(QaExtension {
        article,
        question: question.to_string(),
        answer,
        prompt,
        removed_sentence_index,
    })
}

/// `machine / (human + machine)`.
pub fn machine_fraction(human_tokens: usize, machine_tokens: usize) -> Result<f64, ExtensionError> {
    let total = human_tokens + machine_tokens;
    if total == 0 {
        return Err(ExtensionError::ZeroLength);
    }
    Ok(machine_tokens as f64 / total as f64)
}

/// `machine / human`: 1.0 means the article doubled in size.
pub fn ratio_to_original(human_tokens: usize, machine_tokens: usize) -> Option<f64> {
    (human_tokens > 0).then(|| machine_tokens as f64 / human_tokens as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaExtension {
    pub document: Document,
    pub human_words: usize,
    pub machine_words: usize,
    pub g_actual: f64,
    pub ratio_to_original: Option<f64>,
}

/// Continue the first `prefix_words` words of the article with generated
/// sentences until the machine share first reaches `g_target` at a sentence
/// boundary.
pub fn vanilla_extend<G: Generator + ?Sized>(
    article: &Document,
    cfg: &ExtensionConfig,
    generator: &G,
) -> Result<VanillaExtension, ExtensionError> {
    cfg.validate()?;
    let found = article.word_count();
    if found < cfg.prefix_words {
        return Err(ExtensionError::ArticleTooShort {
            found,
            needed: cfg.prefix_words,
        });
    }
    let prefix = truncate_words(article, cfg.prefix_words);
    let human = prefix.word_count();
    let mut text = prefix.text().to_string();
    let mut machine = 0usize;
    let mut produced_any = false;

    for _ in 0..cfg.max_rounds {
        let generated = generator.generate(&GeneratorRequest {
            prompt: text.clone(),
            max_sentences: cfg.max_sentences,
            temperature: cfg.sampling.temperature,
            top_k: cfg.sampling.top_k,
        })?;
        let continuation = Document::new(generated.trim());
        if continuation.sentences().is_empty() {
            break;
        }
        produced_any = true;
        for s in 0..continuation.sentences().len() {
            let sentence = continuation.sentence_text(s);
            let words = Document::new(sentence).word_count();
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(sentence);
            machine += words;
            let g = machine_fraction(human, machine)?;
            if g >= cfg.g_target {
                return Ok(VanillaExtension {
                    document: Document::new(text),
                    human_words: human,
                    machine_words: machine,
                    g_actual: g,
                    ratio_to_original: ratio_to_original(human, machine),
                });
            }
        }
    }
    if !produced_any {
        return Err(ExtensionError::GeneratorEmpty);
    }
    Err(ExtensionError::GeneratorStalled {
        reached: machine_fraction(human, machine)?,
    })
}

/// Cut the real article down to the fake one's word count.
pub fn length_match_truncate(real: &Document, fake: &Document) -> Result<Document, ExtensionError> {
    let (r, f) = (real.word_count(), fake.word_count());
    if r < f {
        return Err(ExtensionError::RealTooShort { real: r, fake: f });
    }
    Ok(truncate_words(real, f))
}
