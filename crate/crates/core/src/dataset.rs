//! Labeled real/fake datasets: assembly, validation, splitting and JSON Lines
//! persistence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::DatasetError;
use crate::negation::{revert_edits, EditRecord};
use crate::text::{negation_occurrences, Document};

pub const DEFAULT_EVAL_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Real, Label::Fake];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    QaExtension,
    Modification,
    VanillaExtension,
    FullGeneration,
}

/// Scenario-specific metadata. Keys this crate does not know about are kept
/// in `extra` and written back unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_actual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_to_original: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_word_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<EditRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Id of the real article a modified one was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_id: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub scenario: Scenario,
    #[serde(default)]
    pub meta: Meta,
}

impl LabeledExample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        label: Label,
        scenario: Scenario,
    ) -> Self {
        LabeledExample {
            id: id.into(),
            text: text.into(),
            label,
            scenario,
            meta: Meta::default(),
        }
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = meta;
        self
    }

    fn missing_meta(&self) -> Option<&'static str> {
        let m = &self.meta;
        match self.scenario {
            Scenario::Modification if m.m.is_none() => Some("m"),
            Scenario::Modification if self.label == Label::Fake && m.edits.is_none() => {
                Some("edits")
            }
            Scenario::Modification if self.label == Label::Fake && m.original_id.is_none() => {
                Some("original_id")
            }
            Scenario::QaExtension if m.question.is_none() => Some("question"),
            Scenario::QaExtension if m.answer.is_none() => Some("answer"),
            Scenario::VanillaExtension if m.g_actual.is_none() => Some("g_actual"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub real: usize,
    pub fake: usize,
}

impl ClassCounts {
    pub fn of<'a>(examples: impl IntoIterator<Item = &'a LabeledExample>) -> Self {
        let mut counts = ClassCounts::default();
        for e in examples {
            match e.label {
                Label::Real => counts.real += 1,
                Label::Fake => counts.fake += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.real + self.fake
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Real => self.real,
            Label::Fake => self.fake,
        }
    }
}

/// Validated collection of labeled examples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
}

impl Dataset {
    /// Checks id uniqueness, required metadata, and that every modified
    /// article reverts to its paired original with the same negation count.
    pub fn assemble(examples: Vec<LabeledExample>) -> Result<Self, DatasetError> {
        let mut by_id: HashMap<&str, &LabeledExample> = HashMap::with_capacity(examples.len());
        for e in &examples {
            if by_id.insert(&e.id, e).is_some() {
                return Err(DatasetError::DuplicateId(e.id.clone()));
            }
        }
        for e in &examples {
            let violation = |reason: String| DatasetError::InvariantViolation {
                id: e.id.clone(),
                reason,
            };
            if let Some(key) = e.missing_meta() {
                return Err(violation(format!("missing meta key {key:?}")));
            }
            if e.scenario != Scenario::Modification || e.label != Label::Fake {
                continue;
            }
            let original_id = e.meta.original_id.as_deref().unwrap_or_default();
            let original = by_id.get(original_id).ok_or_else(|| {
                violation(format!("paired original {original_id:?} not in dataset"))
            })?;
            let edits = e.meta.edits.as_deref().unwrap_or_default();
            let rebuilt = revert_edits(&e.text, edits).map_err(|err| violation(err.to_string()))?;
            if rebuilt != original.text {
                return Err(violation(
                    "edits do not reconstruct the original text".into(),
                ));
            }
            let before = negation_occurrences(&Document::new(original.text.as_str())).len();
            let after = negation_occurrences(&Document::new(e.text.as_str())).len();
            if before != after {
                return Err(violation(format!(
                    "negation count changed from {before} to {after}"
                )));
            }
        }
        Ok(Dataset { examples })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn summary(&self) -> ClassCounts {
        ClassCounts::of(&self.examples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub eval: Vec<LabeledExample>,
    pub seed: u64,
    pub eval_fraction: f64,
}

/// Stratified shuffle split.
///
/// The eval set holds `round(eval_fraction * n)` examples. Per-class quotas
/// are `eval_fraction * n_class` rounded by largest remainder (real first on
/// equal remainders), so each class is within one example of its share. Both
/// parts keep the dataset's original order.
pub fn split(
    dataset: &Dataset,
    eval_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(DatasetError::BadFraction(eval_fraction));
    }
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let counts = dataset.summary();
    let target = (eval_fraction * dataset.len() as f64).round() as usize;
    let mut quotas: Vec<(Label, usize, f64)> = Label::ALL
        .iter()
        .map(|&l| {
            let share = eval_fraction * counts.get(l) as f64;
            (l, share.floor() as usize, share - share.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    let mut remaining = target.saturating_sub(assigned);
    for i in order {
        if remaining == 0 {
            break;
        }
        if quotas[i].1 < counts.get(quotas[i].0) {
            quotas[i].1 += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_eval = vec![false; dataset.len()];
    for (label, quota, _) in quotas {
        let mut idx: Vec<usize> = dataset
            .examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(quota) {
            in_eval[i] = true;
        }
    }
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (e, &is_eval) in dataset.examples.iter().zip(&in_eval) {
        if is_eval {
            eval.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        eval,
        seed,
        eval_fraction,
    })
}

/// One JSON object per line, written to a temporary file and renamed into place.
pub fn write_jsonl<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        for row in rows {
            serde_json::to_writer(&mut out, row).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn parse_jsonl<R: BufRead>(input: R) -> Result<Vec<LabeledExample>, DatasetError> {
    let mut examples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example = serde_json::from_str(&line).map_err(|e| DatasetError::SchemaError {
            line: i + 1,
            message: e.to_string(),
        })?;
        examples.push(example);
    }
    Ok(examples)
}

/// Parse and [`Dataset::assemble`] a JSON Lines file.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let file = fs::File::open(path)?;
    Dataset::assemble(parse_jsonl(BufReader::new(file))?)
}

/// A source article loaded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub text: String,
    pub path: PathBuf,
}

/// Every `.txt` file in `dir`, sorted by file name; the id is the file stem.
pub fn read_articles(dir: impl AsRef<Path>) -> Result<Vec<Article>, DatasetError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"));
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path)?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(Article { id, text, path })
        })
        .collect()
}

/// A question row: article id, question, gold answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRow {
    pub article_id: String,
    pub question: String,
    pub gold_answer: String,
}

/// Tab-separated `id, question, gold_answer` rows. A first line of
/// `id\tquestion\tgold_answer` is treated as a header.
pub fn parse_questions_tsv<R: BufRead>(input: R) -> Result<Vec<QuestionRow>, DatasetError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if i == 0 && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("id")) {
            continue;
        }
        match fields.as_slice() {
            [id, question, gold] if !id.is_empty() && !question.trim().is_empty() => {
                rows.push(QuestionRow {
                    article_id: id.to_string(),
                    question: question.to_string(),
                    gold_answer: gold.to_string(),
                })
            }
            _ => {
                return Err(DatasetError::SchemaError {
                    line: i + 1,
                    message: "expected `id<TAB>question<TAB>gold_answer`".into(),
                })
            }
        }
    }
    Ok(rows)
}

pub fn read_questions_tsv(path: impl AsRef<Path>) -> Result<Vec<QuestionRow>, DatasetError> {
    parse_questions_tsv(BufReader::new(fs::File::open(path)?))
}

/// Ids shared between two example lists.
pub fn overlapping_ids(a: &[LabeledExample], b: &[LabeledExample]) -> Vec<String> {
    let left: HashSet<&str> = a.iter().map(|e| e.id.as_str()).collect();
    b.iter()
        .filter(|e| left.contains(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect()
}
