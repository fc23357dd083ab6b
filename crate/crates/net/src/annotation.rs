//! Human labeling: task queue, durable verdict journal, agreement and export.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vforge_core::dataset::{Label, LabeledExample, Meta, Scenario};
use vforge_core::eval::kappa_report;
use vforge_core::extension::build_qa_prompt;
use vforge_core::text::Document;

pub const DEFAULT_LEASE: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("annotator {annotator:?} already labeled task {task:?}")]
    DuplicateSubmission { task: String, annotator: String },
    #[error("verdict {verdict} is not valid for a {kind} task")]
    BadVerdict { verdict: Verdict, kind: TaskKind },
    #[error("no task has two usable verdicts")]
    NoOverlap,
    #[error("invalid task {task:?}: {reason}")]
    BadTask { task: String, reason: String },
    #[error("duplicate task id {0:?}")]
    DuplicateTask(String),
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Veracity,
    Provenance,
    ModificationCheck,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [
        TaskKind::Veracity,
        TaskKind::Provenance,
        TaskKind::ModificationCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Veracity => "veracity",
            TaskKind::Provenance => "provenance",
            TaskKind::ModificationCheck => "modification_check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TaskKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn verdicts(self) -> &'static [Verdict] {
        match self {
            TaskKind::Veracity => &[Verdict::True, Verdict::False, Verdict::Nonsensical],
            TaskKind::Provenance => &[Verdict::Real, Verdict::Fake],
            TaskKind::ModificationCheck => &[Verdict::Real, Verdict::Modified],
        }
    }

    fn default_scenario(self) -> Scenario {
        match self {
            TaskKind::Veracity => Scenario::QaExtension,
            TaskKind::Provenance => Scenario::FullGeneration,
            TaskKind::ModificationCheck => Scenario::Modification,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Nonsensical,
    Real,
    Fake,
    Modified,
}

impl Verdict {
    /// Class label the verdict stands for; `None` for nonsensical.
    pub fn label(self) -> Option<Label> {
        match self {
            Verdict::True | Verdict::Real => Some(Label::Real),
            Verdict::False | Verdict::Fake | Verdict::Modified => Some(Label::Fake),
            Verdict::Nonsensical => None,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("verdict serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub kind: TaskKind,
    pub article: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    /// Byte ranges into `article` to highlight, e.g. negations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_spans: Option<Vec<(usize, usize)>>,
    /// How many different annotators should label the task.
    #[serde(default = "one")]
    pub quota: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// Exported text when it differs from what annotators read, e.g. the
    /// QA prompt built from the article with the answer sentence removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_text: Option<String>,
    #[serde(default)]
    pub meta: Meta,
}

fn one() -> usize {
    1
}

impl AnnotationTask {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |reason: &str| AnnotationError::BadTask {
            task: self.task_id.clone(),
            reason: reason.to_string(),
        };
        if self.task_id.is_empty() {
            return Err(bad("empty task id"));
        }
        if self.quota == 0 {
            return Err(bad("quota must be at least 1"));
        }
        match self.kind {
            TaskKind::Veracity if self.question.is_none() || self.answer.is_none() => {
                Err(bad("veracity tasks need a question and an answer"))
            }
            TaskKind::ModificationCheck if self.highlight_spans.is_none() => {
                Err(bad("modification tasks need highlight spans"))
            }
            _ => {
                for &(s, e) in self.highlight_spans.iter().flatten() {
                    if s > e || self.article.get(s..e).is_none() {
                        return Err(bad("highlight span outside the article"));
                    }
                }
                Ok(())
            }
        }
    }

    /// What the exported example contains: `example_text` when set, else
    /// the QA prompt plus answer for veracity tasks, else the article.
    pub fn export_text(&self) -> String {
        if let Some(text) = &self.example_text {
            return text.clone();
        }
        match (self.kind, &self.question, &self.answer) {
            (TaskKind::Veracity, Some(q), Some(a)) => {
                match build_qa_prompt(&Document::new(self.article.as_str()), q) {
                    Ok(prompt) => format!("{prompt} {a}"),
                    Err(_) => self.article.clone(),
                }
            }
            _ => self.article.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub task_id: String,
    pub annotator_id: String,
    pub verdict: Verdict,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum JournalEvent {
    Register { annotator_id: String },
    Label(AnnotationRecord),
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Orders ids so that digit runs compare numerically: t2 < t10.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let ord = match (x, y) {
            ((true, n), (true, m)) => {
                let (n, m) = (n.trim_start_matches('0'), m.trim_start_matches('0'));
                n.len().cmp(&m.len()).then_with(|| n.cmp(m))
            }
            _ => x.1.cmp(y.1),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyCell {
    pub first: Verdict,
    pub second: Verdict,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub kind: TaskKind,
    pub n: usize,
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    pub table: Vec<ContingencyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conflict {
    pub task_id: String,
    pub verdicts: Vec<(String, Verdict)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportReport {
    pub kind: TaskKind,
    pub examples: Vec<LabeledExample>,
    pub conflicts: Vec<Conflict>,
    pub nonsensical: usize,
    /// Share of labeled tasks dropped as nonsensical.
    pub nonsense_rate: f64,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    pub tasks: usize,
    pub annotators: usize,
    pub records: usize,
    pub completed_tasks: usize,
    pub by_kind: BTreeMap<String, usize>,
}

/// In-memory state; [`AnnotationStore`] adds the journal.
#[derive(Debug, Default)]
pub struct QueueState {
    tasks: Vec<AnnotationTask>,
    index: HashMap<String, usize>,
    annotators: BTreeSet<String>,
    records: Vec<AnnotationRecord>,
    by_task: HashMap<String, Vec<usize>>,
    answered: HashSet<(String, String)>,
    served: HashSet<(String, String)>,
    leases: HashMap<String, Vec<(String, Instant)>>,
    lease_ttl: Duration,
}

impl QueueState {
    pub fn new(mut tasks: Vec<AnnotationTask>) -> Result<Self, AnnotationError> {
        tasks.sort_by(|a, b| natural_cmp(&a.task_id, &b.task_id));
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if index.insert(t.task_id.clone(), i).is_some() {
                return Err(AnnotationError::DuplicateTask(t.task_id.clone()));
            }
        }
        Ok(QueueState {
            tasks,
            index,
            lease_ttl: DEFAULT_LEASE,
            ..QueueState::default()
        })
    }

    pub fn with_lease_ttl(mut self, ttl: Duration) -> Self {
        self.lease_ttl = ttl;
        self
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn task(&self, id: &str) -> Option<&AnnotationTask> {
        self.index.get(id).map(|&i| &self.tasks[i])
    }

    pub fn is_registered(&self, annotator: &str) -> bool {
        self.annotators.contains(annotator)
    }

    fn register(&mut self, annotator: &str) -> bool {
        self.annotators.insert(annotator.to_string())
    }

    fn check_record(&self, r: &AnnotationRecord) -> Result<(), AnnotationError> {
        if !self.is_registered(&r.annotator_id) {
            return Err(AnnotationError::UnknownAnnotator(r.annotator_id.clone()));
        }
        let task = self
            .task(&r.task_id)
            .ok_or_else(|| AnnotationError::UnknownTask(r.task_id.clone()))?;
        if !task.kind.verdicts().contains(&r.verdict) {
            return Err(AnnotationError::BadVerdict {
                verdict: r.verdict,
                kind: task.kind,
            });
        }
        if self
            .answered
            .contains(&(r.annotator_id.clone(), r.task_id.clone()))
        {
            return Err(AnnotationError::DuplicateSubmission {
                task: r.task_id.clone(),
                annotator: r.annotator_id.clone(),
            });
        }
        Ok(())
    }

    fn apply(&mut self, r: AnnotationRecord) {
        let key = (r.annotator_id.clone(), r.task_id.clone());
        if let Some(leases) = self.leases.get_mut(&r.task_id) {
            leases.retain(|(a, _)| *a != r.annotator_id);
        }
        self.served.insert(key.clone());
        self.answered.insert(key);
        self.by_task
            .entry(r.task_id.clone())
            .or_default()
            .push(self.records.len());
        self.records.push(r);
    }

    /// Lowest-id task this annotator has not been served yet whose quota is
    /// not covered by existing answers plus live leases. Serving a task
    /// leases it to the annotator until they answer or the lease expires.
    pub fn next_task(
        &mut self,
        annotator: &str,
        now: Instant,
    ) -> Result<Option<&AnnotationTask>, AnnotationError> {
        if !self.is_registered(annotator) {
            return Err(AnnotationError::UnknownAnnotator(annotator.to_string()));
        }
        let ttl = self.lease_ttl;
        let mut chosen = None;
        for (i, task) in self.tasks.iter().enumerate() {
            if self
                .served
                .contains(&(annotator.to_string(), task.task_id.clone()))
            {
                continue;
            }
            let answers = self.by_task.get(&task.task_id).map_or(0, Vec::len);
            let live = self.leases.get(&task.task_id).map_or(0, |l| {
                l.iter()
                    .filter(|(_, at)| now.duration_since(*at) < ttl)
                    .count()
            });
            if answers + live < task.quota {
                chosen = Some(i);
                break;
            }
        }
        let Some(i) = chosen else { return Ok(None) };
        let id = self.tasks[i].task_id.clone();
        let leases = self.leases.entry(id.clone()).or_default();
        leases.retain(|(_, at)| now.duration_since(*at) < ttl);
        leases.push((annotator.to_string(), now));
        self.served.insert((annotator.to_string(), id));
        Ok(Some(&self.tasks[i]))
    }

    /// Verdict pairs from the first two annotators of every task of `kind`.
    /// Pairs involving a nonsensical verdict are left out.
    pub fn agreement(&self, kind: TaskKind) -> Result<AgreementReport, AnnotationError> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for task in self.tasks.iter().filter(|t| t.kind == kind) {
            let Some(idx) = self.by_task.get(&task.task_id) else {
                continue;
            };
            if idx.len() < 2 {
                continue;
            }
            let (x, y) = (self.records[idx[0]].verdict, self.records[idx[1]].verdict);
            if x == Verdict::Nonsensical || y == Verdict::Nonsensical {
                continue;
            }
            a.push(x);
            b.push(y);
        }
        if a.is_empty() {
            return Err(AnnotationError::NoOverlap);
        }
        let k = kappa_report(&a, &b).map_err(|_| AnnotationError::NoOverlap)?;
        Ok(AgreementReport {
            kind,
            n: k.n,
            kappa: k.kappa,
            observed: k.observed,
            expected: k.expected,
            table: k
                .table
                .into_iter()
                .map(|((first, second), count)| ContingencyCell {
                    first,
                    second,
                    count,
                })
                .collect(),
        })
    }

    /// Labeled examples for every answered task of `kind`. Tasks with any
    /// nonsensical verdict are dropped; tasks whose annotators disagree are
    /// reported as conflicts instead of exported.
    pub fn export(&self, kind: TaskKind) -> ExportReport {
        let mut report = ExportReport {
            kind,
            examples: Vec::new(),
            conflicts: Vec::new(),
            nonsensical: 0,
            nonsense_rate: 0.0,
            unlabeled: 0,
        };
        let mut labeled = 0usize;
        for task in self.tasks.iter().filter(|t| t.kind == kind) {
            let Some(idx) = self.by_task.get(&task.task_id) else {
                report.unlabeled += 1;
                continue;
            };
            labeled += 1;
            let verdicts: Vec<&AnnotationRecord> = idx.iter().map(|&i| &self.records[i]).collect();
            if verdicts.iter().any(|r| r.verdict == Verdict::Nonsensical) {
                report.nonsensical += 1;
                continue;
            }
            let labels: BTreeSet<Label> =
                verdicts.iter().filter_map(|r| r.verdict.label()).collect();
            if labels.len() > 1 {
                report.conflicts.push(Conflict {
                    task_id: task.task_id.clone(),
                    verdicts: verdicts
                        .iter()
                        .map(|r| (r.annotator_id.clone(), r.verdict))
                        .collect(),
                });
                continue;
            }
            let label = *labels.iter().next().expect("answered task has a label");
            let mut meta = task.meta.clone();
            if task.question.is_some() {
                meta.question.clone_from(&task.question);
            }
            if let Some(answer) = &task.answer {
                meta.answer = Some(answer.clone());
                meta.answer_word_count = Some(Document::new(answer.as_str()).word_count());
            }
            report.examples.push(
                LabeledExample::new(
                    task.task_id.clone(),
                    task.export_text(),
                    label,
                    task.scenario.unwrap_or(kind.default_scenario()),
                )
                .with_meta(meta),
            );
        }
        if labeled > 0 {
            report.nonsense_rate = report.nonsensical as f64 / labeled as f64;
        }
        report
    }

    pub fn stats(&self) -> Stats {
        let mut by_kind = BTreeMap::new();
        for t in &self.tasks {
            *by_kind.entry(t.kind.as_str().to_string()).or_insert(0) += 1;
        }
        Stats {
            tasks: self.tasks.len(),
            annotators: self.annotators.len(),
            records: self.records.len(),
            completed_tasks: self
                .tasks
                .iter()
                .filter(|t| self.by_task.get(&t.task_id).map_or(0, Vec::len) >= t.quota)
                .count(),
            by_kind,
        }
    }
}

/// Queue state backed by an append-only JSON Lines journal. Every mutation
/// is written and synced before it is applied, and the journal is replayed
/// on open.
#[derive(Debug)]
pub struct AnnotationStore {
    state: QueueState,
    journal: File,
    path: PathBuf,
}

impl AnnotationStore {
    pub fn open(
        tasks: Vec<AnnotationTask>,
        journal: impl AsRef<Path>,
    ) -> Result<Self, AnnotationError> {
        let path = journal.as_ref().to_path_buf();
        let mut state = QueueState::new(tasks)?;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: JournalEvent =
                    serde_json::from_str(&line).map_err(|e| AnnotationError::Journal {
                        line: n + 1,
                        message: e.to_string(),
                    })?;
                match event {
                    JournalEvent::Register { annotator_id } => {
                        state.register(&annotator_id);
                    }
                    JournalEvent::Label(r) => {
                        state
                            .check_record(&r)
                            .map_err(|e| AnnotationError::Journal {
                                line: n + 1,
                                message: e.to_string(),
                            })?;
                        state.apply(r);
                    }
                }
            }
        }
        let journal = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(AnnotationStore {
            state,
            journal,
            path,
        })
    }

    pub fn with_lease_ttl(mut self, ttl: Duration) -> Self {
        self.state.lease_ttl = ttl;
        self
    }

    pub fn state(&self) -> &QueueState {
        &self.state
    }

    pub fn journal_path(&self) -> &Path {
        &self.path
    }

    fn append(&mut self, event: &JournalEvent) -> Result<(), AnnotationError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.journal.write_all(line.as_bytes())?;
        self.journal.sync_data()?;
        Ok(())
    }

    /// Returns false when the annotator was already known.
    pub fn register(&mut self, annotator: &str) -> Result<bool, AnnotationError> {
        if annotator.is_empty() {
            return Err(AnnotationError::UnknownAnnotator(String::new()));
        }
        if self.state.is_registered(annotator) {
            return Ok(false);
        }
        self.append(&JournalEvent::Register {
            annotator_id: annotator.to_string(),
        })?;
        Ok(self.state.register(annotator))
    }

    pub fn next_task(
        &mut self,
        annotator: &str,
    ) -> Result<Option<AnnotationTask>, AnnotationError> {
        Ok(self.state.next_task(annotator, Instant::now())?.cloned())
    }

    pub fn submit(
        &mut self,
        task_id: &str,
        annotator: &str,
        verdict: Verdict,
    ) -> Result<AnnotationRecord, AnnotationError> {
        let record = AnnotationRecord {
            task_id: task_id.to_string(),
            annotator_id: annotator.to_string(),
            verdict,
            timestamp: now_ms(),
        };
        self.state.check_record(&record)?;
        self.append(&JournalEvent::Label(record.clone()))?;
        self.state.apply(record.clone());
        Ok(record)
    }
}

/// One task per line.
pub fn read_tasks(path: impl AsRef<Path>) -> Result<Vec<AnnotationTask>, AnnotationError> {
    let reader = BufReader::new(File::open(path)?);
    let mut tasks = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        tasks.push(
            serde_json::from_str(&line).map_err(|e| AnnotationError::BadTask {
                task: format!("line {}", n + 1),
                reason: e.to_string(),
            })?,
        );
    }
    Ok(tasks)
}
