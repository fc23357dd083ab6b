//! `vforge` command line: build modification and extension datasets, evaluate
//! detectors, serve annotation tasks and train the bundled n-gram scorer.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod evaluate;
pub mod extend;
pub mod modify;
pub mod scorer;
pub mod serve;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_EXTERNAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    External(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::External(_) => EXIT_EXTERNAL,
        }
    }
}

pub(crate) fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "vforge",
    version,
    about = "Build and evaluate machine-generated misinformation datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invert negations in articles and write real/fake pairs.
    Modify(ModifyArgs),
    /// Extend articles with generated text (QA tasks or vanilla extensions).
    Extend(ExtendArgs),
    /// Split a dataset, run a detector on the eval part and report metrics.
    Eval(EvalArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Train the n-gram scorer and save it.
    TrainLm(TrainLmArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerKind {
    Ngram,
    Remote,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ModifyArgs {
    /// Directory of .txt articles.
    pub in_dir: PathBuf,
    /// Output JSON Lines file.
    pub out: PathBuf,
    /// Total edits per article: m/2 deletions and m/2 insertions.
    #[arg(long)]
    pub m: usize,
    /// Insertion positions sampled per article.
    #[arg(long, default_value_t = vforge_core::negation::DEFAULT_CANDIDATES)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScorerKind::Ngram)]
    pub scorer: ScorerKind,
    /// Saved n-gram model; the bundled corpus is used when absent.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtendMode {
    Qa,
    Vanilla,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ExtendArgs {
    pub in_dir: PathBuf,
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ExtendMode,
    /// Tab-separated `id, question, gold_answer` rows (qa mode).
    #[arg(long)]
    pub questions: Option<PathBuf>,
    /// Target machine fraction (vanilla mode).
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, default_value_t = vforge_core::extension::DEFAULT_PREFIX_WORDS)]
    pub prefix_words: usize,
    #[arg(long, default_value_t = vforge_core::extension::DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = vforge_core::extension::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, default_value_t = vforge_core::extension::DEFAULT_MAX_SENTENCES)]
    pub max_sentences: usize,
    /// The first N qa tasks are labeled by two annotators.
    #[arg(long, default_value_t = 0)]
    pub double_annotate: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Remote,
    LengthBaseline,
    Majority,
}

#[derive(Debug, Clone, clap::Args)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub detector: DetectorKind,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = vforge_core::dataset::DEFAULT_EVAL_FRACTION)]
    pub eval_fraction: f64,
    /// Only evaluate examples whose answer has at most this many words.
    #[arg(long)]
    pub max_answer_words: Option<usize>,
    /// Bins for the predicted-real rate by machine fraction.
    #[arg(long)]
    pub fraction_bins: Option<usize>,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// ROC points as CSV, written when the detector returns scores.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Row name in the results table.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ServeArgs {
    /// Task file, one JSON task per line.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Append-only verdict journal.
    #[arg(long)]
    pub journal: PathBuf,
    /// Annotators to register up front, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub annotators: Vec<String>,
    /// Directory with the labeling UI bundle.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Defaults to $VFORGE_PORT, then 8471.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TrainLmArgs {
    /// Output model file.
    pub out: PathBuf,
    /// Text files or directories of .txt files; the bundled corpus when empty.
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = vforge_core::lm::DEFAULT_ORDER)]
    pub order: usize,
    /// Interpolation weights from unigram upward, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Modify(a) => modify::cmd_modify(&a).map(|_| ()),
        Command::Extend(a) => extend::cmd_extend(&a).map(|_| ()),
        Command::Eval(a) => evaluate::cmd_eval(&a).map(|_| ()),
        Command::Serve(a) => serve::cmd_serve(&a),
        Command::TrainLm(a) => scorer::cmd_train_lm(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn jobs(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

/// Map `f` over `items` on up to `jobs` threads, keeping input order.
pub(crate) fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("slots lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("slots lock")
        .into_iter()
        .map(|r| r.expect("every item mapped"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..100).collect();
        assert_eq!(
            par_map(&items, 7, |x| x * 2),
            (0..100).map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(par_map(&Vec::<usize>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["vforge", "modify"]), EXIT_USAGE);
        assert_eq!(run(["vforge", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["vforge", "--help"]), EXIT_OK);
    }
}
