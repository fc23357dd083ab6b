//! Scorer selection and the bundled training corpus.

use std::path::{Path, PathBuf};

use vforge_core::lm::{train_ngram, NgramModel, Scorer, DEFAULT_LAMBDAS, DEFAULT_ORDER};
use vforge_core::text::Document;
use vforge_net::RemoteScorer;

use crate::{data, CliError, ScorerKind, TrainLmArgs};

/// Public-domain texts compiled into the binary.
pub const BUNDLED_CORPUS: [(&str, &str); 3] = [
    ("alice29", include_str!("../../../data/corpus/alice29.txt")),
    (
        "asyoulik",
        include_str!("../../../data/corpus/asyoulik.txt"),
    ),
    (
        "plrabn12",
        include_str!("../../../data/corpus/plrabn12.txt"),
    ),
];

pub fn bundled_documents() -> Vec<Document> {
    BUNDLED_CORPUS
        .iter()
        .map(|(_, text)| Document::new(*text))
        .collect()
}

pub fn bundled_model() -> NgramModel {
    train_ngram(&bundled_documents(), DEFAULT_ORDER, &DEFAULT_LAMBDAS)
        .expect("bundled corpus trains")
}

pub fn load_scorer(
    kind: ScorerKind,
    lm: Option<&Path>,
) -> Result<Box<dyn Scorer + Sync>, CliError> {
    match kind {
        ScorerKind::Ngram => match lm {
            Some(path) => Ok(Box::new(NgramModel::load(path).map_err(|e| {
                CliError::Data(format!("cannot load model {}: {e}", path.display()))
            })?)),
            None => Ok(Box::new(bundled_model())),
        },
        ScorerKind::Remote => {
            if lm.is_some() {
                return Err(CliError::Usage(
                    "--lm only applies to the ngram scorer".into(),
                ));
            }
            let remote = RemoteScorer::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Box::new(remote))
        }
    }
}

fn collect_texts(inputs: &[PathBuf]) -> Result<Vec<Document>, CliError> {
    let mut docs = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for article in vforge_core::dataset::read_articles(input).map_err(data)? {
                docs.push(Document::new(article.text));
            }
        } else {
            let text = std::fs::read_to_string(input)
                .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
            docs.push(Document::new(text));
        }
    }
    Ok(docs)
}

pub fn cmd_train_lm(args: &TrainLmArgs) -> Result<(), CliError> {
    let docs = if args.inputs.is_empty() {
        bundled_documents()
    } else {
        collect_texts(&args.inputs)?
    };
    let lambdas = match &args.lambdas {
        Some(l) => l.clone(),
        None if args.order == DEFAULT_ORDER => DEFAULT_LAMBDAS.to_vec(),
        None => vec![1.0 / args.order as f64; args.order],
    };
    let model = train_ngram(&docs, args.order, &lambdas).map_err(|e| match e {
        vforge_core::LmError::BadWeights(_) => CliError::Usage(e.to_string()),
        other => data(other),
    })?;
    model.save(&args.out).map_err(data)?;
    eprintln!(
        "trained order-{} model on {} tokens, {} terms -> {}",
        model.order(),
        model.token_total(),
        model.vocabulary().len(),
        args.out.display()
    );
    Ok(())
}
