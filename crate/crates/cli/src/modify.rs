use vforge_core::dataset::{self, Article, Dataset, Label, LabeledExample, Meta, Scenario};
use vforge_core::lm::Scorer;
use vforge_core::negation::{
    derive_seed, modify_article, EditKind, ModificationConfig, ModifiedArticle,
};
use vforge_core::text::Document;
use vforge_core::AttackError;

use crate::scorer::load_scorer;
use crate::{data, jobs, par_map, CliError, ModifyArgs};

#[derive(Debug, Clone, PartialEq)]
pub struct ModifySummary {
    pub articles: usize,
    pub modified: usize,
    pub skipped: Vec<(String, String)>,
}

fn source(article: &Article) -> String {
    article
        .path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn pair(article: &Article, m: usize, out: ModifiedArticle) -> [LabeledExample; 2] {
    let src = Some(source(article));
    let real = LabeledExample::new(
        article.id.clone(),
        article.text.clone(),
        Label::Real,
        Scenario::Modification,
    )
    .with_meta(Meta {
        m: Some(m),
        source: src.clone(),
        ..Meta::default()
    });
    let fake = LabeledExample::new(
        format!("{}-mod", article.id),
        out.modified.into_text(),
        Label::Fake,
        Scenario::Modification,
    )
    .with_meta(Meta {
        m: Some(m),
        edits: Some(out.edits),
        source: src,
        original_id: Some(article.id.clone()),
        ..Meta::default()
    });
    [real, fake]
}

fn describe(id: &str, out: &ModifiedArticle) -> String {
    let mut parts = Vec::new();
    for e in &out.edits {
        let sign = if e.kind == EditKind::Deletion {
            '-'
        } else {
            '+'
        };
        match e.score {
            Some(s) => parts.push(format!(
                "{sign}{}@{} ({s:.3e})",
                e.word.as_str(),
                e.token_position
            )),
            None => parts.push(format!("{sign}{}@{}", e.word.as_str(), e.token_position)),
        }
    }
    format!("{id}: {}", parts.join(" "))
}

/// Modify every article under `in_dir`, writing the original and the
/// modified version of each one that has enough negations.
pub fn cmd_modify(args: &ModifyArgs) -> Result<ModifySummary, CliError> {
    let probe = ModificationConfig::new(args.m, args.seed).with_candidates(args.k);
    probe
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let articles = dataset::read_articles(&args.in_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.in_dir.display())))?;
    if articles.is_empty() {
        return Err(CliError::Data(format!(
            "no .txt articles in {}",
            args.in_dir.display()
        )));
    }
    let scorer = load_scorer(args.scorer, args.lm.as_deref())?;
    let scorer: &(dyn Scorer + Sync) = scorer.as_ref();

    let results = par_map(&articles, jobs(args.jobs), |article| {
        let cfg = probe.with_seed(derive_seed(args.seed, &article.id));
        modify_article(&Document::new(article.text.as_str()), &cfg, scorer)
    });

    let mut examples = Vec::with_capacity(2 * articles.len());
    let mut skipped = Vec::new();
    for (article, result) in articles.iter().zip(results) {
        match result {
            Ok(out) => {
                if !args.quiet {
                    println!("{}", describe(&article.id, &out));
                }
                examples.extend(pair(article, args.m, out));
            }
            Err(AttackError::Scorer(e)) => return Err(CliError::External(e.to_string())),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", article.id);
                skipped.push((article.id.clone(), e.to_string()));
            }
        }
    }
    if examples.is_empty() {
        return Err(CliError::Data("no article could be modified".into()));
    }
    let modified = examples.len() / 2;
    let dataset = Dataset::assemble(examples).map_err(data)?;
    dataset::write_jsonl(dataset.examples(), &args.out).map_err(data)?;
    eprintln!(
        "{} of {} articles modified, {} examples written to {}",
        modified,
        articles.len(),
        dataset.len(),
        args.out.display()
    );
    Ok(ModifySummary {
        articles: articles.len(),
        modified,
        skipped,
    })
}
