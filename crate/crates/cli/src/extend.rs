use std::collections::{BTreeMap, HashMap};

use serde_json::json;
use vforge_core::dataset::{self, Article, Dataset, Label, LabeledExample, Meta, Scenario};
use vforge_core::eval::token_overlap_f1;
use vforge_core::extension::{
    length_match_truncate, qa_extend, vanilla_extend, ExtensionConfig, Generator, Sampling,
};
use vforge_core::text::Document;
use vforge_core::ExtensionError;
use vforge_net::annotation::{AnnotationTask, TaskKind};
use vforge_net::HttpGenerator;

use crate::{data, jobs, par_map, CliError, ExtendArgs, ExtendMode};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendSummary {
    pub written: usize,
    pub skipped: Vec<(String, String)>,
}

fn source(article: &Article) -> Option<String> {
    article
        .path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
}

/// Generator failures abort the run; everything else skips the article.
fn fatal(e: &ExtensionError) -> bool {
    matches!(e, ExtensionError::GeneratorUnavailable(_))
}

pub fn cmd_extend(args: &ExtendArgs) -> Result<ExtendSummary, CliError> {
    let sampling = Sampling {
        temperature: args.temperature,
        top_k: args.top_k,
    };
    if args.temperature.is_nan() || args.temperature <= 0.0 {
        return Err(CliError::Usage("--temperature must be positive".into()));
    }
    match args.mode {
        ExtendMode::Qa if args.questions.is_none() => {
            return Err(CliError::Usage("--mode qa needs --questions".into()))
        }
        ExtendMode::Vanilla if args.g.is_none() => {
            return Err(CliError::Usage("--mode vanilla needs --g".into()))
        }
        _ => {}
    }
    let articles = dataset::read_articles(&args.in_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.in_dir.display())))?;
    if articles.is_empty() {
        return Err(CliError::Data(format!(
            "no .txt articles in {}",
            args.in_dir.display()
        )));
    }
    let generator = HttpGenerator::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
    match args.mode {
        ExtendMode::Qa => qa(args, &articles, sampling, &generator),
        ExtendMode::Vanilla => vanilla(args, &articles, sampling, &generator),
    }
}

/// One veracity task per question, for human labeling.
pub fn qa<G: Generator + Sync>(
    args: &ExtendArgs,
    articles: &[Article],
    sampling: Sampling,
    generator: &G,
) -> Result<ExtendSummary, CliError> {
    let path = args.questions.as_ref().expect("checked by caller");
    let rows = dataset::read_questions_tsv(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let by_id: HashMap<&str, &Article> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut per_article: BTreeMap<&str, usize> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut work = Vec::new();
    for row in &rows {
        match by_id.get(row.article_id.as_str()) {
            Some(article) => {
                let n = per_article.entry(row.article_id.as_str()).or_insert(0);
                *n += 1;
                work.push((format!("{}-q{}", row.article_id, n), *article, row));
            }
            None => {
                eprintln!("warning: no article for question row {:?}", row.article_id);
                skipped.push((row.article_id.clone(), "missing article".into()));
            }
        }
    }
    let results = par_map(&work, jobs(args.jobs), |(_, article, row)| {
        qa_extend(
            &Document::new(article.text.as_str()),
            &row.question,
            sampling,
            generator,
        )
    });

    let mut tasks = Vec::new();
    for ((task_id, article, row), result) in work.iter().zip(results) {
        let ext = match result {
            Ok(ext) => ext,
            Err(e) if fatal(&e) => return Err(CliError::External(e.to_string())),
            Err(e) => {
                eprintln!("warning: skipping {task_id}: {e}");
                skipped.push((task_id.clone(), e.to_string()));
                continue;
            }
        };
        let mut meta = Meta {
            question: Some(row.question.clone()),
            answer: Some(ext.answer.clone()),
            answer_word_count: Some(Document::new(ext.answer.as_str()).word_count()),
            source: source(article),
            original_id: Some(article.id.clone()),
            ..Meta::default()
        };
        if !row.gold_answer.is_empty() {
            meta.extra
                .insert("gold_answer".into(), json!(row.gold_answer));
            meta.extra.insert(
                "answer_overlap_f1".into(),
                json!(token_overlap_f1(&ext.answer, &row.gold_answer)),
            );
        }
        meta.extra
            .insert("removed_sentence".into(), json!(ext.removed_sentence_index));
        if !args.quiet {
            println!("{task_id}: {}", ext.answer);
        }
        tasks.push(AnnotationTask {
            task_id: task_id.clone(),
            kind: TaskKind::Veracity,
            article: article.text.clone(),
            question: Some(row.question.clone()),
            answer: Some(ext.answer.clone()),
            highlight_spans: None,
            quota: if tasks.len() < args.double_annotate {
                2
            } else {
                1
            },
            scenario: Some(Scenario::QaExtension),
            example_text: Some(ext.example_text()),
            meta,
        });
    }
    if tasks.is_empty() {
        return Err(CliError::Data("no question produced an answer".into()));
    }
    dataset::write_jsonl(&tasks, &args.out).map_err(data)?;
    eprintln!(
        "{} annotation tasks written to {}",
        tasks.len(),
        args.out.display()
    );
    Ok(ExtendSummary {
        written: tasks.len(),
        skipped,
    })
}

/// A fake extension per article plus the original cut to the same length.
pub fn vanilla<G: Generator + Sync>(
    args: &ExtendArgs,
    articles: &[Article],
    sampling: Sampling,
    generator: &G,
) -> Result<ExtendSummary, CliError> {
    let mut cfg = ExtensionConfig::new(args.g.expect("checked by caller"));
    cfg.prefix_words = args.prefix_words;
    cfg.sampling = sampling;
    cfg.max_sentences = args.max_sentences;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let results = par_map(articles, jobs(args.jobs), |article| {
        let doc = Document::new(article.text.as_str());
        let ext = vanilla_extend(&doc, &cfg, generator)?;
        let real = length_match_truncate(&doc, &ext.document)?;
        Ok::<_, ExtensionError>((ext, real))
    });

    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (article, result) in articles.iter().zip(results) {
        let (ext, real) = match result {
            Ok(r) => r,
            Err(e) if fatal(&e) => return Err(CliError::External(e.to_string())),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", article.id);
                skipped.push((article.id.clone(), e.to_string()));
                continue;
            }
        };
        if !args.quiet {
            println!(
                "{}: {} human + {} machine words, g = {:.4}",
                article.id, ext.human_words, ext.machine_words, ext.g_actual
            );
        }
        examples.push(
            LabeledExample::new(
                format!("{}-real", article.id),
                real.into_text(),
                Label::Real,
                Scenario::VanillaExtension,
            )
            .with_meta(Meta {
                g_actual: Some(0.0),
                source: source(article),
                original_id: Some(article.id.clone()),
                ..Meta::default()
            }),
        );
        examples.push(
            LabeledExample::new(
                format!("{}-ext", article.id),
                ext.document.into_text(),
                Label::Fake,
                Scenario::VanillaExtension,
            )
            .with_meta(Meta {
                g_actual: Some(ext.g_actual),
                ratio_to_original: ext.ratio_to_original,
                source: source(article),
                original_id: Some(article.id.clone()),
                ..Meta::default()
            }),
        );
    }
    if examples.is_empty() {
        return Err(CliError::Data("no article could be extended".into()));
    }
    let dataset = Dataset::assemble(examples).map_err(data)?;
    dataset::write_jsonl(dataset.examples(), &args.out).map_err(data)?;
    eprintln!(
        "{} examples written to {}",
        dataset.len(),
        args.out.display()
    );
    Ok(ExtendSummary {
        written: dataset.len(),
        skipped,
    })
}
