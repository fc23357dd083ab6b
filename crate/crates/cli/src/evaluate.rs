use std::fs;

use serde::Serialize;
use vforge_core::dataset::{self, ClassCounts, Label, LabeledExample};
use vforge_core::eval::{
    answer_words, answer_words_at_most, format_table, fraction_curve, length_baseline,
    majority_baseline, slice, EvalReport, FractionBin, LengthBaseline,
};
use vforge_core::text::tokenize;
use vforge_net::DetectorClient;

use crate::{data, CliError, DetectorKind, EvalArgs};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Majority { label: Label },
    LengthBaseline(LengthBaseline),
    Remote { scored: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutput {
    pub name: String,
    pub dataset: String,
    pub split_seed: u64,
    pub eval_fraction: f64,
    pub train: ClassCounts,
    pub eval: ClassCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_answer_words: Option<usize>,
    pub detector: Fitted,
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_curve: Option<Vec<FractionBin>>,
}

fn detector_name(kind: DetectorKind) -> &'static str {
    match kind {
        DetectorKind::Remote => "remote",
        DetectorKind::LengthBaseline => "length-baseline",
        DetectorKind::Majority => "majority",
    }
}

/// Length feature: the answer's word count for QA examples, the whole text otherwise.
pub fn length_feature(e: &LabeledExample) -> usize {
    answer_words(&e.meta).unwrap_or_else(|| tokenize(&e.text).word_count())
}

fn pairs(examples: &[LabeledExample]) -> Vec<(usize, Label)> {
    examples
        .iter()
        .map(|e| (length_feature(e), e.label))
        .collect()
}

fn remote(eval: &[LabeledExample]) -> Result<(Vec<Label>, Option<Vec<f64>>), CliError> {
    let client = DetectorClient::from_env().map_err(|e| CliError::Usage(e.to_string()))?;
    let texts: Vec<&str> = eval.iter().map(|e| e.text.as_str()).collect();
    let mut preds = Vec::with_capacity(texts.len());
    let mut scores = Vec::with_capacity(texts.len());
    for (e, r) in eval.iter().zip(client.detect_batch(&texts)) {
        let r =
            r.map_err(|err| CliError::External(format!("detector failed on {}: {err}", e.id)))?;
        preds.push(r.label);
        scores.push(r.score);
    }
    let scores = scores.into_iter().collect::<Option<Vec<f64>>>();
    Ok((preds, scores))
}

/// Fake examples' predicted-real rate by realized machine fraction.
fn curve(
    eval: &[LabeledExample],
    preds: &[Label],
    bins: usize,
) -> Result<Vec<FractionBin>, CliError> {
    let (p, f): (Vec<Label>, Vec<f64>) = eval
        .iter()
        .zip(preds)
        .filter(|(e, _)| e.label == Label::Fake)
        .filter_map(|(e, &p)| e.meta.g_actual.map(|g| (p, g)))
        .unzip();
    fraction_curve(&p, &f, bins).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutput, CliError> {
    if !(args.eval_fraction > 0.0 && args.eval_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--eval-fraction {} not in (0, 1)",
            args.eval_fraction
        )));
    }
    if args.fraction_bins == Some(0) {
        return Err(CliError::Usage("--fraction-bins must be positive".into()));
    }
    let ds = dataset::read_jsonl(&args.dataset)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.dataset.display())))?;
    let split = dataset::split(&ds, args.eval_fraction, args.split_seed).map_err(data)?;
    let eval = match args.max_answer_words {
        Some(n) => slice(&split.eval, answer_words_at_most(n)),
        None => split.eval.clone(),
    };
    if eval.is_empty() {
        return Err(CliError::Data("eval set is empty after slicing".into()));
    }
    let golds: Vec<Label> = eval.iter().map(|e| e.label).collect();

    let (detector, preds, report) = match args.detector {
        DetectorKind::Majority => {
            let train: Vec<Label> = split.train.iter().map(|e| e.label).collect();
            let (label, report) = majority_baseline(&train, &golds).map_err(data)?;
            (Fitted::Majority { label }, vec![label; golds.len()], report)
        }
        DetectorKind::LengthBaseline => {
            let eval_pairs = pairs(&eval);
            let (model, report) =
                length_baseline(&pairs(&split.train), &eval_pairs).map_err(data)?;
            let preds = eval_pairs.iter().map(|&(n, _)| model.predict(n)).collect();
            (Fitted::LengthBaseline(model), preds, report)
        }
        DetectorKind::Remote => {
            let (preds, scores) = remote(&eval)?;
            let report =
                EvalReport::from_predictions(&preds, &golds, scores.as_deref()).map_err(data)?;
            (
                Fitted::Remote {
                    scored: scores.is_some(),
                },
                preds,
                report,
            )
        }
    };
    let fraction_curve = args
        .fraction_bins
        .map(|b| curve(&eval, &preds, b))
        .transpose()?;

    let name = args
        .name
        .clone()
        .unwrap_or_else(|| detector_name(args.detector).to_string());
    let out = EvalOutput {
        name: name.clone(),
        dataset: args.dataset.display().to_string(),
        split_seed: args.split_seed,
        eval_fraction: args.eval_fraction,
        train: ClassCounts::of(&split.train),
        eval: ClassCounts::of(&eval),
        max_answer_words: args.max_answer_words,
        detector,
        report,
        fraction_curve,
    };

    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&out).expect("report serializes");
        fs::write(path, json + "\n")
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    if let (Some(path), Fitted::Remote { scored: true }) = (&args.roc, &out.detector) {
        fs::write(path, out.report.roc_csv())
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    if !args.quiet {
        print!(
            "{}",
            format_table("detector", &[(name.as_str(), &out.report)])
        );
        if let Some(auc) = out
            .report
            .auc
            .filter(|_| matches!(out.detector, Fitted::Remote { scored: true }))
        {
            println!("AUC {auc:.4}");
        }
        if let Some(bins) = &out.fraction_curve {
            println!("machine fraction  n  predicted real");
            for b in bins {
                let rate = b
                    .real_rate
                    .map(|r| format!("{r:.2}"))
                    .unwrap_or_else(|| "-".into());
                println!("[{:.2}, {:.2}]  {}  {}", b.lower, b.upper, b.n, rate);
            }
        }
    }
    Ok(out)
}
