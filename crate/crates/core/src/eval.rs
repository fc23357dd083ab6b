//! Detector evaluation: confusion matrices, fake-class precision/recall,
//! macro-F1, ROC/AUC, length and majority baselines, rater agreement and the
//! machine-fraction curve.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledExample, Meta};
use crate::error::EvalError;
use crate::text::tokenize;

/// Counts with `fake` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, pred: Label, gold: Label) {
        match (pred, gold) {
            (Label::Fake, Label::Fake) => self.tp += 1,
            (Label::Fake, Label::Real) => self.fp += 1,
            (Label::Real, Label::Fake) => self.fn_ += 1,
            (Label::Real, Label::Real) => self.tn += 1,
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(preds.len(), golds.len())?;
    let mut m = ConfusionMatrix::default();
    for (&p, &g) in preds.iter().zip(golds) {
        m.add(p, g);
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub fake_precision: f64,
    pub fake_recall: f64,
    pub fake_f1: f64,
    pub real_precision: f64,
    pub real_recall: f64,
    pub real_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Scalar metrics of a confusion matrix. Empty cells (0/0) count as 0.
pub fn metrics(m: &ConfusionMatrix) -> ClassMetrics {
    let fake_precision = ratio(m.tp, m.tp + m.fp);
    let fake_recall = ratio(m.tp, m.tp + m.fn_);
    let real_precision = ratio(m.tn, m.tn + m.fn_);
    let real_recall = ratio(m.tn, m.tn + m.fp);
    let fake_f1 = f1(fake_precision, fake_recall);
    let real_f1 = f1(real_precision, real_recall);
    ClassMetrics {
        fake_precision,
        fake_recall,
        fake_f1,
        real_precision,
        real_recall,
        real_f1,
        macro_f1: (fake_f1 + real_f1) / 2.0,
        accuracy: ratio(m.tp + m.tn, m.total()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve for "probability of fake" scores. One point per distinct
/// threshold plus both corners; the area is computed exactly on integer
/// counts so it equals the pair statistic with ties counted as one half.
pub fn roc(scores: &[f64], golds: &[Label]) -> Result<Roc, EvalError> {
    check_lengths(scores.len(), golds.len())?;
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::InvalidScore(bad));
    }
    let pos = golds.iter().filter(|&&g| g == Label::Fake).count();
    let neg = golds.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            match golds[order[i]] {
                Label::Fake => tp += 1,
                Label::Real => fp += 1,
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(Roc { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fake_precision: f64,
    pub fake_recall: f64,
    pub real_precision: f64,
    pub real_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub matrix: ConfusionMatrix,
    pub roc: Vec<RocPoint>,
    pub auc: Option<f64>,
}

impl EvalReport {
    /// Builds a report from hard predictions. Without `scores` the curve is
    /// the single operating point of the hard labels. ROC and AUC are left
    /// empty when the gold labels contain one class only.
    pub fn from_predictions(
        preds: &[Label],
        golds: &[Label],
        scores: Option<&[f64]>,
    ) -> Result<Self, EvalError> {
        let matrix = confusion(preds, golds)?;
        let m = metrics(&matrix);
        let hard: Vec<f64>;
        let scores = match scores {
            Some(s) => s,
            None => {
                hard = preds
                    .iter()
                    .map(|&p| if p == Label::Fake { 1.0 } else { 0.0 })
                    .collect();
                &hard
            }
        };
        let (roc_points, auc) = match roc(scores, golds) {
            Ok(r) => (r.points, Some(r.auc)),
            Err(EvalError::SingleClass) => (Vec::new(), None),
            Err(e) => return Err(e),
        };
        Ok(EvalReport {
            fake_precision: m.fake_precision,
            fake_recall: m.fake_recall,
            real_precision: m.real_precision,
            real_recall: m.real_recall,
            macro_f1: m.macro_f1,
            accuracy: m.accuracy,
            matrix,
            roc: roc_points,
            auc,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.roc {
            let _ = writeln!(out, "{},{}", p.fpr, p.tpr);
        }
        out
    }
}

/// Plain-text results table: fake-class precision and recall, macro-F1 and
/// accuracy, one row per named report.
pub fn format_table(title: &str, rows: &[(&str, &EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain([title.chars().count()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{title:<width$}  precision  recall    F1  accuracy");
    let _ = writeln!(out, "{}", "-".repeat(width + 38));
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{name:<width$}  {:>9.2}  {:>6.2}  {:>4.2}  {:>7.0}%",
            r.fake_precision,
            r.fake_recall,
            r.macro_f1,
            r.accuracy * 100.0
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Predict fake when length ≥ threshold.
    LongerIsFake,
    /// Predict fake when length < threshold.
    ShorterIsFake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthBaseline {
    pub threshold: usize,
    pub direction: Direction,
    pub train_accuracy: f64,
}

impl LengthBaseline {
    pub fn predict(&self, length: usize) -> Label {
        let fake = match self.direction {
            Direction::LongerIsFake => length >= self.threshold,
            Direction::ShorterIsFake => length < self.threshold,
        };
        if fake {
            Label::Fake
        } else {
            Label::Real
        }
    }

    /// Exhaustive threshold search over 0, every observed length and
    /// max + 1. Ties keep the smaller threshold, then `LongerIsFake`.
    pub fn fit(train: &[(usize, Label)]) -> Result<Self, EvalError> {
        if train.is_empty() {
            return Err(EvalError::Empty);
        }
        let fakes = train.iter().filter(|(_, l)| *l == Label::Fake).count();
        if fakes == 0 || fakes == train.len() {
            return Err(EvalError::SingleClass);
        }
        let mut thresholds: BTreeSet<usize> = train.iter().map(|&(n, _)| n).collect();
        let max = *thresholds.last().expect("non-empty");
        thresholds.insert(0);
        thresholds.insert(max + 1);

        let mut best: Option<(usize, LengthBaseline)> = None;
        for &threshold in &thresholds {
            for direction in [Direction::LongerIsFake, Direction::ShorterIsFake] {
                let cand = LengthBaseline {
                    threshold,
                    direction,
                    train_accuracy: 0.0,
                };
                let correct = train.iter().filter(|&&(n, l)| cand.predict(n) == l).count();
                if best.as_ref().is_none_or(|(c, _)| correct > *c) {
                    best = Some((correct, cand));
                }
            }
        }
        let (correct, mut model) = best.expect("at least one candidate");
        model.train_accuracy = correct as f64 / train.len() as f64;
        Ok(model)
    }
}

pub fn length_baseline(
    train: &[(usize, Label)],
    eval: &[(usize, Label)],
) -> Result<(LengthBaseline, EvalReport), EvalError> {
    let model = LengthBaseline::fit(train)?;
    let preds: Vec<Label> = eval.iter().map(|&(n, _)| model.predict(n)).collect();
    let golds: Vec<Label> = eval.iter().map(|&(_, l)| l).collect();
    Ok((model, EvalReport::from_predictions(&preds, &golds, None)?))
}

/// Majority label of `train`; ties go to `real`.
pub fn majority_label(train: &[Label]) -> Result<Label, EvalError> {
    if train.is_empty() {
        return Err(EvalError::Empty);
    }
    let fakes = train.iter().filter(|&&l| l == Label::Fake).count();
    Ok(if 2 * fakes > train.len() {
        Label::Fake
    } else {
        Label::Real
    })
}

pub fn majority_baseline(
    train: &[Label],
    eval: &[Label],
) -> Result<(Label, EvalReport), EvalError> {
    let label = majority_label(train)?;
    let preds = vec![label; eval.len()];
    Ok((label, EvalReport::from_predictions(&preds, eval, None)?))
}

pub fn slice<P: Fn(&Meta) -> bool>(
    examples: &[LabeledExample],
    predicate: P,
) -> Vec<LabeledExample> {
    examples
        .iter()
        .filter(|e| predicate(&e.meta))
        .cloned()
        .collect()
}

/// Number of word tokens in the answer, preferring the stored count.
pub fn answer_words(meta: &Meta) -> Option<usize> {
    meta.answer_word_count
        .or_else(|| meta.answer.as_deref().map(|a| tokenize(a).word_count()))
}

pub fn answer_words_at_most(n: usize) -> impl Fn(&Meta) -> bool {
    move |meta| answer_words(meta).is_some_and(|w| w <= n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport<T: Ord> {
    pub n: usize,
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    /// (first rater, second rater) -> count
    #[serde(skip)]
    pub table: BTreeMap<(T, T), usize>,
}

pub fn kappa_report<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<KappaReport<T>, EvalError> {
    check_lengths(a.len(), b.len())?;
    let n = a.len() as f64;
    let mut table = BTreeMap::new();
    let mut left: BTreeMap<&T, usize> = BTreeMap::new();
    let mut right: BTreeMap<&T, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        *table.entry((x.clone(), y.clone())).or_insert(0) += 1;
        *left.entry(x).or_insert(0) += 1;
        *right.entry(y).or_insert(0) += 1;
        if x == y {
            agree += 1;
        }
    }
    let observed = agree as f64 / n;
    let expected: f64 = left
        .iter()
        .map(|(k, &c)| c as f64 / n * right.get(k).copied().unwrap_or(0) as f64 / n)
        .sum();
    let kappa = if expected >= 1.0 {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(KappaReport {
        n: a.len(),
        kappa,
        observed,
        expected,
        table,
    })
}

pub fn cohen_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, EvalError> {
    kappa_report(a, b).map(|r| r.kappa)
}

fn word_bag(text: &str) -> HashMap<String, usize> {
    let doc = tokenize(text);
    let mut bag = HashMap::new();
    for i in (0..doc.token_count()).filter(|&i| doc.is_word(i)) {
        *bag.entry(doc.term(i)).or_insert(0) += 1;
    }
    bag
}

/// Multiset overlap F1 of lower-cased word tokens.
pub fn token_overlap_f1(pred: &str, gold: &str) -> f64 {
    let p = word_bag(pred);
    let g = word_bag(gold);
    let np: usize = p.values().sum();
    let ng: usize = g.values().sum();
    if np == 0 || ng == 0 {
        return 0.0;
    }
    let overlap: usize = p
        .iter()
        .map(|(t, &c)| c.min(g.get(t).copied().unwrap_or(0)))
        .sum();
    f1(overlap as f64 / np as f64, overlap as f64 / ng as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub predicted_real: usize,
    pub real_rate: Option<f64>,
}

/// Share of examples predicted real per equal-width bin of the machine
/// fraction in [0, 1].
pub fn fraction_curve(
    preds: &[Label],
    fractions: &[f64],
    bins: usize,
) -> Result<Vec<FractionBin>, EvalError> {
    fraction_curve_in(preds, fractions, bins, 1.0)
}

/// Same as [`fraction_curve`] over [0, upper], for ratio-to-original values.
pub fn fraction_curve_in(
    preds: &[Label],
    values: &[f64],
    bins: usize,
    upper: f64,
) -> Result<Vec<FractionBin>, EvalError> {
    if preds.len() != values.len() {
        return Err(EvalError::LengthMismatch(preds.len(), values.len()));
    }
    if bins == 0 {
        return Err(EvalError::NoBins);
    }
    let width = upper / bins as f64;
    let mut out: Vec<FractionBin> = (0..bins)
        .map(|bin| FractionBin {
            bin,
            lower: bin as f64 * width,
            upper: if bin + 1 == bins {
                upper
            } else {
                (bin + 1) as f64 * width
            },
            n: 0,
            predicted_real: 0,
            real_rate: None,
        })
        .collect();
    for (&p, &v) in preds.iter().zip(values) {
        if !(0.0..=upper).contains(&v) {
            return Err(EvalError::OutOfRange { value: v, upper });
        }
        let idx = ((v / width) as usize).min(bins - 1);
        out[idx].n += 1;
        if p == Label::Real {
            out[idx].predicted_real += 1;
        }
    }
    for b in &mut out {
        if b.n > 0 {
            b.real_rate = Some(b.predicted_real as f64 / b.n as f64);
        }
    }
    Ok(out)
}
