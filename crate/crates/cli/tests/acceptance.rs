//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use vforge_cli::evaluate::cmd_eval;
use vforge_cli::modify::cmd_modify;
use vforge_cli::scorer::{bundled_documents, bundled_model};
use vforge_cli::{DetectorKind, EvalArgs, ModifyArgs, ScorerKind};
use vforge_core::dataset::{self, Dataset, Label, LabeledExample, Meta, Scenario};
use vforge_core::eval::{cohen_kappa, confusion, metrics, roc, token_overlap_f1};
use vforge_core::extension::{build_qa_prompt, remove_answer_sentence, ANSWER_CUE, QA_TEMPLATE};
use vforge_core::lm::{NgramModel, Scorer, UNKNOWN};
use vforge_core::negation::{modify_article, revert_edits, EditKind, ModificationConfig, Negation};
use vforge_core::text::{negation_occurrences, tokenize, Document};
use vforge_net::adapters::{
    AdapterError, ClientConfig, DetectorClient, HttpGenerator, RemoteScorer, DETECTOR_URL_VAR,
    MAX_ATTEMPTS,
};
use vforge_net::mock::{MockReply, MockServer};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn model() -> &'static NgramModel {
    static MODEL: OnceLock<NgramModel> = OnceLock::new();
    MODEL.get_or_init(bundled_model)
}

fn vocab() -> &'static [String] {
    static VOCAB: OnceLock<Vec<String>> = OnceLock::new();
    VOCAB.get_or_init(|| common::vocabulary(model().vocabulary()))
}

fn negation_preservation() -> Outcome {
    let mut rng = common::rng(1);
    let articles: Vec<(String, usize)> = (0..1000)
        .map(|i| {
            let m = [2, 6, 10][i % 3];
            let words = rng.random_range(50..=2000);
            (common::article(&mut rng, vocab(), words, m / 2), m)
        })
        .collect();
    let scorer = model();
    let start = Instant::now();
    let mut ok = 0;
    for (i, (text, m)) in articles.iter().enumerate() {
        let doc = Document::new(text.as_str());
        let cfg = ModificationConfig::new(*m, i as u64);
        let Ok(out) = modify_article(&doc, &cfg, scorer) else {
            continue;
        };
        let before = negation_occurrences(&doc).len();
        let after = negation_occurrences(&out.modified).len();
        ensure!(
            before == after,
            "article {i}: negations {before} -> {after}"
        );
        let rebuilt = revert_edits(out.modified.text(), &out.edits)
            .map_err(|e| format!("article {i}: {e}"))?;
        ensure!(rebuilt == *text, "article {i}: reconstruction differs");
        ok += 1;
    }
    let elapsed = start.elapsed();
    ensure!(
        ok == articles.len(),
        "only {ok} of {} articles modified",
        articles.len()
    );
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{ok} articles, 0 failures, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pair {
    position: usize,
    word: Negation,
    score: f64,
}

type Key = (Vec<f64>, Vec<usize>, Vec<u8>);

/// Best `h` pairs with distinct positions: highest sorted score vector,
/// then the lowest positions, then "not" over "no".
fn brute_force_insertions(pairs: &[Pair], h: usize) -> Vec<(usize, Negation)> {
    fn key(set: &[Pair]) -> Key {
        let mut scores: Vec<f64> = set.iter().map(|p| p.score).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let mut by_pos: Vec<Pair> = set.to_vec();
        by_pos.sort_by_key(|p| p.position);
        let positions = by_pos.iter().map(|p| p.position).collect();
        let words = by_pos
            .iter()
            .map(|p| (p.word == Negation::No) as u8)
            .collect();
        (scores, positions, words)
    }
    fn better(a: &Key, b: &Key) -> bool {
        for (x, y) in a.0.iter().zip(&b.0) {
            if x != y {
                return x > y;
            }
        }
        if a.1 != b.1 {
            return a.1 < b.1;
        }
        a.2 < b.2
    }
    fn walk(
        pairs: &[Pair],
        from: usize,
        h: usize,
        chosen: &mut Vec<Pair>,
        best: &mut Option<(Vec<Pair>, Key)>,
    ) {
        if chosen.len() == h {
            let k = key(chosen);
            if best.as_ref().is_none_or(|(_, bk)| better(&k, bk)) {
                *best = Some((chosen.clone(), k));
            }
            return;
        }
        for i in from..pairs.len() {
            if chosen.iter().any(|c| c.position == pairs[i].position) {
                continue;
            }
            chosen.push(pairs[i]);
            walk(pairs, i + 1, h, chosen, best);
            chosen.pop();
        }
    }
    let mut best = None;
    walk(pairs, 0, h, &mut Vec::new(), &mut best);
    let mut out: Vec<(usize, Negation)> = best
        .expect("h <= positions")
        .0
        .iter()
        .map(|p| (p.position, p.word))
        .collect();
    out.sort_by_key(|p| p.0);
    out
}

fn insertion_optimality() -> Outcome {
    let mut rng = common::rng(2);
    let scorer = model();
    let mut compared = 0;
    for i in 0..200 {
        let m = [2, 4, 6][i % 3];
        let words = rng.random_range(50..=400);
        let text = common::article(&mut rng, vocab(), words, m / 2);
        let cfg = ModificationConfig::new(m, 1000 + i as u64).with_candidates(20);
        let out = modify_article(&Document::new(text.as_str()), &cfg, scorer)
            .map_err(|e| format!("article {i}: {e}"))?;

        let mut deleted = text.clone();
        for e in out.edits.iter().filter(|e| e.kind == EditKind::Deletion) {
            deleted.replace_range(e.offset..e.offset + e.before.len(), &e.after);
        }
        let doc = tokenize(&deleted);
        ensure!(
            out.candidate_positions.len() == 20,
            "article {i}: {} candidates",
            out.candidate_positions.len()
        );
        let mut pairs = Vec::new();
        for &p in &out.candidate_positions {
            let context: Vec<String> = (0..p)
                .filter(|&t| doc.is_word(t))
                .map(|t| doc.term(t))
                .collect();
            let follower = doc.term(p);
            for word in [Negation::Not, Negation::No] {
                let mut extended = context.clone();
                extended.push(word.as_str().to_string());
                let score =
                    scorer.prob(&context, word.as_str()) * scorer.prob(&extended, &follower);
                pairs.push(Pair {
                    position: p,
                    word,
                    score,
                });
            }
        }
        let expected = brute_force_insertions(&pairs, m / 2);
        let mut got: Vec<(usize, Negation)> = out
            .edits
            .iter()
            .filter(|e| e.kind == EditKind::Insertion)
            .map(|e| (e.token_position, e.word))
            .collect();
        got.sort_by_key(|p| p.0);
        ensure!(
            got == expected,
            "article {i}: chose {got:?}, brute force {expected:?}"
        );
        compared += 1;
    }
    Ok(format!("{compared} articles, exact match"))
}

/// Sentence-level TF-IDF cosine argmax written out directly.
fn tfidf_argmax(doc: &Document, query: &str) -> usize {
    let n = doc.sentences().len();
    let sentences: Vec<Vec<String>> = (0..n).map(|s| doc.sentence_terms(s)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for terms in &sentences {
        for t in terms.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let idf = |t: &str| match df.get(t) {
        Some(&d) => (n as f64 / d as f64).ln(),
        None => (n as f64).ln(),
    };
    let vector = |terms: &[String]| -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in terms {
            *tf.entry(t.clone()).or_default() += 1.0;
        }
        tf.into_iter()
            .map(|(t, c)| {
                let w = c * idf(&t);
                (t, w)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect()
    };
    let q = vector(&tokenize(query).terms());
    let sq = |v: &BTreeMap<String, f64>| v.values().map(|w| w * w).sum::<f64>();
    let mut best = (0, f64::NEG_INFINITY);
    for (s, terms) in sentences.iter().enumerate() {
        let v = vector(terms);
        let (sa, sb) = (sq(&v), sq(&q));
        let cos = if sa == 0.0 || sb == 0.0 {
            0.0
        } else {
            let (small, large) = if v.len() <= q.len() {
                (&v, &q)
            } else {
                (&q, &v)
            };
            let dot: f64 = small
                .iter()
                .map(|(t, w)| w * large.get(t).copied().unwrap_or(0.0))
                .sum();
            (dot / (sa * sb).sqrt()).clamp(0.0, 1.0)
        };
        if cos > best.1 {
            best = (s, cos);
        }
    }
    best.0
}

fn tfidf_removal() -> Outcome {
    let mut rng = common::rng(3);
    let mut non_first = 0;
    for i in 0..50 {
        let words = rng.random_range(40..=300);
        let text = common::article(&mut rng, vocab(), words, 0);
        let doc = Document::new(text.as_str());
        let n = doc.sentences().len();
        if n < 2 {
            continue;
        }
        // Question drawn from one sentence, answer from another plus noise.
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| doc.sentence_terms(rng.random_range(0..n));
        let q: Vec<String> = pick(&mut rng).into_iter().take(5).collect();
        let mut a: Vec<String> = pick(&mut rng).into_iter().take(4).collect();
        a.push(vocab()[rng.random_range(0..vocab().len())].clone());
        let (question, answer) = (q.join(" ") + "?", a.join(" "));
        let expected = tfidf_argmax(&doc, &format!("{question} {answer}"));
        let (reduced, got) =
            remove_answer_sentence(&doc, &question, &answer).map_err(|e| e.to_string())?;
        ensure!(
            got == expected,
            "article {i}: removed {got}, oracle {expected}"
        );
        ensure!(
            reduced.sentences().len() == n - 1,
            "article {i}: sentence count not reduced by one"
        );
        non_first += (got != 0) as usize;
    }
    Ok(format!(
        "50 articles, exact match ({non_first} non-first argmax)"
    ))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn brute_auc(scores: &[f64], golds: &[Label]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, gi) in golds.iter().enumerate() {
        for (j, gj) in golds.iter().enumerate() {
            if *gi == Label::Fake && *gj == Label::Real {
                pairs += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

fn metric_oracles() -> Outcome {
    use Label::{Fake as F, Real as R};
    let tol = 1e-9;
    let m = metrics(&vforge_core::ConfusionMatrix {
        tp: 3,
        fp: 1,
        fn_: 1,
        tn: 5,
    });
    ensure!(
        close(m.fake_precision, 0.75, tol) && close(m.fake_recall, 0.75, tol),
        "fake p/r {m:?}"
    );
    ensure!(
        close(m.real_precision, 5.0 / 6.0, tol) && close(m.real_recall, 5.0 / 6.0, tol),
        "real p/r {m:?}"
    );
    ensure!(
        close(m.macro_f1, (0.75 + 5.0 / 6.0) / 2.0, tol),
        "macro-F1 {}",
        m.macro_f1
    );
    ensure!(close(m.accuracy, 0.8, tol), "accuracy {}", m.accuracy);
    let zero = metrics(&vforge_core::ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 3,
        tn: 2,
    });
    ensure!(
        zero.fake_precision == 0.0,
        "0/0 precision {}",
        zero.fake_precision
    );

    let preds = [F, F, R, R, F, R, F, R];
    let golds = [F, R, R, F, F, R, R, R];
    let c = confusion(&preds, &golds).map_err(|e| e.to_string())?;
    ensure!(
        (c.tp, c.fp, c.fn_, c.tn) == (2, 2, 1, 3),
        "8-item tally {c:?}"
    );

    let auc = roc(&[0.9, 0.8, 0.3, 0.1], &[F, R, F, R])
        .map_err(|e| e.to_string())?
        .auc;
    ensure!(close(auc, 0.75, tol), "AUC {auc}");
    let flat = roc(&[0.4; 6], &[F, R, F, R, R, F])
        .map_err(|e| e.to_string())?
        .auc;
    ensure!(close(flat, 0.5, tol), "all-tied AUC {flat}");
    let sep = roc(&[0.9, 0.8, 0.2, 0.1], &[F, F, R, R])
        .map_err(|e| e.to_string())?
        .auc;
    ensure!(close(sep, 1.0, tol), "separating AUC {sep}");

    let k0 = cohen_kappa(&[R, R, F, F], &[R, F, R, F]).map_err(|e| e.to_string())?;
    ensure!(close(k0, 0.0, tol), "kappa {k0}");
    let k5 = cohen_kappa(&[R, R, R, F], &[R, R, F, F]).map_err(|e| e.to_string())?;
    ensure!(close(k5, 0.5, tol), "kappa {k5}");
    let k1 = cohen_kappa(&[R, F, F], &[R, F, F]).map_err(|e| e.to_string())?;
    ensure!(close(k1, 1.0, tol), "kappa {k1}");

    let f1 = token_overlap_f1(
        "2 blocks from the Capitol",
        "2 blocks from the U.S. Capitol",
    );
    ensure!(close(f1, 5.0 / 6.0, tol), "overlap F1 {f1}");
    ensure!(
        close(token_overlap_f1("a b c", "a b c"), 1.0, tol),
        "identical overlap"
    );
    ensure!(token_overlap_f1("a b", "c d") == 0.0, "disjoint overlap");

    let eval: Vec<Label> = (0..100).map(|i| if i < 51 { R } else { F }).collect();
    let (label, report) =
        vforge_core::eval::majority_baseline(&[R, R, R, F, F], &eval).map_err(|e| e.to_string())?;
    ensure!(
        label == R && close(report.accuracy, 0.51, tol),
        "majority accuracy {}",
        report.accuracy
    );

    let mut rng = common::rng(4);
    let mut worst: f64 = 0.0;
    for set in 0..100 {
        let n = rng.random_range(2..=200);
        let mut golds: Vec<Label> = (0..n)
            .map(|_| if rng.random_bool(0.5) { F } else { R })
            .collect();
        golds[0] = F;
        golds[1] = R;
        // Coarse scores so ties are common.
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..25) as f64 / 24.0)
            .collect();
        let got = roc(&scores, &golds)
            .map_err(|e| format!("set {set}: {e}"))?
            .auc;
        let want = brute_auc(&scores, &golds);
        worst = worst.max((got - want).abs());
        ensure!(
            close(got, want, 1e-12),
            "set {set}: AUC {got} vs pair count {want}"
        );
    }
    Ok(format!(
        "hand examples within 1e-9, 100 AUC sets max error {worst:.1e}"
    ))
}

fn scorer_normalization() -> Outcome {
    let model = model();
    ensure!(model.order() == 3, "order {}", model.order());
    let mut rng = common::rng(5);
    let mut worst: f64 = 0.0;
    for c in 0..100 {
        let len = rng.random_range(0..=4);
        let context: Vec<String> = (0..len)
            .map(|_| {
                if rng.random_bool(0.1) {
                    "zzqx".to_string()
                } else {
                    model.vocabulary()[rng.random_range(0..model.vocabulary().len())].clone()
                }
            })
            .collect();
        let mut total = model
            .next_token_prob(&context, UNKNOWN)
            .map_err(|e| e.to_string())?;
        for term in model.vocabulary() {
            total += model
                .next_token_prob(&context, term)
                .map_err(|e| e.to_string())?;
        }
        worst = worst.max((total - 1.0).abs());
        ensure!(
            close(total, 1.0, 1e-9),
            "context {c} {context:?}: sum {total}"
        );
    }
    Ok(format!(
        "100 contexts over {} terms, max |sum - 1| = {worst:.1e}",
        model.vocabulary().len() + 1
    ))
}

fn modify_args(in_dir: &Path, out: &Path, m: usize, seed: u64, jobs: usize) -> ModifyArgs {
    ModifyArgs {
        in_dir: in_dir.to_path_buf(),
        out: out.to_path_buf(),
        m,
        k: vforge_core::negation::DEFAULT_CANDIDATES,
        seed,
        scorer: ScorerKind::Ngram,
        lm: None,
        jobs: Some(jobs),
        quiet: true,
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = common::rng(6);
    let articles: Vec<String> = (0..30)
        .map(|_| {
            let w = rng.random_range(60..600);
            common::article(&mut rng, vocab(), w, 2)
        })
        .collect();
    let dir = tmp.path().join("in");
    common::write_articles(&dir, &articles);
    let outs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
        .iter()
        .map(|(jobs, name)| {
            let out = tmp.path().join(format!("{name}.jsonl"));
            cmd_modify(&modify_args(&dir, &out, 4, 42, *jobs)).map(|_| std::fs::read(&out).unwrap())
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(outs[0] == outs[1], "two runs with the same seed differ");
    ensure!(outs[0] == outs[2], "output depends on the worker count");

    let ds = dataset::read_jsonl(tmp.path().join("a.jsonl")).map_err(|e| e.to_string())?;
    let ids = |s: &dataset::DatasetSplit| s.eval.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    let a = dataset::split(&ds, 0.3, 9).map_err(|e| e.to_string())?;
    let b = dataset::split(&ds, 0.3, 9).map_err(|e| e.to_string())?;
    ensure!(a == b, "split with a fixed seed differs");
    Ok(format!(
        "{} bytes identical across 3 runs; split of {} identical ({} eval)",
        outs[0].len(),
        ds.len(),
        ids(&a).len()
    ))
}

fn split_fraction() -> Outcome {
    let examples: Vec<LabeledExample> = (0..100)
        .map(|i| {
            let label = if i % 100 < 51 {
                Label::Real
            } else {
                Label::Fake
            };
            LabeledExample::new(
                format!("e{i}"),
                format!("text {i}"),
                label,
                Scenario::FullGeneration,
            )
        })
        .collect();
    let ds = Dataset::assemble(examples).map_err(|e| e.to_string())?;
    let mut detail = String::new();
    for seed in 0..20 {
        let s = dataset::split(&ds, 0.3, seed).map_err(|e| e.to_string())?;
        ensure!(
            s.eval.len() == 30 && s.train.len() == 70,
            "seed {seed}: {} eval",
            s.eval.len()
        );
        let train: BTreeSet<&str> = s.train.iter().map(|e| e.id.as_str()).collect();
        ensure!(
            s.eval.iter().all(|e| !train.contains(e.id.as_str())),
            "seed {seed}: overlap"
        );
        for label in Label::ALL {
            let have = s.eval.iter().filter(|e| e.label == label).count() as f64;
            let share = 0.3 * ds.summary().get(label) as f64;
            ensure!(
                (have - share).abs() <= 1.0,
                "seed {seed}: {label} {have} vs {share}"
            );
        }
        if seed == 0 {
            let c = vforge_core::dataset::ClassCounts::of(&s.eval);
            detail = format!("30 eval ({} real, {} fake) for 20 seeds", c.real, c.fake);
        }
    }
    Ok(detail)
}

fn prompt_bytes() -> Outcome {
    let golden = include_bytes!("golden/qa_prompt.txt");
    let article = Document::new(
        "The river council met on Tuesday. Members voted 5 to 2 to repair the old bridge.\n\nWork starts in May.",
    );
    let prompt =
        build_qa_prompt(&article, "Who voted to repair the bridge?").map_err(|e| e.to_string())?;
    ensure!(
        prompt.as_bytes() == golden,
        "prompt differs from golden file:\n{prompt:?}"
    );
    ensure!(prompt.ends_with("\nAnswer:"), "missing answer cue");
    ensure!(
        prompt.contains("We attempt to answer: "),
        "missing template"
    );
    ensure!(
        QA_TEMPLATE == "We attempt to answer: " && ANSWER_CUE == "\nAnswer:",
        "constants changed"
    );
    Ok(format!("{} bytes match", golden.len()))
}

fn qa_dataset(path: &Path) -> Result<(), String> {
    let mut rng = common::rng(7);
    let fake = Normal::new(20.0, 5.0).map_err(|e| e.to_string())?;
    let real = Normal::new(8.0, 3.0).map_err(|e| e.to_string())?;
    let examples: Vec<LabeledExample> = (0..400)
        .map(|i| {
            let label = if i % 100 < 51 {
                Label::Real
            } else {
                Label::Fake
            };
            let dist = if label == Label::Fake { &fake } else { &real };
            let x: f64 = dist.sample(&mut rng);
            let n = x.round().max(1.0) as usize;
            let answer: Vec<&str> = (0..n)
                .map(|k| if k % 2 == 0 { "the" } else { "bridge" })
                .collect();
            let answer = answer.join(" ") + ".";
            LabeledExample::new(
                format!("q{i}"),
                format!("Who repaired it? {answer}"),
                label,
                Scenario::QaExtension,
            )
            .with_meta(Meta {
                question: Some("Who repaired it?".into()),
                answer: Some(answer),
                answer_word_count: Some(n),
                ..Meta::default()
            })
        })
        .collect();
    dataset::write_jsonl(&examples, path).map_err(|e| e.to_string())
}

fn eval_args(path: &Path, detector: DetectorKind) -> EvalArgs {
    EvalArgs {
        dataset: path.to_path_buf(),
        detector,
        split_seed: 0,
        eval_fraction: 0.3,
        max_answer_words: None,
        fraction_bins: None,
        report: None,
        roc: None,
        name: None,
        quiet: true,
    }
}

fn baseline_gap() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join("qa.jsonl");
    qa_dataset(&path)?;
    let length =
        cmd_eval(&eval_args(&path, DetectorKind::LengthBaseline)).map_err(|e| e.to_string())?;
    let majority =
        cmd_eval(&eval_args(&path, DetectorKind::Majority)).map_err(|e| e.to_string())?;
    let gap = length.report.accuracy - majority.report.accuracy;
    ensure!(
        gap >= 0.10,
        "length {:.3} vs majority {:.3}",
        length.report.accuracy,
        majority.report.accuracy
    );
    Ok(format!(
        "length {:.1}% vs majority {:.1}% (+{:.1} points)",
        100.0 * length.report.accuracy,
        100.0 * majority.report.accuracy,
        100.0 * gap
    ))
}

fn end_to_end() -> Outcome {
    let corpus_words: usize = bundled_documents().iter().map(Document::word_count).sum();
    ensure!(
        corpus_words >= 100_000,
        "bundled corpus has {corpus_words} words"
    );

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = common::rng(8);
    let articles: Vec<String> = (0..100)
        .map(|_| {
            let w = rng.random_range(150..1500);
            common::article(&mut rng, vocab(), w, 3)
        })
        .collect();
    let dir = tmp.path().join("articles");
    common::write_articles(&dir, &articles);
    let out = tmp.path().join("mod.jsonl");

    let start = Instant::now();
    let summary = cmd_modify(&modify_args(&dir, &out, 6, 0, 8)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "modify took {elapsed:?}");
    ensure!(
        summary.modified == 100,
        "{} of 100 articles modified",
        summary.modified
    );
    // Reading re-checks ids, metadata, reconstruction and negation counts.
    let ds = dataset::read_jsonl(&out).map_err(|e| e.to_string())?;
    ensure!(ds.len() == 200, "{} examples", ds.len());

    let server = MockServer::always_fake();
    std::env::set_var(DETECTOR_URL_VAR, server.url());
    let result = cmd_eval(&eval_args(&out, DetectorKind::Remote));
    std::env::remove_var(DETECTOR_URL_VAR);
    let eval = result.map_err(|e| e.to_string())?;
    let total = eval.eval.real + eval.eval.fake;
    let prevalence = eval.eval.fake as f64 / total as f64;
    ensure!(
        server.request_count() == total,
        "{} detector calls for {total} eval examples",
        server.request_count()
    );
    ensure!(
        eval.report.fake_recall == 1.0,
        "recall {}",
        eval.report.fake_recall
    );
    ensure!(
        close(eval.report.fake_precision, prevalence, 1e-9),
        "precision {} vs {prevalence}",
        eval.report.fake_precision
    );
    Ok(format!(
        "corpus {corpus_words} words; modify 100 articles in {:.1}s; recall 1.0, precision {:.4} = prevalence",
        elapsed.as_secs_f64(),
        eval.report.fake_precision
    ))
}

fn fast() -> ClientConfig {
    ClientConfig {
        timeout: Duration::from_millis(300),
        max_attempts: MAX_ATTEMPTS,
        backoff: Duration::from_millis(5),
        token: None,
    }
}

fn adapter_faults() -> Outcome {
    let request = vforge_core::GeneratorRequest {
        prompt: "p".into(),
        max_sentences: 1,
        temperature: 1.0,
        top_k: 40,
    };
    let mut lines = Vec::new();

    let server = MockServer::start(2, |_| MockReply::status(500));
    let err = HttpGenerator::new(&server.url(), fast())
        .request(&request)
        .unwrap_err();
    ensure!(
        matches!(
            err,
            AdapterError::Transport {
                status: Some(500),
                ..
            }
        ),
        "500 gave {err:?}"
    );
    ensure!(
        server.request_count() == 3,
        "500: {} attempts",
        server.request_count()
    );
    let ids: BTreeSet<String> = server
        .requests()
        .iter()
        .filter_map(|r| r.header("X-Request-Id").map(str::to_string))
        .collect();
    ensure!(ids.len() == 1, "retries used {} request ids", ids.len());
    lines.push("500 x3".to_string());

    let server = MockServer::start(4, |_| {
        MockReply::json(serde_json::json!({ "text": "late" })).after(Duration::from_millis(800))
    });
    let err = HttpGenerator::new(&server.url(), fast())
        .request(&request)
        .unwrap_err();
    ensure!(err == AdapterError::Timeout, "slow server gave {err:?}");
    ensure!(
        server.request_count() <= 3,
        "timeout: {} attempts",
        server.request_count()
    );
    lines.push(format!("timeout x{}", server.request_count()));

    let server = MockServer::start(1, |_| MockReply::raw("{\"text\": "));
    let err = HttpGenerator::new(&server.url(), fast())
        .request(&request)
        .unwrap_err();
    ensure!(
        matches!(err, AdapterError::MalformedResponse(_)),
        "bad JSON gave {err:?}"
    );
    ensure!(
        server.request_count() == 1,
        "malformed: {} attempts",
        server.request_count()
    );
    lines.push("malformed x1".to_string());

    let server = MockServer::start(1, |_| {
        MockReply::json(serde_json::json!({ "label": "maybe" }))
    });
    let err = DetectorClient::new(&server.url(), fast())
        .detect("x")
        .unwrap_err();
    ensure!(
        matches!(err, AdapterError::MalformedResponse(_)),
        "bad label gave {err:?}"
    );

    let server = MockServer::start(1, |_| {
        MockReply::json(serde_json::json!({ "probs": [0.5, 1.5] }))
    });
    let err = RemoteScorer::new(&server.url(), fast())
        .score_tokens(&[], &["not", "no"])
        .unwrap_err();
    ensure!(
        err == AdapterError::BadProbability(1.5),
        "bad probability gave {err:?}"
    );

    let server = MockServer::start(1, |_| MockReply::status(404));
    let err = DetectorClient::new(&server.url(), fast())
        .detect("x")
        .unwrap_err();
    ensure!(
        matches!(
            err,
            AdapterError::Transport {
                status: Some(404),
                ..
            }
        ),
        "404 gave {err:?}"
    );
    ensure!(
        server.request_count() == 1,
        "404: {} attempts",
        server.request_count()
    );
    lines.push("404 x1".to_string());

    let calls = std::sync::atomic::AtomicUsize::new(0);
    let server = MockServer::start(1, move |_| {
        if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 {
            MockReply::status(503)
        } else {
            MockReply::json(serde_json::json!({ "text": "Recovered." }))
        }
    });
    let text = HttpGenerator::new(&server.url(), fast())
        .request(&request)
        .map_err(|e| e.to_string())?;
    ensure!(
        text == "Recovered." && server.request_count() == 2,
        "503 recovery"
    );
    lines.push("503 then ok x2".to_string());
    Ok(lines.join(", "))
}

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("negation count preservation", negation_preservation),
        ("insertion optimality", insertion_optimality),
        ("tf-idf answer removal", tfidf_removal),
        ("metric oracles", metric_oracles),
        ("scorer normalization", scorer_normalization),
        ("determinism", determinism),
        ("split fraction", split_fraction),
        ("prompt bytes", prompt_bytes),
        ("baseline sanity", baseline_gap),
        ("end-to-end desk run", end_to_end),
        ("adapter fault handling", adapter_faults),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{secs:.1}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.1}s]: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
