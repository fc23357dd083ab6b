use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vforge_bench::{article, dataset, scored, CORPUS};
use vforge_core::dataset::split;
use vforge_core::eval::roc;
use vforge_core::lm::{train_ngram, DEFAULT_LAMBDAS};
use vforge_core::negation::{modify_article, ModificationConfig};
use vforge_core::text::{most_similar_sentence, tokenize};

fn text(c: &mut Criterion) {
    c.bench_function("tokenize_corpus", |b| {
        b.iter(|| tokenize(black_box(CORPUS)))
    });
    let doc = article(2000);
    let query = tokenize("Who was the White Rabbit late for?").terms();
    c.bench_function("most_similar_sentence_2000w", |b| {
        b.iter(|| most_similar_sentence(black_box(&doc), black_box(&query)))
    });
}

fn scoring(c: &mut Criterion) {
    let corpus = [tokenize(CORPUS)];
    c.bench_function("train_ngram_order3", |b| {
        b.iter(|| train_ngram(black_box(&corpus), 3, &DEFAULT_LAMBDAS))
    });
    let model = train_ngram(&corpus, 3, &DEFAULT_LAMBDAS).unwrap();
    let mut group = c.benchmark_group("modify_article");
    for words in [200, 1000, 2000] {
        let doc = article(words);
        group.bench_with_input(BenchmarkId::from_parameter(words), &doc, |b, doc| {
            let cfg = ModificationConfig::new(6, 7);
            b.iter(|| modify_article(doc, &cfg, &model).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let (scores, golds) = scored(10_000);
    c.bench_function("roc_10k", |b| {
        b.iter(|| roc(black_box(&scores), black_box(&golds)).unwrap())
    });
    let ds = dataset(10_000);
    c.bench_function("split_10k", |b| {
        b.iter(|| split(black_box(&ds), 0.3, 1).unwrap())
    });
}

criterion_group!(benches, text, scoring, evaluation);
criterion_main!(benches);
