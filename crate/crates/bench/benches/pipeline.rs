use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kgen_core::matching::{
    resplit_dataset, train_swem_matcher, Embeddings, GroupLabels, MatcherExample, ResplitConfig, TrainConfig,
};
use kgen_core::pipeline::PipelineConfig;
use kgen_core::{
    extract_heads, infer, match_relations, score_corpus, Extractors, KnowledgeHead, Matcher, MatcherDataset, Metric,
    MetricParams, RelationRegistry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TEXT: &str = "PersonX becomes a great basketball player. The old hammer lies on the wooden table. \
                    PersonY drives to the crowded store after work. A heavy storm floods the small village.";

fn pool(size: usize, vocab: usize, seed: u64) -> MatcherDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=vocab).map(|r| (r as f64).powf(-1.1)).collect();
    let total: f64 = weights.iter().sum();
    let mut seen = std::collections::HashSet::new();
    let mut examples = Vec::with_capacity(size);
    while examples.len() < size {
        let words: Vec<String> = (0..rng.random_range(1..=3))
            .map(|_| {
                let mut x = rng.random::<f64>() * total;
                let rank = weights.iter().position(|w| {
                    x -= w;
                    x < 0.0
                });
                format!("w{}", rank.unwrap_or(vocab - 1))
            })
            .collect();
        let head = words.join(" ");
        if seen.insert(head.clone()) {
            let mut labels = [false; 3];
            labels[examples.len() % 3] = true;
            examples.push(MatcherExample {
                head,
                labels: GroupLabels::from_array(labels),
            });
        }
    }
    MatcherDataset::new(examples).unwrap()
}

fn extraction(c: &mut Criterion) {
    c.bench_function("extract_heads", |b| {
        b.iter(|| extract_heads(black_box(TEXT), Extractors::ALL).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let registry = RelationRegistry::builtin();
    let heads: Vec<KnowledgeHead> = extract_heads(TEXT, Extractors::ALL)
        .unwrap()
        .into_iter()
        .map(|h| h.head)
        .collect();
    let mut group = c.benchmark_group("match_relations");
    for (name, matcher) in [("base", Matcher::Base), ("heuristic", Matcher::Heuristic)] {
        group.bench_function(name, |b| {
            b.iter(|| match_relations(black_box(&heads), &matcher, &registry, None).unwrap())
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let dry = PipelineConfig {
        dry_run: true,
        ..PipelineConfig::default()
    };
    let stub = PipelineConfig::default();
    c.bench_function("infer/dry_run", |b| b.iter(|| infer(black_box(TEXT), &dry).unwrap()));
    c.bench_function("infer/stub", |b| b.iter(|| infer(black_box(TEXT), &stub).unwrap()));
}

fn resplit(c: &mut Criterion) {
    let mut group = c.benchmark_group("resplit");
    group.sample_size(20);
    for size in [2_000, 10_000] {
        let data = pool(size, size / 4, 7);
        group.throughput(Throughput::Elements(size as u64));
        for n in [0, 4] {
            let cfg = ResplitConfig {
                n,
                ..ResplitConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(format!("n{n}"), size), &data, |b, d| {
                b.iter(|| resplit_dataset(d, &cfg))
            });
        }
    }
    group.finish();
}

fn swem(c: &mut Criterion) {
    let data = pool(2_000, 500, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut table = Embeddings::new(100);
    for i in 0..500 {
        let v: Vec<f32> = (0..100).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        table.insert(format!("w{i}"), &v).unwrap();
    }
    let table = Arc::new(table);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("swem");
    group.sample_size(10);
    group.throughput(Throughput::Elements(data.len() as u64));
    group.bench_function("train_epoch", |b| {
        b.iter(|| train_swem_matcher(&data, table.clone(), &cfg).unwrap())
    });
    let (model, _) = train_swem_matcher(&data, table.clone(), &cfg).unwrap();
    group.bench_function("predict", |b| b.iter(|| model.predict_groups(black_box("w1 w20 w300"))));
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let words = ["to", "go", "home", "rest", "eat", "a", "meal", "sleep", "run", "the", "store", "buy"];
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(2..8))
            .map(|_| words[rng.random_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let candidates: Vec<String> = (0..1_000).map(|_| sentence(&mut rng)).collect();
    let references: Vec<Vec<String>> = (0..1_000)
        .map(|_| (0..3).map(|_| sentence(&mut rng)).collect())
        .collect();
    let params = MetricParams::default();
    let mut group = c.benchmark_group("score_corpus");
    group.throughput(Throughput::Elements(candidates.len() as u64));
    for metric in Metric::ALL {
        group.bench_function(metric.as_str(), |b| {
            b.iter(|| score_corpus(metric, &candidates, &references, &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, extraction, matching, end_to_end, resplit, swem, metrics);
criterion_main!(benches);
