use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use tweetsent_bench::{batch, corpus, scores_and_labels};
use tweetsent_core::eval::column_roc_auc;
use tweetsent_core::model::{forward, init_params, ModelConfig};
use tweetsent_core::subword::build_vocabulary;

fn auc(c: &mut Criterion) {
    let mut group = c.benchmark_group("column_roc_auc");
    for n in [100, 10_000] {
        let (scores, labels) = scores_and_labels(n, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| column_roc_auc(black_box(&scores), black_box(&labels)).unwrap())
        });
    }
    group.finish();
}

fn subword(c: &mut Criterion) {
    let corpus = corpus(2000, 2);
    c.bench_function("build_vocabulary/2000x4096", |b| {
        b.iter(|| build_vocabulary(black_box(&corpus), 4096).unwrap())
    });
    let vocab = build_vocabulary(&corpus, 4096).unwrap();
    c.bench_function("encode/2000", |b| {
        b.iter(|| corpus.iter().map(|t| vocab.encode(black_box(t), 64).actual_len).sum::<usize>())
    });
}

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    let config = ModelConfig::new(4096, 3);
    let params = init_params::<f32>(&config).unwrap();
    let (texts, images) = batch(4, 4096, config.max_len, config.image_side, 3);
    group.bench_function("full_size/batch4", |b| {
        b.iter(|| forward(&params, black_box(&texts), black_box(&images)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, auc, subword, network);
criterion_main!(benches);
