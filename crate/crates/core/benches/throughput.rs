//! Sequential against parallel execution for the data-parallel stages.
//!
//! `cargo bench -p detext`; build with `--no-default-features` to see the
//! fallback path, where both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use detext::corpus::Label;
use detext::features::{extract_features, NgramLm, DEFAULT_K, DEFAULT_ORDER};
use detext::net::{backward, init_params, Mode, ModelConfig};
use detext::synthetic::generate;
use detext::tokenizer::BpeTokenizer;
use detext::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let records = generate(200, 1);
    let texts: Vec<&str> = records.iter().map(|r| r.clean_text.as_str()).collect();
    let cfg = ModelConfig::default();
    let tok = BpeTokenizer::train(&texts, cfg.vocab_size).unwrap();

    let mut group = c.benchmark_group("batch_encode");
    group.throughput(Throughput::Elements(texts.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tok.batch_encode(&texts, cfg.max_len, exec))
        });
    }
    group.finish();

    let human: Vec<&str> = records.iter().filter(|r| r.label == Label::Human).map(|r| r.clean_text.as_str()).collect();
    let lm = NgramLm::train(&human, DEFAULT_ORDER, DEFAULT_K).unwrap();
    let mut group = c.benchmark_group("features");
    group.throughput(Throughput::Elements(records.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| extract_features(&records, &lm, exec)));
    }
    group.finish();

    let params = init_params(&cfg, 3);
    let batch: Vec<_> = records[..16]
        .iter()
        .map(|r| tok.encode_labeled(&r.clean_text, r.label, cfg.max_len))
        .collect();
    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(20);
    group.throughput(Throughput::Elements(batch.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| backward(&params, &cfg, &batch, Mode::Train, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
