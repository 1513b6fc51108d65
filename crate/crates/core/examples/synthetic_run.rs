//! Runs the feature baseline and the encoder on a synthetic corpus and
//! prints the numbers. `cargo run --release --example synthetic_run -- [seed] [--no-encoder]`

use std::time::Instant;

use detext::corpus::Label;
use detext::features::{extract_features, NgramLm, DEFAULT_K, DEFAULT_ORDER};
use detext::net::{LogRegConfig, ModelConfig};
use detext::pipeline::{
    baseline_accuracy, evaluate, feature_ablation, fit_and_score, stratified_split, texts_with_label, train_loop,
    FeatureTable, TrainConfig, DEFAULT_RATIOS,
};
use detext::synthetic::generate;
use detext::tokenizer::BpeTokenizer;
use detext::Exec;

fn main() -> detext::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let encoder = !args.iter().any(|a| a == "--no-encoder");
    let exec = Exec::default();

    let records = generate(1000, seed);
    let split = stratified_split(&records, DEFAULT_RATIOS, seed)?;

    let lm = NgramLm::train(&texts_with_label(&records, &split.train, Label::Human), DEFAULT_ORDER, DEFAULT_K)?;
    let vectors: Vec<_> = extract_features(&records, &lm, exec).into_iter().map(|r| r.ok()).collect();
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    for label in [Label::Human, Label::Ai] {
        let ppl: Vec<f64> = vectors
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l == label)
            .filter_map(|(v, _)| v.map(|v| v.0[0]))
            .collect();
        let (lo, hi) = ppl.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!("{label}: ppl min {lo:.1} max {hi:.1}");
    }
    let table = FeatureTable { vectors: &vectors, labels: &labels };
    let cfg = LogRegConfig::default();
    let (model, _) = fit_and_score(&table, &split, &cfg, None, &split.val)?;
    let (xt, yt): (Vec<Vec<f64>>, Vec<Label>) = split
        .test
        .iter()
        .filter_map(|&i| vectors[i].map(|v| (v.0.to_vec(), labels[i])))
        .unzip();
    println!("baseline test accuracy {:.4}", baseline_accuracy(&model, &xt, &yt)?);
    for row in feature_ablation(&table, &split, &cfg, exec)? {
        println!("{:<24} {:.4} {:.4} {:+.4}", row.feature, row.acc_full, row.acc_without, row.delta);
    }

    if args.iter().any(|a| a == "--single") {
        for (j, name) in detext::features::FEATURE_NAMES.iter().enumerate() {
            let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<Label>) {
                ids.iter().filter_map(|&i| vectors[i].map(|v| (vec![v.0[j]], labels[i]))).unzip()
            };
            let (x, y) = pick(&split.train);
            let fit = detext::net::train_logreg(&x, &y, &cfg)?;
            let (xv, yv) = pick(&split.val);
            println!("only {name:<24} {:.4}", baseline_accuracy(&fit.model, &xv, &yv)?);
        }
    }

    if encoder {
        let train_texts: Vec<&str> = split.train.iter().map(|&i| records[i].clean_text.as_str()).collect();
        let t = Instant::now();
        let model_cfg = ModelConfig::default();
        let tok = BpeTokenizer::train(&train_texts, model_cfg.vocab_size)?;
        println!("tokenizer {:.1}s", t.elapsed().as_secs_f64());
        let ck = train_loop(&records, &split, &tok, &model_cfg, &TrainConfig { seed, ..TrainConfig::default() }, exec)?;
        for h in &ck.history {
            println!("epoch {} loss {:.4} val acc {:.4}", h.epoch, h.train_loss, h.val.accuracy);
        }
        let m = evaluate(&ck, &tok, &records, &split.test, exec)?;
        println!("encoder test accuracy {:.4} in {:.1}s", m.accuracy, t.elapsed().as_secs_f64());
    }
    Ok(())
}
