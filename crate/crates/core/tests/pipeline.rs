use detext::corpus::{Label, TextRecord};
use detext::features::{FeatureVector, N_FEATURES};
use detext::net::{predict, Checkpoint, LogRegConfig, ModelConfig};
use detext::pipeline::{
    attention_entropy, encode_records, evaluate, evaluate_examples, feature_ablation, make_batches, stratified_split,
    train_loop, BatchOrder, ConfusionMatrix, FeatureTable, Metrics, SplitIndices, TrainConfig,
};
use detext::rng::Rng;
use detext::synthetic::generate;
use detext::tokenizer::BpeTokenizer;
use detext::Exec;

fn small_model(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        max_len: 64,
        d_model: 16,
        n_heads: 2,
        n_layers: 1,
        d_ff: 32,
        n_labels: 2,
        dropout_rate: 0.1,
    }
}

struct Setup {
    records: Vec<TextRecord>,
    split: SplitIndices,
    tok: BpeTokenizer,
    cfg: ModelConfig,
}

fn setup() -> Setup {
    let records = generate(40, 5);
    let split = stratified_split(&records, [0.6, 0.2, 0.2], 5).unwrap();
    let texts: Vec<&str> = split.train.iter().map(|&i| records[i].clean_text.as_str()).collect();
    let tok = BpeTokenizer::train(&texts, 350).unwrap();
    let cfg = small_model(tok.vocab_size());
    Setup { records, split, tok, cfg }
}

fn train(s: &Setup, epochs: usize) -> Checkpoint {
    let tc = TrainConfig {
        epochs,
        batch_size: 8,
        lr: 3e-3,
        seed: 9,
        snapshot_dir: None,
    };
    train_loop(&s.records, &s.split, &s.tok, &s.cfg, &tc, Exec::default()).unwrap()
}

#[test]
fn history_has_one_entry_per_epoch_and_best_is_kept() {
    let s = setup();
    let ck = train(&s, 3);
    assert_eq!(ck.history.len(), 3);
    assert_eq!(ck.history.iter().map(|h| h.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
    let best = ck.best_epoch.unwrap();
    let best_acc = ck.history[best - 1].val.accuracy;
    for h in &ck.history {
        assert!(h.train_loss.is_finite() && h.train_loss >= 0.0);
        // Later epochs only win with strictly higher accuracy.
        assert!(h.val.accuracy < best_acc || (h.val.accuracy == best_acc && h.epoch >= best));
    }
    // The stored parameters are the best epoch's: re-evaluation reproduces it.
    let again = evaluate(&ck, &s.tok, &s.records, &s.split.val, Exec::default()).unwrap();
    assert_eq!(again, ck.history[best - 1].val);
}

#[test]
fn training_is_bitwise_deterministic() {
    let s = setup();
    assert_eq!(train(&s, 2).to_bytes(), train(&s, 2).to_bytes());
}

#[test]
fn snapshots_are_written_per_epoch() {
    let s = setup();
    let dir = tempfile::tempdir().unwrap();
    let tc = TrainConfig {
        epochs: 2,
        batch_size: 8,
        lr: 3e-3,
        seed: 9,
        snapshot_dir: Some(dir.path().to_path_buf()),
    };
    let ck = train_loop(&s.records, &s.split, &s.tok, &s.cfg, &tc, Exec::default()).unwrap();
    let second = Checkpoint::load(dir.path().join("epoch-2.ckpt")).unwrap();
    assert_eq!(second.history, ck.history);
    assert!(dir.path().join("epoch-1.ckpt").exists());
}

#[test]
fn mismatched_vocab_is_rejected() {
    let s = setup();
    let cfg = small_model(s.tok.vocab_size() + 1);
    let err = train_loop(&s.records, &s.split, &s.tok, &cfg, &TrainConfig::default(), Exec::default());
    assert!(err.is_err());
}

#[test]
fn evaluation_matches_hand_aggregation_and_ignores_order() {
    let s = setup();
    let ck = train(&s, 1);
    let ids: Vec<usize> = s.split.test.iter().copied().take(10).collect();
    let examples = encode_records(&s.tok, &s.records, &ids, s.cfg.max_len, Exec::Sequential).unwrap();
    let mut cm = ConfusionMatrix::default();
    for ex in &examples {
        cm.record(ex.label.unwrap(), predict(&ck.params, &ck.config, ex).unwrap().label);
    }
    let hand = Metrics::from_confusion(cm).unwrap();
    assert_eq!(evaluate(&ck, &s.tok, &s.records, &ids, Exec::Sequential).unwrap(), hand);
    let mut reversed = examples.clone();
    reversed.reverse();
    assert_eq!(evaluate_examples(&ck.params, &ck.config, &reversed, Exec::Parallel).unwrap(), hand);
    assert!(evaluate(&ck, &s.tok, &s.records, &[], Exec::Sequential).is_err());
}

#[test]
fn evaluate_rejects_foreign_tokenizer() {
    let s = setup();
    let ck = train(&s, 1);
    let other = BpeTokenizer::train(&["something else entirely"], 300).unwrap();
    assert!(evaluate(&ck, &other, &s.records, &s.split.test, Exec::Sequential).is_err());
}

#[test]
fn attention_entropy_is_bounded() {
    let s = setup();
    let ck = train(&s, 1);
    let examples = encode_records(&s.tok, &s.records, &s.split.val, s.cfg.max_len, Exec::Sequential).unwrap();
    let heads = attention_entropy(&ck, &examples, Exec::default()).unwrap();
    assert_eq!(heads.len(), s.cfg.n_layers * s.cfg.n_heads);
    let max_entropy = (s.cfg.max_len as f64).ln();
    for h in heads {
        assert!(h.mean_entropy >= 0.0 && h.mean_entropy <= max_entropy, "{h:?}");
    }
    assert!(attention_entropy(&ck, &[], Exec::default()).is_err());
}

/// Feature 0 carries the label, feature 3 is constant, the rest are noise.
fn planted(n: usize) -> (Vec<Option<FeatureVector>>, Vec<Label>) {
    let mut rng = Rng::new(17);
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Human } else { Label::Ai };
        let mut v = [0.0; N_FEATURES];
        for x in v.iter_mut() {
            *x = rng.uniform(-1.0, 1.0);
        }
        v[0] = label.index() as f64 * 2.0 + rng.uniform(-0.5, 0.5);
        v[3] = 4.0;
        vectors.push(Some(FeatureVector(v)));
        labels.push(label);
    }
    (vectors, labels)
}

#[test]
fn ablation_ranks_the_planted_feature_first() {
    let (vectors, labels) = planted(400);
    let split = detext::pipeline::stratified_split_labels(
        &labels.iter().copied().enumerate().collect::<Vec<_>>(),
        [0.8, 0.1, 0.1],
        1,
    )
    .unwrap();
    let table = FeatureTable {
        vectors: &vectors,
        labels: &labels,
    };
    let rows = feature_ablation(&table, &split, &LogRegConfig::default(), Exec::default()).unwrap();
    assert_eq!(rows.len(), N_FEATURES);
    assert_eq!(rows[0].feature, "ppl");
    assert!(rows[0].delta > 0.2);
    let constant = rows.iter().find(|r| r.feature == "fk_grade").unwrap();
    assert!(constant.delta.abs() <= 0.005);
    for w in rows.windows(2) {
        assert!(w[0].delta >= w[1].delta);
    }
}

#[test]
fn batches_partition_the_input() {
    let ids: Vec<usize> = (100..137).collect();
    for order in [BatchOrder::Shuffled, BatchOrder::Sequential] {
        let batches = make_batches(&ids, 5, order, 3);
        assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= 5));
        let mut flat: Vec<usize> = batches.concat();
        flat.sort_unstable();
        assert_eq!(flat, ids);
    }
    assert_eq!(make_batches(&ids, 5, BatchOrder::Shuffled, 3), make_batches(&ids, 5, BatchOrder::Shuffled, 3));
    assert_ne!(make_batches(&ids, 5, BatchOrder::Shuffled, 3), make_batches(&ids, 5, BatchOrder::Shuffled, 4));
}
