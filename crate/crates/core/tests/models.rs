mod common;

use artctx::ingest::EmbeddingTable;
use artctx::models::{
    context_key, extract_embedding, mtl_forward, train_kgm, train_mtl, ArchConfig, KgmModel,
    MtlModel, Sample, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tasks_of(spaces: &[artctx::ingest::LabelSpace]) -> Vec<(String, usize)> {
    spaces.iter().map(|s| (s.family.name().to_owned(), s.len())).collect()
}

#[test]
fn encoder_learns_a_linear_context_map() {
    let (all, spaces) = common::separable_samples(5, 0.2);
    let author = 3;
    let samples: Vec<Sample> = all
        .iter()
        .map(|s| Sample { labels: vec![s.labels[author]], ..s.clone() })
        .collect();
    let dim = samples[0].feature.len();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let map: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()).collect();
    let mut table = EmbeddingTable::new(4).unwrap();
    for s in &samples {
        let u: Vec<f64> = map.iter().map(|row| row.iter().zip(&s.feature).map(|(a, b)| a * b).sum()).collect();
        table.insert_f64(context_key(&s.id), &u).unwrap();
    }
    let arch = ArchConfig { trunk_dim: 64, final_relu: true };
    let mut kgm = KgmModel::new(dim, "author", spaces[author].len(), 4, (0.5, 0.5), arch, 1).unwrap();
    let cfg = TrainConfig { max_epochs: 150, patience: 150, learning_rate: 0.01, ..Default::default() };
    let hist = train_kgm(&mut kgm, &samples, &samples, &table, &cfg).unwrap();
    let encoder: Vec<f64> = hist.epochs.iter().map(|e| e.losses["encoder"]).collect();
    assert!(encoder.last().unwrap() < &0.01, "first {} last {}", encoder[0], encoder.last().unwrap());
}

#[test]
fn zero_patience_runs_one_epoch() {
    let (data, spaces) = common::separable_samples(1, 0.3);
    let mut m = MtlModel::new(data[0].feature.len(), &tasks_of(&spaces), None, ArchConfig { trunk_dim: 16, final_relu: true }, 0).unwrap();
    let cfg = TrainConfig { patience: 0, max_epochs: 50, ..Default::default() };
    let hist = train_mtl(&mut m, &data, &data, &cfg).unwrap();
    assert_eq!(hist.epochs.len(), 1);
}

#[test]
fn training_history_is_deterministic() {
    let (data, spaces) = common::separable_samples(2, 0.3);
    let (train, val) = data.split_at(120);
    let run = || {
        let mut m = MtlModel::new(train[0].feature.len(), &tasks_of(&spaces), None, ArchConfig { trunk_dim: 16, final_relu: true }, 4).unwrap();
        let cfg = TrainConfig { max_epochs: 10, learning_rate: 0.01, seed: 6, ..Default::default() };
        let hist = train_mtl(&mut m, train, val, &cfg).unwrap();
        (hist.to_json_lines(), m.to_checkpoint().to_bytes())
    };
    assert_eq!(run(), run());
}

#[test]
fn early_stopping_returns_the_best_epoch() {
    let (data, spaces) = common::separable_samples(3, 0.8);
    let (train, val) = data.split_at(100);
    let mut m = MtlModel::new(train[0].feature.len(), &tasks_of(&spaces), None, ArchConfig { trunk_dim: 16, final_relu: false }, 1).unwrap();
    let cfg = TrainConfig { max_epochs: 40, patience: 5, learning_rate: 0.01, ..Default::default() };
    let hist = train_mtl(&mut m, train, val, &cfg).unwrap();
    let after_best = &hist.epochs[hist.best_epoch..];
    assert!(after_best.iter().all(|e| e.val_metric <= hist.best_val_metric));
    let acc = m.accuracies(val).unwrap();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    assert_eq!(mean.to_bits(), hist.best_val_metric.to_bits());
}

#[test]
fn extracted_embedding_matches_forward_pass() {
    let (data, spaces) = common::separable_samples(4, 0.3);
    let m = MtlModel::new(data[0].feature.len(), &tasks_of(&spaces), None, ArchConfig { trunk_dim: 24, final_relu: true }, 3).unwrap();
    for s in data.iter().take(10) {
        let out = mtl_forward(&m, &s.feature).unwrap();
        assert_eq!(extract_embedding(&m, &s.feature).unwrap(), out.embedding);
    }
    // unseen painting, no context table involved
    let kgm = KgmModel::new(data[0].feature.len(), "type", 4, 8, (0.9, 0.1), ArchConfig { trunk_dim: 24, final_relu: true }, 3).unwrap();
    let e = extract_embedding(&kgm, &vec![0.3; data[0].feature.len()]).unwrap();
    assert_eq!(e.len(), 24);
}
