mod common;

use artctx::node2vec::{generate_walks, train_skipgram, SkipGramConfig, WalkConfig};

#[test]
fn walks_do_not_depend_on_thread_count() {
    let g = common::barbell();
    let cfg = WalkConfig { p: 0.5, q: 2.0, walk_length: 30, walks_per_node: 8, seed: 42 };
    let parallel = generate_walks(&g, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| generate_walks(&g, &cfg).unwrap());
    assert_eq!(parallel, single);
}

#[test]
fn skipgram_loss_stays_within_noise_band() {
    let g = common::barbell();
    let walks = generate_walks(&g, &WalkConfig { walk_length: 40, walks_per_node: 20, seed: 3, ..Default::default() }).unwrap();
    let cfg = SkipGramConfig { dim: 16, window: 5, epochs: 8, ..Default::default() };
    let model = train_skipgram(&walks, g.node_count(), &cfg, 3, |_, _| {}).unwrap();
    let loss = &model.epoch_loss;
    assert_eq!(loss.len(), 8);
    for w in loss.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{loss:?}");
    }
}

#[test]
fn same_seed_same_embeddings() {
    let g = common::path_graph(12);
    let walks = generate_walks(&g, &WalkConfig { walk_length: 10, walks_per_node: 5, seed: 1, ..Default::default() }).unwrap();
    let cfg = SkipGramConfig { dim: 8, window: 2, epochs: 2, ..Default::default() };
    let a = train_skipgram(&walks, 12, &cfg, 9, |_, _| {}).unwrap();
    let b = train_skipgram(&walks, 12, &cfg, 9, |_, _| {}).unwrap();
    assert_eq!(a, b);
}
