//! Trains the multi-task classifier and the knowledge-graph model on a
//! synthetic corpus and compares their test accuracy on the author task.
//!
//! ```text
//! cargo run --release --example train_classifiers
//! ```

use artctx::ingest::{
    build_label_space, default_stop_words, extract_title_keywords, AttributeFamily,
    TechniqueGrammar,
};
use artctx::kgraph::{build_graph, derive_attributes};
use artctx::models::{build_samples, train_kgm, train_mtl, ArchConfig, KgmModel, MtlModel, Sample, TrainConfig};
use artctx::node2vec::{generate_walks, train_embeddings, SkipGramConfig, WalkConfig};
use artctx::synth::{generate, SynthConfig};

fn main() -> artctx::Result<()> {
    let corpus = generate(&SynthConfig { paintings: 400, noise: 0.6, ..Default::default() })?;
    let spaces = AttributeFamily::ALL
        .iter()
        .map(|&f| build_label_space(&corpus.train, f, 2))
        .collect::<artctx::Result<Vec<_>>>()?;
    let train = build_samples(&corpus.train, &corpus.features, &spaces)?;
    let val = build_samples(&corpus.val, &corpus.features, &spaces)?;
    let test = build_samples(&corpus.test, &corpus.features, &spaces)?;
    let dim = corpus.features.dim();
    let arch = ArchConfig { trunk_dim: 64, final_relu: true };
    let cfg = TrainConfig { max_epochs: 60, patience: 15, learning_rate: 0.01, ..Default::default() };

    let tasks: Vec<(String, usize)> = spaces.iter().map(|s| (s.family.name().to_owned(), s.len())).collect();
    let mut mtl = MtlModel::new(dim, &tasks, None, arch, 0)?;
    let hist = train_mtl(&mut mtl, &train, &val, &cfg)?;
    println!("mtl: best epoch {} of {}", hist.best_epoch, hist.epochs.len());
    for (space, acc) in spaces.iter().zip(mtl.accuracies(&test)?) {
        println!("  {:<10} test accuracy {acc:.3}", space.family.name());
    }

    // context vectors for training paintings come from the graph
    let titles: Vec<&str> = corpus.train.iter().map(|r| r.title.as_str()).collect();
    let keywords = extract_title_keywords(&titles, 3, 3, &default_stop_words());
    let derived = derive_attributes(&corpus.train, &TechniqueGrammar::default(), &keywords);
    let g = build_graph(&corpus.train, &derived)?;
    let walks = generate_walks(&g, &WalkConfig { walk_length: 30, walks_per_node: 8, ..Default::default() })?;
    let table = train_embeddings(&g, &walks, &SkipGramConfig { dim: 32, epochs: 2, ..Default::default() }, 0)?;

    let author = AttributeFamily::ALL.iter().position(|&f| f == AttributeFamily::Author).expect("author family");
    let single = |s: &[Sample]| -> Vec<Sample> {
        s.iter().map(|x| Sample { labels: vec![x.labels[author]], ..x.clone() }).collect()
    };
    let mut kgm = KgmModel::new(dim, "author", spaces[author].len(), 32, (0.9, 0.1), arch, 0)?;
    let hist = train_kgm(&mut kgm, &single(&train), &single(&val), &table, &cfg)?;
    let last = hist.epochs.last().expect("at least one epoch");
    println!(
        "kgm: best epoch {}, final losses classification {:.3} encoder {:.3}",
        hist.best_epoch, last.losses["classification"], last.losses["encoder"]
    );
    println!("  author     test accuracy {:.3}", kgm.accuracy(&single(&test))?);
    Ok(())
}
