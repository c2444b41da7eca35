//! Runs biased random walks over the knowledge graph, trains skip-gram on
//! them and lists the nearest nodes to a school.
//!
//! ```text
//! cargo run --release --example context_embeddings
//! ```

use artctx::ingest::{default_stop_words, extract_title_keywords, TechniqueGrammar};
use artctx::kgraph::{build_graph, derive_attributes, NodeFamily};
use artctx::node2vec::{generate_walks, train_skipgram, SkipGramConfig, WalkConfig};
use artctx::synth::{generate, SynthConfig};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (norm(a) * norm(b)).max(1e-12)
}

fn main() -> artctx::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let titles: Vec<&str> = corpus.train.iter().map(|r| r.title.as_str()).collect();
    let keywords = extract_title_keywords(&titles, 3, 3, &default_stop_words());
    let derived = derive_attributes(&corpus.train, &TechniqueGrammar::default(), &keywords);
    let g = build_graph(&corpus.train, &derived)?;

    let walks = generate_walks(&g, &WalkConfig { walk_length: 40, walks_per_node: 10, ..Default::default() })?;
    let cfg = SkipGramConfig { dim: 32, epochs: 3, ..Default::default() };
    let model = train_skipgram(&walks, g.node_count(), &cfg, 0, |epoch, m| {
        println!("epoch {}: loss {:.4}", epoch + 1, m.epoch_loss[epoch]);
    })?;

    let school = g
        .nodes()
        .iter()
        .position(|n| n.family == NodeFamily::School)
        .expect("corpus has schools");
    let mut near: Vec<(f64, usize)> = (0..g.node_count())
        .filter(|&i| i != school && g.node(i).family == NodeFamily::Author)
        .map(|i| (cosine(&model.input[school], &model.input[i]), i))
        .collect();
    near.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("authors closest to {}:", g.node(school));
    for (sim, i) in near.iter().take(5) {
        let member = g.has_edge(school, *i);
        println!("  {sim:+.3} {} (member: {member})", g.node(*i));
    }
    Ok(())
}
