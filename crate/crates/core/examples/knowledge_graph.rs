//! Builds the artistic knowledge graph from a synthetic corpus and prints
//! its shape plus the neighbourhood of one author.
//!
//! ```text
//! cargo run --example knowledge_graph
//! ```

use artctx::ingest::{default_stop_words, extract_title_keywords, TechniqueGrammar};
use artctx::kgraph::{build_graph, derive_attributes, graph_stats, NodeFamily};
use artctx::synth::{generate, SynthConfig};

fn main() -> artctx::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let titles: Vec<&str> = corpus.train.iter().map(|r| r.title.as_str()).collect();
    let keywords = extract_title_keywords(&titles, 3, 3, &default_stop_words());
    let derived = derive_attributes(&corpus.train, &TechniqueGrammar::default(), &keywords);
    let g = build_graph(&corpus.train, &derived)?;
    print!("{}", graph_stats(&g));

    let author = g
        .nodes()
        .iter()
        .position(|n| n.family == NodeFamily::Author)
        .expect("corpus has authors");
    println!("\nneighbours of {}:", g.node(author));
    for &n in g.neighbors(author).iter().take(12) {
        println!("  {}", g.node(n));
    }
    Ok(())
}
