#![allow(dead_code)]

use artctx::ingest::{build_label_space, AttributeFamily, EmbeddingTable, LabelSpace, PaintingRecord};
use artctx::kgraph::{KnowledgeGraph, NodeRef};
use artctx::models::{build_samples, context_key, Sample};
use artctx::synth::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Graph over painting nodes `n000, n001, ...` so node ids equal indices.
pub fn numbered_graph(n: usize, edges: &[(usize, usize)]) -> KnowledgeGraph {
    let node = |i: usize| NodeRef::painting(&format!("n{i:03}"));
    KnowledgeGraph::from_parts((0..n).map(node), edges.iter().map(|&(a, b)| (node(a), node(b))))
        .unwrap()
}

pub fn path_graph(n: usize) -> KnowledgeGraph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    numbered_graph(n, &edges)
}

/// Two 5-cliques `0..5` and `5..10` joined by the edge 4–5.
pub fn barbell() -> KnowledgeGraph {
    let mut edges = vec![(4, 5)];
    for base in [0, 5] {
        for a in base..base + 5 {
            for b in a + 1..base + 5 {
                edges.push((a, b));
            }
        }
    }
    numbered_graph(10, &edges)
}

pub fn record(id: &str, author: &str, school: &str, kind: &str) -> PaintingRecord {
    PaintingRecord {
        id: id.into(),
        image_ref: id.into(),
        author: author.into(),
        school: school.into(),
        kind: kind.into(),
        ..Default::default()
    }
}

/// Samples of the synthetic corpus labelled for all four attributes, with
/// every value kept as its own class.
pub fn separable_samples(seed: u64, noise: f64) -> (Vec<Sample>, Vec<LabelSpace>) {
    let corpus = generate(&SynthConfig { noise, seed, ..Default::default() }).unwrap();
    let records: Vec<PaintingRecord> = corpus.all().cloned().collect();
    let spaces: Vec<LabelSpace> = AttributeFamily::ALL
        .iter()
        .map(|&f| build_label_space(&records, f, 1).unwrap())
        .collect();
    let samples = build_samples(&records, &corpus.features, &spaces).unwrap();
    (samples, spaces)
}

/// Random context vectors for every sample.
pub fn random_context(samples: &[Sample], dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim).unwrap();
    for s in samples {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert_f64(context_key(&s.id), &v).unwrap();
    }
    table
}

/// Mean pairwise cosine of node vectors within and across the barbell's
/// two cliques.
pub fn clique_cosines(vectors: &[Vec<f64>]) -> (f64, f64) {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for a in 0..10 {
        for b in a + 1..10 {
            let c = cos(&vectors[a], &vectors[b]);
            if (a < 5) == (b < 5) {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}
