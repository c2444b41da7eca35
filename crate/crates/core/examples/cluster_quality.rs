//! Compares Davies-Bouldin indexes of raw features and multi-task
//! embeddings, grouped by school, and writes the embeddings as TSV.
//!
//! ```text
//! cargo run --release --example cluster_quality -- /tmp/embeddings.tsv
//! ```

use std::path::PathBuf;

use artctx::evalsuite::{davies_bouldin, export_embeddings, ClusterSet, ExportRow};
use artctx::ingest::{build_label_space, AttributeFamily};
use artctx::models::{build_samples, extract_embedding, train_mtl, ArchConfig, MtlModel, TrainConfig};
use artctx::synth::{generate, SynthConfig};

fn main() -> artctx::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("artctx-embeddings.tsv"));
    let corpus = generate(&SynthConfig { noise: 0.8, ..Default::default() })?;
    let spaces = AttributeFamily::ALL
        .iter()
        .map(|&f| build_label_space(&corpus.train, f, 1))
        .collect::<artctx::Result<Vec<_>>>()?;
    let train = build_samples(&corpus.train, &corpus.features, &spaces)?;
    let val = build_samples(&corpus.val, &corpus.features, &spaces)?;
    let tasks: Vec<(String, usize)> = spaces.iter().map(|s| (s.family.name().to_owned(), s.len())).collect();
    let mut mtl = MtlModel::new(corpus.features.dim(), &tasks, None, ArchConfig { trunk_dim: 32, final_relu: true }, 0)?;
    train_mtl(&mut mtl, &train, &val, &TrainConfig { max_epochs: 40, learning_rate: 0.01, ..Default::default() })?;

    let schools: Vec<String> = corpus.test.iter().map(|r| r.school.clone()).collect();
    let raw: Vec<Vec<f64>> = corpus
        .test
        .iter()
        .map(|r| corpus.features.get_f64(&r.id).expect("feature for every painting"))
        .collect();
    let embedded = raw.iter().map(|f| extract_embedding(&mtl, f)).collect::<artctx::Result<Vec<_>>>()?;

    let q_raw = davies_bouldin(&ClusterSet::new(raw, schools.clone()))?;
    let q_mtl = davies_bouldin(&ClusterSet::new(embedded.clone(), schools.clone()))?;
    println!("Davies-Bouldin by school (lower is better): raw {q_raw:.3}, mtl {q_mtl:.3}");

    let rows: Vec<ExportRow> = corpus
        .test
        .iter()
        .zip(embedded)
        .zip(schools)
        .map(|((r, values), label)| ExportRow { id: r.id.clone(), label, values })
        .collect();
    export_embeddings(&out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
