//! Trains the text-image projection on a synthetic corpus and reports
//! recall in both directions on the held-out paintings.
//!
//! ```text
//! cargo run --release --example cross_modal_retrieval
//! ```

use artctx::evalsuite::{MetricsReport, RetrievalMetrics};
use artctx::ingest::{build_label_space, AttributeFamily};
use artctx::retrieval::{
    build_tfidf_vocab, encode_text, relevant_ranks, similarity_matrix, train_retrieval, Direction,
    RetrievalConfig, RetrievalModel, RetrievalPair,
};
use artctx::synth::{generate, SynthConfig};

fn main() -> artctx::Result<()> {
    let corpus = generate(&SynthConfig { paintings: 300, ..Default::default() })?;
    let comments: Vec<&str> = corpus.train.iter().map(|r| r.comment.as_str()).collect();
    let titles: Vec<&str> = corpus.train.iter().map(|r| r.title.as_str()).collect();
    let vocab_comment = build_tfidf_vocab(&comments, 2)?;
    let vocab_title = build_tfidf_vocab(&titles, 1)?;
    let space = build_label_space(&corpus.train, AttributeFamily::Type, 1)?;
    println!("vocab sizes: comment {} title {}", vocab_comment.len(), vocab_title.len());

    let pairs = |records: &[artctx::ingest::PaintingRecord]| -> Vec<RetrievalPair> {
        records
            .iter()
            .map(|r| RetrievalPair {
                id: r.id.clone(),
                visual: corpus.features.get_f64(&r.id).expect("feature for every painting"),
                text: encode_text(r, &vocab_comment, &vocab_title, &space),
            })
            .collect()
    };
    let (train, test) = (pairs(&corpus.train), pairs(&corpus.test));
    let cfg = RetrievalConfig { dim: 32, learning_rate: 1e-3, epochs: 40, batch_size: 16, ..Default::default() };
    let mut model = RetrievalModel::new(train[0].visual.len(), train[0].text.len(), &cfg)?;
    let losses = train_retrieval(&mut model, &train, &cfg)?;
    println!("loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);

    let text = test.iter().map(|p| model.project_text(&p.text)).collect::<artctx::Result<Vec<_>>>()?;
    let visual = test.iter().map(|p| model.project_visual(&p.visual)).collect::<artctx::Result<Vec<_>>>()?;
    let sim = similarity_matrix(&text, &visual)?;
    let mut report = MetricsReport::default();
    for direction in [Direction::TextToImage, Direction::ImageToText] {
        let metrics = RetrievalMetrics::from_ranks(&relevant_ranks(&sim, direction))?;
        report.add_retrieval(direction.name(), &metrics);
    }
    println!("{} test pairs (chance R@1 {:.3})", test.len(), 1.0 / test.len() as f64);
    print!("{report}");
    Ok(())
}
