use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::TfIdfVocab;
use crate::autodiff::{
    cosine_margin_loss, l2_normalize, l2_normalize_backward, softmax, tanh, tanh_backward,
    Checkpoint, Dense, Optimizer, OptimizerKind, Parameterized,
};
use crate::error::{Error, Result};
use crate::ingest::{LabelSpace, PaintingRecord};
use crate::models::AttributeClassifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Feed softmax probabilities instead of raw head scores into `h_att`.
    pub attribute_softmax: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            margin: 0.1,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            attribute_softmax: false,
        }
    }
}

/// `q = tfidf(comment) ⊕ tfidf(title) ⊕ onehot(attribute)`. Attribute values
/// outside the label space use its Unknown slot, or an all-zero one-hot when
/// it has none.
pub fn encode_text(
    record: &PaintingRecord,
    vocab_comment: &TfIdfVocab,
    vocab_title: &TfIdfVocab,
    space: &LabelSpace,
) -> Vec<f64> {
    let mut q = vocab_comment.encode(&record.comment);
    q.extend(vocab_title.encode(&record.title));
    let mut onehot = vec![0.0; space.len()];
    if let Some(i) = space.label(record) {
        onehot[i] = 1.0;
    }
    q.extend(onehot);
    q
}

/// `h = feature ⊕ classifier(feature)` with the classifier frozen.
pub fn encode_visual<C: AttributeClassifier + ?Sized>(
    feature: &[f64],
    classifier: &C,
    attribute_softmax: bool,
) -> Result<Vec<f64>> {
    if feature.len() != classifier.input_dim() {
        return Err(Error::DimMismatch {
            expected: classifier.input_dim(),
            actual: feature.len(),
        });
    }
    let scores = classifier.attribute_scores(feature)?;
    let scores = if attribute_softmax {
        softmax(&scores)
    } else {
        scores
    };
    let mut h = feature.to_vec();
    h.extend(scores);
    Ok(h)
}

/// Aligned (visual, text) representation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalPair {
    pub id: String,
    pub visual: Vec<f64>,
    pub text: Vec<f64>,
}

/// Two projections into the common space, each `dense → tanh → L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalModel {
    pub visual: Dense,
    pub text: Dense,
    pub margin: f64,
}

struct Projection {
    tanh_out: Vec<f64>,
    unit: Vec<f64>,
    norm: f64,
}

fn project(layer: &Dense, x: &[f64]) -> Result<Projection> {
    let tanh_out = tanh(&layer.forward(x)?);
    let (unit, norm) = l2_normalize(&tanh_out)?;
    Ok(Projection {
        tanh_out,
        unit,
        norm,
    })
}

fn project_backward(layer: &mut Dense, x: &[f64], p: &Projection, upstream: &[f64]) -> Result<()> {
    let g = l2_normalize_backward(&p.unit, p.norm, upstream);
    let g = tanh_backward(&p.tanh_out, &g);
    layer.backward(x, &g)?;
    Ok(())
}

impl RetrievalModel {
    pub fn new(visual_dim: usize, text_dim: usize, cfg: &RetrievalConfig) -> Result<Self> {
        if visual_dim == 0 || text_dim == 0 || cfg.dim == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            visual: Dense::new("retrieval.visual", visual_dim, cfg.dim, &mut rng),
            text: Dense::new("retrieval.text", text_dim, cfg.dim, &mut rng),
            margin: cfg.margin,
        })
    }

    /// Unit-norm visual projection.
    pub fn project_visual(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(project(&self.visual, h)?.unit)
    }

    /// Unit-norm text projection.
    pub fn project_text(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(project(&self.text, q)?.unit)
    }

    /// Cosine-margin loss summed over all `B²` pairs of the batch (matching
    /// on the diagonal, non-matching elsewhere) and divided by `B`. Adds the
    /// gradient to the projection layers.
    pub fn accumulate_gradients(&mut self, batch: &[&RetrievalPair]) -> Result<f64> {
        if batch.len() < 2 {
            return Err(Error::InvalidArgument(
                "a retrieval batch needs at least two pairs for negatives".into(),
            ));
        }
        let n = batch.len() as f64;
        let visual: Vec<Projection> = batch
            .iter()
            .map(|p| project(&self.visual, &p.visual))
            .collect::<Result<_>>()?;
        let text: Vec<Projection> = batch
            .iter()
            .map(|p| project(&self.text, &p.text))
            .collect::<Result<_>>()?;
        let dim = self.visual.output_dim();
        let mut d_visual = vec![vec![0.0; dim]; batch.len()];
        let mut d_text = vec![vec![0.0; dim]; batch.len()];
        let mut loss = 0.0;
        for (k, v) in visual.iter().enumerate() {
            for (j, t) in text.iter().enumerate() {
                let l = cosine_margin_loss(&v.unit, &t.unit, k == j, self.margin)?;
                if l.loss == 0.0 && k != j {
                    continue;
                }
                loss += l.loss / n;
                for i in 0..dim {
                    d_visual[k][i] += l.grad_a[i] / n;
                    d_text[j][i] += l.grad_b[i] / n;
                }
            }
        }
        for (k, pair) in batch.iter().enumerate() {
            project_backward(&mut self.visual, &pair.visual, &visual[k], &d_visual[k])?;
            project_backward(&mut self.text, &pair.text, &text[k], &d_text[k])?;
        }
        Ok(loss)
    }

    pub fn loss(&self, batch: &[&RetrievalPair]) -> Result<f64> {
        let mut scratch = self.clone();
        scratch.accumulate_gradients(batch)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.add_model(self);
        ckpt.insert_scalars("meta.margin", &[self.margin]);
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(Self {
            visual: ckpt.layer("retrieval.visual")?,
            text: ckpt.layer("retrieval.text")?,
            margin: ckpt
                .scalars("meta.margin")?
                .first()
                .copied()
                .ok_or_else(|| Error::Ingest("empty meta.margin".into()))?,
        })
    }
}

impl Parameterized for RetrievalModel {
    fn layers(&self) -> Vec<&Dense> {
        vec![&self.visual, &self.text]
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        vec![&mut self.visual, &mut self.text]
    }
}

/// Splits `0..len` into batches of `size`, folding a trailing singleton
/// into the previous batch.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size.max(2)).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size.max(2);
        let last = out.len() - 1;
        out[last] = &order[start..];
    }
    out
}

/// Trains both projections with Adam. Returns the mean batch loss per epoch.
pub fn train_retrieval(
    model: &mut RetrievalModel,
    pairs: &[RetrievalPair],
    cfg: &RetrievalConfig,
) -> Result<Vec<f64>> {
    if pairs.len() < 2 || cfg.batch_size < 2 {
        return Err(Error::InvalidArgument(
            "retrieval training needs batches of at least two pairs".into(),
        ));
    }
    let mut optimizer = Optimizer::new(OptimizerKind::adam(cfg.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let chunks = batches(&order, cfg.batch_size);
        for chunk in &chunks {
            let batch: Vec<&RetrievalPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            model.zero_grad();
            total += model.accumulate_gradients(&batch)?;
            optimizer.step(model)?;
        }
        history.push(total / chunks.len() as f64);
    }
    Ok(history)
}
