//! Context-aware embedding models over precomputed visual features.
//!
//! Both models share a trainable adapter trunk (`dense + ReLU`) whose output
//! is the context-aware embedding. The multi-task model puts one classifier
//! head per attribute on the trunk; the graph model puts a single classifier
//! and an encoder that regresses the painting's node2vec vector.

mod kgm;
mod mtl;
mod train;

use serde::{Deserialize, Serialize};

use crate::autodiff::{cross_entropy, relu, relu_backward, Dense};
use crate::error::{Error, Result};
use crate::ingest::{FeatureStore, LabelSpace, PaintingRecord};

pub use kgm::{
    context_key, kgm_forward, kgm_total_loss, train_kgm, train_kgm_observed, KgmLoss, KgmModel,
    KgmOutput,
};
pub use mtl::{mtl_forward, mtl_loss, train_mtl, train_mtl_observed, MtlModel, MtlOutput, MtlTask};
pub use train::{EpochRecord, TrainConfig, TrainHistory};

/// One training / evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub feature: Vec<f64>,
    /// One label per task, `None` when the value has no class.
    pub labels: Vec<Option<usize>>,
}

/// Joins records with their features and labels them in every space.
pub fn build_samples(
    records: &[PaintingRecord],
    features: &FeatureStore,
    spaces: &[LabelSpace],
) -> Result<Vec<Sample>> {
    records
        .iter()
        .map(|r| {
            let feature = features
                .get_f64(&r.id)
                .ok_or_else(|| Error::Ingest(format!("no visual feature for `{}`", r.id)))?;
            Ok(Sample {
                id: r.id.clone(),
                feature,
                labels: spaces.iter().map(|s| s.label(r)).collect(),
            })
        })
        .collect()
}

/// Trainable adapter standing in for the image backbone: `relu(W·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkAdapter {
    pub layer: Dense,
}

#[derive(Debug, Clone)]
pub(crate) struct Pass {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl TrunkAdapter {
    pub fn input_dim(&self) -> usize {
        self.layer.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layer.output_dim()
    }

    pub fn embed(&self, feature: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pass(feature)?.out)
    }

    pub(crate) fn pass(&self, feature: &[f64]) -> Result<Pass> {
        let pre = self.layer.forward(feature)?;
        let out = relu(&pre);
        Ok(Pass { pre, out })
    }

    pub(crate) fn backward(&mut self, feature: &[f64], pass: &Pass, upstream: &[f64]) -> Result<()> {
        let g = relu_backward(&pass.pre, upstream);
        self.layer.backward(feature, &g)?;
        Ok(())
    }
}

/// Classifier head `dense (+ ReLU)` producing one score per class.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskHead {
    pub task: String,
    pub layer: Dense,
    pub final_relu: bool,
}

impl TaskHead {
    pub fn classes(&self) -> usize {
        self.layer.output_dim()
    }

    pub fn logits(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pass(embedding)?.out)
    }

    pub(crate) fn pass(&self, embedding: &[f64]) -> Result<Pass> {
        let pre = self.layer.forward(embedding)?;
        let out = if self.final_relu { relu(&pre) } else { pre.clone() };
        Ok(Pass { pre, out })
    }

    /// Cross-entropy on this head, gradient scaled by `scale`. Returns the
    /// unscaled loss and the gradient reaching the embedding.
    pub(crate) fn classify_backward(
        &mut self,
        embedding: &[f64],
        pass: &Pass,
        label: usize,
        scale: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, mut grad) = cross_entropy(&pass.out, label)?;
        grad.iter_mut().for_each(|g| *g *= scale);
        let grad = if self.final_relu {
            relu_backward(&pass.pre, &grad)
        } else {
            grad
        };
        let d_embedding = self.layer.backward(embedding, &grad)?;
        Ok((loss, d_embedding))
    }
}

/// Models whose trunk output is the context-aware embedding.
pub trait ContextEmbedder {
    fn trunk(&self) -> &TrunkAdapter;

    fn embedding_dim(&self) -> usize {
        self.trunk().output_dim()
    }
}

/// The test-time embedding: trunk output only. Encoder, heads and the
/// context table play no part.
pub fn extract_embedding<M: ContextEmbedder + ?Sized>(model: &M, feature: &[f64]) -> Result<Vec<f64>> {
    model.trunk().embed(feature)
}

/// Frozen attribute predictor feeding the retrieval visual encoder.
pub trait AttributeClassifier {
    fn class_count(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Raw head output (post-ReLU when the head has one).
    fn attribute_scores(&self, feature: &[f64]) -> Result<Vec<f64>>;
}

/// Options shared by the model constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub trunk_dim: usize,
    /// Apply ReLU to the head output before the softmax.
    pub final_relu: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            trunk_dim: 2048,
            final_relu: true,
        }
    }
}

pub(crate) fn add_assign(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Fraction of labelled samples whose argmax prediction matches, per task.
pub(crate) fn task_accuracies(
    samples: &[Sample],
    tasks: usize,
    mut predict: impl FnMut(&Sample) -> Result<Vec<usize>>,
) -> Result<Vec<f64>> {
    let mut correct = vec![0usize; tasks];
    let mut total = vec![0usize; tasks];
    for s in samples {
        let predicted = predict(s)?;
        for t in 0..tasks {
            if let Some(label) = s.labels.get(t).copied().flatten() {
                total[t] += 1;
                if predicted[t] == label {
                    correct[t] += 1;
                }
            }
        }
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect())
}
