use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::{fit, Callbacks, TrainConfig, TrainHistory};
use super::{
    add_assign, task_accuracies, ArchConfig, AttributeClassifier, ContextEmbedder, Sample,
    TaskHead, TrunkAdapter,
};
use crate::autodiff::{argmax, cross_entropy, smooth_l1, Checkpoint, Dense, Parameterized};
use crate::error::{Error, Result};
use crate::ingest::EmbeddingTable;
use crate::kgraph::NodeRef;

/// Trunk + attribute classifier + encoder into the node2vec space.
///
/// Training minimises `λ_c · mean CE + λ_e · mean smoothL1(encoder(v), u)`
/// where `u` is the painting's frozen graph embedding. At test time only
/// the trunk is used.
#[derive(Debug, Clone, PartialEq)]
pub struct KgmModel {
    pub trunk: TrunkAdapter,
    pub classifier: TaskHead,
    pub encoder: Dense,
    pub lambda_classifier: f64,
    pub lambda_encoder: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgmOutput {
    pub logits: Vec<f64>,
    pub projection: Vec<f64>,
    pub embedding: Vec<f64>,
}

/// Batch loss split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgmLoss {
    pub total: f64,
    pub classification: f64,
    pub encoder: f64,
}

/// Key of a painting's vector in the node embedding table.
pub fn context_key(painting_id: &str) -> String {
    NodeRef::painting(painting_id).qualified()
}

fn context_vector(table: &EmbeddingTable, id: &str) -> Result<Vec<f64>> {
    table
        .get_f64(&context_key(id))
        .ok_or_else(|| Error::MissingContext(id.to_owned()))
}

impl KgmModel {
    /// Layers are initialised trunk, classifier, encoder, in that order, so a
    /// one-task [`super::MtlModel`] with the same seed shares the first two.
    pub fn new(
        input_dim: usize,
        task: &str,
        classes: usize,
        context_dim: usize,
        lambdas: (f64, f64),
        arch: ArchConfig,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || classes == 0 || context_dim == 0 || arch.trunk_dim == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        let (lc, le) = lambdas;
        if !(lc >= 0.0 && le >= 0.0 && lc.is_finite() && le.is_finite()) {
            return Err(Error::InvalidArgument("loss weights must be non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = TrunkAdapter {
            layer: Dense::new("trunk", input_dim, arch.trunk_dim, &mut rng),
        };
        let classifier = TaskHead {
            task: task.to_owned(),
            layer: Dense::new(format!("head.{task}"), arch.trunk_dim, classes, &mut rng),
            final_relu: arch.final_relu,
        };
        let encoder = Dense::new("encoder", arch.trunk_dim, context_dim, &mut rng);
        Ok(Self {
            trunk,
            classifier,
            encoder,
            lambda_classifier: lc,
            lambda_encoder: le,
        })
    }

    pub fn context_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn forward(&self, feature: &[f64]) -> Result<KgmOutput> {
        let embedding = self.trunk.embed(feature)?;
        Ok(KgmOutput {
            logits: self.classifier.logits(&embedding)?,
            projection: self.encoder.forward(&embedding)?,
            embedding,
        })
    }

    pub fn predict(&self, feature: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(feature)?.logits))
    }

    fn label(&self, s: &Sample) -> Result<usize> {
        s.labels.first().copied().flatten().ok_or_else(|| {
            Error::MissingLabel(format!("sample `{}` task `{}`", s.id, self.classifier.task))
        })
    }

    pub fn loss(&self, batch: &[Sample], table: &EmbeddingTable) -> Result<KgmLoss> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n = batch.len() as f64;
        let (mut lc, mut le) = (0.0, 0.0);
        for s in batch {
            let u = context_vector(table, &s.id)?;
            let out = self.forward(&s.feature)?;
            lc += cross_entropy(&out.logits, self.label(s)?)?.0;
            le += smooth_l1(&out.projection, &u)?.0;
        }
        Ok(self.combine(lc / n, le / n))
    }

    fn combine(&self, classification: f64, encoder: f64) -> KgmLoss {
        KgmLoss {
            total: self.lambda_classifier * classification + self.lambda_encoder * encoder,
            classification,
            encoder,
        }
    }

    /// Adds the gradient of [`KgmModel::loss`] to the gradient buffers. The
    /// embedding table is read only. With `λ_e = 0` the encoder branch is
    /// skipped entirely.
    pub fn accumulate_gradients(&mut self, batch: &[&Sample], table: &EmbeddingTable) -> Result<KgmLoss> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n = batch.len() as f64;
        let (mut lc, mut le) = (0.0, 0.0);
        for s in batch {
            let label = self.label(s)?;
            let u = context_vector(table, &s.id)?;
            let pass = self.trunk.pass(&s.feature)?;
            let head_pass = self.classifier.pass(&pass.out)?;
            let (loss, g) = self.classifier.classify_backward(
                &pass.out,
                &head_pass,
                label,
                self.lambda_classifier / n,
            )?;
            lc += loss / n;
            let mut d_emb = vec![0.0; pass.out.len()];
            add_assign(&mut d_emb, &g);

            let projection = self.encoder.forward(&pass.out)?;
            let (enc_loss, mut enc_grad) = smooth_l1(&projection, &u)?;
            le += enc_loss / n;
            if self.lambda_encoder != 0.0 {
                let scale = self.lambda_encoder / n;
                enc_grad.iter_mut().for_each(|g| *g *= scale);
                let g = self.encoder.backward(&pass.out, &enc_grad)?;
                add_assign(&mut d_emb, &g);
            }
            self.trunk.backward(&s.feature, &pass, &d_emb)?;
        }
        Ok(self.combine(lc, le))
    }

    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64> {
        Ok(task_accuracies(samples, 1, |s| Ok(vec![self.predict(&s.feature)?]))?[0])
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.add_model(self);
        ckpt.insert_scalars("meta.lambda", &[self.lambda_classifier, self.lambda_encoder]);
        ckpt.insert_scalars("meta.final_relu", &[f64::from(u8::from(self.classifier.final_relu))]);
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let head_name = ckpt
            .layer_names("head")
            .into_iter()
            .next()
            .ok_or_else(|| Error::Ingest("checkpoint has no classifier head".into()))?;
        let lambdas = ckpt.scalars("meta.lambda")?;
        if lambdas.len() != 2 {
            return Err(Error::Ingest("meta.lambda must hold two values".into()));
        }
        let final_relu = ckpt.scalars("meta.final_relu")?.first().copied().unwrap_or(1.0) != 0.0;
        Ok(Self {
            trunk: TrunkAdapter {
                layer: ckpt.layer("trunk")?,
            },
            classifier: TaskHead {
                task: head_name.trim_start_matches("head.").to_owned(),
                layer: ckpt.layer(&head_name)?,
                final_relu,
            },
            encoder: ckpt.layer("encoder")?,
            lambda_classifier: lambdas[0],
            lambda_encoder: lambdas[1],
        })
    }
}

impl Parameterized for KgmModel {
    fn layers(&self) -> Vec<&Dense> {
        vec![&self.trunk.layer, &self.classifier.layer, &self.encoder]
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        vec![&mut self.trunk.layer, &mut self.classifier.layer, &mut self.encoder]
    }
}

impl ContextEmbedder for KgmModel {
    fn trunk(&self) -> &TrunkAdapter {
        &self.trunk
    }
}

impl AttributeClassifier for KgmModel {
    fn class_count(&self) -> usize {
        self.classifier.classes()
    }

    fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    fn attribute_scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        let emb = self.trunk.embed(feature)?;
        self.classifier.logits(&emb)
    }
}

pub fn kgm_forward(model: &KgmModel, feature: &[f64]) -> Result<KgmOutput> {
    model.forward(feature)
}

pub fn kgm_total_loss(model: &KgmModel, batch: &[Sample], table: &EmbeddingTable) -> Result<f64> {
    Ok(model.loss(batch, table)?.total)
}

/// Trains with SGD + momentum, monitoring validation accuracy. Records the
/// classification and encoder loss curves. `table` is never modified.
pub fn train_kgm(
    model: &mut KgmModel,
    train: &[Sample],
    val: &[Sample],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_kgm_observed(model, train, val, table, cfg, |_, _| {})
}

pub fn train_kgm_observed(
    model: &mut KgmModel,
    train: &[Sample],
    val: &[Sample],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &KgmModel),
) -> Result<TrainHistory> {
    if val.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    fit(
        model,
        train.len(),
        cfg,
        Callbacks {
            batch: &mut |m: &mut KgmModel, idx: &[usize]| {
                let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
                let l = m.accumulate_gradients(&batch, table)?;
                Ok(vec![
                    ("total".to_owned(), l.total),
                    ("classification".to_owned(), l.classification),
                    ("encoder".to_owned(), l.encoder),
                ])
            },
            validate: &mut |m: &KgmModel| m.accuracy(val),
            train_accuracy: &mut |m: &KgmModel| Ok(vec![m.accuracy(train)?]),
            on_epoch: &mut on_epoch,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, Matrix};
    use rand::Rng;

    fn arch(trunk_dim: usize) -> ArchConfig {
        ArchConfig { trunk_dim, final_relu: true }
    }

    fn table(ids: &[&str], dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(dim).unwrap();
        for id in ids {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.5f32..1.5)).collect();
            t.insert(context_key(id), v).unwrap();
        }
        t
    }

    #[test]
    fn projection_has_context_dim() {
        let m = KgmModel::new(6, "type", 4, 128, (0.9, 0.1), arch(8), 0).unwrap();
        let out = m.forward(&[0.5; 6]).unwrap();
        assert_eq!(out.projection.len(), 128);
        assert_eq!(out.logits.len(), 4);
        assert_eq!(m.forward(&[0.5; 6]).unwrap(), out);
    }

    #[test]
    fn zero_encoder_projects_to_bias() {
        let mut m = KgmModel::new(3, "type", 2, 4, (0.9, 0.1), arch(5), 0).unwrap();
        m.encoder = Dense::from_parts("encoder", Matrix::zeros(4, 5), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.forward(&[0.1, 0.2, 0.3]).unwrap().projection, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn loss_weights_combine() {
        let m = KgmModel::new(1, "t", 2, 1, (0.9, 0.1), arch(1), 0).unwrap();
        let l = m.combine(1.0, 2.0);
        assert!((l.total - 1.1).abs() < 1e-15);
    }

    #[test]
    fn encoder_weight_zero_reduces_to_classification() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = KgmModel::new(3, "t", 3, 4, (1.0, 0.0), arch(5), 0).unwrap();
        let t = table(&["a", "b"], 4, &mut rng);
        let batch = vec![
            Sample { id: "a".into(), feature: vec![0.2, 0.4, -0.1], labels: vec![Some(1)] },
            Sample { id: "b".into(), feature: vec![-0.3, 0.8, 0.5], labels: vec![Some(2)] },
        ];
        let l = m.loss(&batch, &t).unwrap();
        assert_eq!(l.total, l.classification);
    }

    #[test]
    fn perfect_projection_with_no_classifier_weight_is_zero() {
        let mut m = KgmModel::new(2, "t", 2, 3, (0.0, 1.0), arch(4), 0).unwrap();
        m.encoder = Dense::from_parts("encoder", Matrix::zeros(3, 4), vec![0.5, -0.25, 1.0]).unwrap();
        let mut t = EmbeddingTable::new(3).unwrap();
        t.insert(context_key("p"), vec![0.5, -0.25, 1.0]).unwrap();
        let batch = [Sample { id: "p".into(), feature: vec![1.0, 1.0], labels: vec![Some(0)] }];
        assert_eq!(m.loss(&batch, &t).unwrap().total, 0.0);
    }

    #[test]
    fn missing_context_is_an_error() {
        let m = KgmModel::new(2, "t", 2, 3, (0.9, 0.1), arch(4), 0).unwrap();
        let t = EmbeddingTable::new(3).unwrap();
        let batch = [Sample { id: "ghost".into(), feature: vec![1.0, 1.0], labels: vec![Some(0)] }];
        assert!(matches!(m.loss(&batch, &t), Err(Error::MissingContext(_))));
    }

    #[test]
    fn gradient_matches_total_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut m = KgmModel::new(4, "t", 3, 5, (0.9, 0.1), arch(6), 5).unwrap();
        for l in m.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.gen_range(0.1..0.5));
        }
        let ids = ["a", "b", "c", "d"];
        let t = table(&ids, 5, &mut rng);
        let batch: Vec<Sample> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| Sample {
                id: (*id).into(),
                feature: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                labels: vec![Some(i % 3)],
            })
            .collect();
        let refs: Vec<&Sample> = batch.iter().collect();
        let report = grad_check(&mut m, |m| Ok(m.accumulate_gradients(&refs, &t)?.total), 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = KgmModel::new(3, "author", 5, 4, (0.9, 0.1), arch(6), 1).unwrap();
        let back = KgmModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back.classifier.task, "author");
        assert_eq!(back.context_dim(), 4);
        assert!((back.lambda_classifier - 0.9).abs() < 1e-7);
    }
}
