use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::{fit, Callbacks, TrainConfig, TrainHistory};
use super::{
    add_assign, task_accuracies, ArchConfig, AttributeClassifier, ContextEmbedder, Sample,
    TaskHead, TrunkAdapter,
};
use crate::autodiff::{argmax, Checkpoint, Dense, Parameterized};
use crate::error::{Error, Result};

/// Hard parameter sharing: one trunk, one classifier head per task, with
/// task weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlModel {
    pub trunk: TrunkAdapter,
    pub heads: Vec<TaskHead>,
    pub task_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtlOutput {
    pub embedding: Vec<f64>,
    pub logits: Vec<Vec<f64>>,
}

fn check_weights(weights: &[f64], tasks: usize) -> Result<()> {
    if weights.len() != tasks {
        return Err(Error::InvalidArgument(format!(
            "{} task weights for {tasks} tasks",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("task weights must be non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("task weights sum to {sum}, not 1")));
    }
    Ok(())
}

impl MtlModel {
    /// `tasks` lists `(name, class count)`; weights default to `1/T` each.
    /// Layers are initialised trunk first, then heads in task order.
    pub fn new(
        input_dim: usize,
        tasks: &[(String, usize)],
        task_weights: Option<Vec<f64>>,
        arch: ArchConfig,
        seed: u64,
    ) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidArgument("at least one task is required".into()));
        }
        if input_dim == 0 || arch.trunk_dim == 0 || tasks.iter().any(|(_, c)| *c == 0) {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        let weights = task_weights.unwrap_or_else(|| vec![1.0 / tasks.len() as f64; tasks.len()]);
        check_weights(&weights, tasks.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = TrunkAdapter {
            layer: Dense::new("trunk", input_dim, arch.trunk_dim, &mut rng),
        };
        let heads = tasks
            .iter()
            .map(|(name, classes)| TaskHead {
                task: name.clone(),
                layer: Dense::new(format!("head.{name}"), arch.trunk_dim, *classes, &mut rng),
                final_relu: arch.final_relu,
            })
            .collect();
        Ok(Self {
            trunk,
            heads,
            task_weights: weights,
        })
    }

    pub fn task_count(&self) -> usize {
        self.heads.len()
    }

    /// Shared embedding and one logit vector per task; every head reads the
    /// same embedding.
    pub fn forward(&self, feature: &[f64]) -> Result<MtlOutput> {
        let embedding = self.trunk.embed(feature)?;
        let logits = self
            .heads
            .iter()
            .map(|h| h.logits(&embedding))
            .collect::<Result<_>>()?;
        Ok(MtlOutput { embedding, logits })
    }

    pub fn predict(&self, feature: &[f64]) -> Result<Vec<usize>> {
        Ok(self.forward(feature)?.logits.iter().map(|l| argmax(l)).collect())
    }

    fn label(&self, sample: &Sample, task: usize) -> Result<usize> {
        sample.labels.get(task).copied().flatten().ok_or_else(|| {
            Error::MissingLabel(format!("sample `{}` task `{}`", sample.id, self.heads[task].task))
        })
    }

    /// `Σ_t λ_t · mean_j CE_t`.
    pub fn loss(&self, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n = batch.len() as f64;
        let mut total = 0.0;
        for (t, head) in self.heads.iter().enumerate() {
            let mut sum = 0.0;
            for s in batch {
                let label = self.label(s, t)?;
                let emb = self.trunk.embed(&s.feature)?;
                sum += crate::autodiff::cross_entropy(&head.logits(&emb)?, label)?.0;
            }
            total += self.task_weights[t] * sum / n;
        }
        Ok(total)
    }

    /// Adds the gradient of [`MtlModel::loss`] over `batch` to the gradient
    /// buffers. Returns the total and per-task mean losses.
    pub fn accumulate_gradients(&mut self, batch: &[&Sample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n = batch.len() as f64;
        let mut per_task = vec![0.0; self.heads.len()];
        for s in batch {
            let labels = (0..self.heads.len())
                .map(|t| self.label(s, t))
                .collect::<Result<Vec<_>>>()?;
            let pass = self.trunk.pass(&s.feature)?;
            let mut d_emb = vec![0.0; pass.out.len()];
            for (t, head) in self.heads.iter_mut().enumerate() {
                let head_pass = head.pass(&pass.out)?;
                let scale = self.task_weights[t] / n;
                let (loss, g) = head.classify_backward(&pass.out, &head_pass, labels[t], scale)?;
                per_task[t] += loss / n;
                add_assign(&mut d_emb, &g);
            }
            self.trunk.backward(&s.feature, &pass, &d_emb)?;
        }
        let total = per_task
            .iter()
            .zip(&self.task_weights)
            .map(|(l, w)| l * w)
            .sum();
        Ok((total, per_task))
    }

    pub fn accuracies(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        task_accuracies(samples, self.heads.len(), |s| self.predict(&s.feature))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.add_model(self);
        ckpt.insert_scalars("meta.task_weights", &self.task_weights);
        ckpt.insert_scalars(
            "meta.final_relu",
            &[f64::from(u8::from(self.heads.iter().all(|h| h.final_relu)))],
        );
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let trunk = TrunkAdapter {
            layer: ckpt.layer("trunk")?,
        };
        let final_relu = ckpt.scalars("meta.final_relu")?.first().copied().unwrap_or(1.0) != 0.0;
        let heads: Vec<TaskHead> = ckpt
            .layer_names("head")
            .into_iter()
            .map(|name| {
                Ok(TaskHead {
                    task: name.trim_start_matches("head.").to_owned(),
                    layer: ckpt.layer(&name)?,
                    final_relu,
                })
            })
            .collect::<Result<_>>()?;
        // f32 storage may leave the sum a hair off one
        let raw = ckpt.scalars("meta.task_weights")?;
        let sum: f64 = raw.iter().sum();
        let task_weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        check_weights(&task_weights, heads.len())?;
        Ok(Self {
            trunk,
            heads,
            task_weights,
        })
    }

    /// A single head viewed as an attribute classifier.
    pub fn task(&self, index: usize) -> Result<MtlTask<'_>> {
        if index >= self.heads.len() {
            return Err(Error::InvalidArgument(format!("no task {index}")));
        }
        Ok(MtlTask { model: self, index })
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.task == name)
    }
}

impl Parameterized for MtlModel {
    fn layers(&self) -> Vec<&Dense> {
        std::iter::once(&self.trunk.layer)
            .chain(self.heads.iter().map(|h| &h.layer))
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        std::iter::once(&mut self.trunk.layer)
            .chain(self.heads.iter_mut().map(|h| &mut h.layer))
            .collect()
    }
}

impl ContextEmbedder for MtlModel {
    fn trunk(&self) -> &TrunkAdapter {
        &self.trunk
    }
}

/// One task head of a multi-task model.
#[derive(Debug, Clone, Copy)]
pub struct MtlTask<'a> {
    pub model: &'a MtlModel,
    pub index: usize,
}

impl AttributeClassifier for MtlTask<'_> {
    fn class_count(&self) -> usize {
        self.model.heads[self.index].classes()
    }

    fn input_dim(&self) -> usize {
        self.model.trunk.input_dim()
    }

    fn attribute_scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        let emb = self.model.trunk.embed(feature)?;
        self.model.heads[self.index].logits(&emb)
    }
}

pub fn mtl_forward(model: &MtlModel, feature: &[f64]) -> Result<MtlOutput> {
    model.forward(feature)
}

pub fn mtl_loss(model: &MtlModel, batch: &[Sample]) -> Result<f64> {
    model.loss(batch)
}

/// Trains with SGD + momentum, monitoring mean validation accuracy.
pub fn train_mtl(
    model: &mut MtlModel,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_mtl_observed(model, train, val, cfg, |_, _| {})
}

/// [`train_mtl`] with a hook that sees the parameters after every epoch.
pub fn train_mtl_observed(
    model: &mut MtlModel,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &MtlModel),
) -> Result<TrainHistory> {
    if val.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let names: Vec<String> = model.heads.iter().map(|h| format!("task.{}", h.task)).collect();
    fit(
        model,
        train.len(),
        cfg,
        Callbacks {
            batch: &mut |m: &mut MtlModel, idx: &[usize]| {
                let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
                let (total, per_task) = m.accumulate_gradients(&batch)?;
                let mut parts = vec![("total".to_owned(), total)];
                parts.extend(names.iter().cloned().zip(per_task));
                Ok(parts)
            },
            validate: &mut |m: &MtlModel| Ok(mean(m.accuracies(val)?)),
            train_accuracy: &mut |m: &MtlModel| m.accuracies(train),
            on_epoch: &mut on_epoch,
        },
    )
}
