use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Record per-task training accuracy after every epoch.
    pub track_train_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 28,
            learning_rate: 0.001,
            momentum: 0.9,
            patience: 30,
            max_epochs: 500,
            seed: 0,
            track_train_accuracy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss per component over the epoch's batches.
    pub losses: BTreeMap<String, f64>,
    pub train_accuracy: Vec<f64>,
    pub val_metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

impl TrainHistory {
    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch record serialises") + "\n")
            .collect()
    }
}

type BatchFn<'a, M> = dyn FnMut(&mut M, &[usize]) -> Result<Vec<(String, f64)>> + 'a;

pub(crate) struct Callbacks<'a, M> {
    /// Accumulates gradients for the given sample indices; returns loss components.
    pub batch: &'a mut BatchFn<'a, M>,
    pub validate: &'a mut dyn FnMut(&M) -> Result<f64>,
    pub train_accuracy: &'a mut dyn FnMut(&M) -> Result<Vec<f64>>,
    pub on_epoch: &'a mut dyn FnMut(usize, &M),
}

/// Mini-batch SGD with momentum and early stopping on a validation metric
/// (higher is better). Gradients are averaged over each batch by the batch
/// callback. Training stops once `patience` epochs pass without improvement;
/// the best parameters are written back into `model`.
pub(crate) fn fit<M: Parameterized + Clone>(
    model: &mut M,
    train_len: usize,
    cfg: &TrainConfig,
    cb: Callbacks<'_, M>,
) -> Result<TrainHistory> {
    if train_len == 0 {
        return Err(Error::Empty("training split"));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument("batch_size and max_epochs must be positive".into()));
    }
    let mut optimizer = Optimizer::new(OptimizerKind::sgd(cfg.learning_rate, cfg.momentum));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_len).collect();
    let mut history = TrainHistory {
        best_val_metric: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut best = model.clone();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grad();
            let parts = (cb.batch)(model, batch)?;
            optimizer.step(model)?;
            for (name, value) in parts {
                *sums.entry(name).or_default() += value * batch.len() as f64;
            }
        }
        let losses = sums
            .into_iter()
            .map(|(k, v)| (k, v / train_len as f64))
            .collect();
        let val_metric = (cb.validate)(model)?;
        let train_accuracy = if cfg.track_train_accuracy {
            (cb.train_accuracy)(model)?
        } else {
            Vec::new()
        };
        history.epochs.push(EpochRecord {
            epoch,
            losses,
            train_accuracy,
            val_metric,
        });
        (cb.on_epoch)(epoch, model);

        if val_metric > history.best_val_metric {
            history.best_val_metric = val_metric;
            history.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        log::debug!("epoch {epoch}: val={val_metric:.4} since_best={since_best}");
        if since_best >= cfg.patience {
            break;
        }
    }
    *model = best;
    Ok(history)
}
