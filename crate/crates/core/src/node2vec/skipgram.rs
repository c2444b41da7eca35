use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EmbeddingTable;
use crate::kgraph::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Floor of the linear decay, as a fraction of `learning_rate`.
    pub min_learning_rate_ratio: f64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate_ratio: 1e-4,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 {
            return Err(Error::InvalidArgument("dim and window must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Trained skip-gram parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    /// Input-side vectors; these are the node embeddings.
    pub input: Vec<Vec<f64>>,
    /// Output-side (context) vectors.
    pub context: Vec<Vec<f64>>,
    /// Mean negative-sampling loss per epoch, measured before each update.
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pair_count(walks: &[Vec<usize>], window: usize) -> usize {
    walks
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|i| {
                    let lo = i.saturating_sub(window);
                    let hi = (i + window).min(w.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum()
}

/// Skip-gram with negative sampling over node sequences.
///
/// Every (center, context) pair within `window` receives one positive update
/// and `negatives` negative updates, with negatives drawn from the walk
/// unigram distribution raised to 3/4. The learning rate decays linearly
/// over all updates. `on_epoch` sees the model after each epoch.
pub fn train_skipgram(
    walks: &[Vec<usize>],
    num_nodes: usize,
    cfg: &SkipGramConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &SkipGramModel),
) -> Result<SkipGramModel> {
    cfg.validate()?;
    if walks.iter().all(|w| w.is_empty()) {
        return Err(Error::Empty("walks"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / cfg.dim as f64;
    let input: Vec<Vec<f64>> = (0..num_nodes)
        .map(|_| (0..cfg.dim).map(|_| rng.gen_range(-half..half)).collect())
        .collect();
    let mut model = SkipGramModel {
        input,
        context: vec![vec![0.0; cfg.dim]; num_nodes],
        epoch_loss: Vec::new(),
    };

    let mut frequency = vec![0.0f64; num_nodes];
    for w in walks {
        for &n in w {
            if n >= num_nodes {
                return Err(Error::InvalidArgument(format!("walk node {n} out of range")));
            }
            frequency[n] += 1.0;
        }
    }
    let noise = WeightedIndex::new(frequency.iter().map(|f| f.powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;

    let total_updates = (pair_count(walks, cfg.window) * cfg.epochs).max(1);
    let mut step = 0usize;
    let mut grad = vec![0.0; cfg.dim];
    for epoch in 0..cfg.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(walk.len() - 1);
                for (j, &target) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let progress = step as f64 / total_updates as f64;
                    let lr = cfg.learning_rate
                        * (1.0 - progress).max(cfg.min_learning_rate_ratio);
                    step += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);

                    let mut update = |out: usize, label: f64, model: &mut SkipGramModel| -> f64 {
                        let score = dot(&model.input[center], &model.context[out]);
                        let s = sigmoid(score);
                        let g = (label - s) * lr;
                        let ctx = &mut model.context[out];
                        for k in 0..cfg.dim {
                            grad[k] += g * ctx[k];
                            ctx[k] += g * model.input[center][k];
                        }
                        if label > 0.5 {
                            -s.max(1e-300).ln()
                        } else {
                            -(1.0 - s).max(1e-300).ln()
                        }
                    };
                    loss += update(target, 1.0, &mut model);
                    for _ in 0..cfg.negatives {
                        let neg = noise.sample(&mut rng);
                        if neg == target {
                            continue;
                        }
                        loss += update(neg, 0.0, &mut model);
                    }
                    for (x, g) in model.input[center].iter_mut().zip(&grad) {
                        *x += g;
                    }
                    pairs += 1;
                }
            }
        }
        model.epoch_loss.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
        on_epoch(epoch, &model);
    }
    Ok(model)
}

/// Runs skip-gram and keys the input vectors by `family/key`.
pub fn train_embeddings(
    g: &KnowledgeGraph,
    walks: &[Vec<usize>],
    cfg: &SkipGramConfig,
    seed: u64,
) -> Result<EmbeddingTable> {
    let model = train_skipgram(walks, g.node_count(), cfg, seed, |_, _| {})?;
    let mut table = EmbeddingTable::new(cfg.dim)?;
    for (id, vector) in model.input.iter().enumerate() {
        table.insert_f64(g.node(id).qualified(), vector)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    #[test]
    fn zero_epochs_keeps_initialisation() {
        let walks = vec![vec![0, 1, 2, 1, 0]];
        let cfg = SkipGramConfig { dim: 8, epochs: 0, ..Default::default() };
        let model = train_skipgram(&walks, 3, &cfg, 7, |_, _| {}).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let half = 0.5 / 8.0;
        for v in &model.input {
            for &x in v {
                assert_eq!(x, rng.gen_range(-half..half));
            }
        }
        assert!(model.context.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn alternating_walk_pulls_pair_together() {
        let walk: Vec<usize> = (0..40).map(|i| i % 2).collect();
        // a third node only as noise mass
        let walks = vec![walk, vec![2; 400]];
        let cfg = SkipGramConfig { dim: 16, window: 1, negatives: 2, epochs: 8, learning_rate: 0.002, ..Default::default() };
        for seed in 0..5 {
            let mut cosines = Vec::new();
            train_skipgram(&walks, 3, &cfg, seed, |_, m| cosines.push(cosine(&m.input[0], &m.context[1])))
                .unwrap();
            assert!(cosines.windows(2).all(|w| w[1] >= w[0]), "{cosines:?}");
            assert!(*cosines.last().unwrap() > 0.5);
        }
    }

    #[test]
    fn empty_walks_rejected() {
        let cfg = SkipGramConfig::default();
        assert!(train_skipgram(&[], 2, &cfg, 0, |_, _| {}).is_err());
        assert!(train_skipgram(&[vec![]], 2, &cfg, 0, |_, _| {}).is_err());
    }

    #[test]
    fn pair_count_matches_enumeration() {
        let walks = vec![vec![0, 1, 2, 3, 4], vec![1], vec![2, 3]];
        for window in 1..6 {
            let mut n = 0;
            for w in &walks {
                for i in 0..w.len() {
                    for j in 0..w.len() {
                        if i != j && i.abs_diff(j) <= window {
                            n += 1;
                        }
                    }
                }
            }
            assert_eq!(pair_count(&walks, window), n);
        }
    }
}
