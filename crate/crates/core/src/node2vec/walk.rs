use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving two hops away.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walk_length: 80,
            walks_per_node: 10,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidArgument("p and q must be positive".into()));
        }
        if self.walk_length < 2 || self.walks_per_node < 1 {
            return Err(Error::InvalidArgument(
                "walk_length must be >= 2 and walks_per_node >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn bias(g: &KnowledgeGraph, prev: usize, next: usize, p: f64, q: f64) -> f64 {
    if next == prev {
        1.0 / p
    } else if g.has_edge(prev, next) {
        1.0
    } else {
        1.0 / q
    }
}

/// Transition probabilities from `cur` given the walk arrived from `prev`,
/// aligned with `g.neighbors(cur)`.
pub fn next_step_distribution(
    g: &KnowledgeGraph,
    prev: usize,
    cur: usize,
    p: f64,
    q: f64,
) -> Result<Vec<f64>> {
    if cur >= g.node_count() || prev >= g.node_count() {
        return Err(Error::Graph("node id out of range".into()));
    }
    if !g.has_edge(prev, cur) {
        return Err(Error::Graph(format!("{prev} is not adjacent to {cur}")));
    }
    let neighbors = g.neighbors(cur);
    if neighbors.is_empty() {
        return Err(Error::Graph(format!("node {cur} has no neighbours")));
    }
    let weights: Vec<f64> = neighbors.iter().map(|&n| bias(g, prev, n, p, q)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// One walk starting at `start`. The first hop is uniform; later hops use
/// rejection sampling against the largest bias, which draws exactly from
/// [`next_step_distribution`].
pub fn walk_from<R: Rng>(g: &KnowledgeGraph, start: usize, cfg: &WalkConfig, rng: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let max_bias = (1.0 / cfg.p).max(1.0).max(1.0 / cfg.q);
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().expect("walk is never empty");
        let neighbors = g.neighbors(cur);
        if neighbors.is_empty() {
            break;
        }
        let next = if walk.len() == 1 {
            neighbors[rng.gen_range(0..neighbors.len())]
        } else {
            let prev = walk[walk.len() - 2];
            loop {
                let candidate = neighbors[rng.gen_range(0..neighbors.len())];
                let w = bias(g, prev, candidate, cfg.p, cfg.q);
                if w >= max_bias || rng.gen::<f64>() * max_bias < w {
                    break candidate;
                }
            }
        };
        walk.push(next);
    }
    walk
}

fn walk_rng(seed: u64, start: usize, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ start as u64);
    rng.set_stream(round as u64);
    rng
}

/// `walks_per_node` walks from every node, ordered round by round. Each walk
/// draws from its own stream seeded by `seed ^ node`, so the parallel result
/// equals a sequential run.
pub fn generate_walks(g: &KnowledgeGraph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Empty("graph"));
    }
    Ok((0..cfg.walks_per_node * n)
        .into_par_iter()
        .map(|i| {
            let (round, start) = (i / n, i % n);
            let mut rng = walk_rng(cfg.seed, start, round);
            walk_from(g, start, cfg, &mut rng)
        })
        .collect())
}
