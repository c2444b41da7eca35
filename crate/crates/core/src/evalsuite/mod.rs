//! Classification accuracy, retrieval metrics and cluster quality.

mod cluster;
mod export;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{davies_bouldin, ClusterSet};
pub use export::{embeddings_to_tsv, export_embeddings, read_exported_embeddings, ExportRow};

/// Fraction of positions where `predictions` and `labels` agree.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

fn check_ranks(ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::Empty("ranks"));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidArgument("ranks are 1-based".into()));
    }
    Ok(())
}

/// Share of queries whose relevant item is within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    check_ranks(ranks)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Median rank; for an even count, the mean of the two middle values.
pub fn median_rank(ranks: &[usize]) -> Result<f64> {
    check_ranks(ranks)?;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub median_rank: f64,
}

impl RetrievalMetrics {
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        Ok(Self {
            recall_at_1: recall_at_k(ranks, 1)?,
            recall_at_5: recall_at_k(ranks, 5)?,
            recall_at_10: recall_at_k(ranks, 10)?,
            median_rank: median_rank(ranks)?,
        })
    }
}

/// Ordered metric values, printable as `key=value` lines or JSON lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub entries: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct MetricLine<'a> {
    metric: &'a str,
    value: f64,
}

impl MetricsReport {
    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), value));
    }

    pub fn add_retrieval(&mut self, prefix: &str, m: &RetrievalMetrics) {
        self.push(format!("{prefix}.r@1"), m.recall_at_1);
        self.push(format!("{prefix}.r@5"), m.recall_at_5);
        self.push(format!("{prefix}.r@10"), m.recall_at_10);
        self.push(format!("{prefix}.median_rank"), m.median_rank);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn to_json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| {
                let mut line = serde_json::to_string(&MetricLine { metric: k, value: *v })
                    .expect("metric line serializes");
                line.push('\n');
                line
            })
            .collect()
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
