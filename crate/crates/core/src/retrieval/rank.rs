use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::dot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    TextToImage,
    ImageToText,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::TextToImage => "text-to-image",
            Direction::ImageToText => "image-to-text",
        }
    }
}

/// `sim[i][j]` is the cosine between text `i` and image `j`. Inputs are
/// assumed unit-norm, as produced by the projections.
pub fn similarity_matrix(text: &[Vec<f64>], visual: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if let (Some(t), Some(v)) = (text.first(), visual.first()) {
        if t.len() != v.len() {
            return Err(Error::DimMismatch {
                expected: t.len(),
                actual: v.len(),
            });
        }
    }
    Ok(text
        .iter()
        .map(|t| visual.iter().map(|v| dot(t, v)).collect())
        .collect())
}

/// Candidate indices by descending score; ties keep the lower index first.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn query_scores(sim: &[Vec<f64>], direction: Direction, query: usize) -> Vec<f64> {
    match direction {
        Direction::TextToImage => sim[query].clone(),
        Direction::ImageToText => sim.iter().map(|row| row[query]).collect(),
    }
}

fn query_count(sim: &[Vec<f64>], direction: Direction) -> usize {
    match direction {
        Direction::TextToImage => sim.len(),
        Direction::ImageToText => sim.first().map_or(0, Vec::len),
    }
}

/// Full ranking for every query in the given direction.
pub fn ranked_by_similarity(sim: &[Vec<f64>], direction: Direction) -> Vec<Vec<usize>> {
    (0..query_count(sim, direction))
        .map(|q| rank(&query_scores(sim, direction, q)))
        .collect()
}

/// 1-based rank of the matching item (same index) for each query, with the
/// tie rule of [`rank`].
pub fn relevant_ranks(sim: &[Vec<f64>], direction: Direction) -> Vec<usize> {
    (0..query_count(sim, direction))
        .map(|q| {
            let scores = query_scores(sim, direction, q);
            let own = scores[q];
            1 + scores
                .iter()
                .enumerate()
                .filter(|&(j, &s)| s > own || (s == own && j < q))
                .count()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub direction: Direction,
    pub query: String,
    pub top: Vec<String>,
    pub relevant_rank: usize,
}

/// One JSON object per line.
pub fn rankings_to_json_lines(records: &[RankingRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("ranking record serialises") + "\n")
        .collect()
}

pub fn write_rankings(path: &Path, records: &[RankingRecord]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(rankings_to_json_lines(records).as_bytes()))
        .map_err(|e| Error::io(path, e))
}
