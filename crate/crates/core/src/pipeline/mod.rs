//! Stage runner behind the `artctx` binary: each stage reads upstream
//! artifacts from the output directory, writes its own atomically and
//! records a manifest of hashes.

mod config;
mod manifest;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{
    ClusterConfig, DataConfig, EvalTarget, EvaluateConfig, ExportConfig, ExportSource,
    GraphConfig, KgmStageConfig, LabelConfig, ModelKind, MtlStageConfig, RetrievalStageConfig,
    RunConfig,
};
pub use manifest::{sha256_hex, FileDigest, Manifest};

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const GRAPH: &str = "graph.txt";
    pub const GRAPH_STATS: &str = "graph_stats.txt";
    pub const CONTEXT: &str = "context.emb";
    pub const NODE2VEC_LOSS: &str = "node2vec_loss.jsonl";
    pub const MTL: &str = "mtl.ckpt";
    pub const MTL_HISTORY: &str = "mtl_history.jsonl";
    pub const KGM: &str = "kgm.ckpt";
    pub const KGM_HISTORY: &str = "kgm_history.jsonl";
    pub const RETRIEVAL: &str = "retrieval.ckpt";
    pub const RETRIEVAL_LOSS: &str = "retrieval_loss.jsonl";
    pub const VOCAB_COMMENT: &str = "vocab_comment.txt";
    pub const VOCAB_TITLE: &str = "vocab_title.txt";
    pub const METRICS: &str = "metrics.txt";
    pub const METRICS_JSONL: &str = "metrics.jsonl";
    pub const RANKINGS: &str = "rankings.jsonl";
    pub const CLUSTER: &str = "cluster_quality.txt";
    pub const CLUSTER_JSONL: &str = "cluster_quality.jsonl";
    pub const EMBEDDINGS: &str = "embeddings.tsv";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    BuildGraph,
    TrainNode2vec,
    TrainMtl,
    TrainKgm,
    TrainRetrieval,
    Evaluate,
    ClusterQuality,
    ExportEmbeddings,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 8] = [
        Stage::BuildGraph,
        Stage::TrainNode2vec,
        Stage::TrainMtl,
        Stage::TrainKgm,
        Stage::TrainRetrieval,
        Stage::Evaluate,
        Stage::ClusterQuality,
        Stage::ExportEmbeddings,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::BuildGraph => "build-graph",
            Stage::TrainNode2vec => "train-node2vec",
            Stage::TrainMtl => "train-mtl",
            Stage::TrainKgm => "train-kgm",
            Stage::TrainRetrieval => "train-retrieval",
            Stage::Evaluate => "evaluate",
            Stage::ClusterQuality => "cluster-quality",
            Stage::ExportEmbeddings => "export-embeddings",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

/// What a stage run did.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    /// Inputs and config matched the previous manifest, nothing was run.
    pub skipped: bool,
    pub summary: String,
    pub manifest: Manifest,
}

/// Runs one stage. Unless `force` is set, a stage whose config hash, input
/// hashes and outputs match its last manifest is skipped.
pub fn run_stage(stage: Stage, cfg: &RunConfig, force: bool) -> Result<StageReport> {
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let inputs = stages::inputs(stage, cfg)?;
    let input_digests = inputs
        .iter()
        .map(|p| FileDigest::of_file(p))
        .collect::<Result<Vec<_>>>()?;
    let config_hash = sha256_hex(&stages::config_fingerprint(stage, cfg));
    let manifest_path = Manifest::path(out_dir, stage.name());
    if !force {
        if let Some(prev) = Manifest::read(&manifest_path)? {
            if prev.config_hash == config_hash
                && prev.inputs == input_digests
                && prev.outputs_intact(out_dir)
            {
                info!("{stage}: up to date");
                return Ok(StageReport {
                    stage,
                    skipped: true,
                    summary: format!("{stage}: up to date\n"),
                    manifest: prev,
                });
            }
        }
    }
    info!("{stage}: running");
    let output = stages::execute(stage, cfg)?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        write_atomic(&out_dir.join(name), bytes)?;
        outputs.push(FileDigest::of_bytes(name, bytes));
    }
    let manifest = Manifest {
        stage: stage.name().to_owned(),
        config_hash,
        inputs: input_digests,
        outputs,
    };
    write_atomic(&manifest_path, &manifest.to_bytes())?;
    Ok(StageReport {
        stage,
        skipped: false,
        summary: output.summary,
        manifest,
    })
}

/// Every stage in dependency order.
pub fn run_pipeline(cfg: &RunConfig, force: bool) -> Result<Vec<StageReport>> {
    Stage::ALL.into_iter().map(|s| run_stage(s, cfg, force)).collect()
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
