use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AttributeFamily, DatasetFormat};
use crate::models::{ArchConfig, TrainConfig};
use crate::node2vec::{SkipGramConfig, WalkConfig};
use crate::retrieval::RetrievalConfig;

/// Everything a pipeline run needs. Relative paths resolve against the
/// directory holding the config file. The top-level `seed` replaces the
/// per-block seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub labels: LabelConfig,
    pub graph: GraphConfig,
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
    pub mtl: MtlStageConfig,
    pub kgm: KgmStageConfig,
    pub retrieval: RetrievalStageConfig,
    pub evaluate: EvaluateConfig,
    pub cluster: ClusterConfig,
    pub export: ExportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            data: DataConfig::default(),
            labels: LabelConfig::default(),
            graph: GraphConfig::default(),
            walk: WalkConfig::default(),
            skipgram: SkipGramConfig::default(),
            mtl: MtlStageConfig::default(),
            kgm: KgmStageConfig::default(),
            retrieval: RetrievalStageConfig::default(),
            evaluate: EvaluateConfig::default(),
            cluster: ClusterConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
    pub features: PathBuf,
    /// Single-character column delimiter.
    pub delimiter: String,
    pub quoting: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::from("train.tsv"),
            val: PathBuf::from("val.tsv"),
            test: PathBuf::from("test.tsv"),
            features: PathBuf::from("features.bin"),
            delimiter: "\t".into(),
            quoting: false,
        }
    }
}

impl DataConfig {
    pub fn format(&self) -> Result<DatasetFormat> {
        match self.delimiter.as_bytes() {
            [d] => Ok(DatasetFormat {
                delimiter: *d,
                quoting: self.quoting,
            }),
            _ => Err(Error::Config(format!(
                "data.delimiter must be one ASCII character, got {:?}",
                self.delimiter
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Training occurrences a value needs to become its own class.
    pub min_count: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { min_count: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub keyword_max_ngram: usize,
    /// Fixed keyword frequency threshold. When absent the threshold is
    /// calibrated so the training titles yield about `keyword_target`
    /// keywords.
    pub keyword_min_freq: Option<usize>,
    pub keyword_target: usize,
    /// One stop word per line; the bundled English list when absent.
    pub stop_words: Option<PathBuf>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            keyword_max_ngram: 3,
            keyword_min_freq: None,
            keyword_target: 1163,
            stop_words: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtlStageConfig {
    pub tasks: Vec<AttributeFamily>,
    /// Per-task loss weights; uniform when absent.
    pub task_weights: Option<Vec<f64>>,
    pub arch: ArchConfig,
    pub train: TrainConfig,
}

impl Default for MtlStageConfig {
    fn default() -> Self {
        Self {
            tasks: AttributeFamily::ALL.to_vec(),
            task_weights: None,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KgmStageConfig {
    pub task: AttributeFamily,
    pub lambda_classifier: f64,
    pub lambda_encoder: f64,
    pub arch: ArchConfig,
    pub train: TrainConfig,
}

impl Default for KgmStageConfig {
    fn default() -> Self {
        Self {
            task: AttributeFamily::Author,
            lambda_classifier: 0.9,
            lambda_encoder: 0.1,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mtl,
    Kgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalStageConfig {
    /// Frozen classifier feeding the visual side.
    pub classifier: ModelKind,
    /// Attribute predicted on the visual side and one-hot on the text side.
    pub attribute: AttributeFamily,
    /// Minimum train-split count for comment words.
    pub comment_min_count: usize,
    /// Minimum train-split count for title words; titles keep every word by default.
    pub title_min_count: usize,
    #[serde(flatten)]
    pub model: RetrievalConfig,
}

impl Default for RetrievalStageConfig {
    fn default() -> Self {
        Self {
            classifier: ModelKind::Kgm,
            attribute: AttributeFamily::Author,
            comment_min_count: 10,
            title_min_count: 1,
            model: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTarget {
    Mtl,
    Kgm,
    Retrieval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub models: Vec<EvalTarget>,
    /// Gallery ids listed per query in the rankings file.
    pub top_k: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            models: vec![EvalTarget::Kgm, EvalTarget::Mtl, EvalTarget::Retrieval],
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub model: ModelKind,
    pub attributes: Vec<AttributeFamily>,
    pub p: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Kgm,
            attributes: AttributeFamily::ALL.to_vec(),
            p: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportSource {
    Mtl,
    Kgm,
    /// Node2vec vectors of the training paintings.
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub source: ExportSource,
    pub label: AttributeFamily,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            source: ExportSource::Kgm,
            label: AttributeFamily::School,
        }
    }
}

impl RunConfig {
    /// Parses TOML, applies `key.path=value` overrides, then resolves
    /// relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path, overrides: &[String]) -> Result<Self> {
        let mut tree: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.data.train);
        fix(&mut self.data.val);
        fix(&mut self.data.test);
        fix(&mut self.data.features);
        if let Some(p) = self.graph.stop_words.as_mut() {
            fix(p);
        }
    }

    /// Copies the run seed into every block that carries one.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.walk.seed = seed;
        self.mtl.train.seed = seed;
        self.kgm.train.seed = seed;
        self.retrieval.model.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.data.format()?;
        self.walk.validate()?;
        self.skipgram.validate()?;
        if self.labels.min_count == 0 {
            return Err(Error::Config("labels.min_count must be at least 1".into()));
        }
        if self.mtl.tasks.is_empty() {
            return Err(Error::Config("mtl.tasks is empty".into()));
        }
        if self.retrieval.comment_min_count == 0 || self.retrieval.title_min_count == 0 {
            return Err(Error::Config("retrieval vocabulary min counts must be at least 1".into()));
        }
        if self.retrieval.classifier == ModelKind::Mtl
            && !self.mtl.tasks.contains(&self.retrieval.attribute)
        {
            return Err(Error::Config(format!(
                "retrieval.attribute {} is not an mtl task",
                self.retrieval.attribute
            )));
        }
        if self.retrieval.classifier == ModelKind::Kgm && self.retrieval.attribute != self.kgm.task {
            return Err(Error::Config(format!(
                "retrieval.attribute {} differs from kgm.task {}",
                self.retrieval.attribute, self.kgm.task
            )));
        }
        Ok(())
    }
}

/// `a.b.c=value`; the value is read as a TOML literal when it parses as one
/// and as a bare string otherwise.
fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = tree;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
