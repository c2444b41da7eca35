use std::path::{Path, PathBuf};

use serde_json::json;

use super::artifacts as a;
use super::config::{EvalTarget, ExportSource, ModelKind, RunConfig};
use super::Stage;
use crate::autodiff::{Checkpoint, CHECKPOINT_MAGIC};
use crate::error::{Error, Result};
use crate::evalsuite::{
    davies_bouldin, embeddings_to_tsv, ClusterSet, ExportRow, MetricsReport, RetrievalMetrics,
};
use crate::ingest::{
    build_label_space, calibrate_min_freq, default_stop_words, extract_title_keywords,
    load_dataset, read_features, AttributeFamily, EmbeddingTable, FeatureStore, LabelSpace,
    PaintingRecord, SplitName, TechniqueGrammar, EMBEDDING_MAGIC,
};
use crate::kgraph::{
    build_graph, check_structure, derive_attributes, graph_from_text, graph_stats, graph_to_text,
    GRAPH_MAGIC,
};
use crate::models::{
    build_samples, context_key, extract_embedding, train_kgm, train_mtl, AttributeClassifier,
    ContextEmbedder, KgmModel, MtlModel, TrunkAdapter,
};
use crate::node2vec::{generate_walks, train_skipgram};
use crate::retrieval::{
    build_tfidf_vocab, encode_text, encode_visual, rankings_to_json_lines, ranked_by_similarity,
    relevant_ranks, similarity_matrix, train_retrieval, Direction, RankingRecord,
    RetrievalModel, RetrievalPair, TfIdfVocab, VOCAB_MAGIC,
};

pub(super) struct StageOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

fn artifact(cfg: &RunConfig, name: &str, producer: Stage) -> Result<PathBuf> {
    let path = cfg.output_dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            artifact: name.to_owned(),
            stage: producer.name().to_owned(),
        })
    }
}

fn data_file(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ))
    }
}

fn model_artifact(kind: ModelKind) -> (&'static str, Stage) {
    match kind {
        ModelKind::Mtl => (a::MTL, Stage::TrainMtl),
        ModelKind::Kgm => (a::KGM, Stage::TrainKgm),
    }
}

fn model_input(cfg: &RunConfig, kind: ModelKind) -> Result<PathBuf> {
    let (name, producer) = model_artifact(kind);
    artifact(cfg, name, producer)
}

/// Files a stage reads, checked for presence in the order a user would
/// have to produce them.
pub(super) fn inputs(stage: Stage, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let d = &cfg.data;
    let mut v = match stage {
        Stage::BuildGraph => {
            let mut v = vec![data_file(&d.train)?];
            if let Some(p) = &cfg.graph.stop_words {
                v.push(data_file(p)?);
            }
            v
        }
        Stage::TrainNode2vec => vec![artifact(cfg, a::GRAPH, Stage::BuildGraph)?],
        Stage::TrainMtl => vec![data_file(&d.train)?, data_file(&d.val)?, data_file(&d.features)?],
        Stage::TrainKgm => vec![
            artifact(cfg, a::CONTEXT, Stage::TrainNode2vec)?,
            data_file(&d.train)?,
            data_file(&d.val)?,
            data_file(&d.features)?,
        ],
        Stage::TrainRetrieval => vec![
            model_input(cfg, cfg.retrieval.classifier)?,
            data_file(&d.train)?,
            data_file(&d.features)?,
        ],
        Stage::Evaluate => {
            let mut v = Vec::new();
            for target in &cfg.evaluate.models {
                match target {
                    EvalTarget::Kgm => v.push(model_input(cfg, ModelKind::Kgm)?),
                    EvalTarget::Mtl => v.push(model_input(cfg, ModelKind::Mtl)?),
                    EvalTarget::Retrieval => {
                        v.push(model_input(cfg, cfg.retrieval.classifier)?);
                        for name in [a::RETRIEVAL, a::VOCAB_COMMENT, a::VOCAB_TITLE] {
                            v.push(artifact(cfg, name, Stage::TrainRetrieval)?);
                        }
                    }
                }
            }
            v.extend([data_file(&d.train)?, data_file(&d.test)?, data_file(&d.features)?]);
            v
        }
        Stage::ClusterQuality => vec![
            model_input(cfg, cfg.cluster.model)?,
            data_file(&d.test)?,
            data_file(&d.features)?,
        ],
        Stage::ExportEmbeddings => match cfg.export.source {
            ExportSource::Context => vec![
                artifact(cfg, a::CONTEXT, Stage::TrainNode2vec)?,
                data_file(&d.train)?,
            ],
            ExportSource::Mtl | ExportSource::Kgm => {
                let kind = if cfg.export.source == ExportSource::Mtl {
                    ModelKind::Mtl
                } else {
                    ModelKind::Kgm
                };
                vec![model_input(cfg, kind)?, data_file(&d.test)?, data_file(&d.features)?]
            }
        },
    };
    let mut seen = std::collections::HashSet::new();
    v.retain(|p| seen.insert(p.clone()));
    Ok(v)
}

/// Canonical JSON of the hyperparameters a stage depends on. Paths are
/// left out; the files behind them are hashed as inputs instead.
pub(super) fn config_fingerprint(stage: Stage, cfg: &RunConfig) -> Vec<u8> {
    let data = json!({ "delimiter": cfg.data.delimiter, "quoting": cfg.data.quoting });
    let params = match stage {
        Stage::BuildGraph => json!({
            "data": data,
            "keyword_max_ngram": cfg.graph.keyword_max_ngram,
            "keyword_min_freq": cfg.graph.keyword_min_freq,
            "keyword_target": cfg.graph.keyword_target,
        }),
        Stage::TrainNode2vec => json!({ "walk": cfg.walk, "skipgram": cfg.skipgram }),
        Stage::TrainMtl => json!({ "data": data, "labels": cfg.labels, "mtl": cfg.mtl }),
        Stage::TrainKgm => json!({ "data": data, "labels": cfg.labels, "kgm": cfg.kgm }),
        Stage::TrainRetrieval => {
            json!({ "data": data, "labels": cfg.labels, "retrieval": cfg.retrieval })
        }
        Stage::Evaluate => json!({
            "data": data,
            "labels": cfg.labels,
            "evaluate": cfg.evaluate,
            "retrieval": cfg.retrieval,
        }),
        Stage::ClusterQuality => json!({ "data": data, "cluster": cfg.cluster }),
        Stage::ExportEmbeddings => json!({ "data": data, "export": cfg.export }),
    };
    let doc = json!({ "stage": stage.name(), "seed": cfg.seed, "params": params });
    serde_json::to_vec(&doc).expect("fingerprint serialises")
}

pub(super) fn execute(stage: Stage, cfg: &RunConfig) -> Result<StageOutput> {
    match stage {
        Stage::BuildGraph => build_graph_stage(cfg),
        Stage::TrainNode2vec => node2vec_stage(cfg),
        Stage::TrainMtl => mtl_stage(cfg),
        Stage::TrainKgm => kgm_stage(cfg),
        Stage::TrainRetrieval => retrieval_stage(cfg),
        Stage::Evaluate => evaluate_stage(cfg),
        Stage::ClusterQuality => cluster_stage(cfg),
        Stage::ExportEmbeddings => export_stage(cfg),
    }
}

fn split(cfg: &RunConfig, which: SplitName) -> Result<Vec<PaintingRecord>> {
    let path = match which {
        SplitName::Train => &cfg.data.train,
        SplitName::Val => &cfg.data.val,
        SplitName::Test => &cfg.data.test,
    };
    Ok(load_dataset(path, which, cfg.data.format()?)?.records)
}

/// Reads an artifact and refuses it unless it starts with `magic`.
fn read_checked(path: &Path, magic: &[u8]) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(magic) {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: bytes[..bytes.len().min(magic.len())].to_vec(),
        });
    }
    Ok(bytes)
}

fn read_text_artifact(path: &Path, magic: &str) -> Result<String> {
    String::from_utf8(read_checked(path, magic.as_bytes())?)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_checked(path, CHECKPOINT_MAGIC)?)
}

fn read_context(cfg: &RunConfig) -> Result<EmbeddingTable> {
    let path = artifact(cfg, a::CONTEXT, Stage::TrainNode2vec)?;
    EmbeddingTable::from_bytes(&read_checked(&path, EMBEDDING_MAGIC)?, EMBEDDING_MAGIC)
}

fn read_vocab(cfg: &RunConfig, name: &str) -> Result<TfIdfVocab> {
    let path = artifact(cfg, name, Stage::TrainRetrieval)?;
    TfIdfVocab::from_text(&read_text_artifact(&path, VOCAB_MAGIC)?)
}

fn json_lines<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    items
        .into_iter()
        .flat_map(|i| {
            let mut line = serde_json::to_vec(&i).expect("record serialises");
            line.push(b'\n');
            line
        })
        .collect()
}

fn build_graph_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let train = split(cfg, SplitName::Train)?;
    let stop = match &cfg.graph.stop_words {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::io(p, e))?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect(),
        None => default_stop_words(),
    };
    let titles: Vec<&str> = train.iter().map(|r| r.title.as_str()).collect();
    let n_max = cfg.graph.keyword_max_ngram;
    let min_freq = cfg
        .graph
        .keyword_min_freq
        .unwrap_or_else(|| calibrate_min_freq(&titles, n_max, cfg.graph.keyword_target, &stop));
    let keywords = extract_title_keywords(&titles, n_max, min_freq, &stop);
    let derived = derive_attributes(&train, &TechniqueGrammar::default(), &keywords);
    let graph = build_graph(&train, &derived)?;
    check_structure(&graph)?;
    let stats = format!("{}keyword_min_freq={min_freq}\n", graph_stats(&graph));
    Ok(StageOutput {
        files: vec![
            (a::GRAPH.into(), graph_to_text(&graph).into_bytes()),
            (a::GRAPH_STATS.into(), stats.clone().into_bytes()),
        ],
        summary: stats,
    })
}

fn node2vec_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let path = artifact(cfg, a::GRAPH, Stage::BuildGraph)?;
    let graph = graph_from_text(&read_text_artifact(&path, GRAPH_MAGIC)?)?;
    let walks = generate_walks(&graph, &cfg.walk)?;
    let model = train_skipgram(&walks, graph.node_count(), &cfg.skipgram, cfg.seed, |_, _| {})?;
    let mut table = EmbeddingTable::new(cfg.skipgram.dim)?;
    for (id, vector) in model.input.iter().enumerate() {
        table.insert_f64(graph.node(id).qualified(), vector)?;
    }
    let losses = model
        .epoch_loss
        .iter()
        .enumerate()
        .map(|(epoch, loss)| json!({ "epoch": epoch, "loss": loss }));
    let last = model.epoch_loss.last().copied().unwrap_or(f64::NAN);
    Ok(StageOutput {
        files: vec![
            (a::CONTEXT.into(), table.to_bytes(EMBEDDING_MAGIC)),
            (a::NODE2VEC_LOSS.into(), json_lines(losses)),
        ],
        summary: format!(
            "walks={}\nvectors={}\ndim={}\nfinal_loss={last}\n",
            walks.len(),
            table.len(),
            table.dim()
        ),
    })
}

fn spaces(cfg: &RunConfig, train: &[PaintingRecord], families: &[AttributeFamily]) -> Result<Vec<LabelSpace>> {
    families
        .iter()
        .map(|&f| build_label_space(train, f, cfg.labels.min_count))
        .collect()
}

fn mtl_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let train = split(cfg, SplitName::Train)?;
    let val = split(cfg, SplitName::Val)?;
    let features = read_features(&cfg.data.features)?;
    let spaces = spaces(cfg, &train, &cfg.mtl.tasks)?;
    let train_s = build_samples(&train, &features, &spaces)?;
    let val_s = build_samples(&val, &features, &spaces)?;
    let tasks: Vec<(String, usize)> = spaces
        .iter()
        .map(|s| (s.family.name().to_owned(), s.len()))
        .collect();
    let mut model = MtlModel::new(
        features.dim(),
        &tasks,
        cfg.mtl.task_weights.clone(),
        cfg.mtl.arch,
        cfg.seed,
    )?;
    let history = train_mtl(&mut model, &train_s, &val_s, &cfg.mtl.train)?;
    Ok(StageOutput {
        files: vec![
            (a::MTL.into(), model.to_checkpoint().to_bytes()),
            (a::MTL_HISTORY.into(), history.to_json_lines().into_bytes()),
        ],
        summary: format!(
            "epochs={}\nbest_epoch={}\nbest_val_accuracy={}\n",
            history.epochs.len(),
            history.best_epoch,
            history.best_val_metric
        ),
    })
}

fn kgm_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let table = read_context(cfg)?;
    let train = split(cfg, SplitName::Train)?;
    let val = split(cfg, SplitName::Val)?;
    let features = read_features(&cfg.data.features)?;
    let space = build_label_space(&train, cfg.kgm.task, cfg.labels.min_count)?;
    let train_s = build_samples(&train, &features, std::slice::from_ref(&space))?;
    let val_s = build_samples(&val, &features, std::slice::from_ref(&space))?;
    let mut model = KgmModel::new(
        features.dim(),
        cfg.kgm.task.name(),
        space.len(),
        table.dim(),
        (cfg.kgm.lambda_classifier, cfg.kgm.lambda_encoder),
        cfg.kgm.arch,
        cfg.seed,
    )?;
    let history = train_kgm(&mut model, &train_s, &val_s, &table, &cfg.kgm.train)?;
    Ok(StageOutput {
        files: vec![
            (a::KGM.into(), model.to_checkpoint().to_bytes()),
            (a::KGM_HISTORY.into(), history.to_json_lines().into_bytes()),
        ],
        summary: format!(
            "epochs={}\nbest_epoch={}\nbest_val_accuracy={}\n",
            history.epochs.len(),
            history.best_epoch,
            history.best_val_metric
        ),
    })
}

/// A trained model reloaded from its checkpoint.
enum Loaded {
    Mtl(Box<MtlModel>),
    Kgm(Box<KgmModel>),
}

impl Loaded {
    fn load(cfg: &RunConfig, kind: ModelKind) -> Result<Self> {
        let ckpt = read_checkpoint(&model_input(cfg, kind)?)?;
        Ok(match kind {
            ModelKind::Mtl => Loaded::Mtl(Box::new(MtlModel::from_checkpoint(&ckpt)?)),
            ModelKind::Kgm => Loaded::Kgm(Box::new(KgmModel::from_checkpoint(&ckpt)?)),
        })
    }

    fn trunk(&self) -> &TrunkAdapter {
        match self {
            Loaded::Mtl(m) => m.trunk(),
            Loaded::Kgm(m) => m.trunk(),
        }
    }
}

/// The frozen per-attribute classifier used by retrieval.
struct FrozenClassifier {
    model: Loaded,
    task: usize,
}

impl FrozenClassifier {
    fn load(cfg: &RunConfig, space: &LabelSpace) -> Result<Self> {
        let model = Loaded::load(cfg, cfg.retrieval.classifier)?;
        let attribute = cfg.retrieval.attribute;
        let task = match &model {
            Loaded::Mtl(m) => m.task_index(attribute.name()).ok_or_else(|| {
                Error::Config(format!("mtl checkpoint has no {attribute} head; rerun train-mtl"))
            })?,
            Loaded::Kgm(m) if m.classifier.task != attribute.name() => {
                return Err(Error::Config(format!(
                    "kgm checkpoint classifies {}, not {attribute}; rerun train-kgm",
                    m.classifier.task
                )))
            }
            Loaded::Kgm(_) => 0,
        };
        let c = FrozenClassifier { model, task };
        if c.class_count() != space.len() {
            return Err(Error::Config(format!(
                "classifier has {} classes but the {attribute} label space has {}; retrain it",
                c.class_count(),
                space.len()
            )));
        }
        Ok(c)
    }
}

impl AttributeClassifier for FrozenClassifier {
    fn class_count(&self) -> usize {
        match &self.model {
            Loaded::Mtl(m) => m.heads[self.task].classes(),
            Loaded::Kgm(m) => m.class_count(),
        }
    }

    fn input_dim(&self) -> usize {
        self.model.trunk().input_dim()
    }

    fn attribute_scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        match &self.model {
            Loaded::Mtl(m) => m.task(self.task)?.attribute_scores(feature),
            Loaded::Kgm(m) => m.attribute_scores(feature),
        }
    }
}

fn feature(features: &FeatureStore, id: &str) -> Result<Vec<f64>> {
    features
        .get_f64(id)
        .ok_or_else(|| Error::Ingest(format!("no visual feature for `{id}`")))
}

fn retrieval_pairs(
    records: &[PaintingRecord],
    features: &FeatureStore,
    classifier: &FrozenClassifier,
    vocabs: (&TfIdfVocab, &TfIdfVocab),
    space: &LabelSpace,
    softmax: bool,
) -> Result<Vec<RetrievalPair>> {
    records
        .iter()
        .map(|r| {
            Ok(RetrievalPair {
                id: r.id.clone(),
                visual: encode_visual(&feature(features, &r.id)?, classifier, softmax)?,
                text: encode_text(r, vocabs.0, vocabs.1, space),
            })
        })
        .collect()
}

fn retrieval_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let train = split(cfg, SplitName::Train)?;
    let features = read_features(&cfg.data.features)?;
    let rc = &cfg.retrieval;
    let space = build_label_space(&train, rc.attribute, cfg.labels.min_count)?;
    let classifier = FrozenClassifier::load(cfg, &space)?;
    let comments: Vec<&str> = train.iter().map(|r| r.comment.as_str()).collect();
    let titles: Vec<&str> = train.iter().map(|r| r.title.as_str()).collect();
    let vocab_comment = build_tfidf_vocab(&comments, rc.comment_min_count)?;
    let vocab_title = build_tfidf_vocab(&titles, rc.title_min_count)?;
    let pairs = retrieval_pairs(
        &train,
        &features,
        &classifier,
        (&vocab_comment, &vocab_title),
        &space,
        rc.model.attribute_softmax,
    )?;
    let visual_dim = pairs[0].visual.len();
    let text_dim = pairs[0].text.len();
    let mut model = RetrievalModel::new(visual_dim, text_dim, &rc.model)?;
    let losses = train_retrieval(&mut model, &pairs, &rc.model)?;
    let last = losses.last().copied().unwrap_or(f64::NAN);
    let loss_lines = losses
        .iter()
        .enumerate()
        .map(|(epoch, loss)| json!({ "epoch": epoch, "loss": loss }));
    Ok(StageOutput {
        files: vec![
            (a::RETRIEVAL.into(), model.to_checkpoint().to_bytes()),
            (a::VOCAB_COMMENT.into(), vocab_comment.to_text().into_bytes()),
            (a::VOCAB_TITLE.into(), vocab_title.to_text().into_bytes()),
            (a::RETRIEVAL_LOSS.into(), json_lines(loss_lines)),
        ],
        summary: format!(
            "pairs={}\nvocab_comment={}\nvocab_title={}\nvisual_dim={visual_dim}\ntext_dim={text_dim}\nfinal_loss={last}\n",
            pairs.len(),
            vocab_comment.len(),
            vocab_title.len(),
        ),
    })
}

fn evaluate_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let train = split(cfg, SplitName::Train)?;
    let test = split(cfg, SplitName::Test)?;
    let features = read_features(&cfg.data.features)?;
    let mut report = MetricsReport::default();
    let mut files = Vec::new();
    for target in &cfg.evaluate.models {
        match target {
            EvalTarget::Kgm => {
                let Loaded::Kgm(model) = Loaded::load(cfg, ModelKind::Kgm)? else {
                    unreachable!()
                };
                let family = family_of(&model.classifier.task)?;
                let space = build_label_space(&train, family, cfg.labels.min_count)?;
                let samples = build_samples(&test, &features, std::slice::from_ref(&space))?;
                report.push(format!("kgm.{family}.accuracy"), model.accuracy(&samples)?);
            }
            EvalTarget::Mtl => {
                let Loaded::Mtl(model) = Loaded::load(cfg, ModelKind::Mtl)? else {
                    unreachable!()
                };
                let families = model
                    .heads
                    .iter()
                    .map(|h| family_of(&h.task))
                    .collect::<Result<Vec<_>>>()?;
                let spaces = spaces(cfg, &train, &families)?;
                let samples = build_samples(&test, &features, &spaces)?;
                for (f, acc) in families.iter().zip(model.accuracies(&samples)?) {
                    report.push(format!("mtl.{f}.accuracy"), acc);
                }
            }
            EvalTarget::Retrieval => {
                let (metrics, rankings) = evaluate_retrieval(cfg, &train, &test, &features)?;
                for (dir, m) in metrics {
                    report.add_retrieval(&format!("retrieval.{}", dir.name()), &m);
                }
                files.push((a::RANKINGS.to_owned(), rankings_to_json_lines(&rankings).into_bytes()));
            }
        }
    }
    files.insert(0, (a::METRICS.to_owned(), report.to_string().into_bytes()));
    files.insert(1, (a::METRICS_JSONL.to_owned(), report.to_json_lines().into_bytes()));
    Ok(StageOutput {
        files,
        summary: report.to_string(),
    })
}

fn family_of(task: &str) -> Result<AttributeFamily> {
    task.parse()
        .map_err(|_| Error::Ingest(format!("checkpoint head `{task}` is not an attribute")))
}

type RetrievalEvaluation = (Vec<(Direction, RetrievalMetrics)>, Vec<RankingRecord>);

fn evaluate_retrieval(
    cfg: &RunConfig,
    train: &[PaintingRecord],
    test: &[PaintingRecord],
    features: &FeatureStore,
) -> Result<RetrievalEvaluation> {
    if test.is_empty() {
        return Err(Error::Empty("retrieval gallery"));
    }
    let rc = &cfg.retrieval;
    let space = build_label_space(train, rc.attribute, cfg.labels.min_count)?;
    let classifier = FrozenClassifier::load(cfg, &space)?;
    let model = RetrievalModel::from_checkpoint(&read_checkpoint(&artifact(
        cfg,
        a::RETRIEVAL,
        Stage::TrainRetrieval,
    )?)?)?;
    let vc = read_vocab(cfg, a::VOCAB_COMMENT)?;
    let vt = read_vocab(cfg, a::VOCAB_TITLE)?;
    let pairs = retrieval_pairs(test, features, &classifier, (&vc, &vt), &space, rc.model.attribute_softmax)?;
    let visual = pairs
        .iter()
        .map(|p| model.project_visual(&p.visual))
        .collect::<Result<Vec<_>>>()?;
    let text = pairs
        .iter()
        .map(|p| model.project_text(&p.text))
        .collect::<Result<Vec<_>>>()?;
    let sim = similarity_matrix(&text, &visual)?;
    let mut metrics = Vec::new();
    let mut rankings = Vec::new();
    for dir in [Direction::TextToImage, Direction::ImageToText] {
        let ranks = relevant_ranks(&sim, dir);
        metrics.push((dir, RetrievalMetrics::from_ranks(&ranks)?));
        for (q, order) in ranked_by_similarity(&sim, dir).into_iter().enumerate() {
            rankings.push(RankingRecord {
                direction: dir,
                query: pairs[q].id.clone(),
                top: order
                    .iter()
                    .take(cfg.evaluate.top_k)
                    .map(|&j| pairs[j].id.clone())
                    .collect(),
                relevant_rank: ranks[q],
            });
        }
    }
    Ok((metrics, rankings))
}

fn model_embeddings(
    model: &Loaded,
    records: &[PaintingRecord],
    features: &FeatureStore,
) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| match model {
            Loaded::Mtl(m) => extract_embedding(m.as_ref(), &feature(features, &r.id)?),
            Loaded::Kgm(m) => extract_embedding(m.as_ref(), &feature(features, &r.id)?),
        })
        .collect()
}

fn attribute_label(record: &PaintingRecord, family: AttributeFamily) -> String {
    family.value(record).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cluster_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let test = split(cfg, SplitName::Test)?;
    let features = read_features(&cfg.data.features)?;
    let model = Loaded::load(cfg, cfg.cluster.model)?;
    let embeddings = model_embeddings(&model, &test, &features)?;
    let mut report = MetricsReport::default();
    for &family in &cfg.cluster.attributes {
        let set = ClusterSet {
            embeddings: embeddings.clone(),
            labels: test.iter().map(|r| attribute_label(r, family)).collect(),
            p: cfg.cluster.p,
        };
        report.push(format!("{family}.davies_bouldin"), davies_bouldin(&set)?);
    }
    Ok(StageOutput {
        files: vec![
            (a::CLUSTER.into(), report.to_string().into_bytes()),
            (a::CLUSTER_JSONL.into(), report.to_json_lines().into_bytes()),
        ],
        summary: report.to_string(),
    })
}

fn export_stage(cfg: &RunConfig) -> Result<StageOutput> {
    let label = cfg.export.label;
    let rows: Vec<ExportRow> = match cfg.export.source {
        ExportSource::Context => {
            let table = read_context(cfg)?;
            split(cfg, SplitName::Train)?
                .iter()
                .map(|r| {
                    Ok(ExportRow {
                        id: r.id.clone(),
                        label: attribute_label(r, label),
                        values: table
                            .get_f64(&context_key(&r.id))
                            .ok_or_else(|| Error::MissingContext(r.id.clone()))?,
                    })
                })
                .collect::<Result<_>>()?
        }
        ExportSource::Mtl | ExportSource::Kgm => {
            let kind = if cfg.export.source == ExportSource::Mtl {
                ModelKind::Mtl
            } else {
                ModelKind::Kgm
            };
            let model = Loaded::load(cfg, kind)?;
            let test = split(cfg, SplitName::Test)?;
            let features = read_features(&cfg.data.features)?;
            model_embeddings(&model, &test, &features)?
                .into_iter()
                .zip(&test)
                .map(|(values, r)| ExportRow {
                    id: r.id.clone(),
                    label: attribute_label(r, label),
                    values,
                })
                .collect()
        }
    };
    Ok(StageOutput {
        summary: format!("rows={}\n", rows.len()),
        files: vec![(a::EMBEDDINGS.into(), embeddings_to_tsv(&rows)?)],
    })
}
