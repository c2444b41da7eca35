use std::path::Path;

use artctx::pipeline::{artifacts, run_pipeline, run_stage, RunConfig, Stage};
use artctx::synth::{generate, SynthConfig, SMOKE_CONFIG};
use artctx::Error;

fn setup(dir: &Path, overrides: &[&str]) -> RunConfig {
    generate(&SynthConfig::default()).unwrap().write(dir).unwrap();
    std::fs::write(dir.join("artctx.toml"), SMOKE_CONFIG).unwrap();
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::load(&dir.join("artctx.toml"), &overrides).unwrap()
}

fn manifests(cfg: &RunConfig) -> Vec<(String, Vec<u8>)> {
    Stage::ALL
        .iter()
        .map(|s| {
            let p = cfg.output_dir.join("manifests").join(format!("{s}.json"));
            (s.to_string(), std::fs::read(p).unwrap())
        })
        .collect()
}

#[test]
fn full_run_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg_a = setup(a.path(), &[]);
    let cfg_b = setup(b.path(), &[]);
    let reports = run_pipeline(&cfg_a, false).unwrap();
    assert!(reports.iter().all(|r| !r.skipped));
    run_pipeline(&cfg_b, false).unwrap();
    assert_eq!(manifests(&cfg_a), manifests(&cfg_b));

    let metrics = std::fs::read_to_string(cfg_a.output_dir.join(artifacts::METRICS)).unwrap();
    for key in ["kgm.author.accuracy=", "mtl.type.accuracy=", "retrieval.text-to-image.r@1="] {
        assert!(metrics.contains(key), "{metrics}");
    }
}

#[test]
fn unchanged_rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &[]);
    let first = run_stage(Stage::BuildGraph, &cfg, false).unwrap();
    assert!(!first.skipped);
    let again = run_stage(Stage::BuildGraph, &cfg, false).unwrap();
    assert!(again.skipped);
    assert_eq!(first.manifest, again.manifest);
    assert!(!run_stage(Stage::BuildGraph, &cfg, true).unwrap().skipped);

    let changed = RunConfig::load(&dir.path().join("artctx.toml"), &["graph.keyword_min_freq=2".into()]).unwrap();
    assert!(!run_stage(Stage::BuildGraph, &changed, false).unwrap().skipped);

    // tampering with an output forces a rerun
    std::fs::write(cfg.output_dir.join(artifacts::GRAPH_STATS), "x").unwrap();
    assert!(!run_stage(Stage::BuildGraph, &changed, false).unwrap().skipped);
}

#[test]
fn missing_upstream_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &[]);
    let err = run_stage(Stage::Evaluate, &cfg, false).unwrap_err();
    assert!(err.to_string().contains("run train-kgm first"), "{err}");
    assert_eq!(err.exit_code(), 3);
    let err = run_stage(Stage::TrainNode2vec, &cfg, false).unwrap_err();
    assert!(err.to_string().contains("run build-graph first"), "{err}");
}

#[test]
fn refuses_artifact_with_wrong_magic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &[]);
    std::fs::create_dir_all(&cfg.output_dir).unwrap();
    std::fs::write(cfg.output_dir.join(artifacts::GRAPH), "#node 0 painting a\n").unwrap();
    let err = run_stage(Stage::TrainNode2vec, &cfg, false).unwrap_err();
    assert!(matches!(err, Error::BadMagic { .. }), "{err}");
}
