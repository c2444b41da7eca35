use std::path::PathBuf;
use std::process::ExitCode;

use artctx::pipeline::{run_stage, RunConfig, Stage};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "artctx", version, about = "Context-aware art analysis pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "artctx.toml")]
    config: PathBuf,
    /// Seed for every stage; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rerun even when inputs and config are unchanged.
    #[arg(long, global = true)]
    force: bool,
    /// Dotted config override, e.g. `kgm.train.max_epochs=50`. Repeatable.
    #[arg(long = "stage-override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build the knowledge graph from the training split.
    BuildGraph,
    /// Learn node2vec context vectors over the graph.
    TrainNode2vec,
    /// Train the multitask classifier.
    TrainMtl,
    /// Train the graph-supervised classifier.
    TrainKgm,
    /// Train the text/image retrieval projections.
    TrainRetrieval,
    /// Test-split accuracy and retrieval metrics.
    Evaluate,
    /// Davies-Bouldin index of test embeddings per attribute.
    ClusterQuality,
    /// Write embeddings with labels as TSV.
    ExportEmbeddings,
}

impl From<Command> for Stage {
    fn from(c: Command) -> Self {
        match c {
            Command::BuildGraph => Stage::BuildGraph,
            Command::TrainNode2vec => Stage::TrainNode2vec,
            Command::TrainMtl => Stage::TrainMtl,
            Command::TrainKgm => Stage::TrainKgm,
            Command::TrainRetrieval => Stage::TrainRetrieval,
            Command::Evaluate => Stage::Evaluate,
            Command::ClusterQuality => Stage::ClusterQuality,
            Command::ExportEmbeddings => Stage::ExportEmbeddings,
        }
    }
}

fn run(cli: &Cli) -> artctx::Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = RunConfig::load(&cli.config, &overrides)?;
    let report = run_stage(cli.command.into(), &cfg, cli.force)?;
    print!("{}", report.summary);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
