//! Generates the synthetic corpus into a directory and runs every stage.
//!
//! ```text
//! cargo run --example pipeline_synthetic -- /tmp/artctx-demo
//! ```

use std::path::PathBuf;

use artctx::pipeline::{run_pipeline, RunConfig};
use artctx::synth::{generate, SynthConfig, SMOKE_CONFIG};

fn main() -> artctx::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("artctx-demo"));
    generate(&SynthConfig::default())?.write(&dir)?;
    let config = dir.join("artctx.toml");
    std::fs::write(&config, SMOKE_CONFIG).map_err(|e| artctx::Error::Io {
        path: config.clone(),
        source: e,
    })?;
    let cfg = RunConfig::load(&config, &[])?;
    for report in run_pipeline(&cfg, false)? {
        println!("== {}", report.stage);
        print!("{}", report.summary);
    }
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}
