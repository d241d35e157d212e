//! Runs every stage on the fixture config and prints the report.
//!
//! Usage: `cargo run --example run_pipeline [OUT_DIR]`

use std::path::PathBuf;

use kgfuse::pipeline::{Pipeline, RunConfig, Stage, REPORT_TEXT_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut config = RunConfig::load(&fixtures.join("config.toml"))?;
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kgfuse-example"));
    config.output.dir = Some(out.clone());

    let pipeline = Pipeline::new(config)?;
    for summary in pipeline.run(Stage::All)? {
        println!("{:<9} {}", summary.stage, summary.notes.join("; "));
    }
    println!("\n{}", std::fs::read_to_string(pipeline.out_path(REPORT_TEXT_FILE))?);
    println!("artifacts in {}", out.display());
    Ok(())
}
