//! Drives a run from a TOML config, the same way `crackpath run` does, and
//! prints the first lines of the history it writes.
//!
//! `cargo run --example run_config [config.toml]`

use std::path::PathBuf;

use crackpath::cli::{run, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/single_element.toml"));
    let mut config = RunConfig::load(&path)?;
    let out = tempfile::tempdir()?;
    config.output.dir = out.path().to_path_buf();
    let summary = run(&config)?;
    println!(
        "{} steps ({:?}), lambda {:.5e}, E_cum {:.5}",
        summary.steps, summary.termination, summary.lambda, summary.e_cum
    );
    let history = std::fs::read_to_string(summary.output_dir.join("history.csv"))?;
    for line in history.lines().take(6) {
        println!("{line}");
    }
    let mut files: Vec<_> = std::fs::read_dir(&summary.output_dir)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("wrote {}", files.join(" "));
    Ok(())
}
