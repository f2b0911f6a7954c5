//! Runs a recipe programmatically, the same way the command line does.
//!
//! ```text
//! cargo run --release --example run_experiment -- configs/levels_qubit_parity.toml
//! ```

use std::path::PathBuf;

use ethlab::cli::{run, ExperimentConfig, RunOptions};

fn main() -> ethlab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "configs/levels_qubit_parity.toml".into());
    let cfg = ExperimentConfig::load(&PathBuf::from(&path))?;
    let kind = cfg.experiment.expect("recipe names its experiment");
    let opts = RunOptions {
        seed: None,
        out: Some(std::env::temp_dir().join("ethlab-example")),
    };
    let manifest = run(kind, &cfg, &opts)?;
    println!("{} finished in {:.2} s", manifest.command, manifest.wall_time_seconds);
    for f in &manifest.files {
        println!("  {:28} {:>9} bytes  {}", f.name, f.bytes, &f.sha256[..16]);
    }
    println!("{}", serde_json::to_string_pretty(&manifest.summary).unwrap());
    Ok(())
}
