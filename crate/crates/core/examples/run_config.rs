//! Runs a TOML experiment config or shipped preset through the full pipeline
//! and prints the fit report.
//!
//! `cargo run --release --example run_config -- <config.toml | preset> [out_dir]`

use std::path::{Path, PathBuf};

use zn_qed::pipeline::{preset, preset_names, run_pipeline, ExperimentConfig, RunOptions};

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(what) = args.first() else {
        eprintln!("usage: run_config <config.toml | preset> [out_dir]; presets: {:?}", preset_names());
        std::process::exit(1);
    };
    let (cfg, base) = if Path::new(what).exists() {
        (ExperimentConfig::load(Path::new(what))?, Path::new(what).parent().map(Path::to_path_buf))
    } else {
        (preset(what)?, None)
    };
    let opts = RunOptions { out_dir: args.get(1).map(PathBuf::from), base_dir: base, ..Default::default() };
    let (report, manifest) = run_pipeline(&cfg, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("{} rows solved, {} reused, {} failed in {:.1} s", manifest.solver_invocations, manifest.reused, manifest.failed, manifest.wall_clock_seconds);
    Ok(())
}
