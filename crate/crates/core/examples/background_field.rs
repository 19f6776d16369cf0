//! Background field φ = 1/3 at n = 3: where Σ changes sign, whether the gap
//! stays open with L, and how flat the entanglement profile is.
//!
//! `cargo run --release --example background_field -- [phi] [out_dir]`

use std::path::PathBuf;

use zn_qed::criticality::crossover_diagnostics;
use zn_qed::pipeline::{run_scan, ExperimentConfig, RunOptions};

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let phi: f64 = args.first().map_or(1.0 / 3.0, |s| s.parse().expect("phi"));
    let out: PathBuf = args.get(1).map_or_else(|| std::env::temp_dir().join("zn_qed_phi"), PathBuf::from);
    let mut cfg = ExperimentConfig::from_toml(&format!(
        r#"
        name = "background-field"
        [model]
        n = [3]
        t = [1.0]
        t_unit = "hop"
        phi = [{phi}]
        sector = {{ policy = "lowest" }}
        [grid]
        m = {{ start = -0.8, stop = 0.4, step = 0.1 }}
        L = [6, 8, 10]
        [solver.dmrg]
        chi = 128
        "#
    ))?;
    cfg.output.dir = out;
    let scan = run_scan(&cfg, &RunOptions::default())?;
    let r = crossover_diagnostics(&scan.table.converged(), None)?;
    println!("Sigma zero crossing: {:?} (by size {:?})", r.m_star, r.m_star_by_size);
    for g in &r.min_gaps {
        println!("L = {:>3}: min gap {:.4} at m = {:.3}", g.pairs, g.gap, g.m);
    }
    println!("gap non-decreasing: {}, non-closing: {}", r.gap_non_decreasing, r.gap_non_closing);
    println!("entropy flatness (bits): {:?}", r.flatness);
    println!("classified as crossover: {}", r.crossover);
    Ok(())
}
