use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zn_qed::pipeline::{self, Engine, ExperimentConfig, RunManifest, RunOptions};

#[derive(Parser)]
#[command(name = "zn-qed", version, about = "ℤₙ lattice gauge theory scans and fits")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve every grid point of the config (resumable).
    Scan(RunArgs),
    /// Fits over an existing scan directory.
    Analyze(RunArgs),
    /// Scan followed by every configured analysis.
    Pipeline(RunArgs),
    /// Parse and validate a config, then print it with defaults filled in.
    ValidateConfig(Source),
    /// Print a run manifest.
    ShowManifest {
        /// manifest.json or the output directory holding it.
        path: PathBuf,
    },
}

#[derive(Args)]
struct Source {
    /// TOML config file.
    #[arg(long, short, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset: scan-n3, ising-n3, crossover, critical-points, critical-lines, continuum.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> zn_qed::Result<(ExperimentConfig, Option<PathBuf>)> {
        match (&self.config, &self.preset) {
            (Some(p), _) => Ok((ExperimentConfig::load(p)?, p.parent().map(|d| d.to_path_buf()))),
            (None, Some(name)) => Ok((pipeline::preset(name)?, None)),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Engine override.
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Report what would run without solving.
    #[arg(long)]
    dry_run: bool,
}

impl RunArgs {
    fn options(&self, base: Option<PathBuf>) -> RunOptions {
        RunOptions { workers: self.workers, engine: self.engine, out_dir: self.out.clone(), dry_run: self.dry_run, base_dir: base }
    }
}

fn summary(m: &RunManifest, dry: bool) {
    if dry {
        eprintln!("{}: {} points to solve, {} reused", m.name, m.planned, m.reused);
    } else {
        eprintln!(
            "{}: {} solved, {} reused, {} failed, {:.1} s (scan {})",
            m.name, m.solver_invocations, m.reused, m.failed, m.wall_clock_seconds, m.scan_hash
        );
    }
    for r in m.records.iter().filter(|r| !r.converged) {
        eprintln!("  failed n={} t={} phi={} L={} m={}: {}", r.n, r.t, r.phi, r.pairs, r.m, r.error);
    }
}

fn emit<T: serde::Serialize>(value: &T) -> zn_qed::Result<()> {
    let mut out = std::io::stdout().lock();
    match serde_json::to_writer_pretty(&mut out, value).map(|_| writeln!(out)) {
        Err(e) if e.is_io() => Ok(()),
        Err(e) => Err(e.into()),
        Ok(_) => Ok(()),
    }
}

fn run(cli: Cli) -> zn_qed::Result<bool> {
    match cli.verb {
        Verb::Scan(a) => {
            let (cfg, base) = a.source.load()?;
            let out = pipeline::run_scan(&cfg, &a.options(base))?;
            summary(&out.manifest, a.dry_run);
            if !a.dry_run {
                let dir = a.out.clone().unwrap_or(cfg.output.dir.clone());
                zn_qed::criticality::write_json(&out.manifest, &dir.join(pipeline::MANIFEST_FILE))?;
            }
            Ok(out.all_converged())
        }
        Verb::Analyze(a) | Verb::Pipeline(a) if a.dry_run => {
            let (cfg, base) = a.source.load()?;
            let out = pipeline::run_scan(&cfg, &a.options(base))?;
            summary(&out.manifest, true);
            Ok(true)
        }
        Verb::Analyze(a) => {
            let (cfg, base) = a.source.load()?;
            let (report, manifest) = pipeline::analyze(&cfg, &a.options(base))?;
            summary(&manifest, false);
            emit(&report)?;
            Ok(report.all_converged)
        }
        Verb::Pipeline(a) => {
            let (cfg, base) = a.source.load()?;
            let (report, manifest) = pipeline::run_pipeline(&cfg, &a.options(base))?;
            summary(&manifest, false);
            emit(&report)?;
            Ok(report.all_converged)
        }
        Verb::ValidateConfig(s) => {
            let (cfg, _) = s.load()?;
            cfg.validate()?;
            eprintln!("valid; config hash {}, scan hash {}", cfg.config_hash(), cfg.scan_hash());
            let _ = write!(std::io::stdout(), "{}", cfg.to_toml()?);
            Ok(true)
        }
        Verb::ShowManifest { path } => {
            let file = if path.is_dir() { path.join(pipeline::MANIFEST_FILE) } else { path };
            let m = RunManifest::load(&file)?;
            emit(&m)?;
            Ok(m.failed == 0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
