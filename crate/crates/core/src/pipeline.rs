//! Experiment configs, resumable scans, run manifests and the analysis chain.
//!
//! A config is a TOML tree with `model`, `grid`, `solver`, `analysis` and
//! `output` blocks; every field has a default except the model and grid
//! contents. Paths starting with `builtin:` name the shipped fixtures.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuum::{
    self, AlphaPoint, CriticalPoint, Extrapolation, ExtrapolationOptions, FitResult, LineCoefficients, LineModel,
    Parity,
};
use crate::criticality::{
    self, CentralChargeFit, CollapseOptions, CollapseResult, CrossoverReport, GapPoint, GapScalingFit, ScanRow,
    ScanTable,
};
use crate::dmrg::{self, SweepPolicy};
use crate::ed::{self, EdOptions};
use crate::hamiltonian::{ModelParams, SectorPolicy};
use crate::observables::{measure, StateRef};
use crate::{Error, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const FIXTURES: &[(&str, &str)] = &[
    ("critical_line_n2.csv", include_str!("../data/critical_line_n2.csv")),
    ("critical_line_n3.csv", include_str!("../data/critical_line_n3.csv")),
    ("critical_line_n4.csv", include_str!("../data/critical_line_n4.csv")),
    ("critical_line_n5.csv", include_str!("../data/critical_line_n5.csv")),
    ("critical_line_n6.csv", include_str!("../data/critical_line_n6.csv")),
    ("critical_line_n7.csv", include_str!("../data/critical_line_n7.csv")),
    ("critical_line_n8.csv", include_str!("../data/critical_line_n8.csv")),
    ("line_coefficients.csv", include_str!("../data/line_coefficients.csv")),
];

const PRESETS: &[(&str, &str)] = &[
    ("scan-n3", include_str!("../configs/scan-n3.toml")),
    ("ising-n3", include_str!("../configs/ising-n3.toml")),
    ("crossover", include_str!("../configs/crossover.toml")),
    ("critical-points", include_str!("../configs/critical-points.toml")),
    ("critical-lines", include_str!("../configs/critical-lines.toml")),
    ("continuum", include_str!("../configs/continuum.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{name}`; known: {:?}", preset_names())))?;
    ExperimentConfig::from_toml(text)
}

/// Contents of a data source: a `builtin:` fixture or a file.
pub fn read_source(path: &Path, base: &Path) -> Result<String> {
    let s = path.to_string_lossy();
    if let Some(name) = s.strip_prefix("builtin:") {
        return FIXTURES
            .iter()
            .find(|f| f.0 == name)
            .map(|f| f.1.to_string())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fixture `{name}`")));
    }
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    Ok(std::fs::read_to_string(full)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TUnit {
    #[default]
    Absolute,
    /// t given in units of 2π/n, so the hopping coefficient equals the value.
    Hop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPoint {
    pub n: usize,
    pub t: f64,
    #[serde(default)]
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub t_unit: TUnit,
    pub sector: SectorPolicy,
    /// Explicit (n, t, φ) triples, added to the product of the lists.
    pub points: Vec<ModelPoint>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self { n: Vec::new(), t: Vec::new(), phi: vec![0.0], t_unit: TUnit::Absolute, sector: SectorPolicy::Neutral, points: Vec::new() }
    }
}

impl ModelBlock {
    /// Every (n, t, φ) with t converted to absolute units, deduplicated.
    pub fn groups(&self) -> Vec<ModelPoint> {
        let mut out: Vec<ModelPoint> = Vec::new();
        let conv = |n: usize, t: f64| match self.t_unit {
            TUnit::Absolute => t,
            TUnit::Hop => t * 2.0 * PI / n as f64,
        };
        let mut push = |p: ModelPoint| {
            if !out.iter().any(|q| q.n == p.n && (q.t - p.t).abs() < 1e-12 && (q.phi - p.phi).abs() < 1e-12) {
                out.push(p);
            }
        };
        for &n in &self.n {
            for &t in &self.t {
                for &phi in &self.phi {
                    push(ModelPoint { n, t: conv(n, t), phi });
                }
            }
        }
        for p in &self.points {
            push(ModelPoint { t: conv(p.n, p.t), ..*p });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for MassGrid {
    fn default() -> Self {
        MassGrid::List(Vec::new())
    }
}

impl MassGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            MassGrid::List(ref v) => v.clone(),
            MassGrid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Vec::new();
                }
                let k = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=k).map(|i| round_mass(start + step * i as f64)).collect()
            }
        }
    }
}

fn round_mass(m: f64) -> f64 {
    (m * 1e9).round() / 1e9
}

/// Coarse ground-state scan that centres the mass grid on the steepest drop of Σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSearch {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Size used for the search; the smallest grid size when absent.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    /// Masses, or offsets from the searched centre when `center_search` is set.
    pub m: MassGrid,
    #[serde(rename = "L")]
    pub pairs: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_search: Option<CenterSearch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Ed,
    Dmrg,
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub engine: Engine,
    /// Largest sector dimension solved by exact diagonalization under `auto`.
    pub ed_threshold: usize,
    /// Excited states per point (2 gives Δ and Γ).
    pub excited: usize,
    pub dmrg: SweepPolicy,
    pub ed: EdOptions,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self { engine: Engine::Auto, ed_threshold: 200_000, excited: 2, dmrg: SweepPolicy::default(), ed: EdOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub collapse: bool,
    pub beta: f64,
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    /// Solve every size at the fitted m_c with excited states.
    pub critical_runs: bool,
    pub central_charge: bool,
    pub gap_scaling: bool,
    pub crossover: bool,
    /// φ = 0 scan table used as the collapse baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_baseline: Option<PathBuf>,
    pub critical_line: bool,
    /// `t,m_c,sigma` tables named `..._n<n>.csv`.
    pub critical_line_inputs: Vec<PathBuf>,
    pub line_model: LineModel,
    /// Coefficient table compared against the fitted lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_coefficients: Option<PathBuf>,
    pub extrapolate: bool,
    /// Coefficient table read when no lines were fitted in this run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients_input: Option<PathBuf>,
    pub extrapolation: ExtrapolationOptions,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            collapse: false,
            beta: criticality::ISING_BETA,
            nu: criticality::ISING_NU,
            window: None,
            critical_runs: false,
            central_charge: false,
            gap_scaling: false,
            crossover: false,
            crossover_baseline: None,
            critical_line: false,
            critical_line_inputs: Vec::new(),
            line_model: LineModel::default(),
            reference_coefficients: None,
            extrapolate: false,
            coefficients_input: None,
            extrapolation: ExtrapolationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub collapsed_csv: bool,
    /// Save an MPS checkpoint for every DMRG row.
    pub checkpoints: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs/default"), collapsed_csv: true, checkpoints: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub solver: SolverBlock,
    pub analysis: AnalysisBlock,
    pub output: OutputBlock,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn short_hash(data: &str) -> String {
    hex(&Sha256::digest(data.as_bytes())[..8])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| locate_key(text, s.start)).unwrap_or_default();
            config_err(&path, e.message().to_string())
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let groups = self.model.groups();
        for (i, p) in groups.iter().enumerate() {
            if p.n < 2 {
                return Err(config_err("model.n", format!("n = {} must be ≥ 2", p.n)));
            }
            if !(p.t >= 0.0) || !p.t.is_finite() {
                return Err(config_err("model.t", format!("group {i}: t = {} must be finite and ≥ 0", p.t)));
            }
            if !p.phi.is_finite() {
                return Err(config_err("model.phi", "φ must be finite"));
            }
            if let SectorPolicy::Label(k) = self.model.sector {
                if k >= p.n {
                    return Err(config_err("model.sector", format!("label {k} out of range for n = {}", p.n)));
                }
            }
        }
        if !groups.is_empty() {
            let masses = self.grid.m.values();
            if masses.is_empty() {
                return Err(config_err("grid.m", "mass grid is empty"));
            }
            if masses.iter().any(|m| !m.is_finite()) {
                return Err(config_err("grid.m", "masses must be finite"));
            }
            if self.grid.pairs.is_empty() {
                return Err(config_err("grid.L", "no chain lengths given"));
            }
            if let Some(&l) = self.grid.pairs.iter().find(|&&l| l == 0) {
                return Err(config_err("grid.L", format!("L = {l} must be ≥ 1")));
            }
            if let Some(c) = self.grid.center_search {
                if !(c.step > 0.0) || !(c.hi > c.lo) {
                    return Err(config_err("grid.center_search", "needs lo < hi and step > 0"));
                }
            }
        } else if self.analysis.collapse || self.analysis.critical_runs || self.analysis.crossover {
            return Err(config_err("model", "scan analyses requested but the model block defines no (n, t) groups"));
        }
        self.solver.dmrg.validate().map_err(|e| config_err("solver.dmrg", e.to_string()))?;
        if !(self.solver.ed.tol > 0.0) {
            return Err(config_err("solver.ed.tol", "must be positive"));
        }
        if self.analysis.critical_runs && !self.analysis.collapse {
            return Err(config_err("analysis.critical_runs", "needs analysis.collapse for m_c"));
        }
        if (self.analysis.central_charge || self.analysis.gap_scaling) && !self.analysis.critical_runs {
            return Err(config_err("analysis.critical_runs", "central_charge and gap_scaling read the runs at m_c"));
        }
        if self.analysis.critical_line && self.analysis.critical_line_inputs.is_empty() && !self.analysis.collapse {
            return Err(config_err(
                "analysis.critical_line_inputs",
                "critical_line needs input tables or collapse results from this run",
            ));
        }
        if self.analysis.extrapolate
            && !self.analysis.critical_line
            && self.analysis.coefficients_input.is_none()
        {
            return Err(config_err("analysis.coefficients_input", "extrapolate needs fitted lines or a coefficient table"));
        }
        Ok(())
    }

    /// Hash over everything that determines scan rows.
    pub fn scan_hash(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            version: &'a str,
            model: &'a ModelBlock,
            grid: &'a GridBlock,
            solver: &'a SolverBlock,
        }
        let k = Key { version: CODE_VERSION, model: &self.model, grid: &self.grid, solver: &self.solver };
        short_hash(&serde_json::to_string(&k).expect("serializable"))
    }

    pub fn config_hash(&self) -> String {
        short_hash(&format!("{CODE_VERSION}\n{}", serde_json::to_string(self).expect("serializable")))
    }
}

/// Dotted key path of the TOML entry around a byte offset.
fn locate_key(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let l = line.trim();
        if pos > offset {
            break;
        }
        if l.starts_with('[') {
            table = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = l.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len() + 1;
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

/// Runtime overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub engine: Option<Engine>,
    pub out_dir: Option<PathBuf>,
    pub dry_run: bool,
    /// Directory for relative input paths.
    pub base_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = self.engine {
            cfg.solver.engine = e;
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub n: usize,
    pub t: f64,
    pub phi: f64,
    #[serde(rename = "L")]
    pub pairs: usize,
    pub m: f64,
    pub engine: String,
    pub converged: bool,
    pub iterations: usize,
    pub seconds: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub code_version: String,
    pub config_hash: String,
    pub scan_hash: String,
    pub config: ExperimentConfig,
    pub created_unix: u64,
    pub wall_clock_seconds: f64,
    pub krylov_seed: u64,
    pub ed_seed: u64,
    pub solver_invocations: usize,
    pub planned: usize,
    pub reused: usize,
    pub failed: usize,
    pub centers: Vec<(ModelPoint, f64)>,
    pub records: Vec<RunRecord>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            name: cfg.name.clone(),
            code_version: CODE_VERSION.into(),
            config_hash: cfg.config_hash(),
            scan_hash: cfg.scan_hash(),
            config: cfg.clone(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_seconds: 0.0,
            krylov_seed: cfg.solver.dmrg.krylov_seed,
            ed_seed: cfg.solver.ed.seed,
            solver_invocations: 0,
            planned: 0,
            reused: 0,
            failed: 0,
            centers: Vec::new(),
            records: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Engine choice for a sector of the given size.
pub fn pick_engine(solver: &SolverBlock, params: &ModelParams) -> Engine {
    match solver.engine {
        Engine::Auto => {
            let dim = binomial(params.sites(), params.pairs());
            if params.pairs() <= crate::basis::ChainGeometry::MAX_BASIS_PAIRS && dim <= solver.ed_threshold as f64 {
                Engine::Ed
            } else {
                Engine::Dmrg
            }
        }
        e => e,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Observables of one solved point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub energies: Vec<f64>,
    pub sigma: f64,
    pub gaps: Option<(f64, f64)>,
    pub entropy: f64,
    pub pair_entropies: Vec<f64>,
    pub truncation: f64,
    pub chi: usize,
    pub iterations: usize,
    pub engine: Engine,
    pub k0: usize,
    pub mps: Option<dmrg::MpsState>,
}

fn solve_sector(params: &ModelParams, solver: &SolverBlock, excited: usize, engine: Engine) -> Result<PointResult> {
    match engine {
        Engine::Ed | Engine::Auto => {
            let (basis, spec) = ed::solve(params, 1 + excited, &solver.ed)?;
            if !spec.converged {
                return Err(Error::NotConverged { iterations: spec.iterations, residuals: spec.residuals });
            }
            let state = StateRef::Vector { basis: &basis, amplitudes: &spec.vectors[0] };
            let obs = measure(state, params, Some(&spec))?;
            Ok(PointResult {
                energies: spec.energies.clone(),
                sigma: obs.sigma,
                gaps: obs.gaps,
                entropy: obs.mid_entropy(),
                pair_entropies: obs.pair_entropies(),
                truncation: 0.0,
                chi: 0,
                iterations: spec.iterations,
                engine: Engine::Ed,
                k0: params.k0,
                mps: None,
            })
        }
        Engine::Dmrg => {
            let (spec, states) = if excited > 0 {
                dmrg::lowest_states(params, &solver.dmrg, excited)?
            } else {
                let (s, g) = dmrg::ground_state(params, &solver.dmrg)?;
                (s, vec![g])
            };
            let gs = &states[0];
            let obs = measure(StateRef::Mps(gs), params, Some(&spec))?;
            let truncation = states.iter().filter_map(|s| s.history.truncation.last().copied()).fold(0.0, f64::max);
            Ok(PointResult {
                energies: spec.energies.clone(),
                sigma: obs.sigma,
                gaps: obs.gaps,
                entropy: obs.mid_entropy(),
                pair_entropies: obs.pair_entropies(),
                truncation,
                chi: solver.dmrg.chi,
                iterations: spec.iterations,
                engine: Engine::Dmrg,
                k0: params.k0,
                mps: Some(gs.clone()),
            })
        }
    }
}

/// Solves one point under the configured sector policy and engine.
pub fn solve_point(params: &ModelParams, sector: SectorPolicy, solver: &SolverBlock, excited: usize) -> Result<PointResult> {
    let engine = pick_engine(solver, params);
    let candidates = params.sector_candidates(sector);
    if let [k0] = candidates[..] {
        return solve_sector(&params.with_sector(k0)?, solver, excited, engine);
    }
    let mut best: Option<(usize, PointResult)> = None;
    for k0 in candidates {
        let r = solve_sector(&params.with_sector(k0)?, solver, 0, engine)?;
        if best.as_ref().map_or(true, |b| r.energies[0] < b.1.energies[0]) {
            best = Some((k0, r));
        }
    }
    match best {
        None => Err(Error::InvalidArgument("sector policy selects no boundary label".into())),
        Some((_, r)) if excited == 0 => Ok(r),
        Some((k0, _)) => solve_sector(&params.with_sector(k0)?, solver, excited, engine),
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Ed => "ed",
        Engine::Dmrg => "dmrg",
        Engine::Auto => "auto",
    }
}

fn chi_key(solver: &SolverBlock, params: &ModelParams) -> usize {
    match pick_engine(solver, params) {
        Engine::Dmrg => solver.dmrg.chi,
        _ => 0,
    }
}

fn row_id(scan_hash: &str, p: &ModelPoint, pairs: usize, m: f64) -> String {
    format!("{scan_hash}-{}", short_hash(&format!("{}|{:.9}|{:.9}|{}|{:.9}", p.n, p.t, p.phi, pairs, m)))
}

struct Task {
    group: ModelPoint,
    pairs: usize,
    m: f64,
}

fn make_row(cfg: &ExperimentConfig, scan_hash: &str, task: &Task, excited: usize, ckpt: Option<&Path>) -> (ScanRow, RunRecord) {
    let start = Instant::now();
    let g = task.group;
    let id = row_id(scan_hash, &g, task.pairs, task.m);
    let params = ModelParams::new(g.n, g.t, task.m, g.phi, task.pairs);
    let chi = params.as_ref().map(|p| chi_key(&cfg.solver, p)).unwrap_or(0);
    let result = params.and_then(|p| solve_point(&p, cfg.model.sector, &cfg.solver, excited));
    let mut row = ScanRow {
        n: g.n,
        t: g.t,
        phi: g.phi,
        pairs: task.pairs,
        chi,
        m: task.m,
        sigma: f64::NAN,
        delta: None,
        gamma: None,
        entropy: f64::NAN,
        truncation: f64::NAN,
        energy: f64::NAN,
        k0: 0,
        engine: String::new(),
        converged: false,
        error: String::new(),
        manifest: scan_hash.to_string(),
        id: id.clone(),
        entropy_profile: String::new(),
    };
    let mut iterations = 0;
    match result {
        Ok(r) => {
            row.sigma = r.sigma;
            row.delta = r.gaps.map(|g| g.0);
            row.gamma = r.gaps.map(|g| g.1);
            row.entropy = r.entropy;
            row.truncation = r.truncation;
            row.energy = r.energies[0];
            row.k0 = r.k0;
            row.engine = engine_name(r.engine).into();
            row.converged = true;
            row.entropy_profile = ScanRow::format_profile(&r.pair_entropies);
            iterations = r.iterations;
            if let (Some(dir), Some(mps)) = (ckpt, &r.mps) {
                if let Err(e) = dmrg::save(mps, &dir.join(format!("{id}.mps"))) {
                    row.error = format!("checkpoint not written: {e}");
                }
            }
        }
        Err(e) => {
            row.error = e.to_string();
            row.engine = engine_name(cfg.solver.engine).into();
        }
    }
    let rec = RunRecord {
        id,
        n: g.n,
        t: g.t,
        phi: g.phi,
        pairs: task.pairs,
        m: task.m,
        engine: row.engine.clone(),
        converged: row.converged,
        iterations,
        seconds: start.elapsed().as_secs_f64(),
        error: row.error.clone(),
    };
    (row, rec)
}

pub const SCAN_FILE: &str = "scan.csv";
pub const CRITICAL_FILE: &str = "critical.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Existing table in `dir`, refusing rows written under another hash.
fn load_table(path: &Path, hash: &str) -> Result<ScanTable> {
    if !path.exists() {
        return Ok(ScanTable::default());
    }
    let t = ScanTable::load(path)?;
    if let Some(r) = t.rows.iter().find(|r| r.manifest != hash) {
        return Err(Error::Config {
            path: "output.dir".into(),
            message: format!(
                "{} holds rows from run {} but this config hashes to {hash}; use a fresh output directory",
                path.display(),
                r.manifest
            ),
        });
    }
    Ok(t)
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

/// Runs `tasks` concurrently, saving `table` at `path` after every finished row.
fn execute(
    cfg: &ExperimentConfig,
    tasks: Vec<Task>,
    excited: usize,
    table: ScanTable,
    path: &Path,
    opts: &RunOptions,
    manifest: &mut RunManifest,
) -> Result<ScanTable> {
    let scan_hash = manifest.scan_hash.clone();
    let ckpt = cfg.output.checkpoints.then(|| cfg.output.dir.join("checkpoints"));
    if let Some(d) = &ckpt {
        std::fs::create_dir_all(d)?;
    }
    let shared = Mutex::new((table, Vec::new()));
    let pool = thread_pool(opts.workers)?;
    pool.install(|| {
        tasks.par_iter().try_for_each(|task| -> Result<()> {
            let (row, rec) = make_row(cfg, &scan_hash, task, excited, ckpt.as_deref());
            let mut guard = shared.lock().expect("scan table lock");
            guard.0.upsert(row);
            guard.1.push(rec);
            guard.0.sort();
            guard.0.save(path)
        })
    })?;
    let (table, records) = shared.into_inner().expect("scan table lock");
    manifest.solver_invocations += records.len();
    manifest.failed += records.iter().filter(|r| !r.converged).count();
    manifest.records.extend(records);
    Ok(table)
}

/// Grid centre per group from a coarse Σ scan, cached in the output directory.
fn find_centers(cfg: &ExperimentConfig, opts: &RunOptions, manifest: &mut RunManifest) -> Result<Vec<(ModelPoint, f64)>> {
    let Some(cs) = cfg.grid.center_search else {
        return Ok(Vec::new());
    };
    let pairs = cs.pairs.unwrap_or_else(|| *cfg.grid.pairs.iter().min().expect("validated"));
    let path = cfg.output.dir.join("centers.csv");
    let table = load_table(&path, &manifest.scan_hash)?;
    let masses = MassGrid::Range { start: cs.lo, stop: cs.hi, step: cs.step }.values();
    let mut tasks = Vec::new();
    for g in cfg.model.groups() {
        for &m in &masses {
            let t = Task { group: g, pairs, m };
            let params = ModelParams::new(g.n, g.t, m, g.phi, pairs)?;
            let key = ScanRow { chi: chi_key(&cfg.solver, &params), ..probe_row(&t) }.key();
            if !table.get(&key).is_some_and(|r| r.converged) {
                tasks.push(t);
            }
        }
    }
    if opts.dry_run {
        manifest.planned += tasks.len();
        return Ok(Vec::new());
    }
    let table = execute(cfg, tasks, 0, table, &path, opts, manifest)?;
    let mut out = Vec::new();
    for g in cfg.model.groups() {
        let rows: Vec<&ScanRow> = table
            .series(pairs)
            .into_iter()
            .filter(|r| r.n == g.n && (r.t - g.t).abs() < 1e-9 && (r.phi - g.phi).abs() < 1e-9)
            .collect();
        let best = rows
            .windows(2)
            .max_by(|a, b| (a[1].sigma - a[0].sigma).abs().total_cmp(&(b[1].sigma - b[0].sigma).abs()))
            .map(|w| round_mass(0.5 * (w[0].m + w[1].m)))
            .ok_or_else(|| Error::InsufficientData(format!("centre search for {g:?} produced fewer than two points")))?;
        out.push((g, (best * 1e3).round() / 1e3));
    }
    Ok(out)
}

fn probe_row(t: &Task) -> ScanRow {
    ScanRow {
        n: t.group.n,
        t: t.group.t,
        phi: t.group.phi,
        pairs: t.pairs,
        chi: 0,
        m: t.m,
        sigma: 0.0,
        delta: None,
        gamma: None,
        entropy: 0.0,
        truncation: 0.0,
        energy: 0.0,
        k0: 0,
        engine: String::new(),
        converged: false,
        error: String::new(),
        manifest: String::new(),
        id: String::new(),
        entropy_profile: String::new(),
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub table: ScanTable,
    pub manifest: RunManifest,
}

impl ScanOutcome {
    pub fn all_converged(&self) -> bool {
        self.table.rows.iter().all(|r| r.converged)
    }
}

/// One row per (group, L, m); rows already present and converged are reused.
pub fn run_scan(config: &ExperimentConfig, opts: &RunOptions) -> Result<ScanOutcome> {
    let mut cfg = config.clone();
    opts.apply(&mut cfg);
    cfg.validate()?;
    let start = Instant::now();
    let mut manifest = RunManifest::new(&cfg);
    if !opts.dry_run {
        std::fs::create_dir_all(&cfg.output.dir)?;
    }
    let centers = find_centers(&cfg, opts, &mut manifest)?;
    manifest.centers = centers.clone();
    let path = cfg.output.dir.join(SCAN_FILE);
    let table = load_table(&path, &manifest.scan_hash)?;
    let offsets = cfg.grid.m.values();
    let mut tasks = Vec::new();
    let mut wanted = Vec::new();
    for g in cfg.model.groups() {
        let center = if cfg.grid.center_search.is_some() {
            match centers.iter().find(|c| c.0 == g) {
                Some(c) => c.1,
                None if opts.dry_run => 0.0,
                None => return Err(Error::InsufficientData(format!("no centre for {g:?}"))),
            }
        } else {
            0.0
        };
        for &pairs in &cfg.grid.pairs {
            for &dm in &offsets {
                let m = round_mass(center + dm);
                let params = ModelParams::new(g.n, g.t, m, g.phi, pairs).map_err(|e| config_err("grid.L", e.to_string()))?;
                let t = Task { group: g, pairs, m };
                let key = ScanRow { chi: chi_key(&cfg.solver, &params), ..probe_row(&t) }.key();
                wanted.push(key);
                if table.get(&key).is_some_and(|r| r.converged) {
                    manifest.reused += 1;
                } else {
                    tasks.push(t);
                }
            }
        }
    }
    manifest.planned += tasks.len();
    if opts.dry_run {
        return Ok(ScanOutcome { table, manifest });
    }
    let table = execute(&cfg, tasks, cfg.solver.excited, table, &path, opts, &mut manifest)?;
    let mut rows: Vec<ScanRow> = table.rows.into_iter().filter(|r| wanted.contains(&r.key())).collect();
    rows.sort_by_key(|r| r.key());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.outputs.push(path.display().to_string());
    Ok(ScanOutcome { table: ScanTable { rows }, manifest })
}

/// Fit reports keyed by group label.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub name: String,
    pub scan_hash: String,
    pub config_hash: String,
    pub collapse: BTreeMap<String, std::result::Result<CollapseResult, String>>,
    pub central_charge: BTreeMap<String, std::result::Result<CentralChargeFit, String>>,
    pub gap_scaling: BTreeMap<String, std::result::Result<GapScalingFit, String>>,
    pub crossover: BTreeMap<String, std::result::Result<CrossoverReport, String>>,
    pub critical_lines: BTreeMap<usize, LineReport>,
    pub extrapolation: BTreeMap<String, std::result::Result<Extrapolation, String>>,
    /// Files each report was computed from.
    pub provenance: BTreeMap<String, Vec<String>>,
    pub all_converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineReport {
    pub points: Vec<CriticalPoint>,
    pub fit: FitResult,
    pub coefficients: LineCoefficients,
    /// Largest z-score against the reference row, if one was given.
    pub reference_z: Option<f64>,
    pub source: String,
}

pub fn group_label(p: &ModelPoint) -> String {
    format!("n{}_t{:.4}_phi{:.4}", p.n, p.t, p.phi)
}

fn group_of(table: &ScanTable) -> Option<ModelPoint> {
    table.rows.first().map(|r| ModelPoint { n: r.n, t: r.t, phi: r.phi })
}

/// n from a file name ending in `_n<n>.csv`.
fn n_from_name(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_string_lossy().to_string();
    let stem = stem.rsplit(':').next()?.to_string();
    stem.rsplit_once("_n")?.1.parse().ok()
}

/// Scan, collapse, runs at m_c, critical line and extrapolation as configured.
pub fn run_pipeline(config: &ExperimentConfig, opts: &RunOptions) -> Result<(PipelineReport, RunManifest)> {
    let mut cfg = config.clone();
    opts.apply(&mut cfg);
    cfg.validate()?;
    let base = opts.base_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let a = cfg.analysis.clone();
    let out = cfg.output.dir.clone();
    let start = Instant::now();
    let mut report = PipelineReport {
        name: cfg.name.clone(),
        scan_hash: cfg.scan_hash(),
        config_hash: cfg.config_hash(),
        all_converged: true,
        ..Default::default()
    };

    let (scan, mut manifest) = if cfg.model.groups().is_empty() {
        std::fs::create_dir_all(&out)?;
        (ScanTable::default(), RunManifest::new(&cfg))
    } else {
        let s = run_scan(&cfg, opts)?;
        (s.table, s.manifest)
    };
    if opts.dry_run {
        return Ok((report, manifest));
    }
    report.all_converged = scan.rows.iter().all(|r| r.converged);
    let scan_path = out.join(SCAN_FILE).display().to_string();

    let mut collapses: Vec<(ModelPoint, CollapseResult)> = Vec::new();
    if a.collapse {
        let copts = CollapseOptions { window: a.window, ..Default::default() };
        for table in scan.groups().into_values() {
            let g = group_of(&table).expect("non-empty group");
            let label = group_label(&g);
            let r = criticality::collapse_fit_with(&table, a.beta, a.nu, &copts);
            if let Ok(c) = &r {
                criticality::write_json(c, &out.join(format!("collapse_{label}.json")))?;
                if cfg.output.collapsed_csv {
                    let f = std::fs::File::create(out.join(format!("collapsed_{label}.csv")))?;
                    criticality::write_collapsed_csv(c, f)?;
                }
                collapses.push((g, c.clone()));
            }
            report.provenance.insert(format!("collapse/{label}"), vec![scan_path.clone()]);
            report.collapse.insert(label, r.map_err(|e| e.to_string()));
        }
    }

    if a.critical_runs {
        let path = out.join(CRITICAL_FILE);
        let existing = load_table(&path, &manifest.scan_hash)?;
        let mut tasks = Vec::new();
        let mut wanted = Vec::new();
        for (g, c) in &collapses {
            for &pairs in &cfg.grid.pairs {
                let m = round_mass(c.m_c);
                let params = ModelParams::new(g.n, g.t, m, g.phi, pairs)?;
                let t = Task { group: *g, pairs, m };
                let key = ScanRow { chi: chi_key(&cfg.solver, &params), ..probe_row(&t) }.key();
                wanted.push(key);
                if !existing.get(&key).is_some_and(|r| r.converged) {
                    tasks.push(t);
                }
            }
        }
        let excited = cfg.solver.excited.max(2);
        let table = execute(&cfg, tasks, excited, existing, &path, opts, &mut manifest)?;
        let table = ScanTable { rows: table.rows.into_iter().filter(|r| wanted.contains(&r.key())).collect() };
        report.all_converged &= table.rows.iter().all(|r| r.converged);
        let crit_path = path.display().to_string();
        for t in table.converged().groups().into_values() {
            let g = group_of(&t).expect("non-empty group");
            let label = group_label(&g);
            if a.central_charge {
                let pts: Vec<(usize, f64)> = t.rows.iter().map(|r| (r.pairs, r.entropy)).collect();
                let r = criticality::central_charge_fit(&pts);
                if let Ok(c) = &r {
                    criticality::write_json(c, &out.join(format!("central_charge_{label}.json")))?;
                }
                report.provenance.insert(format!("central_charge/{label}"), vec![crit_path.clone()]);
                report.central_charge.insert(label.clone(), r.map_err(|e| e.to_string()));
            }
            if a.gap_scaling {
                let pts: Vec<GapPoint> = t
                    .rows
                    .iter()
                    .filter_map(|r| Some(GapPoint::from_total(r.sites(), r.delta?, r.gamma?)))
                    .collect();
                let r = criticality::gap_scaling_fit(&pts);
                if let Ok(c) = &r {
                    criticality::write_json(c, &out.join(format!("gap_scaling_{label}.json")))?;
                }
                report.provenance.insert(format!("gap_scaling/{label}"), vec![crit_path.clone()]);
                report.gap_scaling.insert(label, r.map_err(|e| e.to_string()));
            }
        }
    }

    if a.crossover {
        let external = match &a.crossover_baseline {
            Some(p) => Some(ScanTable::read_csv(read_source(p, &base)?.as_bytes())?),
            None => None,
        };
        let groups = scan.groups();
        for table in groups.values() {
            let g = group_of(table).expect("non-empty group");
            if g.phi == 0.0 {
                continue;
            }
            let label = group_label(&g);
            let internal = groups.values().find(|t| {
                group_of(t).is_some_and(|b| b.n == g.n && (b.t - g.t).abs() < 1e-9 && b.phi == 0.0)
            });
            let baseline = internal.or(external.as_ref());
            let r = criticality::crossover_diagnostics(table, baseline);
            if let Ok(c) = &r {
                criticality::write_json(c, &out.join(format!("crossover_{label}.json")))?;
            }
            let mut prov = vec![scan_path.clone()];
            if let Some(p) = &a.crossover_baseline {
                prov.push(p.display().to_string());
            }
            report.provenance.insert(format!("crossover/{label}"), prov);
            report.crossover.insert(label, r.map_err(|e| e.to_string()));
        }
    }

    let reference: Vec<LineCoefficients> = match &a.reference_coefficients {
        Some(p) => continuum::read_coefficients(read_source(p, &base)?.as_bytes())?,
        None => Vec::new(),
    };
    if a.critical_line {
        let mut sources: BTreeMap<usize, (Vec<CriticalPoint>, String)> = BTreeMap::new();
        for (g, c) in &collapses {
            let e = sources.entry(g.n).or_insert_with(|| (Vec::new(), scan_path.clone()));
            e.0.push(CriticalPoint { t: g.t, m_c: c.m_c, sigma: c.uncertainty });
        }
        for p in &a.critical_line_inputs {
            let n = n_from_name(p).ok_or_else(|| {
                config_err("analysis.critical_line_inputs", format!("cannot read n from `{}` (expected ..._n<n>.csv)", p.display()))
            })?;
            let pts = continuum::read_critical_line(read_source(p, &base)?.as_bytes())?;
            sources.insert(n, (pts, p.display().to_string()));
        }
        if sources.is_empty() {
            return Err(Error::MissingInput {
                key: "analysis.critical_line_inputs".into(),
                message: "no critical masses from collapse fits or input tables".into(),
            });
        }
        let mut coeffs = Vec::new();
        for (n, (mut points, source)) in sources {
            points.sort_by(|x, y| x.t.total_cmp(&y.t));
            let fit = match continuum::fit_critical_line_with(&points, a.line_model) {
                Ok(f) => f,
                Err(e) => {
                    report.provenance.insert(format!("critical_line/n{n}"), vec![format!("{source}: {e}")]);
                    continue;
                }
            };
            let c = LineCoefficients::from_fit(n, &fit, a.line_model);
            let reference_z = reference.iter().find(|r| r.n == n).map(|r| c.max_z(r));
            coeffs.push(c);
            criticality::write_json(&fit, &out.join(format!("critical_line_n{n}.json")))?;
            report.provenance.insert(format!("critical_line/n{n}"), vec![source.clone()]);
            report.critical_lines.insert(n, LineReport { points, fit, coefficients: c, reference_z, source });
        }
        continuum::write_coefficients(&coeffs, std::fs::File::create(out.join("line_coefficients.csv"))?)?;
    }

    if a.extrapolate {
        let (alphas, source): (Vec<AlphaPoint>, String) = if !report.critical_lines.is_empty() {
            (
                report
                    .critical_lines
                    .values()
                    .map(|l| AlphaPoint { n: l.coefficients.n, alpha: l.coefficients.alpha, sigma: l.coefficients.alpha_err })
                    .collect(),
                out.join("line_coefficients.csv").display().to_string(),
            )
        } else {
            let p = a.coefficients_input.as_ref().ok_or_else(|| Error::MissingInput {
                key: "analysis.coefficients_input".into(),
                message: "no fitted critical lines to extrapolate".into(),
            })?;
            let rows = continuum::read_coefficients(read_source(p, &base)?.as_bytes())?;
            (rows.iter().map(|r| AlphaPoint { n: r.n, alpha: r.alpha, sigma: r.alpha_err }).collect(), p.display().to_string())
        };
        for parity in [Parity::Odd, Parity::Even] {
            let pts: Vec<AlphaPoint> = alphas.iter().copied().filter(|p| Parity::of(p.n) == parity).collect();
            let label = format!("{parity:?}").to_lowercase();
            let r = continuum::extrapolate_large_n_with(&pts, parity, a.extrapolation);
            if let Ok(e) = &r {
                criticality::write_json(e, &out.join(format!("continuum_{label}.json")))?;
            }
            report.provenance.insert(format!("extrapolation/{label}"), vec![source.clone()]);
            report.extrapolation.insert(label, r.map_err(|e| e.to_string()));
        }
    }

    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let report_path = out.join("report.json");
    criticality::write_json(&report, &report_path)?;
    manifest.outputs.push(report_path.display().to_string());
    criticality::write_json(&manifest, &out.join(MANIFEST_FILE))?;
    Ok((report, manifest))
}

/// Analysis only, over an existing output directory.
pub fn analyze(config: &ExperimentConfig, opts: &RunOptions) -> Result<(PipelineReport, RunManifest)> {
    let mut cfg = config.clone();
    opts.apply(&mut cfg);
    let scan = cfg.output.dir.join(SCAN_FILE);
    if !cfg.model.groups().is_empty() && !scan.exists() {
        return Err(Error::MissingInput {
            key: "grid".into(),
            message: format!("{} not found; run `scan` with this config first", scan.display()),
        });
    }
    let existing = if scan.exists() { ScanTable::load(&scan)? } else { ScanTable::default() };
    let hash = cfg.scan_hash();
    if let Some(r) = existing.rows.iter().find(|r| r.manifest != hash) {
        return Err(Error::MissingInput {
            key: "grid".into(),
            message: format!("{} was written by run {}, not {hash}", scan.display(), r.manifest),
        });
    }
    let pending = run_scan(&cfg, &RunOptions { dry_run: true, ..opts.clone() })?;
    if !cfg.model.groups().is_empty() && pending.manifest.planned > 0 {
        return Err(Error::MissingInput {
            key: "grid".into(),
            message: format!("{} scan points are missing; run `scan` first", pending.manifest.planned),
        });
    }
    run_pipeline(&cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml(
            r#"
            name = "tiny"
            [model]
            n = [3]
            t = [1.0]
            t_unit = "hop"
            [grid]
            m = { start = -2.0, stop = -1.0, step = 0.25 }
            L = [2, 3]
            [solver]
            excited = 2
            "#,
        )
        .unwrap();
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn presets_parse_validate_and_round_trip() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c, "{name}");
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn validation_names_the_offending_key() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.grid.m = MassGrid::List(vec![]);
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "grid.m"),
            other => panic!("{other:?}"),
        }
        let e = ExperimentConfig::from_toml("[model]\nn = [3]\nbogus = 1\n").unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, "model.bogus"),
            other => panic!("{other:?}"),
        }
        let mut c = small_config(dir.path());
        c.solver.dmrg.chi = 2;
        assert!(matches!(c.validate(), Err(Error::Config { path, .. }) if path == "solver.dmrg"));
    }

    #[test]
    fn mass_ranges_are_inclusive() {
        let g = MassGrid::Range { start: -2.6, stop: -1.2, step: 0.1 };
        let v = g.values();
        assert_eq!(v.len(), 15);
        assert_eq!(v[14], -1.2);
    }

    #[test]
    fn scan_is_resumable_and_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        let first = run_scan(&c, &RunOptions::default()).unwrap();
        assert_eq!(first.table.len(), 10);
        assert!(first.all_converged());
        assert_eq!(first.manifest.solver_invocations, 10);
        let again = run_scan(&c, &RunOptions::default()).unwrap();
        assert_eq!(again.manifest.solver_invocations, 0);
        assert_eq!(again.manifest.reused, 10);
        assert_eq!(again.table, first.table);
        let dry = run_scan(&c, &RunOptions { dry_run: true, ..Default::default() }).unwrap();
        assert_eq!(dry.manifest.planned, 0);
        let mut other = c.clone();
        other.solver.excited = 0;
        assert!(matches!(run_scan(&other, &RunOptions::default()), Err(Error::Config { .. })));
        for r in &first.table.rows {
            assert_eq!(r.engine, "ed");
            assert!(r.id.starts_with(&first.manifest.scan_hash));
            assert_eq!(r.pair_entropies().len(), r.pairs + 1);
        }
    }

    #[test]
    fn engines_agree_through_the_row_builder() {
        let params = ModelParams::new(3, 2.0 * PI / 3.0, -1.7, 0.0, 4).unwrap();
        let mut solver = SolverBlock { engine: Engine::Ed, ..Default::default() };
        solver.dmrg.chi = 64;
        let e = solve_point(&params, SectorPolicy::Neutral, &solver, 2).unwrap();
        solver.engine = Engine::Dmrg;
        let d = solve_point(&params, SectorPolicy::Neutral, &solver, 2).unwrap();
        assert!((e.energies[0] - d.energies[0]).abs() < 1e-8);
        assert!((e.sigma - d.sigma).abs() < 1e-6);
        assert!((e.entropy - d.entropy).abs() < 1e-6);
    }

    #[test]
    fn lowest_policy_takes_the_minimum_over_labels() {
        let params = ModelParams::new(3, 2.0 * PI / 3.0, -0.4, 1.0 / 3.0, 4).unwrap();
        let solver = SolverBlock { engine: Engine::Ed, ..Default::default() };
        let best = solve_point(&params, SectorPolicy::Lowest, &solver, 2).unwrap();
        for k0 in 0..3 {
            let r = solve_point(&params, SectorPolicy::Label(k0), &solver, 2).unwrap();
            assert!(best.energies[0] <= r.energies[0] + 1e-10);
            if r.k0 == best.k0 {
                assert_eq!(r.energies, best.energies);
                assert_eq!(r.gaps, best.gaps);
            }
        }
        assert_eq!(best.k0, 0);
        assert_eq!(best.energies.len(), 3);
    }

    #[test]
    fn analysis_only_pipeline_on_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = preset("continuum").unwrap();
        c.output.dir = dir.path().to_path_buf();
        let (rep, _) = run_pipeline(&c, &RunOptions::default()).unwrap();
        let odd = rep.extrapolation["odd"].as_ref().unwrap();
        assert!((odd.d + 0.83).abs() < 0.1);
        assert!(dir.path().join("report.json").exists());

        let mut c = preset("critical-lines").unwrap();
        c.output.dir = dir.path().join("critical-lines");
        let (rep, _) = run_pipeline(&c, &RunOptions::default()).unwrap();
        assert_eq!(rep.critical_lines.len(), 7);
        assert!(rep.critical_lines.values().all(|l| l.reference_z.is_some()));
    }

    #[test]
    fn missing_upstream_is_reported_with_key() {
        let dir = tempfile::tempdir().unwrap();
        let c = small_config(dir.path());
        match analyze(&c, &RunOptions::default()) {
            Err(Error::MissingInput { key, .. }) => assert_eq!(key, "grid"),
            other => panic!("{other:?}"),
        }
    }
}
