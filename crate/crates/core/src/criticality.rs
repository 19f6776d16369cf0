//! Finite-size scaling over scan tables.
//!
//! The collapse uses Σ = N^{−β/ν} λ(N^{1/ν}(m − m_c)) with N = 2L sites and
//! fixed Ising exponents. Gap inputs follow the energy-density convention of
//! the CFT formulas, Δ = (ε₁ − ε₀)/N; [`GapPoint::from_total`] converts the
//! total gaps reported by the engines.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::interp::{bisect, Pchip};
use crate::{Error, Result};

pub const ISING_BETA: f64 = 0.125;
pub const ISING_NU: f64 = 1.0;

/// One converged (or failed) scan point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub t: f64,
    pub phi: f64,
    #[serde(rename = "L")]
    pub pairs: usize,
    pub chi: usize,
    pub m: f64,
    pub sigma: f64,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    /// S_L(L/2) in bits.
    pub entropy: f64,
    pub truncation: f64,
    pub energy: f64,
    pub k0: usize,
    pub engine: String,
    pub converged: bool,
    /// Solver error for failed rows, empty otherwise.
    pub error: String,
    /// Hash of the configuration that produced the row.
    pub manifest: String,
    pub id: String,
    /// Pair-cut entropies S(l), l = 0..=L, space separated.
    pub entropy_profile: String,
}

/// Key fields rounded so that decimal grids compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub n: usize,
    pub t: i64,
    pub phi: i64,
    pub pairs: usize,
    pub m: i64,
    pub chi: usize,
}

fn q(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// (n, t, φ) of a scan group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub n: usize,
    pub t: i64,
    pub phi: i64,
}

impl ScanRow {
    pub fn key(&self) -> RowKey {
        RowKey { n: self.n, t: q(self.t), phi: q(self.phi), pairs: self.pairs, m: q(self.m), chi: self.chi }
    }

    pub fn group(&self) -> GroupKey {
        GroupKey { n: self.n, t: q(self.t), phi: q(self.phi) }
    }

    pub fn sites(&self) -> usize {
        2 * self.pairs
    }

    pub fn pair_entropies(&self) -> Vec<f64> {
        self.entropy_profile.split_whitespace().filter_map(|s| s.parse().ok()).collect()
    }

    pub fn format_profile(values: &[f64]) -> String {
        values.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn new(rows: Vec<ScanRow>) -> Result<Self> {
        let mut t = Self::default();
        for r in rows {
            t.insert(r)?;
        }
        Ok(t)
    }

    /// Adds a row; a duplicate key is an error.
    pub fn insert(&mut self, row: ScanRow) -> Result<()> {
        let key = row.key();
        if self.rows.iter().any(|r| r.key() == key) {
            return Err(Error::InvalidArgument(format!("duplicate scan row {key:?}")));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Adds or replaces the row with the same key.
    pub fn upsert(&mut self, row: ScanRow) {
        let key = row.key();
        match self.rows.iter_mut().find(|r| r.key() == key) {
            Some(r) => *r = row,
            None => self.rows.push(row),
        }
    }

    pub fn get(&self, key: &RowKey) -> Option<&ScanRow> {
        self.rows.iter().find(|r| &r.key() == key)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| r.key());
    }

    pub fn converged(&self) -> Self {
        Self { rows: self.rows.iter().filter(|r| r.converged).cloned().collect() }
    }

    pub fn groups(&self) -> BTreeMap<GroupKey, ScanTable> {
        let mut out: BTreeMap<GroupKey, ScanTable> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.group()).or_default().rows.push(r.clone());
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.rows.iter().map(|r| r.pairs).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Converged rows of one size, largest χ per mass, sorted by m.
    pub fn series(&self, pairs: usize) -> Vec<&ScanRow> {
        let mut best: BTreeMap<i64, &ScanRow> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.pairs == pairs && r.converged) {
            let e = best.entry(q(r.m)).or_insert(r);
            if r.chi > e.chi {
                *e = r;
            }
        }
        best.into_values().collect()
    }

    /// Every m shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let rows = self.rows.iter().map(|r| ScanRow { m: r.m + delta, ..r.clone() }).collect();
        Self { rows }
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ScanRow>, _>>()?;
        Self::new(rows)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        self.write_csv(std::fs::File::create(&tmp)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

fn single_group(table: &ScanTable) -> Result<GroupKey> {
    let groups = table.groups();
    match groups.len() {
        0 => Err(Error::InsufficientData("empty scan table".into())),
        1 => Ok(*groups.keys().next().expect("one group")),
        k => Err(Error::InvalidArgument(format!("table mixes {k} (n, t, φ) groups; fit them separately"))),
    }
}

/// Rescaled data of one size: x = N^{1/ν}(m − m_c), y = N^{β/ν} Σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedCurve {
    #[serde(rename = "L")]
    pub pairs: usize,
    pub sites: usize,
    pub m: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CollapsedCurve {
    /// Monotone interpolant of y(x), the size's estimate of λ.
    pub fn lambda(&self) -> Result<Pchip> {
        Pchip::new(&self.x, &self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub m_c: f64,
    pub uncertainty: f64,
    pub beta: f64,
    pub nu: f64,
    /// Mean squared deviation between the rescaled curves over the window.
    pub objective: f64,
    /// Objective divided by the mean squared rescaled value.
    pub relative_objective: f64,
    pub window: f64,
    pub grid_step: f64,
    /// Half-width where the objective doubles, from its curvature.
    pub curvature_uncertainty: Option<f64>,
    pub sizes: Vec<usize>,
    pub curves: Vec<CollapsedCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollapseOptions {
    /// Fixed |x| window; chosen from the data when absent.
    pub window: Option<f64>,
    pub min_points: usize,
    pub min_sizes: usize,
    pub min_masses: usize,
    /// Samples of the window per objective evaluation.
    pub samples: usize,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self { window: None, min_points: 5, min_sizes: 3, min_masses: 7, samples: 201 }
    }
}

struct SizeData {
    pairs: usize,
    scale_x: f64,
    scale_y: f64,
    m: Vec<f64>,
    sigma: Vec<f64>,
    interp: Pchip,
}

fn size_data(table: &ScanTable, beta: f64, nu: f64, opts: &CollapseOptions) -> Result<Vec<SizeData>> {
    single_group(table)?;
    if !(nu > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("exponents β = {beta}, ν = {nu}")));
    }
    let mut out = Vec::new();
    for pairs in table.sizes() {
        let series = table.series(pairs);
        if series.is_empty() {
            continue;
        }
        if series.len() < opts.min_masses {
            return Err(Error::InsufficientData(format!(
                "L = {pairs} has {} converged masses, need {}",
                series.len(),
                opts.min_masses
            )));
        }
        let m: Vec<f64> = series.iter().map(|r| r.m).collect();
        let sigma: Vec<f64> = series.iter().map(|r| r.sigma).collect();
        let sites = 2.0 * pairs as f64;
        let scale_y = sites.powf(beta / nu);
        let y: Vec<f64> = sigma.iter().map(|s| s * scale_y).collect();
        out.push(SizeData { pairs, scale_x: sites.powf(1.0 / nu), scale_y, interp: Pchip::new(&m, &y)?, m, sigma });
    }
    if out.len() < opts.min_sizes {
        return Err(Error::InsufficientData(format!("{} sizes, need {}", out.len(), opts.min_sizes)));
    }
    Ok(out)
}

fn median_step(data: &[SizeData]) -> f64 {
    let mut steps: Vec<f64> = data.iter().flat_map(|d| d.m.windows(2).map(|w| w[1] - w[0])).collect();
    steps.sort_by(f64::total_cmp);
    steps[steps.len() / 2]
}

/// Smallest |x| window keeping `min_points` masses of every size.
fn auto_window(data: &[SizeData], m_c: f64, min_points: usize) -> f64 {
    data.iter()
        .map(|d| {
            let mut xs: Vec<f64> = d.m.iter().map(|m| (d.scale_x * (m - m_c)).abs()).collect();
            xs.sort_by(f64::total_cmp);
            xs[min_points.min(xs.len()) - 1]
        })
        .fold(0.0, f64::max)
}

/// Spread objective and mean squared value, or None when the window is cut too short.
fn spread(data: &[SizeData], m_c: f64, window: f64, samples: usize) -> Option<(f64, f64)> {
    let mut lo = -window;
    let mut hi = window;
    for d in data {
        let (a, b) = d.interp.domain();
        lo = lo.max(d.scale_x * (a - m_c));
        hi = hi.min(d.scale_x * (b - m_c));
    }
    if !(hi > lo) || lo > -0.5 * window || hi < 0.5 * window {
        return None;
    }
    let k = samples.max(3);
    let (mut total, mut power) = (0.0, 0.0);
    for j in 0..k {
        let x = lo + (hi - lo) * j as f64 / (k - 1) as f64;
        let ys: Vec<f64> = data.iter().map(|d| d.interp.eval(m_c + x / d.scale_x)).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        total += ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
        power += mean * mean;
    }
    Some((total / k as f64, power / k as f64))
}

/// Collapse objective at a given m_c and window.
pub fn collapse_objective(table: &ScanTable, beta: f64, nu: f64, m_c: f64, window: f64) -> Result<f64> {
    let opts = CollapseOptions::default();
    let data = size_data(table, beta, nu, &opts)?;
    spread(&data, m_c, window, opts.samples)
        .map(|(f, _)| f)
        .ok_or_else(|| Error::InsufficientData(format!("window ±{window} does not fit the scan around m_c = {m_c}")))
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub fn collapse_fit(table: &ScanTable, beta: f64, nu: f64) -> Result<CollapseResult> {
    collapse_fit_with(table, beta, nu, &CollapseOptions::default())
}

pub fn collapse_fit_with(table: &ScanTable, beta: f64, nu: f64, opts: &CollapseOptions) -> Result<CollapseResult> {
    let data = size_data(table, beta, nu, opts)?;
    let h = median_step(&data);
    let lo = data.iter().map(|d| d.m[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = data.iter().map(|d| *d.m.last().expect("masses")).fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return Err(Error::InsufficientData("the sizes share no mass range".into()));
    }
    let window_at = |m_c: f64| opts.window.unwrap_or_else(|| auto_window(&data, m_c, opts.min_points));

    let fine = h / 10.0;
    let steps = ((hi - lo) / fine).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let m_c = lo + fine * i as f64;
        if let Some((f, p)) = spread(&data, m_c, window_at(m_c), opts.samples) {
            let rel = f / p.max(f64::MIN_POSITIVE);
            if best.map_or(true, |(_, b)| rel < b) {
                best = Some((m_c, rel));
            }
        }
    }
    let (coarse, _) =
        best.ok_or_else(|| Error::InsufficientData("no trial m_c leaves overlapping scaling windows".into()))?;
    let window = window_at(coarse);
    let obj = |m: f64| spread(&data, m, window, opts.samples).map_or(f64::INFINITY, |(f, _)| f);
    let m_c = golden(obj, coarse - fine, coarse + fine, 1e-10 * h.max(1e-300) + 1e-13);
    let (objective, power) = spread(&data, m_c, window, opts.samples)
        .ok_or_else(|| Error::InsufficientData("refined m_c leaves the scaling window".into()))?;

    let delta = 0.5 * h;
    let curvature_uncertainty = match (spread(&data, m_c - delta, window, opts.samples), spread(&data, m_c + delta, window, opts.samples)) {
        (Some((fl, _)), Some((fr, _))) => {
            let second = (fl + fr - 2.0 * objective) / (delta * delta);
            if second > 0.0 {
                (2.0 * objective / second).sqrt()
            } else {
                f64::INFINITY
            }
        }
        _ => f64::INFINITY,
    };
    let curvature_uncertainty = curvature_uncertainty.is_finite().then_some(curvature_uncertainty);
    let uncertainty = curvature_uncertainty.map_or(delta, |c| c.max(delta));
    let curves = data
        .iter()
        .map(|d| CollapsedCurve {
            pairs: d.pairs,
            sites: 2 * d.pairs,
            m: d.m.clone(),
            x: d.m.iter().map(|m| d.scale_x * (m - m_c)).collect(),
            y: d.sigma.iter().map(|s| s * d.scale_y).collect(),
        })
        .collect();
    Ok(CollapseResult {
        m_c,
        uncertainty,
        beta,
        nu,
        objective,
        relative_objective: objective / power.max(f64::MIN_POSITIVE),
        window,
        grid_step: h,
        curvature_uncertainty,
        sizes: data.iter().map(|d| d.pairs).collect(),
        curves,
    })
}

/// Collapsed curves as plot-ready CSV: L, N, m, x, y.
pub fn write_collapsed_csv<W: Write>(result: &CollapseResult, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["L", "N", "m", "x", "y"])?;
    for c in &result.curves {
        for i in 0..c.x.len() {
            wr.write_record(&[
                c.pairs.to_string(),
                c.sites.to_string(),
                format!("{:.12}", c.m[i]),
                format!("{:.12}", c.x[i]),
                format!("{:.12}", c.y[i]),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralChargeFit {
    pub c: f64,
    pub c_err: f64,
    pub s0: f64,
    pub s0_err: f64,
    pub residuals: Vec<f64>,
}

/// Least squares S = (c/6) log₂ L + s₀.
pub fn central_charge_fit(entropies: &[(usize, f64)]) -> Result<CentralChargeFit> {
    if entropies.len() < 4 {
        return Err(Error::InsufficientData(format!("central charge needs ≥ 4 sizes, got {}", entropies.len())));
    }
    let pts: Vec<(f64, f64)> = entropies.iter().map(|&(l, s)| ((l as f64).log2(), s)).collect();
    let line = ols_line(&pts)?;
    Ok(CentralChargeFit {
        c: 6.0 * line.slope,
        c_err: 6.0 * line.slope_err,
        s0: line.intercept,
        s0_err: line.intercept_err,
        residuals: line.residuals,
    })
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_err: f64,
    intercept_err: f64,
    residuals: Vec<f64>,
}

fn ols_line(pts: &[(f64, f64)]) -> Result<Line> {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::RankDeficient("all abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (k - 2.0).max(1.0);
    Ok(Line {
        slope,
        intercept,
        slope_err: (s2 / sxx).sqrt(),
        intercept_err: (s2 * (1.0 / k + mx * mx / sxx)).sqrt(),
        residuals,
    })
}

/// Gaps of one size in the energy-density convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub sites: usize,
    pub delta: f64,
    pub gamma: f64,
}

impl GapPoint {
    /// From total-energy gaps E₁ − E₀ and E₂ − E₀ of an N-site chain.
    pub fn from_total(sites: usize, delta: f64, gamma: f64) -> Self {
        let n = sites as f64;
        Self { sites, delta: delta / n, gamma: gamma / n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScalingFit {
    pub ratio: f64,
    pub ratio_err: f64,
    pub x_s: f64,
    pub x_s_err: f64,
    pub v_s: f64,
    pub v_s_err: f64,
    /// Δ·N² per size.
    pub amplitudes: Vec<(usize, f64)>,
    /// (max − min)/mean of Δ·N².
    pub amplitude_spread: f64,
    /// Sizes whose Δ/Γ falls outside (0, 1).
    pub flagged: Vec<usize>,
}

/// x_s from the mean Δ/Γ, v_s from Δ = π v_s x_s/N² fitted through the origin in 1/N².
pub fn gap_scaling_fit(gaps: &[GapPoint]) -> Result<GapScalingFit> {
    if gaps.len() < 3 {
        return Err(Error::InsufficientData(format!("gap scaling needs ≥ 3 sizes, got {}", gaps.len())));
    }
    let flagged: Vec<usize> = gaps
        .iter()
        .filter(|g| !(g.gamma > 0.0) || !(g.delta / g.gamma > 0.0 && g.delta / g.gamma < 1.0))
        .map(|g| g.sites)
        .collect();
    let good: Vec<&GapPoint> = gaps.iter().filter(|g| !flagged.contains(&g.sites)).collect();
    if good.len() < 2 {
        return Err(Error::InvalidArgument(format!("Δ/Γ outside (0, 1) for sizes {flagged:?}")));
    }
    let k = good.len() as f64;
    let ratios: Vec<f64> = good.iter().map(|g| g.delta / g.gamma).collect();
    let ratio = ratios.iter().sum::<f64>() / k;
    let ratio_err = (ratios.iter().map(|r| (r - ratio).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt();
    let x_s = ratio / (1.0 - ratio);
    let x_s_err = ratio_err / (1.0 - ratio).powi(2);

    let u: Vec<f64> = good.iter().map(|g| (g.sites as f64).powi(-2)).collect();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let a = good.iter().zip(&u).map(|(g, v)| g.delta * v).sum::<f64>() / suu;
    let res2: f64 = good.iter().zip(&u).map(|(g, v)| (g.delta - a * v).powi(2)).sum();
    let a_err = (res2 / (k - 1.0) / suu).sqrt();
    let v_s = a / (std::f64::consts::PI * x_s);
    let v_s_err = v_s.abs() * ((a_err / a).powi(2) + (x_s_err / x_s).powi(2)).sqrt();

    let amplitudes: Vec<(usize, f64)> = gaps.iter().map(|g| (g.sites, g.delta * (g.sites as f64).powi(2))).collect();
    let vals: Vec<f64> = amplitudes.iter().map(|a| a.1).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = (vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min)) / mean;
    Ok(GapScalingFit { ratio, ratio_err, x_s, x_s_err, v_s, v_s_err, amplitudes, amplitude_spread: spread, flagged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinGap {
    #[serde(rename = "L")]
    pub pairs: usize,
    pub m: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    #[serde(rename = "L")]
    pub pairs: usize,
    pub m: f64,
    /// max − min of S(l) over pair cuts with edge ≤ l ≤ L − edge, bits.
    pub range: f64,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub n: usize,
    pub t: f64,
    pub phi: f64,
    pub sizes: Vec<usize>,
    /// Σ = 0 crossing at the largest size.
    pub m_star: Option<f64>,
    pub m_star_by_size: Vec<(usize, Option<f64>)>,
    pub collapse_m_c: Option<f64>,
    pub collapse_objective: Option<f64>,
    pub baseline_objective: Option<f64>,
    /// Relative collapse objective over the φ = 0 baseline.
    pub objective_ratio: Option<f64>,
    pub min_gaps: Vec<MinGap>,
    /// Min gap of the largest size over that of the smallest.
    pub gap_ratio: f64,
    /// L_min/L_max, the ratio expected for a gap closing as 1/N.
    pub closing_ratio: f64,
    pub gap_non_decreasing: bool,
    pub gap_non_closing: bool,
    pub flatness: Vec<Flatness>,
    pub crossover: bool,
}

pub fn crossover_diagnostics(table: &ScanTable, baseline: Option<&ScanTable>) -> Result<CrossoverReport> {
    let group = single_group(table)?;
    let table = table.converged();
    let sizes = table.sizes();
    if sizes.len() < 2 {
        return Err(Error::InsufficientData(format!("crossover diagnostics need ≥ 2 sizes, got {}", sizes.len())));
    }
    let first = &table.rows[0];
    let (n, t, phi) = (first.n, first.t, first.phi);
    debug_assert_eq!(first.group(), group);

    let mut m_star_by_size = Vec::new();
    let mut min_gaps = Vec::new();
    for &l in &sizes {
        let s = table.series(l);
        let m: Vec<f64> = s.iter().map(|r| r.m).collect();
        let sig: Vec<f64> = s.iter().map(|r| r.sigma).collect();
        let root = if m.len() >= 2 { Pchip::new(&m, &sig).ok().and_then(|p| p.crossing(0.0)) } else { None };
        m_star_by_size.push((l, root));
        let g = s
            .iter()
            .filter_map(|r| r.delta.map(|d| (r.m, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::InsufficientData(format!("L = {l} has no gaps")))?;
        min_gaps.push(MinGap { pairs: l, m: g.0, gap: g.1 });
    }
    let m_star = m_star_by_size.last().and_then(|x| x.1);

    let collapse = collapse_fit(&table, ISING_BETA, ISING_NU).ok();
    let baseline_objective = match baseline {
        Some(b) => Some(collapse_fit(b, ISING_BETA, ISING_NU)?.relative_objective),
        None => None,
    };
    let objective_ratio = match (&collapse, baseline_objective) {
        (Some(c), Some(b)) if b > 0.0 => Some(c.relative_objective / b),
        _ => None,
    };

    let gap_ratio = min_gaps.last().expect("sizes").gap / min_gaps[0].gap;
    let closing_ratio = sizes[0] as f64 / *sizes.last().expect("sizes") as f64;
    let gap_non_decreasing = min_gaps.windows(2).all(|w| w[1].gap >= w[0].gap);
    let gap_non_closing = gap_ratio > closing_ratio.sqrt();

    let probe = m_star.unwrap_or_else(|| min_gaps.last().expect("sizes").m);
    let mut flatness = Vec::new();
    for &l in &sizes {
        let Some(row) = table.series(l).into_iter().min_by(|a, b| (a.m - probe).abs().total_cmp(&(b.m - probe).abs()))
        else {
            continue;
        };
        let s = row.pair_entropies();
        if s.len() != l + 1 {
            continue;
        }
        let edge = (l / 4).max(1);
        let inner = &s[edge..=l - edge];
        let range = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max) - inner.iter().copied().fold(f64::INFINITY, f64::min);
        flatness.push(Flatness { pairs: l, m: row.m, range, edge });
    }

    Ok(CrossoverReport {
        n,
        t,
        phi,
        sizes,
        m_star,
        m_star_by_size,
        collapse_m_c: collapse.as_ref().map(|c| c.m_c),
        collapse_objective: collapse.as_ref().map(|c| c.relative_objective),
        baseline_objective,
        objective_ratio,
        min_gaps,
        gap_ratio,
        closing_ratio,
        gap_non_decreasing,
        gap_non_closing,
        flatness,
        crossover: gap_non_closing,
    })
}

/// Root of Σ(m) = 0 for one size, by monotone interpolation.
pub fn sigma_crossing(table: &ScanTable, pairs: usize) -> Option<f64> {
    let s = table.series(pairs);
    let m: Vec<f64> = s.iter().map(|r| r.m).collect();
    let sig: Vec<f64> = s.iter().map(|r| r.sigma).collect();
    Pchip::new(&m, &sig).ok()?.crossing(0.0)
}

/// Value of a monotone interpolant of `field` at `m` for one size.
pub fn interpolate(table: &ScanTable, pairs: usize, m: f64, field: impl Fn(&ScanRow) -> Option<f64>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = table.series(pairs).into_iter().filter_map(|r| field(r).map(|v| (r.m, v))).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let p = Pchip::new(&x, &y).ok()?;
    p.contains(m).then(|| p.eval(m))
}

/// Mass where Σ curves of two sizes intersect, if they do.
pub fn curve_intersection(table: &ScanTable, a: usize, b: usize) -> Option<f64> {
    let sa = table.series(a);
    let sb = table.series(b);
    let pa = Pchip::new(&sa.iter().map(|r| r.m).collect::<Vec<_>>(), &sa.iter().map(|r| r.sigma).collect::<Vec<_>>()).ok()?;
    let pb = Pchip::new(&sb.iter().map(|r| r.m).collect::<Vec<_>>(), &sb.iter().map(|r| r.sigma).collect::<Vec<_>>()).ok()?;
    let lo = pa.domain().0.max(pb.domain().0);
    let hi = pa.domain().1.min(pb.domain().1);
    let k = 400;
    let f = |m: f64| pa.eval(m) - pb.eval(m);
    let mut prev = lo;
    for i in 1..=k {
        let m = lo + (hi - lo) * i as f64 / k as f64;
        if f(prev) * f(m) < 0.0 {
            return Some(bisect(f, prev, m));
        }
        prev = m;
    }
    None
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    serde_json::to_writer_pretty(std::fs::File::create(&tmp)?, value)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn row(pairs: usize, m: f64, sigma: f64) -> ScanRow {
        ScanRow {
            n: 3,
            t: 2.0,
            phi: 0.0,
            pairs,
            chi: 64,
            m,
            sigma,
            delta: None,
            gamma: None,
            entropy: 0.0,
            truncation: 0.0,
            energy: 0.0,
            k0: 1,
            engine: "test".into(),
            converged: true,
            error: String::new(),
            manifest: String::new(),
            id: String::new(),
            entropy_profile: String::new(),
        }
    }

    fn lambda(x: f64) -> f64 {
        0.6 * (1.0 - (x / 4.0).tanh())
    }

    fn synthetic(m_c: f64, grid: &[f64], sizes: &[usize]) -> ScanTable {
        let mut rows = Vec::new();
        for &l in sizes {
            let n = 2.0 * l as f64;
            for &m in grid {
                rows.push(row(l, m, n.powf(-ISING_BETA) * lambda(n * (m - m_c))));
            }
        }
        ScanTable::new(rows).unwrap()
    }

    fn grid(lo: f64, step: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| lo + step * i as f64).collect()
    }

    #[test]
    fn recovers_manufactured_critical_mass() {
        let t = synthetic(-1.93, &grid(-2.3, 0.05, 15), &[12, 16, 20, 24]);
        let r = collapse_fit(&t, ISING_BETA, ISING_NU).unwrap();
        assert!((r.m_c + 1.93).abs() < 0.05, "{}", r.m_c);
        assert!(r.uncertainty >= 0.025 - 1e-15);
        assert!(r.objective >= 0.0);
        let at = collapse_objective(&t, ISING_BETA, ISING_NU, -1.93, r.window).unwrap();
        let off = collapse_objective(&t, ISING_BETA, ISING_NU, -1.73, r.window).unwrap();
        assert!(at < 1e-2 * off, "{at} {off}");
    }

    #[test]
    fn collapse_rejects_thin_tables() {
        let t = synthetic(-1.9, &grid(-2.3, 0.05, 15), &[12, 16]);
        assert!(collapse_fit(&t, ISING_BETA, ISING_NU).is_err());
        let t = synthetic(-1.9, &grid(-2.0, 0.05, 5), &[12, 16, 20]);
        assert!(collapse_fit(&t, ISING_BETA, ISING_NU).is_err());
        let mut far = synthetic(-1.9, &grid(-2.3, 0.05, 15), &[12, 16]);
        for r in synthetic(-1.9, &grid(3.0, 0.05, 15), &[20]).rows {
            far.insert(r).unwrap();
        }
        assert!(collapse_fit(&far, ISING_BETA, ISING_NU).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn collapse_is_shift_equivariant(delta in -1.0f64..1.0) {
            let t = synthetic(-1.9, &grid(-2.3, 0.05, 15), &[12, 16, 20]);
            let a = collapse_fit(&t, ISING_BETA, ISING_NU).unwrap();
            let b = collapse_fit(&t.shifted(delta), ISING_BETA, ISING_NU).unwrap();
            prop_assert!((b.m_c - a.m_c - delta).abs() < 1e-7);
        }

        #[test]
        fn central_charge_reproduces_manufactured_lines(c in 0.1f64..2.0, s0 in -1.0f64..1.0) {
            let pts: Vec<(usize, f64)> = [8, 12, 16, 20, 24].iter().map(|&l| (l, c / 6.0 * (l as f64).log2() + s0)).collect();
            let f = central_charge_fit(&pts).unwrap();
            prop_assert!((f.c - c).abs() < 1e-12);
            prop_assert!((f.s0 - s0).abs() < 1e-12);
        }

        #[test]
        fn gap_scaling_reproduces_manufactured_gaps(v in 0.2f64..4.0, x in 0.5f64..4.0) {
            let pi = std::f64::consts::PI;
            let pts: Vec<GapPoint> = [24, 32, 40, 48]
                .iter()
                .map(|&n| GapPoint { sites: n, delta: pi * v * x / (n * n) as f64, gamma: pi * v * (x + 1.0) / (n * n) as f64 })
                .collect();
            let f = gap_scaling_fit(&pts).unwrap();
            prop_assert!((f.x_s - x).abs() < 1e-10);
            prop_assert!((f.v_s - v).abs() < 1e-10);
            prop_assert!(f.amplitude_spread < 1e-12);
        }
    }

    #[test]
    fn ising_gaps_give_two_and_v() {
        let pi = std::f64::consts::PI;
        let pts: Vec<GapPoint> =
            [24, 32, 40].iter().map(|&n| GapPoint::from_total(n, 2.0 * pi * 1.5 / n as f64, 3.0 * pi * 1.5 / n as f64)).collect();
        let f = gap_scaling_fit(&pts).unwrap();
        assert_abs_diff_eq!(f.x_s, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.v_s, 1.5, epsilon = 1e-12);
        let bad = [GapPoint { sites: 8, delta: 2.0, gamma: 1.0 }, pts[0], pts[1], pts[2]];
        assert_eq!(gap_scaling_fit(&bad).unwrap().flagged, vec![8]);
    }

    #[test]
    fn flat_entropy_gives_zero_charge() {
        let f = central_charge_fit(&[(8, 0.7), (12, 0.7), (16, 0.7), (20, 0.7)]).unwrap();
        assert_abs_diff_eq!(f.c, 0.0, epsilon = 1e-12);
        assert!(central_charge_fit(&[(8, 0.7), (12, 0.7), (16, 0.7)]).is_err());
    }

    fn gapped_rows(l: usize, gap: impl Fn(f64) -> f64) -> Vec<ScanRow> {
        grid(-1.0, 0.1, 11)
            .into_iter()
            .map(|m| ScanRow {
                delta: Some(gap(m)),
                gamma: Some(2.0 * gap(m)),
                entropy_profile: ScanRow::format_profile(&vec![0.5; l + 1]),
                ..row(l, m, (m + 0.3).tanh())
            })
            .collect()
    }

    #[test]
    fn crossover_report_separates_closing_and_open_gaps() {
        let mut open = Vec::new();
        let mut closing = Vec::new();
        for l in [12, 16, 20] {
            open.extend(gapped_rows(l, |m| 1.0 + (m + 0.3).powi(2)));
            closing.extend(gapped_rows(l, |m| 6.0 / l as f64 + (m + 0.3).powi(2)));
        }
        let r = crossover_diagnostics(&ScanTable::new(open).unwrap(), None).unwrap();
        assert!(r.gap_non_closing && r.gap_non_decreasing && r.crossover);
        assert_abs_diff_eq!(r.m_star.unwrap(), -0.3, epsilon = 1e-9);
        assert!(r.flatness.iter().all(|f| f.range == 0.0));
        let r = crossover_diagnostics(&ScanTable::new(closing).unwrap(), None).unwrap();
        assert!(!r.gap_non_closing && !r.crossover);
    }

    #[test]
    fn csv_round_trip_and_duplicates() {
        let mut t = synthetic(-1.9, &grid(-2.3, 0.1, 8), &[4, 6]);
        t.rows[0].delta = Some(0.25);
        t.rows[0].entropy_profile = ScanRow::format_profile(&[0.0, 0.5, 0.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ScanTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows[0].pair_entropies(), vec![0.0, 0.5, 0.0]);
        let dup = t.rows[0].clone();
        assert!(t.clone().insert(dup.clone()).is_err());
        t.upsert(ScanRow { sigma: 9.0, ..dup });
        assert_eq!(t.rows[0].sigma, 9.0);
    }
}
