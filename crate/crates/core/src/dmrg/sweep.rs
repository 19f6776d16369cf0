//! Two-cell sweeps, truncation, and the ground/excited-state drivers.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use super::env::{overlap_left, overlap_right, Effective, LeftEnv, OverlapEnv, RightEnv, TwoSite};
use super::mps::{identity_env, pop, Block, MpsState};
use crate::ed::{Method, SpectrumResult};
use crate::hamiltonian::{CellMpo, ModelParams};
use crate::krylov::{self, FnOperator, KrylovOptions};
use crate::{Error, Result};

/// Product state the sweeps start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    /// Meson for m < 0, Dirac sea otherwise.
    #[default]
    Auto,
    Meson,
    Sea,
    /// Run from both and keep the lower energy.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepPolicy {
    /// Bond-dimension cap.
    pub chi: usize,
    /// Cap of the first sweep; doubled every sweep up to `chi`.
    pub chi_start: usize,
    /// Discarded weight allowed per bond.
    pub cutoff: f64,
    pub max_sweeps: usize,
    pub min_sweeps: usize,
    /// Energy change between sweeps, relative to max(1, |E|).
    pub energy_tol: f64,
    /// Largest acceptable discarded weight in the final sweep.
    pub truncation_ceiling: f64,
    pub local_tol: f64,
    pub krylov_basis: usize,
    pub krylov_restarts: usize,
    /// Largest acceptable |⟨φ_lower|ψ⟩| for excited states.
    pub leakage_tol: f64,
    pub seed: Seed,
    pub krylov_seed: u64,
}

impl Default for SweepPolicy {
    fn default() -> Self {
        Self {
            chi: 512,
            chi_start: 16,
            cutoff: 1e-10,
            max_sweeps: 40,
            min_sweeps: 3,
            energy_tol: 1e-9,
            truncation_ceiling: 1e-6,
            local_tol: 1e-11,
            krylov_basis: 24,
            krylov_restarts: 3,
            leakage_tol: 1e-6,
            seed: Seed::Auto,
            krylov_seed: 0x5eed,
        }
    }
}

impl SweepPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.chi < 8 {
            return Err(Error::InvalidArgument(format!("bond dimension cap {} must be ≥ 8", self.chi)));
        }
        if self.max_sweeps == 0 || !(self.energy_tol > 0.0) || !(self.cutoff >= 0.0) {
            return Err(Error::InvalidArgument("sweep policy needs max_sweeps ≥ 1, energy_tol > 0, cutoff ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Right,
    Left,
}

struct Sweeper<'a> {
    mpo: CellMpo,
    policy: &'a SweepPolicy,
    lower: &'a [MpsState],
    mps: MpsState,
    left: Vec<Option<LeftEnv>>,
    right: Vec<Option<RightEnv>>,
    ol: Vec<Vec<Option<OverlapEnv>>>,
    or: Vec<Vec<Option<OverlapEnv>>>,
}

impl<'a> Sweeper<'a> {
    fn new(mut mps: MpsState, policy: &'a SweepPolicy, lower: &'a [MpsState]) -> Result<Self> {
        let mpo = CellMpo::new(&mps.params)?;
        let l = mps.len();
        mps.right_canonicalize();
        let w = l + 1;
        let mut left = vec![None; w];
        left[0] = Some(LeftEnv::edge(w));
        let mut right: Vec<Option<RightEnv>> = vec![None; w];
        right[l] = Some(RightEnv::edge(w));
        let mut ol = vec![vec![None; w]; lower.len()];
        let mut or = vec![vec![None; w]; lower.len()];
        for (p, phi) in lower.iter().enumerate() {
            ol[p][0] = Some(identity_env(w, &phi.bonds[0], &mps.bonds[0]));
            let mut edge: OverlapEnv = vec![None; w];
            edge[l] = Some(DMatrix::identity(1, 1));
            or[p][l] = Some(edge);
        }
        let mut s = Self { mpo, policy, lower, mps, left, right, ol, or };
        for j in (2..l).rev() {
            s.refresh_right(j);
        }
        Ok(s)
    }

    /// Rebuilds the right environments at bond `j` from bond `j+1`.
    fn refresh_right(&mut self, j: usize) {
        let next = self.right[j + 1].as_ref().expect("right environment").extend(&self.mps, &self.mpo, j);
        self.right[j] = Some(next);
        for (p, phi) in self.lower.iter().enumerate() {
            let e = overlap_right(self.or[p][j + 1].as_ref().expect("overlap"), phi, &self.mps, j);
            self.or[p][j] = Some(e);
        }
    }

    fn refresh_left(&mut self, j: usize) {
        let next = self.left[j].as_ref().expect("left environment").extend(&self.mps, &self.mpo, j);
        self.left[j + 1] = Some(next);
        for (p, phi) in self.lower.iter().enumerate() {
            let e = overlap_left(self.ol[p][j].as_ref().expect("overlap"), phi, &self.mps, j);
            self.ol[p][j + 1] = Some(e);
        }
    }

    /// Optimizes cells `j, j+1`; returns (energy, discarded weight, kept states).
    fn update(&mut self, j: usize, chi: usize, dir: Direction, tol: f64) -> Result<(f64, f64, usize)> {
        let layout = TwoSite::new(&self.mps, j);
        let x0 = layout.contract(&self.mps);
        let le = self.left[j].as_ref().expect("left environment");
        let re = self.right[j + 2].as_ref().expect("right environment");
        let eff = Effective::new(&self.mps, &self.mpo, &layout, le, re);
        let deflate: Vec<Vec<f64>> = self
            .lower
            .iter()
            .enumerate()
            .map(|(p, phi)| {
                layout.projection(phi, self.ol[p][j].as_ref().expect("overlap"), self.or[p][j + 2].as_ref().expect("overlap"))
            })
            .collect();
        let op = FnOperator::new(layout.len, |x: &[f64], y: &mut [f64]| eff.apply(x, y));
        let opts = KrylovOptions {
            tol,
            max_basis: self.policy.krylov_basis,
            max_restarts: self.policy.krylov_restarts,
            block: 1,
            seed: self.policy.krylov_seed ^ (j as u64),
        };
        let r = krylov::lowest(&op, 1, &opts, &[x0], &deflate)?;
        let (discarded, kept) = split(&mut self.mps, &layout, &r.vectors[0], chi, self.policy.cutoff, dir);
        Ok((r.values[0], discarded, kept))
    }

    fn run(mut self) -> Result<MpsState> {
        let l = self.mps.len();
        let policy = self.policy;
        let mut energies = Vec::new();
        let mut truncation = Vec::new();
        let mut chis = Vec::new();
        let mut bond_trunc = vec![0.0; l + 1];
        let mut converged = false;
        for sweep in 0..policy.max_sweeps {
            let chi = policy.chi.min(policy.chi_start.max(8).saturating_mul(1 << sweep.min(20)));
            let tol = if sweep < 2 { policy.local_tol.max(1e-8) } else { policy.local_tol };
            let mut max_disc: f64 = 0.0;
            let mut capped = false;
            let mut energy = 0.0;
            for j in 0..l - 1 {
                let (e, d, k) = self.update(j, chi, Direction::Right, tol)?;
                bond_trunc[j + 1] = d;
                max_disc = max_disc.max(d);
                capped |= k >= chi && d > policy.cutoff;
                energy = e;
                self.refresh_left(j);
            }
            for j in (0..l - 1).rev() {
                let (e, d, k) = self.update(j, chi, Direction::Left, tol)?;
                bond_trunc[j + 1] = bond_trunc[j + 1].max(d);
                max_disc = max_disc.max(d);
                capped |= k >= chi && d > policy.cutoff;
                energy = e;
                self.refresh_right(j + 1);
            }
            energies.push(energy);
            truncation.push(max_disc);
            chis.push(chi);
            if sweep + 1 >= policy.min_sweeps && energies.len() >= 2 {
                let prev = energies[energies.len() - 2];
                let settled = (energy - prev).abs() < policy.energy_tol * energy.abs().max(1.0);
                if settled && (chi == policy.chi || !capped) {
                    converged = true;
                    break;
                }
            }
        }
        self.mps.center = 0;
        self.mps.history = super::mps::SweepHistory { energies: energies.clone(), truncation, chi: chis, bond_truncation: bond_trunc };
        if !converged {
            return Err(Error::SweepsExhausted { sweeps: energies.len(), energies });
        }
        let last = *self.mps.history.truncation.last().expect("one sweep");
        if last > policy.truncation_ceiling {
            return Err(Error::BondDimensionExhausted { error: last, ceiling: policy.truncation_ceiling });
        }
        Ok(self.mps)
    }
}

/// SVD of the two-cell tensor sector by sector over the middle bond, with
/// one global truncation: at most `chi` values, discarded weight ≤ `cutoff`.
fn split(mps: &mut MpsState, layout: &TwoSite, theta: &[f64], chi: usize, cutoff: f64, dir: Direction) -> (f64, usize) {
    let j = layout.j;
    let l = mps.len();
    let left = mps.bonds[j].clone();
    let right = mps.bonds[j + 2].clone();
    struct Sector {
        qm: usize,
        rows: Vec<(usize, usize)>,
        cols: Vec<usize>,
        u: Block,
        s: Vec<f64>,
        vt: Block,
    }
    let mut sectors = Vec::new();
    for qm in 0..=l {
        let rows: Vec<(usize, usize)> = (0..4)
            .filter(|&c| qm >= pop(c) && qm - pop(c) < left.len() && left[qm - pop(c)] > 0)
            .map(|c| (qm - pop(c), c))
            .collect();
        let cols: Vec<usize> = (0..4).filter(|&c| qm + pop(c) <= l && right[qm + pop(c)] > 0).collect();
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        let nr: usize = rows.iter().map(|&(q, _)| left[q]).sum();
        let nc: usize = cols.iter().map(|&c| right[qm + pop(c)]).sum();
        let mut m = DMatrix::zeros(nr, nc);
        let mut ro = 0;
        let mut any = false;
        for &(qa, c1) in &rows {
            let mut co = 0;
            for &c2 in &cols {
                if let Some(b) = layout.find(qa, c1, c2) {
                    m.view_mut((ro, co), (b.rows, b.cols)).copy_from(&layout.view(theta, b));
                    any = true;
                }
                co += right[qm + pop(c2)];
            }
            ro += left[qa];
        }
        if !any {
            continue;
        }
        let svd = SVD::new(m, true, true);
        sectors.push(Sector {
            qm,
            rows,
            cols,
            s: svd.singular_values.iter().copied().collect(),
            u: svd.u.expect("u"),
            vt: svd.v_t.expect("v_t"),
        });
    }

    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (si, sec) in sectors.iter().enumerate() {
        for (i, &s) in sec.s.iter().enumerate() {
            all.push((s, si, i));
        }
    }
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = all.iter().map(|x| x.0 * x.0).sum();
    let mut keep = all.len();
    let mut tail = 0.0;
    while keep > 1 {
        let w = all[keep - 1].0 * all[keep - 1].0;
        if tail + w > cutoff * total {
            break;
        }
        tail += w;
        keep -= 1;
    }
    keep = keep.min(chi).max(1);
    let discarded: f64 = all[keep..].iter().map(|x| x.0 * x.0).sum::<f64>() / total;
    let kept_weight: f64 = all[..keep].iter().map(|x| x.0 * x.0).sum();
    let scale = (total / kept_weight).sqrt() / total.sqrt();
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); sectors.len()];
    for &(_, si, i) in &all[..keep] {
        chosen[si].push(i);
    }

    for q in 0..mps.cells[j].len() {
        mps.cells[j][q] = Default::default();
        mps.cells[j + 1][q] = Default::default();
    }
    mps.bonds[j + 1].iter_mut().for_each(|d| *d = 0);
    for (sec, idx) in sectors.iter().zip(&chosen) {
        let k = idx.len();
        if k == 0 {
            continue;
        }
        mps.bonds[j + 1][sec.qm] = k;
        let s: Vec<f64> = idx.iter().map(|&i| sec.s[i] * scale).collect();
        let (uf, vf): (Vec<f64>, Vec<f64>) = match dir {
            Direction::Right => (vec![1.0; k], s),
            Direction::Left => (s, vec![1.0; k]),
        };
        let mut ro = 0;
        for &(qa, c1) in &sec.rows {
            let d = left[qa];
            let blk = DMatrix::from_fn(d, k, |r, c| sec.u[(ro + r, idx[c])] * uf[c]);
            mps.cells[j][qa][c1] = Some(blk);
            ro += d;
        }
        let mut co = 0;
        for &c2 in &sec.cols {
            let d = right[sec.qm + pop(c2)];
            let blk = DMatrix::from_fn(k, d, |r, c| sec.vt[(idx[r], co + c)] * vf[r]);
            mps.cells[j + 1][sec.qm][c2] = Some(blk);
            co += d;
        }
    }
    mps.center = if dir == Direction::Right { j + 1 } else { j };
    (discarded, keep)
}

fn seeds(params: &ModelParams, seed: Seed) -> Result<Vec<MpsState>> {
    Ok(match seed {
        Seed::Meson => vec![MpsState::meson(params)?],
        Seed::Sea => vec![MpsState::dirac_sea(params)?],
        Seed::Auto if params.m < 0.0 => vec![MpsState::meson(params)?],
        Seed::Auto => vec![MpsState::dirac_sea(params)?],
        Seed::Both => vec![MpsState::meson(params)?, MpsState::dirac_sea(params)?],
    })
}

fn check(params: &ModelParams, policy: &SweepPolicy) -> Result<()> {
    params.validate()?;
    policy.validate()?;
    if params.pairs() < 2 {
        return Err(Error::InvalidArgument("DMRG needs at least two cells; use exact diagonalization".into()));
    }
    Ok(())
}

fn spectrum(states: &[MpsState]) -> SpectrumResult {
    let energies: Vec<f64> = states.iter().map(|s| *s.history.energies.last().expect("swept")).collect();
    let residuals = states
        .iter()
        .map(|s| {
            let e = &s.history.energies;
            if e.len() >= 2 {
                (e[e.len() - 1] - e[e.len() - 2]).abs()
            } else {
                0.0
            }
        })
        .collect();
    SpectrumResult {
        energies,
        vectors: Vec::new(),
        residuals,
        iterations: states.iter().map(|s| s.history.energies.len()).sum(),
        degenerate: Vec::new(),
        method: Method::Dmrg,
        converged: true,
    }
}

/// Converges the ground state from the seed(s) of `policy`.
pub fn ground_state(params: &ModelParams, policy: &SweepPolicy) -> Result<(SpectrumResult, MpsState)> {
    check(params, policy)?;
    let mut best: Option<MpsState> = None;
    let mut last_err = None;
    for init in seeds(params, policy.seed)? {
        match Sweeper::new(init, policy, &[])?.run() {
            Ok(s) => {
                let e = *s.history.energies.last().expect("swept");
                if best.as_ref().map_or(true, |b| e < *b.history.energies.last().expect("swept")) {
                    best = Some(s);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let gs = best.ok_or_else(|| last_err.expect("at least one seed"))?;
    let mut spec = spectrum(std::slice::from_ref(&gs));
    spec.mark_degeneracies(1e-8);
    Ok((spec, gs))
}

/// `count` further levels above `lower`, each optimized in the orthogonal
/// complement of the states below it.
pub fn excited_states(
    params: &ModelParams,
    policy: &SweepPolicy,
    lower: &[MpsState],
    count: usize,
) -> Result<(SpectrumResult, Vec<MpsState>)> {
    check(params, policy)?;
    if lower.is_empty() {
        return Err(Error::InvalidArgument("excited states need a converged ground state".into()));
    }
    let mut states: Vec<MpsState> = lower.to_vec();
    for _ in 0..count {
        let init = states.last().expect("non-empty").clone();
        let s = Sweeper::new(init, policy, &states)?.run()?;
        let norm = s.norm();
        for phi in &states {
            let leak = (phi.overlap(&s) / (phi.norm() * norm)).abs();
            if leak > policy.leakage_tol {
                return Err(Error::OrthogonalityLeakage { leakage: leak, tolerance: policy.leakage_tol });
            }
        }
        states.push(s);
    }
    let mut spec = spectrum(&states);
    spec.mark_degeneracies(1e-8);
    Ok((spec, states))
}

/// Ground state plus `count` excited levels.
pub fn lowest_states(params: &ModelParams, policy: &SweepPolicy, count: usize) -> Result<(SpectrumResult, Vec<MpsState>)> {
    let (_, gs) = ground_state(params, policy)?;
    excited_states(params, policy, &[gs], count)
}
