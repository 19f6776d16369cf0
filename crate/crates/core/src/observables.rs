//! Order parameter, profiles, entanglement and gaps.
//!
//! Σ follows the displayed normalization: the N−1 internal link
//! expectations summed and divided by N.

use std::collections::HashMap;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::basis::GaugeBasis;
use crate::dmrg::{bond_label, pop, MpsState};
use crate::ed::SpectrumResult;
use crate::hamiltonian::ModelParams;
use crate::{Error, Result};

/// A state from either engine.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Vector { basis: &'a GaugeBasis, amplitudes: &'a [f64] },
    Mps(&'a MpsState),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub sigma: f64,
    pub sigma_tilde: f64,
    /// ⟨E⟩ per internal link, physical units.
    pub field_profile: Vec<f64>,
    pub density_profile: Vec<f64>,
    /// S(l) in bits for l = 0..=N.
    pub entropy_profile: Vec<f64>,
    pub gaps: Option<(f64, f64)>,
}

impl ObservableSet {
    /// Half-chain entropy S_L(L/2), cut between pairs ⌊L/2⌋ and ⌊L/2⌋+1.
    pub fn mid_entropy(&self) -> f64 {
        let pairs = (self.entropy_profile.len() - 1) / 2;
        self.entropy_profile[2 * (pairs / 2)]
    }

    /// S at the cuts between pairs, l = 0..=L.
    pub fn pair_entropies(&self) -> Vec<f64> {
        self.entropy_profile.iter().step_by(2).copied().collect()
    }
}

const NORM_TOL: f64 = 1e-8;

/// Mean ⟨Ẽ⟩ per link and site occupations.
struct Profiles {
    tilde: Vec<f64>,
    density: Vec<f64>,
}

fn profiles(state: StateRef<'_>, params: &ModelParams) -> Result<Profiles> {
    let alg = params.algebra();
    let sites = params.sites();
    let mut tilde = vec![0.0; sites - 1];
    let mut density = vec![0.0; sites];
    match state {
        StateRef::Vector { basis, amplitudes } => {
            check_vector(basis, amplitudes, params)?;
            for (s, &a) in basis.states().iter().zip(amplitudes) {
                let p = a * a;
                if p == 0.0 {
                    continue;
                }
                for (x, k) in s.links(sites, params.n).into_iter().enumerate() {
                    tilde[x] += p * alg.tilde(k);
                }
                for (x, d) in density.iter_mut().enumerate() {
                    if s.occupied(x) {
                        *d += p;
                    }
                }
            }
        }
        StateRef::Mps(mps) => {
            check_mps(mps, params)?;
            for (j, cs) in mps.scan().iter().enumerate() {
                for &(q, c, w) in &cs.weights {
                    let e = c >> 1;
                    let o = c & 1;
                    let kl = bond_label(params, j, q);
                    tilde[2 * j] += w * alg.tilde((kl + e) % params.n);
                    if 2 * j + 1 < sites - 1 {
                        tilde[2 * j + 1] += w * alg.tilde(bond_label(params, j + 1, q + pop(c)));
                    }
                    density[2 * j] += w * e as f64;
                    density[2 * j + 1] += w * o as f64;
                }
            }
        }
    }
    Ok(Profiles { tilde, density })
}

fn check_vector(basis: &GaugeBasis, v: &[f64], params: &ModelParams) -> Result<()> {
    if basis.len() != v.len() || basis.n() != params.n || basis.geometry() != params.geometry {
        return Err(Error::Mismatch("state, basis and parameters disagree".into()));
    }
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    if (norm2 - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!("state is not normalized (‖ψ‖² = {norm2})")));
    }
    Ok(())
}

fn check_mps(mps: &MpsState, params: &ModelParams) -> Result<()> {
    let p = mps.params();
    if p.n != params.n || p.geometry != params.geometry || p.k0 != params.k0 || p.phi != params.phi {
        return Err(Error::Mismatch("MPS and parameters disagree".into()));
    }
    let norm2 = mps.norm().powi(2);
    if (norm2 - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!("state is not normalized (‖ψ‖² = {norm2})")));
    }
    Ok(())
}

/// (Σ, per-link ⟨E⟩ in physical units).
pub fn order_parameter(state: StateRef<'_>, params: &ModelParams) -> Result<(f64, Vec<f64>)> {
    let p = profiles(state, params)?;
    let q = params.algebra().quantum();
    let field: Vec<f64> = p.tilde.iter().map(|t| q * t).collect();
    let sigma = field.iter().sum::<f64>() / params.sites() as f64;
    Ok((sigma, field))
}

pub fn density_profile(state: StateRef<'_>, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(profiles(state, params)?.density)
}

/// ⟨Ẽ⟩ per link rebuilt from ⟨n_x⟩ by Gauss' law. Exact whenever no
/// configuration in the state wraps its labels around ℤₙ.
pub fn field_from_density(density: &[f64], params: &ModelParams) -> Vec<f64> {
    let alg = params.algebra();
    let mut e = alg.tilde(params.k0);
    let mut out = Vec::with_capacity(density.len().saturating_sub(1));
    for (x, &d) in density.iter().enumerate().take(density.len().saturating_sub(1)) {
        e += d - (x % 2) as f64;
        out.push(alg.quantum() * e);
    }
    out
}

fn shannon_bits(schmidt: impl IntoIterator<Item = f64>) -> f64 {
    schmidt
        .into_iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Entropy (bits) of sites `0..cut` against the rest.
pub fn entanglement_entropy(state: StateRef<'_>, params: &ModelParams, cut: usize) -> Result<f64> {
    let sites = params.sites();
    if cut > sites {
        return Err(Error::InvalidArgument(format!("cut {cut} outside 0..={sites}")));
    }
    match state {
        StateRef::Vector { basis, amplitudes } => {
            check_vector(basis, amplitudes, params)?;
            Ok(vector_entropy(basis, amplitudes, cut))
        }
        StateRef::Mps(_) => Ok(entropy_profile(state, params)?[cut]),
    }
}

fn vector_entropy(basis: &GaugeBasis, v: &[f64], cut: usize) -> f64 {
    if cut == 0 || cut == basis.geometry().sites() {
        return 0.0;
    }
    let mask = (1u64 << cut) - 1;
    // Left patterns fix the link label at the cut, so sectors are (k0, left count).
    let mut sectors: HashMap<(usize, u32), (HashMap<u64, usize>, HashMap<u64, usize>, Vec<(usize, usize, f64)>)> =
        HashMap::new();
    for (s, &a) in basis.states().iter().zip(v) {
        if a == 0.0 {
            continue;
        }
        let left = s.occupation() & mask;
        let right = s.occupation() >> cut;
        let entry = sectors.entry((s.k0(), left.count_ones())).or_default();
        let nr = entry.0.len();
        let r = *entry.0.entry(left).or_insert(nr);
        let nc = entry.1.len();
        let c = *entry.1.entry(right).or_insert(nc);
        entry.2.push((r, c, a));
    }
    let mut values = Vec::new();
    for (_, (rows, cols, entries)) in sectors {
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (r, c, a) in entries {
            m[(r, c)] = a;
        }
        values.extend(SVD::new(m, false, false).singular_values.iter().copied());
    }
    shannon_bits(values)
}

/// S(l) for every cut l = 0..=N.
pub fn entropy_profile(state: StateRef<'_>, params: &ModelParams) -> Result<Vec<f64>> {
    let sites = params.sites();
    match state {
        StateRef::Vector { basis, amplitudes } => {
            check_vector(basis, amplitudes, params)?;
            Ok((0..=sites).map(|l| vector_entropy(basis, amplitudes, l)).collect())
        }
        StateRef::Mps(mps) => {
            check_mps(mps, params)?;
            let scan = mps.scan();
            let mut out = vec![0.0; sites + 1];
            for (j, cs) in scan.iter().enumerate() {
                out[2 * j + 1] = shannon_bits(cs.inner_schmidt.iter().copied());
                if j + 1 < scan.len() {
                    out[2 * j + 2] = shannon_bits(cs.right_schmidt.iter().flat_map(|(_, s)| s.iter().copied()));
                }
            }
            Ok(out)
        }
    }
}

/// (Δ, Γ) = (ε₁ − ε₀, ε₂ − ε₀).
pub fn gaps(spectrum: &SpectrumResult) -> Result<(f64, f64)> {
    if !spectrum.converged {
        return Err(Error::InvalidArgument("gaps need converged levels".into()));
    }
    let e = &spectrum.energies;
    if e.len() < 3 {
        return Err(Error::InsufficientData(format!("gaps need 3 levels, got {}", e.len())));
    }
    let clamp = |d: f64| if d < 0.0 && d > -1e-9 { 0.0 } else { d };
    let (d, g) = (clamp(e[1] - e[0]), clamp(e[2] - e[0]));
    if d < 0.0 || g < d {
        return Err(Error::InvalidArgument(format!("levels are not ascending: {e:?}")));
    }
    Ok((d, g))
}

/// Every observable of one state; gaps when `spectrum` has three levels.
pub fn measure(state: StateRef<'_>, params: &ModelParams, spectrum: Option<&SpectrumResult>) -> Result<ObservableSet> {
    let p = profiles(state, params)?;
    let q = params.algebra().quantum();
    let field_profile: Vec<f64> = p.tilde.iter().map(|t| q * t).collect();
    let sigma_tilde = p.tilde.iter().sum::<f64>() / params.sites() as f64;
    Ok(ObservableSet {
        sigma: q * sigma_tilde,
        sigma_tilde,
        field_profile,
        density_profile: p.density,
        entropy_profile: entropy_profile(state, params)?,
        gaps: match spectrum {
            Some(s) if s.energies.len() >= 3 => Some(gaps(s)?),
            _ => None,
        },
    })
}
