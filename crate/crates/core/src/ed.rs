//! Exact diagonalization of the sector Hamiltonian.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, GaugeBasis};
use crate::hamiltonian::{build_sparse, ModelParams, SparseOperator};
use crate::krylov::{self, KrylovOptions, LinearOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
    Dmrg,
}

/// Lowest levels with convergence metadata, shared by both engines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub energies: Vec<f64>,
    /// Amplitudes in basis order (exact diagonalization only).
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Matrix–vector products, or sweeps for DMRG.
    pub iterations: usize,
    /// `degenerate[i]`: ε_{i+1} − ε_i below the degeneracy tolerance.
    pub degenerate: Vec<bool>,
    pub method: Method,
    pub converged: bool,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn mark_degeneracies(&mut self, tol: f64) {
        self.degenerate = self.energies.windows(2).map(|w| w[1] - w[0] < tol).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdOptions {
    pub tol: f64,
    pub degeneracy_tol: f64,
    pub seed: u64,
    /// Dimensions up to this size are diagonalized densely.
    pub dense_threshold: usize,
    pub max_basis: usize,
    pub max_restarts: usize,
}

impl Default for EdOptions {
    fn default() -> Self {
        Self { tol: 1e-10, degeneracy_tol: 1e-8, seed: 0x5eed, dense_threshold: 1024, max_basis: 40, max_restarts: 400 }
    }
}

/// The `k` lowest eigenpairs of `h`.
pub fn lowest_eigenpairs(h: &SparseOperator, k: usize, opts: &EdOptions) -> Result<SpectrumResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("requested {k} levels from dimension {dim}")));
    }
    let mut out = if dim <= opts.dense_threshold {
        let eig = SymmetricEigen::new(h.to_dense());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut energies = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let e = eig.eigenvalues[c];
            residuals.push(residual(h, &v, e));
            energies.push(e);
            vectors.push(v);
        }
        let worst = residuals.iter().zip(&energies).any(|(r, e)| *r > opts.tol * e.abs().max(1.0));
        if worst {
            // Dense eigenvectors are occasionally loose; polish them as Krylov starts.
            let kopts = KrylovOptions { tol: opts.tol, max_basis: opts.max_basis, max_restarts: opts.max_restarts, block: k, seed: opts.seed };
            let r = krylov::lowest(h, k, &kopts, &vectors, &[])?;
            if r.converged {
                energies = r.values;
                vectors = r.vectors;
                residuals = r.residuals;
            }
        }
        SpectrumResult {
            energies,
            vectors,
            residuals,
            iterations: 0,
            degenerate: Vec::new(),
            method: Method::Dense,
            converged: true,
        }
    } else {
        let kopts = KrylovOptions {
            tol: opts.tol,
            max_basis: opts.max_basis,
            max_restarts: opts.max_restarts,
            block: k,
            seed: opts.seed,
        };
        let r = krylov::lowest(h, k, &kopts, &[], &[])?;
        if !r.converged {
            return Err(Error::NotConverged { iterations: r.matvecs, residuals: r.residuals });
        }
        SpectrumResult {
            energies: r.values,
            vectors: r.vectors,
            residuals: r.residuals,
            iterations: r.matvecs,
            degenerate: Vec::new(),
            method: Method::Lanczos,
            converged: true,
        }
    };
    out.mark_degeneracies(opts.degeneracy_tol);
    Ok(out)
}

/// ‖Hv − εv‖.
pub fn residual<O: LinearOperator + ?Sized>(h: &O, v: &[f64], e: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.apply(v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

/// Basis of the half-filled sector of `params`, its Hamiltonian, and the `k` lowest levels.
pub fn solve(params: &ModelParams, k: usize, opts: &EdOptions) -> Result<(GaugeBasis, SpectrumResult)> {
    let basis = build_basis(params.geometry, params.n, params.k0, true)?;
    let h = build_sparse(params, &basis)?;
    let spec = lowest_eigenpairs(&h, k.min(basis.len()), opts)?;
    Ok((basis, spec))
}
