//! Lowest eigenpairs of a real symmetric operator.
//!
//! Block Lanczos with full (twice-iterated Gram–Schmidt) reorthogonalization
//! and thick restarts: the basis grows by one matrix–vector product per step,
//! each new direction being `H v_{j−b}` for block size `b`; at the basis cap a
//! Rayleigh–Ritz step keeps the lowest Ritz vectors and reseeds the block
//! with their residuals. Vectors passed as `deflate` are projected out of
//! every direction, which restricts the solve to their orthogonal complement.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hamiltonian::SparseOperator;
use crate::{Error, Result};

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Closure-backed operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovOptions {
    /// Residual target `‖Hx − θx‖ ≤ tol·max(1, |θ|)`.
    pub tol: f64,
    /// Basis size at which a restart happens.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Block size; raised to the number of wanted pairs.
    pub block: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_basis: 40, max_restarts: 400, block: 1, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of classical Gram–Schmidt against `basis`; returns the norm left.
pub fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
    norm(w)
}

/// Eigenvalues in ascending order and the matching eigenvectors as columns,
/// by cyclic Jacobi rotations.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| a[(p, q)].powi(2)).sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Orthonormal copy of `vectors`, dropping numerically dependent ones.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let before = norm(v);
        let mut w = v.clone();
        let after = orthogonalize(&mut w, &out);
        if before > 0.0 && after > 1e-10 * before {
            w.iter_mut().for_each(|x| *x /= after);
            out.push(w);
        }
    }
    out
}

struct Subspace<'a, O: ?Sized> {
    op: &'a O,
    deflate: &'a [Vec<f64>],
    v: Vec<Vec<f64>>,
    hv: Vec<Vec<f64>>,
    matvecs: usize,
}

impl<O: LinearOperator + ?Sized> Subspace<'_, O> {
    /// Orthogonalizes `w` and appends it; false if nothing independent is left.
    fn push(&mut self, mut w: Vec<f64>) -> bool {
        let before = norm(&w);
        if before == 0.0 {
            return false;
        }
        let mut after = before;
        for _ in 0..2 {
            orthogonalize(&mut w, self.deflate);
            after = orthogonalize(&mut w, &self.v);
        }
        if after <= 1e-10 * before || after < 1e-300 {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= after);
        let mut hw = vec![0.0; w.len()];
        self.op.apply(&w, &mut hw);
        self.matvecs += 1;
        self.v.push(w);
        self.hv.push(hw);
        true
    }

    fn push_random(&mut self, rng: &mut ChaCha8Rng) -> bool {
        for _ in 0..8 {
            let w: Vec<f64> = (0..self.op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if self.push(w) {
                return true;
            }
        }
        false
    }
}

/// The `k` lowest eigenpairs of `op` in the complement of `deflate`.
pub fn lowest<O: LinearOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &KrylovOptions,
    start: &[Vec<f64>],
    deflate: &[Vec<f64>],
) -> Result<Eigenpairs> {
    let dim = op.dim();
    let deflate = orthonormalize(deflate);
    let avail = dim.saturating_sub(deflate.len());
    if k == 0 || k > avail {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs from a space of dimension {avail}"
        )));
    }
    let block = opts.block.max(k).min(avail);
    let keep = (k + block).min(avail);
    let max_basis = opts.max_basis.max(keep + 2 * block + 4).min(avail);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sp = Subspace { op, deflate: &deflate, v: Vec::new(), hv: Vec::new(), matvecs: 0 };

    for s in start {
        if sp.v.len() < block {
            sp.push(s.clone());
        }
    }
    while sp.v.len() < block {
        if !sp.push_random(&mut rng) {
            break;
        }
    }
    let mut block_start = 0;
    let mut b = sp.v.len();

    let mut restarts = 0;
    loop {
        while sp.v.len() < max_basis {
            let j = sp.v.len();
            let src = if j >= block_start + b { j - b } else { block_start };
            let cand = sp.hv[src].clone();
            if !sp.push(cand) && !sp.push_random(&mut rng) {
                break;
            }
        }

        let m = sp.v.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let x = 0.5 * (dot(&sp.v[i], &sp.hv[j]) + dot(&sp.v[j], &sp.hv[i]));
                t[(i, j)] = x;
                t[(j, i)] = x;
            }
        }
        let (evals, evecs) = symmetric_eigen(&t);

        let nkeep = keep.min(m);
        let mut xs = Vec::with_capacity(nkeep);
        let mut hxs = Vec::with_capacity(nkeep);
        let mut thetas = Vec::with_capacity(nkeep);
        let mut res = Vec::with_capacity(nkeep);
        for col in 0..nkeep {
            let y = evecs.column(col);
            let mut x = vec![0.0; dim];
            let mut hx = vec![0.0; dim];
            for (i, &c) in y.iter().enumerate() {
                axpy(c, &sp.v[i], &mut x);
                axpy(c, &sp.hv[i], &mut hx);
            }
            let theta = evals[col];
            let r: Vec<f64> = hx.iter().zip(&x).map(|(h, xv)| h - theta * xv).collect();
            res.push(r);
            xs.push(x);
            hxs.push(hx);
            thetas.push(theta);
        }
        let rnorms: Vec<f64> = res.iter().map(|r| norm(r)).collect();
        let converged = m == avail
            || (0..k).all(|i| rnorms[i] <= opts.tol * thetas[i].abs().max(1.0));
        if converged || restarts >= opts.max_restarts {
            return Ok(Eigenpairs {
                values: thetas[..k].to_vec(),
                vectors: xs.into_iter().take(k).collect(),
                residuals: rnorms[..k].to_vec(),
                matvecs: sp.matvecs,
                restarts,
                converged,
            });
        }

        restarts += 1;
        sp.v = xs;
        sp.hv = hxs;
        block_start = sp.v.len();
        for (i, r) in res.into_iter().enumerate().take(block) {
            if rnorms[i] > opts.tol * thetas[i].abs().max(1.0) * 1e-3 {
                sp.push(r);
            }
        }
        if sp.v.len() == block_start && !sp.push_random(&mut rng) {
            // The kept vectors span an invariant subspace of the complement.
            continue;
        }
        b = sp.v.len() - block_start;
    }
}
