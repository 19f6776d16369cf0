//! Block environments and the two-cell effective Hamiltonian.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use super::mps::{bond_label, pop, Block, MpsState};
use crate::hamiltonian::CellMpo;

/// Left block of cells `0..b`: its Hamiltonian per sector and the operator
/// filling the odd site of its last cell (`sp[Q]` maps sector Q to Q+1).
#[derive(Debug, Clone)]
pub(crate) struct LeftEnv {
    pub h: Vec<Option<Block>>,
    pub sp: Vec<Option<Block>>,
}

/// Right block of cells `b..L`: its Hamiltonian per sector and the operator
/// emptying the even site of its first cell (`sm[Q]` maps sector Q to Q+1).
#[derive(Debug, Clone)]
pub(crate) struct RightEnv {
    pub h: Vec<Option<Block>>,
    pub sm: Vec<Option<Block>>,
}

fn accumulate(slot: &mut Option<Block>, term: Block) {
    match slot {
        Some(s) => *s += term,
        None => *slot = Some(term),
    }
}

impl LeftEnv {
    pub fn edge(len: usize) -> Self {
        let mut h = vec![None; len];
        h[0] = Some(DMatrix::zeros(1, 1));
        Self { h, sp: vec![None; len] }
    }

    /// Environment at bond `j+1` from the one at bond `j` and the left-orthonormal cell `j`.
    pub fn extend(&self, mps: &MpsState, mpo: &CellMpo, j: usize) -> Self {
        let len = self.h.len();
        let cell = &mps.cells[j];
        let hop = mpo.bridge_coeff();
        let mut h: Vec<Option<Block>> = vec![None; len];
        let mut sp: Vec<Option<Block>> = vec![None; len];
        for q in 0..cell.len() {
            let Some(hl) = &self.h[q] else { continue };
            let loc = mpo.local_block(j, bond_label(&mps.params, j, q));
            for c in 0..4 {
                let Some(a) = &cell[q][c] else { continue };
                let qp = q + pop(c);
                let at = a.transpose();
                accumulate(&mut h[qp], &at * (hl * a));
                for (c2, row) in loc.iter().enumerate() {
                    let v = row[c];
                    if v != 0.0 {
                        if let Some(a2) = &cell[q][c2] {
                            accumulate(&mut h[qp], (a2.transpose() * a) * v);
                        }
                    }
                }
                if c & 2 != 0 && q + 1 < len {
                    if let (Some(s), Some(a2)) = (&self.sp[q], cell.get(q + 1).and_then(|x| x[c - 2].as_ref())) {
                        let term = (a2.transpose() * (s * a)) * hop;
                        accumulate(&mut h[qp], term.transpose() + term);
                    }
                }
                if c & 1 == 0 {
                    if let Some(a2) = &cell[q][c + 1] {
                        accumulate(&mut sp[qp], a2.transpose() * a);
                    }
                }
            }
        }
        Self { h, sp }
    }
}

impl RightEnv {
    pub fn edge(len: usize) -> Self {
        let mut h = vec![None; len];
        h[len - 1] = Some(DMatrix::zeros(1, 1));
        Self { h, sm: vec![None; len] }
    }

    /// Environment at bond `j` from the one at bond `j+1` and the right-orthonormal cell `j`.
    pub fn extend(&self, mps: &MpsState, mpo: &CellMpo, j: usize) -> Self {
        let len = self.h.len();
        let cell = &mps.cells[j];
        let hop = mpo.bridge_coeff();
        let mut h: Vec<Option<Block>> = vec![None; len];
        let mut sm: Vec<Option<Block>> = vec![None; len];
        for q in 0..cell.len() {
            let loc = mpo.local_block(j, bond_label(&mps.params, j, q));
            for c in 0..4 {
                let Some(b) = &cell[q][c] else { continue };
                let qr = q + pop(c);
                if let Some(hr) = &self.h[qr] {
                    accumulate(&mut h[q], b * (hr * b.transpose()));
                }
                for (c2, &v) in loc[c].iter().enumerate() {
                    if v != 0.0 {
                        if let Some(b2) = &cell[q][c2] {
                            accumulate(&mut h[q], (b * b2.transpose()) * v);
                        }
                    }
                }
                if c & 1 == 0 {
                    if let (Some(s), Some(b2)) = (&self.sm[qr], &cell[q][c + 1]) {
                        let term = (b2 * (s * b.transpose())) * hop;
                        accumulate(&mut h[q], term.transpose() + term);
                    }
                }
                if c & 2 != 0 && q + 1 < cell.len() {
                    if let Some(b2) = &cell[q + 1][c - 2] {
                        accumulate(&mut sm[q], b2 * b.transpose());
                    }
                }
            }
        }
        Self { h, sm }
    }
}

/// Overlap environment `⟨φ|ψ⟩` of a block, `[Q]: dim_φ(Q) × dim_ψ(Q)`.
pub(crate) type OverlapEnv = Vec<Option<Block>>;

/// One block `(Qa, c1, c2)` of a two-cell tensor, stored column-major.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TwoSiteBlock {
    pub qa: usize,
    pub c1: usize,
    pub c2: usize,
    pub qm: usize,
    pub qb: usize,
    pub rows: usize,
    pub cols: usize,
    pub off: usize,
}

/// Layout of the two-cell tensor over cells `j, j+1`.
#[derive(Debug, Clone)]
pub(crate) struct TwoSite {
    pub j: usize,
    pub blocks: Vec<TwoSiteBlock>,
    lookup: Vec<usize>,
    pub len: usize,
}

impl TwoSite {
    pub fn new(mps: &MpsState, j: usize) -> Self {
        let l = mps.len();
        let left = &mps.bonds[j];
        let right = &mps.bonds[j + 2];
        let mut blocks = Vec::new();
        let mut lookup = vec![usize::MAX; 16 * (l + 1)];
        let mut off = 0;
        for (qa, &da) in left.iter().enumerate() {
            if da == 0 {
                continue;
            }
            for c1 in 0..4 {
                for c2 in 0..4 {
                    let qm = qa + pop(c1);
                    let qb = qm + pop(c2);
                    if qb > l || right[qb] == 0 {
                        continue;
                    }
                    lookup[16 * qa + 4 * c1 + c2] = blocks.len();
                    blocks.push(TwoSiteBlock { qa, c1, c2, qm, qb, rows: da, cols: right[qb], off });
                    off += da * right[qb];
                }
            }
        }
        Self { j, blocks, lookup, len: off }
    }

    pub fn find(&self, qa: usize, c1: usize, c2: usize) -> Option<&TwoSiteBlock> {
        let i = *self.lookup.get(16 * qa + 4 * c1 + c2)?;
        self.blocks.get(i)
    }

    pub fn view<'a>(&self, x: &'a [f64], b: &TwoSiteBlock) -> DMatrixView<'a, f64> {
        DMatrixView::from_slice(&x[b.off..b.off + b.rows * b.cols], b.rows, b.cols)
    }

    pub fn view_mut<'a>(&self, y: &'a mut [f64], b: &TwoSiteBlock) -> DMatrixViewMut<'a, f64> {
        DMatrixViewMut::from_slice(&mut y[b.off..b.off + b.rows * b.cols], b.rows, b.cols)
    }

    /// Contracts cells `j` and `j+1` of `mps` into a flat vector.
    pub fn contract(&self, mps: &MpsState) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        for b in &self.blocks {
            if let (Some(a1), Some(a2)) = (mps.block(self.j, b.qa, b.c1), mps.block(self.j + 1, b.qm, b.c2)) {
                self.view_mut(&mut x, b).copy_from(&(a1 * a2));
            }
        }
        x
    }

    /// Same contraction for another state `φ`, projected through overlap environments.
    pub fn projection(&self, phi: &MpsState, left: &OverlapEnv, right: &OverlapEnv) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        for b in &self.blocks {
            let (Some(ol), Some(or)) = (left.get(b.qa).and_then(Option::as_ref), right.get(b.qb).and_then(Option::as_ref))
            else {
                continue;
            };
            if let (Some(a1), Some(a2)) = (phi.block(self.j, b.qa, b.c1), phi.block(self.j + 1, b.qm, b.c2)) {
                let m = ol.transpose() * (a1 * a2) * or;
                self.view_mut(&mut x, b).copy_from(&m);
            }
        }
        x
    }
}

/// Effective Hamiltonian on cells `j, j+1`.
pub(crate) struct Effective<'a> {
    pub layout: &'a TwoSite,
    pub left: &'a LeftEnv,
    pub right: &'a RightEnv,
    pub h1: Vec<[[f64; 4]; 4]>,
    pub h2: Vec<[[f64; 4]; 4]>,
    pub hop: f64,
}

impl<'a> Effective<'a> {
    pub fn new(mps: &MpsState, mpo: &CellMpo, layout: &'a TwoSite, left: &'a LeftEnv, right: &'a RightEnv) -> Self {
        let j = layout.j;
        let n = mps.len() + 1;
        let h1 = (0..n).map(|q| mpo.local_block(j, bond_label(&mps.params, j, q))).collect();
        let h2 = (0..n).map(|q| mpo.local_block(j + 1, bond_label(&mps.params, j + 1, q))).collect();
        Self { layout, left, right, h1, h2, hop: mpo.bridge_coeff() }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let lay = self.layout;
        for b in &lay.blocks {
            let xb = lay.view(x, b);
            {
                let mut yb = lay.view_mut(y, b);
                if let Some(hl) = &self.left.h[b.qa] {
                    yb.gemm(1.0, hl, &xb, 1.0);
                }
                if let Some(hr) = &self.right.h[b.qb] {
                    yb.gemm(1.0, &xb, hr, 1.0);
                }
            }
            for c in 0..4 {
                let v = self.h1[b.qa][c][b.c1];
                if v != 0.0 {
                    if let Some(t) = lay.find(b.qa, c, b.c2) {
                        slice_axpy(v, &x[b.off..b.off + b.rows * b.cols], &mut y[t.off..t.off + t.rows * t.cols]);
                    }
                }
                let v = self.h2[b.qm][c][b.c2];
                if v != 0.0 {
                    if let Some(t) = lay.find(b.qa, b.c1, c) {
                        slice_axpy(v, &x[b.off..b.off + b.rows * b.cols], &mut y[t.off..t.off + t.rows * t.cols]);
                    }
                }
            }
            if self.hop == 0.0 {
                continue;
            }
            // Between the two cells: odd site of j filled, even site of j+1 emptied, and back.
            if b.c1 & 1 == 0 && b.c2 & 2 != 0 {
                if let Some(t) = lay.find(b.qa, b.c1 + 1, b.c2 - 2) {
                    slice_axpy(self.hop, &x[b.off..b.off + b.rows * b.cols], &mut y[t.off..t.off + t.rows * t.cols]);
                }
            }
            if b.c1 & 1 != 0 && b.c2 & 2 == 0 {
                if let Some(t) = lay.find(b.qa, b.c1 - 1, b.c2 + 2) {
                    slice_axpy(self.hop, &x[b.off..b.off + b.rows * b.cols], &mut y[t.off..t.off + t.rows * t.cols]);
                }
            }
            // Across the left bond: particle leaves the even site of cell j into the block.
            if b.c1 & 2 != 0 {
                if let (Some(s), Some(t)) = (&self.left.sp[b.qa], lay.find(b.qa + 1, b.c1 - 2, b.c2)) {
                    lay.view_mut(y, t).gemm(self.hop, s, &xb, 1.0);
                }
            } else if b.qa > 0 {
                if let (Some(s), Some(t)) = (&self.left.sp[b.qa - 1], lay.find(b.qa - 1, b.c1 + 2, b.c2)) {
                    lay.view_mut(y, t).gemm_tr(self.hop, s, &xb, 1.0);
                }
            }
            // Across the right bond: particle enters the odd site of cell j+1 from the block.
            if b.c2 & 1 == 0 {
                if let (Some(s), Some(t)) = (&self.right.sm[b.qb], lay.find(b.qa, b.c1, b.c2 + 1)) {
                    lay.view_mut(y, t).gemm(self.hop, &xb, &s.transpose(), 1.0);
                }
            } else if b.qb > 0 {
                if let (Some(s), Some(t)) = (&self.right.sm[b.qb - 1], lay.find(b.qa, b.c1, b.c2 - 1)) {
                    lay.view_mut(y, t).gemm(self.hop, &xb, s, 1.0);
                }
            }
        }
    }
}

fn slice_axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `⟨φ|ψ⟩` environment at bond `j+1` from bond `j`.
pub(crate) fn overlap_left(env: &OverlapEnv, phi: &MpsState, psi: &MpsState, j: usize) -> OverlapEnv {
    super::mps::transfer_left(env, &phi.cells[j], &psi.cells[j], env.len())
}

/// `⟨φ|ψ⟩` environment at bond `j` from bond `j+1`.
pub(crate) fn overlap_right(env: &OverlapEnv, phi: &MpsState, psi: &MpsState, j: usize) -> OverlapEnv {
    super::mps::transfer_right(env, &phi.cells[j], &psi.cells[j])
}
