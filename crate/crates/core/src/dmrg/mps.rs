//! Block-sparse matrix-product states over pair cells.
//!
//! Bond `b` sits to the left of cell `b` (bond 0 is the left edge, bond L the
//! right edge). Its sectors are labelled by the particle number `Q` to the
//! left of the cut; the link label across the bond is then
//! `k = k0 + Q − b (mod n)`, so the ℤₙ grading is carried by `Q`. A cell
//! tensor has one block per (left sector, occupation code), mapping
//! `Q → Q + popcount(code)`.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::basis::{GaugeBasis, GaugeState};
use crate::hamiltonian::ModelParams;
use crate::{Error, Result};

pub type Block = DMatrix<f64>;

/// Particles in an occupation code `2·even + odd`.
#[inline]
pub fn pop(code: usize) -> usize {
    (code >> 1) + (code & 1)
}

/// Per-sweep record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepHistory {
    pub energies: Vec<f64>,
    /// Largest discarded weight of each sweep.
    pub truncation: Vec<f64>,
    /// Bond-dimension cap used in each sweep.
    pub chi: Vec<usize>,
    /// Discarded weight per bond in the last sweep.
    pub bond_truncation: Vec<f64>,
}

/// Cell tensors plus bond sector dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    pub(crate) params: ModelParams,
    /// `bonds[b][Q]`: dimension of sector Q at bond b (0 = absent).
    pub(crate) bonds: Vec<Vec<usize>>,
    /// `cells[j][Q][code]`.
    pub(crate) cells: Vec<Vec<[Option<Block>; 4]>>,
    /// Orthogonality centre (cells left of it are left-orthonormal, right of it right-orthonormal).
    pub(crate) center: usize,
    pub history: SweepHistory,
}

/// Quantities read off one cell during a left-to-right canonical scan.
#[derive(Debug, Clone, Default)]
pub struct CellScan {
    /// Probability of each (left sector, occupation code).
    pub weights: Vec<(usize, usize, f64)>,
    /// Schmidt values of the cut between the even and the odd site.
    pub inner_schmidt: Vec<f64>,
    /// Schmidt values of the bond to the right of the cell, per sector.
    pub right_schmidt: Vec<(usize, Vec<f64>)>,
}

impl MpsState {
    /// Product state with one occupation code per cell.
    pub fn product(params: &ModelParams, codes: &[usize]) -> Result<Self> {
        let l = params.pairs();
        if codes.len() != l || codes.iter().any(|&c| c > 3) {
            return Err(Error::InvalidArgument("one occupation code in 0..4 per cell required".into()));
        }
        let total: usize = codes.iter().map(|&c| pop(c)).sum();
        if total != l {
            return Err(Error::InvalidArgument(format!("product state has {total} particles, sector needs {l}")));
        }
        let mut bonds = vec![vec![0; l + 1]; l + 1];
        let mut cells = Vec::with_capacity(l);
        let mut q = 0;
        bonds[0][0] = 1;
        for &c in codes {
            let mut cell: Vec<[Option<Block>; 4]> = vec![Default::default(); l + 1];
            cell[q][c] = Some(DMatrix::from_element(1, 1, 1.0));
            cells.push(cell);
            q += pop(c);
            bonds[cells.len()][q] = 1;
        }
        Ok(Self { params: *params, bonds, cells, center: 0, history: SweepHistory::default() })
    }

    /// Every even site filled.
    pub fn meson(params: &ModelParams) -> Result<Self> {
        Self::product(params, &vec![2; params.pairs()])
    }

    /// Every odd site filled.
    pub fn dirac_sea(params: &ModelParams) -> Result<Self> {
        Self::product(params, &vec![1; params.pairs()])
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// Sector dimensions at bond `b`, indexed by Q.
    pub fn bond_dims(&self, b: usize) -> &[usize] {
        &self.bonds[b]
    }

    /// Total dimension of bond `b`.
    pub fn bond_dim(&self, b: usize) -> usize {
        self.bonds[b].iter().sum()
    }

    pub fn max_bond_dim(&self) -> usize {
        (0..=self.len()).map(|b| self.bond_dim(b)).max().unwrap_or(0)
    }

    /// Link label across bond `b` in sector `q`.
    #[inline]
    pub fn bond_label(&self, b: usize, q: usize) -> usize {
        bond_label(&self.params, b, q)
    }

    pub fn block(&self, j: usize, q: usize, code: usize) -> Option<&Block> {
        self.cells[j].get(q).and_then(|c| c[code].as_ref())
    }

    /// Checks block shapes against bond dimensions and the sector rule.
    pub fn validate(&self) -> Result<()> {
        let l = self.len();
        if self.bonds.len() != l + 1 || self.bonds[0][0] != 1 || self.bonds[l][l] != 1 {
            return Err(Error::Mismatch("edge bonds must be one-dimensional in sectors 0 and L".into()));
        }
        for (j, cell) in self.cells.iter().enumerate() {
            for (q, codes) in cell.iter().enumerate() {
                for (c, blk) in codes.iter().enumerate() {
                    if let Some(b) = blk {
                        let qr = q + pop(c);
                        let ok = qr <= l && b.nrows() == self.bonds[j][q] && b.ncols() == self.bonds[j + 1][qr];
                        if !ok || b.nrows() == 0 {
                            return Err(Error::Mismatch(format!("cell {j} block (Q={q}, code={c}) has a bad shape")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// ⟨self|other⟩ for states of the same chain.
    pub fn overlap(&self, other: &MpsState) -> f64 {
        let mut env = identity_env(1, &[1], &[1]);
        for j in 0..self.len() {
            env = transfer_left(&env, &self.cells[j], &other.cells[j], self.bonds[j + 1].len());
        }
        env[self.len()].as_ref().map_or(0.0, |m| m[(0, 0)])
    }

    pub fn norm(&self) -> f64 {
        self.overlap(self).sqrt()
    }

    /// Amplitude of one chain basis state (zero unless its boundary label is the state's).
    pub fn amplitude(&self, s: &GaugeState) -> f64 {
        if s.k0() != self.params.k0 {
            return 0.0;
        }
        let mut q = 0;
        let mut row = DMatrix::from_element(1, 1, 1.0);
        for j in 0..self.len() {
            let code = 2 * s.occupied(2 * j) as usize + s.occupied(2 * j + 1) as usize;
            match self.block(j, q, code) {
                Some(b) => row = row * b,
                None => return 0.0,
            }
            q += pop(code);
        }
        if row.len() == 1 {
            row[(0, 0)]
        } else {
            0.0
        }
    }

    /// Amplitudes over `basis`, in basis order.
    pub fn to_vector(&self, basis: &GaugeBasis) -> Vec<f64> {
        basis.states().iter().map(|s| self.amplitude(s)).collect()
    }

    /// Brings every cell except the first into right-orthonormal form.
    pub fn right_canonicalize(&mut self) {
        for j in (1..self.len()).rev() {
            self.shift_left(j);
        }
        self.center = 0;
    }

    /// Makes cell `j` right-orthonormal and pushes the remainder into cell `j−1`.
    fn shift_left(&mut self, j: usize) {
        let lq = self.bonds[j].len();
        let dims_right = self.bonds[j + 1].clone();
        for q in 0..lq {
            let d = self.bonds[j][q];
            if d == 0 {
                continue;
            }
            let codes: Vec<usize> = (0..4).filter(|&c| self.cells[j][q][c].is_some()).collect();
            let width: usize = codes.iter().map(|&c| dims_right[q + pop(c)]).sum();
            let mut m = DMatrix::zeros(d, width);
            let mut off = 0;
            for &c in &codes {
                let b = self.cells[j][q][c].as_ref().expect("present");
                m.view_mut((0, off), (d, b.ncols())).copy_from(b);
                off += b.ncols();
            }
            let svd = SVD::new(m, true, true);
            let smax = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > 1e-14 * smax.max(1e-300))
                .collect();
            let u = svd.u.expect("u");
            let vt = svd.v_t.expect("v_t");
            let k = keep.len();
            let us = DMatrix::from_fn(d, k, |r, c| u[(r, keep[c])] * svd.singular_values[keep[c]]);
            let vt = DMatrix::from_fn(k, width, |r, c| vt[(keep[r], c)]);
            let mut off = 0;
            for &c in &codes {
                let cols = dims_right[q + pop(c)];
                self.cells[j][q][c] = if k > 0 { Some(vt.columns(off, cols).into_owned()) } else { None };
                off += cols;
            }
            self.bonds[j][q] = k;
            for ql in 0..self.cells[j - 1].len() {
                for c in 0..4 {
                    if ql + pop(c) == q {
                        if let Some(b) = self.cells[j - 1][ql][c].take() {
                            if k > 0 {
                                self.cells[j - 1][ql][c] = Some(b * &us);
                            }
                        }
                    }
                }
            }
        }
        self.center = j - 1;
    }

    /// Left-to-right scan of a right-canonical copy, reading off cell
    /// weights and Schmidt spectra at every cut.
    pub fn scan(&self) -> Vec<CellScan> {
        let mut psi = self.clone();
        psi.right_canonicalize();
        let norm2 = psi.overlap(&psi);
        let l = psi.len();
        let mut out = Vec::with_capacity(l);
        for j in 0..l {
            let mut cs = CellScan::default();
            let cell = &psi.cells[j];
            for (q, codes) in cell.iter().enumerate() {
                for (c, b) in codes.iter().enumerate() {
                    if let Some(b) = b {
                        cs.weights.push((q, c, b.norm_squared() / norm2));
                    }
                }
            }
            // Inner cut: rows (Q, even, α), columns (odd, β), grouped by Q + even.
            for qm in 0..=l {
                let mut rows: Vec<(usize, usize)> = Vec::new();
                for e in 0..2 {
                    if qm >= e && qm - e < psi.bonds[j].len() && psi.bonds[j][qm - e] > 0 {
                        rows.push((qm - e, e));
                    }
                }
                let mut cols: Vec<usize> = Vec::new();
                for o in 0..2 {
                    if qm + o <= l && psi.bonds[j + 1][qm + o] > 0 {
                        cols.push(o);
                    }
                }
                if rows.is_empty() || cols.is_empty() {
                    continue;
                }
                let nr: usize = rows.iter().map(|&(q, _)| psi.bonds[j][q]).sum();
                let nc: usize = cols.iter().map(|&o| psi.bonds[j + 1][qm + o]).sum();
                let mut m = DMatrix::zeros(nr, nc);
                let mut any = false;
                let mut ro = 0;
                for &(q, e) in &rows {
                    let dr = psi.bonds[j][q];
                    let mut co = 0;
                    for &o in &cols {
                        let dc = psi.bonds[j + 1][qm + o];
                        if let Some(b) = &cell[q][2 * e + o] {
                            m.view_mut((ro, co), (dr, dc)).copy_from(b);
                            any = true;
                        }
                        co += dc;
                    }
                    ro += dr;
                }
                if any {
                    let s = SVD::new(m, false, false).singular_values;
                    cs.inner_schmidt.extend(s.iter().map(|x| x / norm2.sqrt()));
                }
            }
            if j + 1 < l {
                cs.right_schmidt = psi.shift_right(j, norm2.sqrt());
            } else {
                cs.right_schmidt = vec![(l, vec![1.0])];
            }
            out.push(cs);
        }
        out
    }

    /// Makes cell `j` left-orthonormal, pushes the remainder into cell `j+1`
    /// and returns the Schmidt values (divided by `scale`) of bond `j+1`.
    fn shift_right(&mut self, j: usize, scale: f64) -> Vec<(usize, Vec<f64>)> {
        let mut spectra = Vec::new();
        let nq = self.bonds[j + 1].len();
        for qr in 0..nq {
            let d = self.bonds[j + 1][qr];
            if d == 0 {
                continue;
            }
            let parts: Vec<(usize, usize)> = (0..4)
                .filter(|&c| qr >= pop(c) && qr - pop(c) < self.bonds[j].len())
                .map(|c| (qr - pop(c), c))
                .filter(|&(q, c)| self.cells[j][q][c].is_some())
                .collect();
            let height: usize = parts.iter().map(|&(q, _)| self.bonds[j][q]).sum();
            let mut m = DMatrix::zeros(height, d);
            let mut off = 0;
            for &(q, c) in &parts {
                let b = self.cells[j][q][c].as_ref().expect("present");
                m.view_mut((off, 0), (b.nrows(), d)).copy_from(b);
                off += b.nrows();
            }
            let svd = SVD::new(m, true, true);
            let smax = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > 1e-14 * smax.max(1e-300))
                .collect();
            let u = svd.u.expect("u");
            let vt = svd.v_t.expect("v_t");
            let k = keep.len();
            spectra.push((qr, keep.iter().map(|&i| svd.singular_values[i] / scale).collect()));
            let u = DMatrix::from_fn(height, k, |r, c| u[(r, keep[c])]);
            let svt = DMatrix::from_fn(k, d, |r, c| vt[(keep[r], c)] * svd.singular_values[keep[r]]);
            let mut off = 0;
            for &(q, c) in &parts {
                let rows = self.bonds[j][q];
                self.cells[j][q][c] = if k > 0 { Some(u.rows(off, rows).into_owned()) } else { None };
                off += rows;
            }
            self.bonds[j + 1][qr] = k;
            for c in 0..4 {
                if let Some(b) = self.cells[j + 1][qr][c].take() {
                    if k > 0 {
                        self.cells[j + 1][qr][c] = Some(&svt * b);
                    }
                }
            }
        }
        self.center = j + 1;
        spectra
    }
}

#[inline]
pub fn bond_label(params: &ModelParams, b: usize, q: usize) -> usize {
    (params.k0 as i64 + q as i64 - b as i64).rem_euclid(params.n as i64) as usize
}

/// Environment with identity blocks, used at the left edge.
pub(crate) fn identity_env(len: usize, bra: &[usize], ket: &[usize]) -> Vec<Option<Block>> {
    (0..len)
        .map(|q| {
            let (a, b) = (bra.get(q).copied().unwrap_or(0), ket.get(q).copied().unwrap_or(0));
            (a > 0 && b > 0).then(|| DMatrix::identity(a, b))
        })
        .collect()
}

/// `E'[Q'] = Σ bra(Q,c)ᵀ E[Q] ket(Q,c)` over Q + pop(c) = Q'.
pub(crate) fn transfer_left(
    env: &[Option<Block>],
    bra: &[[Option<Block>; 4]],
    ket: &[[Option<Block>; 4]],
    out_len: usize,
) -> Vec<Option<Block>> {
    let mut out: Vec<Option<Block>> = vec![None; out_len];
    for (q, e) in env.iter().enumerate() {
        let Some(e) = e else { continue };
        for c in 0..4 {
            let (Some(a), Some(b)) = (bra.get(q).and_then(|x| x[c].as_ref()), ket.get(q).and_then(|x| x[c].as_ref()))
            else {
                continue;
            };
            let term = a.transpose() * (e * b);
            let slot = &mut out[q + pop(c)];
            match slot {
                Some(s) => *s += term,
                None => *slot = Some(term),
            }
        }
    }
    out
}

/// `E[Q] = Σ bra(Q,c) E'[Q+pop c] ket(Q,c)ᵀ`.
pub(crate) fn transfer_right(
    env: &[Option<Block>],
    bra: &[[Option<Block>; 4]],
    ket: &[[Option<Block>; 4]],
) -> Vec<Option<Block>> {
    let mut out: Vec<Option<Block>> = vec![None; bra.len()];
    for (q, slot) in out.iter_mut().enumerate() {
        for c in 0..4 {
            let Some(e) = env.get(q + pop(c)).and_then(Option::as_ref) else { continue };
            let (Some(a), Some(b)) = (bra[q][c].as_ref(), ket.get(q).and_then(|x| x[c].as_ref())) else {
                continue;
            };
            let term = a * (e * b.transpose());
            match slot {
                Some(s) => *s += term,
                None => *slot = Some(term),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use approx::assert_abs_diff_eq;

    fn params(pairs: usize) -> ModelParams {
        ModelParams::new(3, 1.0, 0.0, 0.0, pairs).unwrap()
    }

    #[test]
    fn product_states_are_normalized_basis_vectors() {
        let p = params(3);
        let sea = MpsState::dirac_sea(&p).unwrap();
        sea.validate().unwrap();
        assert_abs_diff_eq!(sea.norm(), 1.0, epsilon = 1e-15);
        let basis = build_basis(p.geometry, 3, p.k0, true).unwrap();
        let v = sea.to_vector(&basis);
        let i = basis.index_of(&GaugeState::dirac_sea(p.geometry, p.k0)).unwrap();
        assert_eq!(v[i], 1.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
        let meson = MpsState::meson(&p).unwrap();
        assert_eq!(sea.overlap(&meson), 0.0);
    }

    #[test]
    fn bond_labels_follow_gauss_law() {
        let p = params(4);
        let meson = MpsState::meson(&p).unwrap();
        // Meson: every cell has one particle, labels at bonds stay at k0.
        for b in 0..=4 {
            let q = meson.bond_dims(b).iter().position(|&d| d > 0).unwrap();
            assert_eq!(meson.bond_label(b, q), p.k0);
        }
    }

    #[test]
    fn rejects_wrong_filling() {
        assert!(MpsState::product(&params(2), &[3, 3]).is_err());
        assert!(MpsState::product(&params(2), &[1]).is_err());
    }

    #[test]
    fn scan_of_product_has_zero_entanglement() {
        let scan = MpsState::meson(&params(3)).unwrap().scan();
        for cs in &scan {
            assert_eq!(cs.inner_schmidt.len(), 1);
            assert_abs_diff_eq!(cs.inner_schmidt[0], 1.0, epsilon = 1e-14);
            let w: f64 = cs.weights.iter().map(|x| x.2).sum();
            assert_abs_diff_eq!(w, 1.0, epsilon = 1e-14);
        }
    }
}
