//! The lattice Hamiltonian in the rescaled units of the bracket
//!
//! ```text
//! H = −(t·n/2π) Σ_x (ψ†_x U_{x,x+1} ψ_{x+1} + h.c.)
//!     + (m·n/2π) Σ_x (−1)^x ψ†_x ψ_x + Σ_links Ẽ²_{x,x+1}
//! ```
//!
//! with g²a² = g²a/2 = 1. Physical energies carry an extra overall factor
//! g_n²/2 which changes neither eigenvectors nor critical masses.
//!
//! Two representations are built: a sparse matrix over the chain basis (the
//! exact-diagonalization path) and a chain of 4n×4n operators over pair
//! cells (the DMRG path). With sites ordered 0..N−1 the Jordan–Wigner string
//! of a nearest-neighbour hop is empty, so every hopping element is exactly
//! −t·n/2π and the matrices are real.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::LinkAlgebra;
use crate::basis::{chain_cells, pair_cell_basis, CellState, ChainGeometry, GaugeBasis, GaugeState, PairCellBasis};
use crate::{Error, Result};

/// How the boundary label `k0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "label")]
pub enum SectorPolicy {
    /// Ẽ(k0) = φ for odd n, φ − 1/2 for even n.
    #[default]
    Neutral,
    /// Try every boundary label and keep the lowest ground energy.
    Lowest,
    /// Explicit label.
    Label(usize),
}

/// One Hamiltonian instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub t: f64,
    pub m: f64,
    pub phi: f64,
    pub geometry: ChainGeometry,
    pub k0: usize,
}

impl ModelParams {
    /// Parameters in the neutral boundary sector.
    pub fn new(n: usize, t: f64, m: f64, phi: f64, pairs: usize) -> Result<Self> {
        let alg = LinkAlgebra::new(n, phi)?;
        let p = Self { n, t, m, phi, geometry: ChainGeometry::new(pairs)?, k0: alg.neutral_label() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sector(mut self, k0: usize) -> Result<Self> {
        self.k0 = k0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mass(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_pairs(mut self, pairs: usize) -> Result<Self> {
        self.geometry = ChainGeometry::new(pairs)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        LinkAlgebra::new(self.n, self.phi)?;
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("hopping t = {} must be finite and ≥ 0", self.t)));
        }
        if !self.m.is_finite() {
            return Err(Error::InvalidArgument("mass must be finite".into()));
        }
        if self.k0 >= self.n {
            return Err(Error::InvalidArgument(format!("boundary label k0 = {} out of range 0..{}", self.k0, self.n)));
        }
        Ok(())
    }

    pub fn algebra(&self) -> LinkAlgebra {
        LinkAlgebra::new(self.n, self.phi).expect("validated parameters")
    }

    pub fn pairs(&self) -> usize {
        self.geometry.pairs()
    }

    pub fn sites(&self) -> usize {
        self.geometry.sites()
    }

    /// t·n/(2π).
    pub fn hop_coeff(&self) -> f64 {
        self.t * self.n as f64 / (2.0 * PI)
    }

    /// m·n/(2π).
    pub fn mass_coeff(&self) -> f64 {
        self.m * self.n as f64 / (2.0 * PI)
    }

    /// Weight of Ẽ² per link.
    pub const ELECTRIC_COEFF: f64 = 1.0;

    /// Candidate boundary labels for the given policy.
    pub fn sector_candidates(&self, policy: SectorPolicy) -> Vec<usize> {
        let alg = self.algebra();
        match policy {
            SectorPolicy::Neutral => vec![alg.neutral_label()],
            SectorPolicy::Label(k) => vec![k],
            SectorPolicy::Lowest => (0..self.n).collect(),
        }
    }

    pub fn electric_energy(&self, s: &GaugeState) -> f64 {
        let alg = self.algebra();
        s.links(self.sites(), self.n).iter().map(|&k| alg.tilde(k).powi(2)).sum::<f64>() * Self::ELECTRIC_COEFF
    }

    pub fn mass_energy(&self, s: &GaugeState) -> f64 {
        let stag: i64 = (0..self.sites())
            .filter(|&x| s.occupied(x))
            .map(|x| if x % 2 == 0 { 1 } else { -1 })
            .sum();
        self.mass_coeff() * stag as f64
    }

    pub fn diagonal(&self, s: &GaugeState) -> f64 {
        self.mass_energy(s) + self.electric_energy(s)
    }
}

/// Real symmetric operator in compressed-row form (both triangles stored).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = H x`, parallel over rows.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        });
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Largest |H_ij − H_ji|.
    pub fn asymmetry(&self) -> f64 {
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Coordinate dump, one `row col value` line per stored entry.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Sparse Hamiltonian over `basis`. Hops that leave the basis are rejected.
pub fn build_sparse(params: &ModelParams, basis: &GaugeBasis) -> Result<SparseOperator> {
    params.validate()?;
    if basis.n() != params.n || basis.geometry() != params.geometry {
        return Err(Error::Mismatch(format!(
            "basis (n = {}, L = {}) does not match parameters (n = {}, L = {})",
            basis.n(),
            basis.geometry().pairs(),
            params.n,
            params.pairs()
        )));
    }
    let sites = params.sites();
    let hop = -params.hop_coeff();
    let rows: Result<Vec<Vec<(u32, f64)>>> = basis
        .states()
        .par_iter()
        .map(|s| {
            let mut row = Vec::with_capacity(sites);
            row.push((basis.index_of(s).expect("own state") as u32, params.diagonal(s)));
            if hop != 0.0 {
                for x in 0..sites - 1 {
                    if s.occupied(x) != s.occupied(x + 1) {
                        let t = GaugeState::new(s.occupation() ^ (0b11 << x), s.k0());
                        let j = basis
                            .index_of(&t)
                            .ok_or_else(|| Error::Mismatch(format!("basis is not closed under hopping at link {x}")))?;
                        row.push((j as u32, hop));
                    }
                }
            }
            Ok(row)
        })
        .collect();
    Ok(SparseOperator::from_rows(rows?))
}

/// Local operators over the 4n-state pair cell.
///
/// `H = Σ_j h_j − (t·n/2π) Σ_j (A_j B_{j+1} + A_jᵀ B_{j+1}ᵀ)` where `A` fills
/// the odd site of a cell and `B` empties the even site of the next cell while
/// raising its entering label; the shared label therefore stays matched.
#[derive(Debug, Clone)]
pub struct CellMpo {
    params: ModelParams,
    cells: PairCellBasis,
    bulk: DMatrix<f64>,
    last: DMatrix<f64>,
    raise_odd: DMatrix<f64>,
    lower_even: DMatrix<f64>,
}

pub fn build_mpo(params: &ModelParams, cells: &PairCellBasis) -> Result<CellMpo> {
    params.validate()?;
    cells.validate()?;
    if cells.n() != params.n {
        return Err(Error::Mismatch(format!("cell basis has n = {}, parameters n = {}", cells.n(), params.n)));
    }
    let n = params.n;
    let d = cells.len();
    let alg = params.algebra();
    let mc = params.mass_coeff();
    let hop = -params.hop_coeff();

    let mut bulk = DMatrix::zeros(d, d);
    let mut last = DMatrix::zeros(d, d);
    let mut raise_odd = DMatrix::zeros(d, d);
    let mut lower_even = DMatrix::zeros(d, d);
    for (i, c) in cells.states().iter().enumerate() {
        let diag = mc * (c.even as i64 - c.odd as i64) as f64 + alg.tilde(c.k_mid(n)).powi(2);
        last[(i, i)] = diag;
        bulk[(i, i)] = diag + alg.tilde(c.k_right(n)).powi(2);
        if !c.odd {
            let j = cells.index(c.k_left, c.occ_code() | 1);
            raise_odd[(j, i)] = 1.0;
        }
        if c.even {
            let j = cells.index((c.k_left + 1) % n, c.occ_code() & 1);
            lower_even[(j, i)] = 1.0;
        }
        // Intra-cell hop: (e, o) = (0, 1) → (1, 0), same entering label.
        if !c.even && c.odd {
            let j = cells.index(c.k_left, 2);
            bulk[(j, i)] = hop;
            bulk[(i, j)] = hop;
            last[(j, i)] = hop;
            last[(i, j)] = hop;
        }
    }
    Ok(CellMpo { params: *params, cells: cells.clone(), bulk, last, raise_odd, lower_even })
}

impl CellMpo {
    pub fn new(params: &ModelParams) -> Result<Self> {
        build_mpo(params, &pair_cell_basis(params.n)?)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn cells(&self) -> &PairCellBasis {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.params.pairs()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// On-cell operator of cell `j`; the last cell has no link to its right.
    pub fn onsite(&self, j: usize) -> &DMatrix<f64> {
        if j + 1 == self.len() {
            &self.last
        } else {
            &self.bulk
        }
    }

    pub fn raise_odd(&self) -> &DMatrix<f64> {
        &self.raise_odd
    }

    pub fn lower_even(&self) -> &DMatrix<f64> {
        &self.lower_even
    }

    /// Coefficient of the inter-cell hop pair.
    pub fn bridge_coeff(&self) -> f64 {
        -self.params.hop_coeff()
    }

    /// `onsite(j)` restricted to the four occupations with entering label
    /// `k_left`, indexed by occupation code `2·even + odd`.
    pub fn local_block(&self, j: usize, k_left: usize) -> [[f64; 4]; 4] {
        let h = self.onsite(j);
        let mut out = [[0.0; 4]; 4];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = h[(self.cells.index(k_left, a), self.cells.index(k_left, b))];
            }
        }
        out
    }

    /// Every chain of matching cell states, all boundary labels and fillings.
    pub fn product_states(&self) -> Vec<Vec<CellState>> {
        let n = self.params.n;
        let mut chains: Vec<Vec<CellState>> = self.cells.states().iter().map(|c| vec![*c]).collect();
        for _ in 1..self.len() {
            chains = chains
                .into_iter()
                .flat_map(|ch| {
                    let k = ch.last().expect("non-empty").k_right(n);
                    (0..4).map(move |code| {
                        let mut next = ch.clone();
                        next.push(CellState { k_left: k, even: code & 2 != 0, odd: code & 1 != 0 });
                        next
                    })
                })
                .collect();
        }
        chains
    }

    /// Contracts the operator chain against every product of compatible cell
    /// states and returns the dense matrix in the chain-basis ordering.
    pub fn contract_on_products(&self) -> Result<(GaugeBasis, DMatrix<f64>)> {
        let n = self.params.n;
        let chains = self.product_states();
        let states: Vec<GaugeState> =
            chains.iter().map(|c| chain_cells(c, n).expect("chains are compatible")).collect();
        let basis = GaugeBasis::from_states(self.params.geometry, n, states);
        let dim = basis.len();
        let mut h = DMatrix::zeros(dim, dim);
        let idx = |c: &CellState| self.cells.index(c.k_left, c.occ_code());
        let cell_of = |i: usize| self.cells.state(i);
        for chain in &chains {
            let col = basis.index_of(&chain_cells(chain, n).expect("compatible")).expect("in basis");
            for j in 0..chain.len() {
                let op = self.onsite(j);
                let i = idx(&chain[j]);
                for r in 0..op.nrows() {
                    let v = op[(r, i)];
                    if v != 0.0 {
                        let mut img = chain.clone();
                        img[j] = cell_of(r);
                        if let Some(s) = chain_cells(&img, n) {
                            h[(basis.index_of(&s).expect("in basis"), col)] += v;
                        }
                    }
                }
                if j + 1 < chain.len() {
                    let (ia, ib) = (idx(&chain[j]), idx(&chain[j + 1]));
                    for (a, b) in [(&self.raise_odd, &self.lower_even), (&self.raise_odd.transpose(), &self.lower_even.transpose())] {
                        for ra in 0..a.nrows() {
                            if a[(ra, ia)] == 0.0 {
                                continue;
                            }
                            for rb in 0..b.nrows() {
                                let v = a[(ra, ia)] * b[(rb, ib)];
                                if v != 0.0 {
                                    let mut img = chain.clone();
                                    img[j] = cell_of(ra);
                                    img[j + 1] = cell_of(rb);
                                    if let Some(s) = chain_cells(&img, n) {
                                        h[(basis.index_of(&s).expect("in basis"), col)] += self.bridge_coeff() * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((basis, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{apply_cp, build_basis, build_full_basis};
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn lowest(m: DMatrix<f64>) -> f64 {
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn coefficients() {
        let p = ModelParams::new(3, 2.0 * PI / 3.0, 1.0, 0.0, 2).unwrap();
        assert_abs_diff_eq!(p.hop_coeff(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mass_coeff(), 3.0 / (2.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn sea_diagonal_is_minus_mass_per_pair() {
        let m = 0.7;
        let p = ModelParams::new(3, 2.0 * PI / 3.0, m, 0.0, 3).unwrap();
        let b = build_basis(p.geometry, 3, p.k0, true).unwrap();
        let h = build_sparse(&p, &b).unwrap();
        let sea = GaugeState::dirac_sea(p.geometry, p.k0);
        let i = b.index_of(&sea).unwrap();
        assert_abs_diff_eq!(h.get(i, i) / 3.0, -3.0 / (2.0 * PI) * m, epsilon = 1e-14);
    }

    #[test]
    fn hop_sign_on_four_sites() {
        // Hand computation, L = 2, n = 3, sector Ẽ0 = 0, t = 2π/3 (unit hop):
        // |0101⟩ (sea) connects to |1001⟩, |0011⟩ and |0110⟩ with amplitude −1
        // each, and each image carries one unit of field on a single link.
        let p = ModelParams::new(3, 2.0 * PI / 3.0, 0.0, 0.0, 2).unwrap();
        let b = build_basis(p.geometry, 3, p.k0, true).unwrap();
        let h = build_sparse(&p, &b).unwrap();
        let idx = |bits: &str| {
            let occ: Vec<bool> = bits.chars().map(|c| c == '1').collect();
            b.index_of(&GaugeState::from_occupations(&occ, p.k0)).unwrap()
        };
        let sea = idx("0101");
        let row: Vec<(usize, f64)> = h.row(sea).collect();
        assert_eq!(row.len(), 4);
        assert_eq!(h.get(sea, idx("1001")), -1.0);
        assert_eq!(h.get(sea, idx("0011")), -1.0);
        assert_eq!(h.get(idx("0011"), idx("0011")), 1.0);
        assert_eq!(h.get(sea, idx("0110")), -1.0);
        assert_eq!(h.get(sea, sea), 0.0);
        assert_eq!(h.get(idx("1001"), idx("1001")), 1.0);
        assert_eq!(h.get(idx("0110"), idx("0110")), 1.0);
    }

    #[test]
    fn hermitian_and_sector_preserving() {
        let p = ModelParams::new(3, 1.3, -0.4, 0.0, 2).unwrap();
        let full = build_full_basis(p.geometry, 3).unwrap();
        let h = build_sparse(&p, &full).unwrap();
        assert_eq!(h.asymmetry(), 0.0);
        for (i, j, _) in h.triplets() {
            let (a, b) = (full.state(i), full.state(j));
            assert_eq!(a.k0(), b.k0());
            assert_eq!(a.filling(), b.filling());
        }
    }

    #[test]
    fn zero_hopping_is_diagonal() {
        let p = ModelParams::new(3, 0.0, -1.0, 0.0, 3).unwrap();
        let b = build_basis(p.geometry, 3, p.k0, true).unwrap();
        let h = build_sparse(&p, &b).unwrap();
        assert!(h.triplets().all(|(i, j, _)| i == j));
        let mpo = CellMpo::new(&p).unwrap();
        let (_, d) = mpo.contract_on_products().unwrap();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i != j {
                    assert_eq!(d[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn z2_electric_term_is_constant() {
        for pairs in 1..=4 {
            let p = ModelParams::new(2, 0.0, 0.0, 0.0, pairs).unwrap();
            let b = build_full_basis(p.geometry, 2).unwrap();
            for s in b.states() {
                assert_eq!(p.electric_energy(s), (p.sites() - 1) as f64 / 4.0);
            }
        }
    }

    #[test]
    fn cp_commutes_with_h() {
        for &n in &[2, 3, 4] {
            let p = ModelParams::new(n, 1.7, -0.9, 0.0, 3).unwrap();
            let b = build_basis(p.geometry, n, p.k0, true).unwrap();
            let h = build_sparse(&p, &b).unwrap();
            let perm: Vec<(usize, f64)> = b
                .states()
                .iter()
                .map(|s| {
                    let (img, sign) = apply_cp(s, p.geometry, n, 0.0).unwrap();
                    (b.index_of(&img).unwrap(), sign as f64)
                })
                .collect();
            for (i, j, v) in h.triplets() {
                let (pi, si) = perm[i];
                let (pj, sj) = perm[j];
                assert_abs_diff_eq!(h.get(pi, pj) * si * sj, v, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn phi_shift_matches_label_relabeling() {
        let base = ModelParams::new(5, 1.0, 0.3, 0.25, 3).unwrap().with_sector(1).unwrap();
        let shifted = ModelParams { phi: base.phi + 1.0, k0: 0, ..base };
        let b = build_basis(base.geometry, 5, 1, true).unwrap();
        for s in b.states().iter().filter(|s| s.links(6, 5).iter().all(|&k| k >= 1)) {
            let moved = GaugeState::new(s.occupation(), 0);
            assert_abs_diff_eq!(base.diagonal(s), shifted.diagonal(&moved), epsilon = 1e-12);
        }
    }

    #[test]
    fn mpo_contraction_reproduces_sparse_matrix() {
        for &(n, t, m) in &[(3, 2.0 * PI / 3.0, -0.6), (2, 1.1, 0.4), (4, 0.5, -1.3)] {
            let p = ModelParams::new(n, t, m, 0.0, 2).unwrap();
            let mpo = CellMpo::new(&p).unwrap();
            let (basis, dense) = mpo.contract_on_products().unwrap();
            assert_eq!(basis.len(), 16 * n);
            let sparse = build_sparse(&p, &basis).unwrap().to_dense();
            assert!((dense - sparse).amax() < 1e-14);
        }
    }

    #[test]
    fn mpo_and_sparse_lowest_agree() {
        let p = ModelParams::new(3, 2.0 * PI / 3.0, 0.0, 0.0, 2).unwrap();
        let (_, dense) = CellMpo::new(&p).unwrap().contract_on_products().unwrap();
        let b = build_full_basis(p.geometry, 3).unwrap();
        let sparse = build_sparse(&p, &b).unwrap().to_dense();
        assert_abs_diff_eq!(lowest(dense), lowest(sparse), epsilon = 1e-10);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let p = ModelParams::new(3, 1.0, 0.0, 0.0, 2).unwrap();
        let b = build_basis(ChainGeometry::new(3).unwrap(), 3, 1, true).unwrap();
        assert!(matches!(build_sparse(&p, &b), Err(Error::Mismatch(_))));
        assert!(build_mpo(&p, &pair_cell_basis(4).unwrap()).is_err());
        let mut partial = build_basis(p.geometry, 3, 1, true).unwrap().states().to_vec();
        partial.pop();
        let partial = GaugeBasis::from_states(p.geometry, 3, partial);
        assert!(build_sparse(&p, &partial).is_err());
    }

    #[test]
    fn coordinate_dump() {
        let p = ModelParams::new(2, 0.0, 1.0, 0.0, 1).unwrap();
        let b = build_basis(p.geometry, 2, p.k0, true).unwrap();
        let mut out = Vec::new();
        build_sparse(&p, &b).unwrap().dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("0 0 "));
    }
}
