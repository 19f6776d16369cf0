//! Gauge-invariant Hilbert space of the open chain.
//!
//! Sites are labelled `0..N` with `N = 2L`; even sites host the positive-mass
//! component, odd sites the negative-mass one. Every state is a fermion
//! occupation pattern plus the label `k0` of the virtual link entering site 0.
//! Internal link labels follow from Gauss' law,
//!
//! ```text
//! k_{x,x+1} = k0 + Σ_{y≤x} (n_y − [y odd])   (mod n),
//! ```
//!
//! so they are derived on demand and never stored.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Open chain of `L` physical sites (`N = 2L` staggered sites).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainGeometry {
    pairs: usize,
}

impl ChainGeometry {
    /// Longest chain any engine accepts.
    pub const MAX_PAIRS: usize = 256;
    /// Chain-basis states pack occupations into a `u64`, so `N ≤ 62` there.
    pub const MAX_BASIS_PAIRS: usize = 31;

    pub fn new(pairs: usize) -> Result<Self> {
        if pairs == 0 || pairs > Self::MAX_PAIRS {
            return Err(Error::InvalidArgument(format!(
                "number of pairs L = {pairs} must lie in 1..={}",
                Self::MAX_PAIRS
            )));
        }
        Ok(Self { pairs })
    }

    /// L, the number of physical sites (pair cells).
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// N = 2L.
    pub fn sites(&self) -> usize {
        2 * self.pairs
    }

    /// N − 1 internal links.
    pub fn links(&self) -> usize {
        2 * self.pairs - 1
    }
}

/// One gauge-invariant basis element: occupation bits (bit x ↔ site x) and the
/// entering link label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaugeState {
    occupation: u64,
    k0: u16,
}

impl GaugeState {
    pub fn new(occupation: u64, k0: usize) -> Self {
        Self { occupation, k0: k0 as u16 }
    }

    pub fn from_occupations(occ: &[bool], k0: usize) -> Self {
        let bits = occ.iter().enumerate().fold(0u64, |acc, (x, &o)| acc | ((o as u64) << x));
        Self::new(bits, k0)
    }

    /// Odd sites filled: zero charge everywhere, every link equals `k0`.
    pub fn dirac_sea(geometry: ChainGeometry, k0: usize) -> Self {
        let bits = (0..geometry.sites()).filter(|x| x % 2 == 1).fold(0u64, |acc, x| acc | (1 << x));
        Self::new(bits, k0)
    }

    /// Even sites filled: a quark–antiquark pair on every physical site.
    pub fn meson(geometry: ChainGeometry, k0: usize) -> Self {
        let bits = (0..geometry.sites()).filter(|x| x % 2 == 0).fold(0u64, |acc, x| acc | (1 << x));
        Self::new(bits, k0)
    }

    pub fn occupation(&self) -> u64 {
        self.occupation
    }

    pub fn k0(&self) -> usize {
        self.k0 as usize
    }

    #[inline]
    pub fn occupied(&self, x: usize) -> bool {
        (self.occupation >> x) & 1 == 1
    }

    pub fn filling(&self) -> usize {
        self.occupation.count_ones() as usize
    }

    pub fn occupations(&self, sites: usize) -> Vec<bool> {
        (0..sites).map(|x| self.occupied(x)).collect()
    }

    /// Internal link labels `k_{x,x+1}`, x = 0..N−2.
    pub fn links(&self, sites: usize, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(sites.saturating_sub(1));
        let mut k = self.k0 as i64;
        for x in 0..sites.saturating_sub(1) {
            k += self.occupied(x) as i64 - (x % 2) as i64;
            out.push(k.rem_euclid(n as i64) as usize);
        }
        out
    }

    /// Label of the virtual link leaving site N−1.
    pub fn exit_label(&self, sites: usize, n: usize) -> usize {
        let odd = (sites / 2) as i64;
        (self.k0 as i64 + self.filling() as i64 - odd).rem_euclid(n as i64) as usize
    }

    /// Occupations as a `0`/`1` string, site 0 first.
    pub fn bit_string(&self, sites: usize) -> String {
        (0..sites).map(|x| if self.occupied(x) { '1' } else { '0' }).collect()
    }

    /// Key realizing lexicographic order over (n_0, n_1, …).
    fn lex_key(&self, sites: usize) -> u64 {
        if sites == 0 {
            0
        } else {
            self.occupation.reverse_bits() >> (64 - sites)
        }
    }

    /// Gauss residual `(k_{x,x+1} − k_{x−1,x} − n_x + [x odd]) mod n` for
    /// every site, given explicit link labels (internal links, then the exit).
    pub fn gauss_residuals(&self, links: &[usize], exit: usize, n: usize) -> Vec<usize> {
        let sites = links.len() + 1;
        (0..sites)
            .map(|x| {
                let left = if x == 0 { self.k0 as i64 } else { links[x - 1] as i64 };
                let right = if x + 1 == sites { exit as i64 } else { links[x] as i64 };
                (right - left - self.occupied(x) as i64 + (x % 2) as i64).rem_euclid(n as i64) as usize
            })
            .collect()
    }
}

/// Solve Gauss' law forward from the left boundary label.
pub fn reconstruct_fields(occupation: &[bool], k0: usize, n: usize) -> Vec<usize> {
    GaugeState::from_occupations(occupation, k0).links(occupation.len(), n)
}

/// Ordered gauge-invariant basis with binary-search lookup.
#[derive(Debug, Clone)]
pub struct GaugeBasis {
    geometry: ChainGeometry,
    n: usize,
    states: Vec<GaugeState>,
}

impl GaugeBasis {
    /// Sorts the states by (k0, lexicographic occupation) and drops duplicates.
    pub fn from_states(geometry: ChainGeometry, n: usize, mut states: Vec<GaugeState>) -> Self {
        let sites = geometry.sites();
        states.sort_by(|a, b| order(a, b, sites));
        states.dedup();
        Self { geometry, n, states }
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[GaugeState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> GaugeState {
        self.states[i]
    }

    pub fn index_of(&self, s: &GaugeState) -> Option<usize> {
        let sites = self.geometry.sites();
        self.states.binary_search_by(|probe| order(probe, s, sites)).ok()
    }

    /// Distinct boundary labels present in the basis.
    pub fn sectors(&self) -> Vec<usize> {
        let mut k: Vec<usize> = self.states.iter().map(|s| s.k0()).collect();
        k.dedup();
        k
    }

    /// Diagnostic dump: `occupation-bits k0 field-labels` per line.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        let sites = self.geometry.sites();
        for s in &self.states {
            let mut line = format!("{} {}", s.bit_string(sites), s.k0());
            for k in s.links(sites, self.n) {
                write!(line, " {k}").expect("write to String");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn order(a: &GaugeState, b: &GaugeState, sites: usize) -> Ordering {
    a.k0.cmp(&b.k0).then(a.lex_key(sites).cmp(&b.lex_key(sites)))
}

/// All occupation patterns in one boundary sector; `fixed_filling` keeps the
/// `C(N, L)` patterns with exactly L particles.
pub fn build_basis(geometry: ChainGeometry, n: usize, k0: usize, fixed_filling: bool) -> Result<GaugeBasis> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("group order n = {n} must be ≥ 2")));
    }
    if k0 >= n {
        return Err(Error::InvalidArgument(format!("boundary label k0 = {k0} out of range 0..{n}")));
    }
    if geometry.pairs() > ChainGeometry::MAX_BASIS_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "chain basis supports at most {} pairs",
            ChainGeometry::MAX_BASIS_PAIRS
        )));
    }
    let sites = geometry.sites();
    let states: Vec<GaugeState> = if fixed_filling {
        fixed_popcount(sites, geometry.pairs()).map(|occ| GaugeState::new(occ, k0)).collect()
    } else {
        (0..1u64 << sites).map(|occ| GaugeState::new(occ, k0)).collect()
    };
    Ok(GaugeBasis::from_states(geometry, n, states))
}

/// Union of all n boundary sectors and all fillings: 2^N × n states.
pub fn build_full_basis(geometry: ChainGeometry, n: usize) -> Result<GaugeBasis> {
    let mut states = Vec::new();
    for k0 in 0..n {
        states.extend(build_basis(geometry, n, k0, false)?.states);
    }
    Ok(GaugeBasis::from_states(geometry, n, states))
}

/// Bit patterns of width `bits` with exactly `ones` set (Gosper's hack).
pub(crate) fn fixed_popcount(bits: usize, ones: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << bits;
    let first = if ones == 0 { 0 } else { (1u64 << ones) - 1 };
    let mut next = Some(first);
    std::iter::from_fn(move || {
        let cur = next?;
        if cur >= limit {
            next = None;
            return None;
        }
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur)
    })
}

/// One state of a pair cell: the label entering the even site and the two
/// occupations. Middle and right labels follow the even/odd Gauss rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellState {
    pub k_left: usize,
    pub even: bool,
    pub odd: bool,
}

impl CellState {
    pub fn k_mid(&self, n: usize) -> usize {
        (self.k_left + self.even as usize) % n
    }

    pub fn k_right(&self, n: usize) -> usize {
        (self.k_mid(n) + n - (!self.odd) as usize) % n
    }

    /// Occupation code `2·even + odd`, 0..4.
    pub fn occ_code(&self) -> usize {
        2 * self.even as usize + self.odd as usize
    }

    pub fn particles(&self) -> usize {
        self.even as usize + self.odd as usize
    }
}

/// The 4n gauge-invariant states of a pair of sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCellBasis {
    n: usize,
    states: Vec<CellState>,
}

impl PairCellBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    /// Index of `(k_left, occupation code)`: `4·k_left + code`.
    #[inline]
    pub fn index(&self, k_left: usize, occ_code: usize) -> usize {
        4 * k_left + occ_code
    }

    pub fn state(&self, i: usize) -> CellState {
        self.states[i]
    }

    /// States grouped by their `(k_left, k_right)` grading.
    pub fn grading(&self) -> Vec<((usize, usize), Vec<usize>)> {
        let mut out: Vec<((usize, usize), Vec<usize>)> = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            let key = (s.k_left, s.k_right(self.n));
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(i),
                None => out.push((key, vec![i])),
            }
        }
        out
    }

    /// Checks that every state obeys the even/odd site rules.
    pub fn validate(&self) -> Result<()> {
        if self.states.len() != 4 * self.n {
            return Err(Error::Mismatch(format!("cell basis has {} states, expected {}", self.states.len(), 4 * self.n)));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.k_left >= self.n || self.index(s.k_left, s.occ_code()) != i {
                return Err(Error::Mismatch(format!("cell state {i} is out of the canonical grading")));
            }
        }
        Ok(())
    }
}

pub fn pair_cell_basis(n: usize) -> Result<PairCellBasis> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("group order n = {n} must be ≥ 2")));
    }
    let mut states = Vec::with_capacity(4 * n);
    for k_left in 0..n {
        for code in 0..4 {
            states.push(CellState { k_left, even: code & 2 != 0, odd: code & 1 != 0 });
        }
    }
    Ok(PairCellBasis { n, states })
}

/// Chain state for a list of cell states; `None` if neighbouring labels do not match.
pub fn chain_cells(cells: &[CellState], n: usize) -> Option<GaugeState> {
    let first = cells.first()?;
    let mut occ = 0u64;
    for (j, c) in cells.iter().enumerate() {
        if j > 0 && cells[j - 1].k_right(n) != c.k_left {
            return None;
        }
        occ |= (c.even as u64) << (2 * j);
        occ |= (c.odd as u64) << (2 * j + 1);
    }
    Some(GaugeState::new(occ, first.k_left))
}

/// Combined charge conjugation and parity of the open chain.
///
/// Site `x` goes to `N−1−x` with a particle↔hole flip, and link
/// `(x, x+1)` goes to `(N−2−x, N−1−x)`. The flip reverses every charge and
/// the reflection reverses every divergence, so the image link labels are the
/// original ones in reverse order and the image stays in the `k0` sector when
/// the filling is L. The returned sign is the reordering sign of the reversed
/// creation string, `(−1)^{F(F−1)/2}` for filling F of the image.
pub fn apply_cp(state: &GaugeState, geometry: ChainGeometry, n: usize, phi: f64) -> Result<(GaugeState, i8)> {
    if phi != 0.0 {
        return Err(Error::UnsupportedSymmetry(format!("CP is broken by the background field φ = {phi}")));
    }
    let sites = geometry.sites();
    let mut occ = 0u64;
    for x in 0..sites {
        if !state.occupied(x) {
            occ |= 1 << (sites - 1 - x);
        }
    }
    let k0 = state.exit_label(sites, n);
    let image = GaugeState::new(occ, k0);
    let f = image.filling();
    let sign = if (f * f.saturating_sub(1) / 2) % 2 == 0 { 1 } else { -1 };
    Ok((image, sign))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::LinkAlgebra;
    use proptest::prelude::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn counts_match_2n_times_n() {
        let g = ChainGeometry::new(2).unwrap();
        assert_eq!(build_basis(g, 3, 1, false).unwrap().len(), 16);
        assert_eq!(build_full_basis(g, 3).unwrap().len(), 48);
        assert_eq!(build_basis(g, 3, 1, true).unwrap().len(), 6);
    }

    #[test]
    fn fixed_filling_is_binomial() {
        for pairs in 1..=6 {
            let g = ChainGeometry::new(pairs).unwrap();
            let b = build_basis(g, 2, 0, true).unwrap();
            assert_eq!(b.len(), binomial(2 * pairs, pairs));
            assert!(b.states().iter().all(|s| s.filling() == pairs));
        }
    }

    #[test]
    fn z2_single_pair_patterns() {
        // Filling 1 on two sites: "10" (quark) and "01" (sea). Entering label 0
        // (Ẽ = −1/2): sea keeps −1/2, the occupied even site flips to +1/2.
        let g = ChainGeometry::new(1).unwrap();
        let b = build_basis(g, 2, 0, true).unwrap();
        let got: Vec<(String, Vec<usize>)> =
            b.states().iter().map(|s| (s.bit_string(2), s.links(2, 2))).collect();
        assert_eq!(got, vec![("01".to_string(), vec![0]), ("10".to_string(), vec![1])]);
    }

    #[test]
    fn lexicographic_order() {
        let g = ChainGeometry::new(2).unwrap();
        let b = build_basis(g, 3, 0, true).unwrap();
        let s: Vec<String> = b.states().iter().map(|s| s.bit_string(4)).collect();
        assert_eq!(s, ["0011", "0101", "0110", "1001", "1010", "1100"]);
    }

    #[test]
    fn rejects_bad_sector() {
        let g = ChainGeometry::new(2).unwrap();
        assert!(build_basis(g, 3, 3, true).is_err());
        assert!(ChainGeometry::new(0).is_err());
    }

    #[test]
    fn sea_and_meson_fields() {
        let alg = LinkAlgebra::new(3, 0.0).unwrap();
        let g = ChainGeometry::new(4).unwrap();
        let k0 = alg.neutral_label();
        let sea = GaugeState::dirac_sea(g, k0);
        assert!(sea.links(8, 3).iter().all(|&k| alg.tilde(k) == 0.0));
        let meson = GaugeState::meson(g, k0);
        let tilde: Vec<f64> = meson.links(8, 3).iter().map(|&k| alg.tilde(k)).collect();
        assert_eq!(tilde, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn z2_links_are_half_integer() {
        let alg = LinkAlgebra::new(2, 0.0).unwrap();
        let g = ChainGeometry::new(3).unwrap();
        for s in build_full_basis(g, 2).unwrap().states() {
            assert!(s.links(6, 2).iter().all(|&k| alg.tilde(k).powi(2) == 0.25));
        }
    }

    #[test]
    fn gauss_law_holds_everywhere() {
        for &n in &[2, 3, 5] {
            for pairs in 1..=3 {
                let g = ChainGeometry::new(pairs).unwrap();
                let sites = g.sites();
                for s in build_full_basis(g, n).unwrap().states() {
                    let links = s.links(sites, n);
                    let res = s.gauss_residuals(&links, s.exit_label(sites, n), n);
                    assert!(res.iter().all(|&r| r == 0), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn pair_cell_counts() {
        assert_eq!(pair_cell_basis(3).unwrap().len(), 12);
        assert_eq!(pair_cell_basis(2).unwrap().len(), 8);
        // Independent count: every (k_left, even, odd) triple.
        let brute = (0..5).flat_map(|k| (0..2).flat_map(move |e| (0..2).map(move |o| (k, e, o)))).count();
        assert_eq!(pair_cell_basis(5).unwrap().len(), brute);
        assert!(pair_cell_basis(1).is_err());
        pair_cell_basis(4).unwrap().validate().unwrap();
    }

    #[test]
    fn cell_label_rules() {
        let n = 3;
        let c = CellState { k_left: 2, even: true, odd: false };
        assert_eq!(c.k_mid(n), 0);
        assert_eq!(c.k_right(n), 2);
        let sea = CellState { k_left: 1, even: false, odd: true };
        assert_eq!(sea.k_right(n), 1);
    }

    #[test]
    fn grading_covers_every_state_once() {
        let cells = pair_cell_basis(3).unwrap();
        let total: usize = cells.grading().iter().map(|(_, v)| v.len()).sum();
        assert_eq!(total, 12);
    }

    #[test]
    fn cell_chains_biject_onto_chain_basis() {
        for &n in &[2, 3] {
            let cells = pair_cell_basis(n).unwrap();
            let g = ChainGeometry::new(2).unwrap();
            let full = build_full_basis(g, n).unwrap();
            let mut hit = vec![false; full.len()];
            for a in cells.states() {
                for b in cells.states() {
                    if let Some(s) = chain_cells(&[*a, *b], n) {
                        let i = full.index_of(&s).expect("chained state in basis");
                        assert!(!hit[i]);
                        hit[i] = true;
                        // Shared labels coincide with Gauss-reconstructed fields.
                        let links = s.links(4, n);
                        assert_eq!(links, vec![a.k_mid(n), a.k_right(n), b.k_mid(n)]);
                    }
                }
            }
            assert!(hit.iter().all(|&h| h));
        }
    }

    #[test]
    fn cp_fixes_sea_and_meson() {
        let g = ChainGeometry::new(4).unwrap();
        for &n in &[3, 4] {
            let k0 = LinkAlgebra::new(n, 0.0).unwrap().neutral_label();
            let sea = GaugeState::dirac_sea(g, k0);
            assert_eq!(apply_cp(&sea, g, n, 0.0).unwrap().0, sea);
            let meson = GaugeState::meson(g, k0);
            assert_eq!(apply_cp(&meson, g, n, 0.0).unwrap().0, meson);
        }
    }

    #[test]
    fn cp_rejects_background_field() {
        let g = ChainGeometry::new(2).unwrap();
        let s = GaugeState::dirac_sea(g, 1);
        assert!(matches!(apply_cp(&s, g, 3, 1.0 / 3.0), Err(Error::UnsupportedSymmetry(_))));
    }

    #[test]
    fn dump_format() {
        let g = ChainGeometry::new(1).unwrap();
        let b = build_basis(g, 3, 1, true).unwrap();
        let mut out = Vec::new();
        b.dump(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "01 1 1\n10 1 2\n");
    }

    proptest! {
        #[test]
        fn cp_is_an_involution(pairs in 1usize..8, n in 2usize..7, raw in any::<u64>()) {
            let g = ChainGeometry::new(pairs).unwrap();
            let sites = g.sites();
            let occ = raw & ((1u64 << sites) - 1);
            let s = GaugeState::new(occ, (raw >> 60) as usize % n);
            let (img, _) = apply_cp(&s, g, n, 0.0).unwrap();
            let (back, _) = apply_cp(&img, g, n, 0.0).unwrap();
            prop_assert_eq!(back.occupation(), s.occupation());
            if s.filling() == pairs {
                prop_assert_eq!(back, s);
            }
        }

        #[test]
        fn cp_image_fields_are_reversed(pairs in 1usize..8, n in 2usize..7, raw in any::<u64>()) {
            let g = ChainGeometry::new(pairs).unwrap();
            let sites = g.sites();
            let occ = raw & ((1u64 << sites) - 1);
            let s = GaugeState::new(occ, (raw >> 60) as usize % n);
            let (img, _) = apply_cp(&s, g, n, 0.0).unwrap();
            let mut expect = s.links(sites, n);
            expect.reverse();
            prop_assert_eq!(img.links(sites, n), expect);
            prop_assert_eq!(img.exit_label(sites, n), s.k0());
        }
    }
}
