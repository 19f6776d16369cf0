//! ℤₙ lattice gauge theories coupled to staggered fermions in one spatial
//! dimension.
//!
//! The crate computes ground-state and low-lying excitation properties of the
//! discrete Schwinger–Weyl approximation of lattice QED with Gauss' law imposed
//! exactly, and carries the finite-size-scaling analysis used to locate the
//! Ising-class transition and extrapolate it to the U(1) limit.
//!
//! Layout:
//!
//! - [`algebra`]: the (U, V) pair on a link and the electric spectrum.
//! - [`basis`]: gauge-invariant chain states and the 4n-state pair cell.
//! - [`hamiltonian`]: sparse operator over the chain basis and the cell MPO.
//! - [`krylov`], [`ed`]: Lanczos-type eigensolvers and the exact-diagonalization engine.
//! - [`dmrg`]: two-site DMRG over pair cells with ℤₙ-graded bonds.
//! - [`observables`]: order parameter, profiles, entanglement, gaps.
//! - [`criticality`]: data collapse, central charge, gap scaling, crossover diagnostics.
//! - [`continuum`]: critical-line regression and large-n extrapolation.
//! - [`pipeline`]: experiment configs, scans, manifests and the analysis chain.

pub mod algebra;
pub mod basis;
pub mod continuum;
pub mod criticality;
pub mod dmrg;
pub mod ed;
mod error;
pub mod hamiltonian;
pub mod interp;
pub mod krylov;
pub mod observables;
pub mod pipeline;

pub use algebra::{electric_eigenvalues, weyl_pair, LinkAlgebra, WeylPair};
pub use basis::{
    apply_cp, build_basis, pair_cell_basis, reconstruct_fields, ChainGeometry, GaugeBasis,
    GaugeState, PairCellBasis,
};
pub use error::{Error, Result};
pub use hamiltonian::{build_mpo, build_sparse, CellMpo, ModelParams, SectorPolicy, SparseOperator};
