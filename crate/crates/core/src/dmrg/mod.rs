//! Two-cell DMRG over pair cells.
//!
//! Bond indices are split into sectors by the particle number to their left,
//! which fixes the link label across the bond. Every tensor block therefore
//! connects compatible labels and the variational state never leaves the
//! gauge-invariant space. Excited states are optimized with the lower states
//! projected out of every local problem.

mod checkpoint;
mod env;
mod mps;
mod sweep;

pub use checkpoint::{load, read_checkpoint, save, write_checkpoint, VERSION as CHECKPOINT_VERSION};
pub use mps::{bond_label, pop, Block, CellScan, MpsState, SweepHistory};
pub use sweep::{excited_states, ground_state, lowest_states, Seed, SweepPolicy};
