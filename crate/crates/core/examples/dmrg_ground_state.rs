//! Ground state of the ℤ₃ chain near its critical mass with two-cell DMRG.
//!
//! `cargo run --release --example dmrg_ground_state -- [L] [m] [chi]`

use std::f64::consts::PI;
use std::time::Instant;

use zn_qed::dmrg::{ground_state, SweepPolicy};
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: usize = args.first().map_or(16, |s| s.parse().expect("L"));
    let m: f64 = args.get(1).map_or(-1.95, |s| s.parse().expect("m"));
    let chi: usize = args.get(2).map_or(256, |s| s.parse().expect("chi"));

    let params = ModelParams::new(3, 2.0 * PI / 3.0, m, 0.0, pairs)?;
    let policy = SweepPolicy { chi, ..Default::default() };
    let start = Instant::now();
    let (spec, mps) = ground_state(&params, &policy)?;
    println!("L = {pairs}, m = {m}, chi cap = {chi}");
    println!("E0 = {:.12}", spec.energies[0]);
    println!("sweeps = {}, max bond = {}", mps.history.energies.len(), mps.max_bond_dim());
    println!("energy trace: {:?}", mps.history.energies);
    println!("truncation: {:?}", mps.history.truncation);
    println!("elapsed: {:.2?}", start.elapsed());
    Ok(())
}
