//! Ground and two excited states with DMRG, checked against exact
//! diagonalization, then written to and read back from a checkpoint.
//!
//! `cargo run --release --example excited_states -- [L] [m]`

use std::f64::consts::PI;

use zn_qed::dmrg::{load, lowest_states, save, SweepPolicy};
use zn_qed::ed::{solve, EdOptions};
use zn_qed::observables::gaps;
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: usize = args.first().map_or(6, |s| s.parse().expect("L"));
    let m: f64 = args.get(1).map_or(-1.95, |s| s.parse().expect("m"));

    let params = ModelParams::new(3, 2.0 * PI / 3.0, m, 0.0, pairs)?;
    let policy = SweepPolicy { chi: 128, ..Default::default() };
    let (spec, states) = lowest_states(&params, &policy, 2)?;
    let (_, exact) = solve(&params, 3, &EdOptions::default())?;
    for (i, (d, e)) in spec.energies.iter().zip(&exact.energies).enumerate() {
        println!("E{i}: dmrg {d:.12}  ed {e:.12}  diff {:.1e}", (d - e).abs());
    }
    let (delta, gamma) = gaps(&spec)?;
    println!("Delta = {delta:.8}, Gamma = {gamma:.8}, ratio {:.4}", delta / gamma);
    for (i, s) in states.iter().enumerate().skip(1) {
        println!("<psi0|psi{i}> = {:.1e}", states[0].overlap(s));
    }

    let path = std::env::temp_dir().join("zn_qed_ground.mps");
    save(&states[0], &path)?;
    let back = load(&path)?;
    println!("checkpoint {}: overlap with original {:.12}", path.display(), back.overlap(&states[0]));
    Ok(())
}
