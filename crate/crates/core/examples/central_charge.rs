//! Half-chain entanglement at the n = 3 critical point and the central charge
//! from its logarithmic growth with L.
//!
//! `cargo run --release --example central_charge -- [m_c] [L...]`

use std::f64::consts::PI;

use zn_qed::criticality::central_charge_fit;
use zn_qed::dmrg::{ground_state, SweepPolicy};
use zn_qed::observables::{measure, StateRef};
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m_c: f64 = args.first().map_or(-1.95, |s| s.parse().expect("m_c"));
    let sizes: Vec<usize> = match args.get(1..) {
        Some(rest) if !rest.is_empty() => rest.iter().map(|s| s.parse().expect("L")).collect(),
        _ => vec![8, 12, 16, 20],
    };
    let policy = SweepPolicy { chi: 256, ..Default::default() };
    let mut points = Vec::new();
    for &pairs in &sizes {
        let params = ModelParams::new(3, 2.0 * PI / 3.0, m_c, 0.0, pairs)?;
        let (_, gs) = ground_state(&params, &policy)?;
        let obs = measure(StateRef::Mps(&gs), &params, None)?;
        let profile: Vec<String> = obs.pair_entropies().iter().map(|s| format!("{s:.3}")).collect();
        println!("L = {pairs:>3}: S_mid = {:.6}  S(pair cuts) = [{}]", obs.mid_entropy(), profile.join(" "));
        points.push((pairs, obs.mid_entropy()));
    }
    let fit = central_charge_fit(&points)?;
    println!("c = {:.4} +/- {:.4}, s0 = {:.4}", fit.c, fit.c_err, fit.s0);
    Ok(())
}
