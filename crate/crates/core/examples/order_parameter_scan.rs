//! Σ(m) across the ℤ₃ transition for several chain lengths, plus the two
//! lowest gaps.
//!
//! `cargo run --release --example order_parameter_scan -- [L...]`

use std::f64::consts::PI;

use zn_qed::dmrg::{lowest_states, SweepPolicy};
use zn_qed::observables::{gaps, measure, StateRef};
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let sizes: Vec<usize> = {
        let a: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().expect("L")).collect();
        if a.is_empty() { vec![8, 12, 16] } else { a }
    };
    let policy = SweepPolicy { chi: 256, ..Default::default() };
    println!("{:>4} {:>7} {:>10} {:>10} {:>10} {:>8} {:>8}", "L", "m", "Sigma", "Delta", "Gamma", "D/G", "S_mid");
    for &pairs in &sizes {
        for i in 0..9 {
            let m = -2.3 + 0.1 * i as f64;
            let params = ModelParams::new(3, 2.0 * PI / 3.0, m, 0.0, pairs)?;
            let (spec, states) = lowest_states(&params, &policy, 2)?;
            let obs = measure(StateRef::Mps(&states[0]), &params, None)?;
            let (d, g) = gaps(&spec)?;
            println!(
                "{pairs:>4} {m:>7.3} {:>10.6} {d:>10.6} {g:>10.6} {:>8.4} {:>8.4}",
                obs.sigma,
                d / g,
                obs.mid_entropy()
            );
        }
    }
    Ok(())
}
