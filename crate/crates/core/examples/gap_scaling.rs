//! Closing of the two lowest gaps at the critical point: Δ/Γ, x_s and v_s.
//!
//! `cargo run --release --example gap_scaling -- [m_c] [L...]`

use std::f64::consts::PI;

use zn_qed::criticality::{gap_scaling_fit, GapPoint};
use zn_qed::dmrg::{lowest_states, SweepPolicy};
use zn_qed::observables::gaps;
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m_c: f64 = args.first().map_or(-1.95, |s| s.parse().expect("m_c"));
    let sizes: Vec<usize> = match args.get(1..) {
        Some(rest) if !rest.is_empty() => rest.iter().map(|s| s.parse().expect("L")).collect(),
        _ => vec![8, 12, 16],
    };
    let policy = SweepPolicy { chi: 256, ..Default::default() };
    let mut points = Vec::new();
    for &pairs in &sizes {
        let params = ModelParams::new(3, 2.0 * PI / 3.0, m_c, 0.0, pairs)?;
        let (spec, _) = lowest_states(&params, &policy, 2)?;
        let (d, g) = gaps(&spec)?;
        let n = params.sites() as f64;
        println!("L = {pairs:>3}: Delta = {d:.6}  Gamma = {g:.6}  Delta/Gamma = {:.4}  Delta*N = {:.4}", d / g, d * n);
        points.push(GapPoint::from_total(params.sites(), d, g));
    }
    let fit = gap_scaling_fit(&points)?;
    println!("Delta/Gamma = {:.4} +/- {:.4}", fit.ratio, fit.ratio_err);
    println!("x_s = {:.4} +/- {:.4}, v_s = {:.4} +/- {:.4}", fit.x_s, fit.x_s_err, fit.v_s, fit.v_s_err);
    println!("amplitude spread {:.3}, flagged sizes {:?}", fit.amplitude_spread, fit.flagged);
    Ok(())
}
