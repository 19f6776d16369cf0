//! Low-lying spectrum by exact diagonalization, and the t = 0 level crossing.
//!
//! `cargo run --release --example exact_spectrum -- [n] [L] [t] [m]`

use zn_qed::continuum::analytic_t0_mass;
use zn_qed::ed::{solve, EdOptions};
use zn_qed::observables::{measure, StateRef};
use zn_qed::ModelParams;

fn main() -> zn_qed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(3, |s| s.parse().expect("n"));
    let pairs: usize = args.get(1).map_or(6, |s| s.parse().expect("L"));
    let t: f64 = args.get(2).map_or(2.0 * std::f64::consts::PI / 3.0, |s| s.parse().expect("t"));
    let m: f64 = args.get(3).map_or(-1.9, |s| s.parse().expect("m"));

    let params = ModelParams::new(n, t, m, 0.0, pairs)?;
    let (basis, spec) = solve(&params, 4, &EdOptions::default())?;
    println!("dim = {}, method {:?}, iterations {}", basis.len(), spec.method, spec.iterations);
    for (i, e) in spec.energies.iter().enumerate() {
        println!("  E{i} = {e:.12}  (residual {:.1e})", spec.residuals[i]);
    }
    let obs = measure(StateRef::Vector { basis: &basis, amplitudes: &spec.vectors[0] }, &params, Some(&spec))?;
    println!("Sigma = {:.6}, S_mid = {:.6} bits, gaps {:?}", obs.sigma, obs.mid_entropy(), obs.gaps);

    let mc = analytic_t0_mass(n)?;
    let frozen = ModelParams::new(n, 0.0, mc, 0.0, pairs)?;
    let (_, below) = solve(&frozen.with_mass(mc - 0.01), 1, &EdOptions::default())?;
    let (_, above) = solve(&frozen.with_mass(mc + 0.01), 1, &EdOptions::default())?;
    println!("t = 0 crossing at m = {mc:.6}: E0 = {:.6} below, {:.6} above", below.energies[0], above.energies[0]);
    Ok(())
}
