//! Large-n extrapolation of α_n √(n/2π) for odd and even n.
//!
//! `cargo run --example continuum_limit -- [coefficients.csv]`

use std::path::{Path, PathBuf};

use zn_qed::continuum::{extrapolate_large_n, read_coefficients, AlphaPoint, Parity};
use zn_qed::pipeline::read_source;

fn main() -> zn_qed::Result<()> {
    let src: PathBuf = std::env::args().nth(1).map_or_else(|| PathBuf::from("builtin:line_coefficients.csv"), PathBuf::from);
    let rows = read_coefficients(read_source(&src, Path::new("."))?.as_bytes())?;
    let alphas: Vec<AlphaPoint> = rows.iter().map(|r| AlphaPoint { n: r.n, alpha: r.alpha, sigma: r.alpha_err }).collect();
    for parity in [Parity::Odd, Parity::Even] {
        let pts: Vec<AlphaPoint> = alphas.iter().copied().filter(|p| Parity::of(p.n) == parity).collect();
        let e = extrapolate_large_n(&pts, parity)?;
        println!(
            "{parity:?} n = {:?}: d = {:.3} +/- {:.3}, b = {:.3}, m_c = {:.3} +/- {:.3}",
            e.ns, e.d, e.d_err, e.b, e.m_c, e.m_c_err
        );
    }
    Ok(())
}
