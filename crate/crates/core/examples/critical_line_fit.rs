//! m_c(t) = m₀ + α√t + βt fitted to the shipped critical-line tables and
//! compared with the reference coefficients.
//!
//! `cargo run --example critical_line_fit`

use std::path::Path;

use zn_qed::continuum::{fit_critical_line, read_coefficients, read_critical_line, LineCoefficients, LineModel};
use zn_qed::pipeline::read_source;

fn main() -> zn_qed::Result<()> {
    let here = Path::new(".");
    let reference = read_coefficients(read_source(Path::new("builtin:line_coefficients.csv"), here)?.as_bytes())?;
    println!("{:>2} {:>9} {:>9} {:>9} {:>7} {:>7}", "n", "m0", "alpha", "beta", "chi2", "max|z|");
    for n in 2..=8 {
        let src = format!("builtin:critical_line_n{n}.csv");
        let points = read_critical_line(read_source(Path::new(&src), here)?.as_bytes())?;
        let fit = fit_critical_line(&points)?;
        let c = LineCoefficients::from_fit(n, &fit, LineModel::default());
        let z = reference.iter().find(|r| r.n == n).map_or(f64::NAN, |r| c.max_z(r));
        println!("{n:>2} {:>9.4} {:>9.4} {:>9.4} {:>7.2} {z:>7.2}", c.m0, c.alpha, c.beta, fit.chi2);
    }
    Ok(())
}
