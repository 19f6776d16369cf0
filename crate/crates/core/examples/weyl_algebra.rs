//! The (U, V) pair on a link and the electric spectrum for a few n and φ.
//!
//! `cargo run --example weyl_algebra -- [n_max]`

use zn_qed::{electric_eigenvalues, weyl_pair, LinkAlgebra};

fn main() -> zn_qed::Result<()> {
    let n_max: usize = std::env::args().nth(1).map_or(8, |s| s.parse().expect("n_max"));
    println!("{:>3} {:>12} {:>12} {:>12}", "n", "commutator", "unitarity", "order");
    for n in 2..=n_max {
        let w = weyl_pair(n)?;
        let comm = (0..n).flat_map(|l| (0..n).map(move |k| (l, k))).map(|(l, k)| w.commutator_defect(l, k)).fold(0.0, f64::max);
        println!("{n:>3} {comm:>12.2e} {:>12.2e} {:>12.2e}", w.unitarity_defect(), w.order_defect());
    }
    for (n, phi) in [(3, 0.0), (3, 1.0 / 3.0), (4, 0.0), (4, 0.5)] {
        let a = LinkAlgebra::new(n, phi)?;
        let e: Vec<String> = electric_eigenvalues(n, phi)?.iter().map(|v| format!("{v:+.4}")).collect();
        println!("n={n} phi={phi:.3}: E = [{}], neutral label {}", e.join(", "), a.neutral_label());
    }
    Ok(())
}
