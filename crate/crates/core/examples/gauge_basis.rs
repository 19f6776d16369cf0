//! Gauge-invariant basis of a short chain: labels, fields and Gauss' law.
//!
//! `cargo run --example gauge_basis -- [n] [L]`

use zn_qed::{build_basis, pair_cell_basis, ChainGeometry};

fn main() -> zn_qed::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().expect("integer")).collect();
    let n = args.first().copied().unwrap_or(3);
    let pairs = args.get(1).copied().unwrap_or(2);
    let geometry = ChainGeometry::new(pairs)?;
    let sites = geometry.sites();
    let basis = build_basis(geometry, n, 0, true)?;
    println!("n = {n}, N = {sites}, half filling, k0 = 0: {} states", basis.len());
    for s in basis.states() {
        let links = s.links(sites, n);
        let exit = s.exit_label(sites, n);
        let bad = s.gauss_residuals(&links, exit, n).iter().filter(|&&r| r != 0).count();
        println!("  {}  links {:?} exit {exit}  gauss violations {bad}", s.bit_string(sites), links);
    }
    let cells = pair_cell_basis(n)?;
    cells.validate()?;
    println!("pair cell: {} states in {} (k_left, particles) blocks", cells.len(), cells.grading().len());
    Ok(())
}
