use std::f64::consts::PI;

use proptest::prelude::*;
use zn_qed::ed::{lowest_eigenpairs, solve, EdOptions};
use zn_qed::observables::{entropy_profile, measure, StateRef};
use zn_qed::{build_basis, build_sparse, CellMpo, ModelParams};

fn params() -> impl Strategy<Value = ModelParams> {
    (2usize..6, 1usize..4, 0.0f64..3.0, -2.5f64..1.5, prop::sample::select(vec![0.0, 0.25, 1.0 / 3.0, 0.5]))
        .prop_map(|(n, pairs, th, m, phi)| ModelParams::new(n, th * 2.0 * PI / n as f64, m, phi, pairs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_symmetric_and_matches_the_mpo(p in params()) {
        let basis = build_basis(p.geometry, p.n, p.k0, true).unwrap();
        let h = build_sparse(&p, &basis).unwrap();
        prop_assert_eq!(h.asymmetry(), 0.0);
        let (products, dense) = CellMpo::new(&p).unwrap().contract_on_products().unwrap();
        for (i, a) in basis.states().iter().enumerate() {
            for (j, b) in basis.states().iter().enumerate() {
                let (x, y) = (products.index_of(a).unwrap(), products.index_of(b).unwrap());
                prop_assert!((dense[(x, y)] - h.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_basis_state_obeys_gauss_law(p in params()) {
        let basis = build_basis(p.geometry, p.n, p.k0, true).unwrap();
        let sites = p.sites();
        for s in basis.states() {
            prop_assert_eq!(s.filling(), p.pairs());
            let links = s.links(sites, p.n);
            let exit = s.exit_label(sites, p.n);
            prop_assert!(s.gauss_residuals(&links, exit, p.n).iter().all(|&r| r == 0));
        }
    }

    #[test]
    fn dense_and_krylov_paths_agree(p in params()) {
        let basis = build_basis(p.geometry, p.n, p.k0, true).unwrap();
        prop_assume!(basis.len() >= 4);
        let h = build_sparse(&p, &basis).unwrap();
        let dense = lowest_eigenpairs(&h, 2, &EdOptions::default()).unwrap();
        let lanczos = lowest_eigenpairs(&h, 2, &EdOptions { dense_threshold: 0, ..Default::default() }).unwrap();
        for i in 0..2 {
            prop_assert!((dense.energies[i] - lanczos.energies[i]).abs() < 1e-9);
            prop_assert!(dense.residuals[i] < 1e-9);
        }
    }

    #[test]
    fn ground_state_observables_are_bounded(p in params()) {
        let (basis, spec) = solve(&p, 1, &EdOptions::default()).unwrap();
        let state = StateRef::Vector { basis: &basis, amplitudes: &spec.vectors[0] };
        let obs = measure(state, &p, None).unwrap();
        let emax = p.algebra().eigenvalues().iter().fold(0.0f64, |a, e| a.max(e.abs()));
        prop_assert!(obs.sigma.abs() <= emax + 1e-12);
        prop_assert!(obs.density_profile.iter().all(|d| (-1e-12..=1.0 + 1e-12).contains(d)));
        let filled: f64 = obs.density_profile.iter().sum();
        prop_assert!((filled - p.pairs() as f64).abs() < 1e-10);
        let s = entropy_profile(state, &p).unwrap();
        prop_assert_eq!(s[0], 0.0);
        prop_assert!(s[p.sites()].abs() < 1e-12);
        prop_assert!(s.iter().all(|&x| x >= -1e-12));
    }
}

#[test]
fn cp_symmetric_sector_has_mirror_entropy() {
    for n in [3usize, 5] {
        let p = ModelParams::new(n, 2.0 * PI / n as f64, -0.8, 0.0, 3).unwrap();
        let (basis, spec) = solve(&p, 1, &EdOptions::default()).unwrap();
        let s = entropy_profile(StateRef::Vector { basis: &basis, amplitudes: &spec.vectors[0] }, &p).unwrap();
        for l in 0..=p.sites() {
            assert!((s[l] - s[p.sites() - l]).abs() < 1e-9, "n = {n}: {s:?}");
        }
    }
}
