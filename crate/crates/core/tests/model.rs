use dissipad_core::fermi_gaussian::eigenbasis;
use dissipad_core::model::{
    build_bipartite, build_branched_2d, build_chain, gauge_transform, polar_pairing, verify_chiral, LatticeSpec, Sublattice,
};
use dissipad_core::C64;
use proptest::prelude::*;

fn mirror_chain(couplings: &[f64], v2: f64) -> LatticeSpec {
    build_chain(couplings.len(), couplings, true).unwrap().with_v2(v2).unwrap()
}

/// Random bipartite lattice: a spanning path plus extra complex edges.
fn bipartite(n_pairs: usize, path: &[f64], extra: &[(usize, usize, f64, f64)]) -> LatticeSpec {
    let mut edges = Vec::new();
    for k in 0..n_pairs {
        edges.push(((Sublattice::A, k), (Sublattice::B, k), C64::new(path[2 * k], 0.0)));
        if k + 1 < n_pairs {
            edges.push(((Sublattice::B, k), (Sublattice::A, k + 1), C64::new(path[2 * k + 1], 0.0)));
        }
    }
    for &(a, b, re, im) in extra {
        edges.push(((Sublattice::A, a % n_pairs), (Sublattice::B, b % n_pairs), C64::new(re, im)));
    }
    build_bipartite(&edges, n_pairs).unwrap()
}

fn sorted_energies(spec: &LatticeSpec) -> Vec<f64> {
    let mut e = eigenbasis(spec).unwrap().energies;
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn mirror_chains_pass_and_same_sublattice_fails() {
    let spec = mirror_chain(&[1.0, 0.8, 1.3], 0.3);
    let report = verify_chiral(&spec).unwrap();
    assert!(report.passed(), "{report:?}");
    let bad = spec.with_dissipator(1, 3).unwrap();
    let report = verify_chiral(&bad).unwrap();
    assert!(!report.constraint_ok);
    assert!(report.notes.iter().any(|n| n.contains("pairing constraint violated")));
}

#[test]
fn branched_lattice_satisfies_the_pairing_constraint() {
    let lat = build_branched_2d([1.0, 0.7, 1.1, 0.9]).unwrap();
    assert!(lat.moment_residual < 1e-10);
    let report = verify_chiral(&lat.spec.clone().with_v2(0.3).unwrap()).unwrap();
    assert!(report.passed(), "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chiral_spectra_are_symmetric(
        n_pairs in 1usize..=5,
        couplings in prop::collection::vec(0.3f64..2.0, 5),
        v2 in 0.01f64..0.99,
    ) {
        let spec = mirror_chain(&couplings[..n_pairs], v2);
        prop_assert!(verify_chiral(&spec).unwrap().passed());
        let e = sorted_energies(&spec);
        let n = e.len();
        for k in 0..n {
            prop_assert!((e[k] + e[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn bipartite_spectra_are_symmetric(
        n_pairs in 1usize..=4,
        path in prop::collection::vec(0.3f64..2.0, 8),
        extra in prop::collection::vec((0usize..4, 0usize..4, -1.0f64..1.0, -1.0f64..1.0), 0..4),
    ) {
        let spec = bipartite(n_pairs, &path, &extra);
        let e = sorted_energies(&spec);
        let n = e.len();
        for k in 0..n {
            prop_assert!((e[k] + e[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn constraint_verdict_is_gauge_invariant(
        n_pairs in 1usize..=4,
        couplings in prop::collection::vec(0.3f64..2.0, 4),
        site0 in 0usize..8,
        site1 in 0usize..8,
        v2 in 0.05f64..0.95,
        theta in prop::collection::vec(-3.2f64..3.2, 8),
    ) {
        let n = 2 * n_pairs;
        let (s0, s1) = (site0 % n, site1 % n);
        prop_assume!(s0 != s1);
        let spec = mirror_chain(&couplings[..n_pairs], v2).with_dissipator(s0, s1).unwrap();
        let rotated = gauge_transform(&spec, &theta[..n]);
        let (a, b) = (verify_chiral(&spec).unwrap(), verify_chiral(&rotated).unwrap());
        prop_assert_eq!(a.constraint_ok, b.constraint_ok);
        prop_assert_eq!(a.chiral_ok, b.chiral_ok);
    }

    #[test]
    fn polar_pairing_reconstructs_the_hopping_block(
        n_pairs in 1usize..=4,
        path in prop::collection::vec(0.3f64..2.0, 8),
        extra in prop::collection::vec((0usize..4, 0usize..4, -1.0f64..1.0, -1.0f64..1.0), 0..4),
    ) {
        let polar = polar_pairing(&bipartite(n_pairs, &path, &extra)).unwrap();
        prop_assume!(!polar.singular);
        prop_assert!(polar.reconstruction_error < 1e-10);
        let wu = polar.w.dot(&polar.u);
        for (x, y) in wu.iter().zip(polar.v.iter()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }
}
