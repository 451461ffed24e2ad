use dissipad_core::linalg::purity;
use dissipad_core::model::{build_chain, uniform_chain, LatticeSpec};
use dissipad_core::spin_exact::{
    build_spin_liouvillian, evolve_density, fidelity_to_pure, rainbow_state, steady_states, vacuum, DissipatorSet, NoiseConfig,
};
use dissipad_core::C64;
use ndarray::Array2;
use proptest::prelude::*;

fn mirror_chain(couplings: &[f64], v2: f64) -> LatticeSpec {
    build_chain(couplings.len(), couplings, true).unwrap().with_v2(v2).unwrap()
}

fn quiet() -> NoiseConfig {
    NoiseConfig::new(0.0, 0.0).unwrap()
}

/// Mixture of two random pure states.
fn random_density(dim: usize, re: &[f64], im: &[f64], w: f64) -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((dim, dim));
    for (k, weight) in [(0, w), (1, 1.0 - w)] {
        let psi: Vec<C64> = (0..dim).map(|i| C64::new(re[k * dim + i], im[k * dim + i])).collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        for i in 0..dim {
            for j in 0..dim {
                rho[[i, j]] += psi[i] * psi[j].conj() * (weight / norm);
            }
        }
    }
    rho
}

#[test]
fn vacuum_is_dark_without_pairing() {
    let spec = uniform_chain(2, 1.0, 0.0, 1.0).unwrap();
    let l = build_spin_liouvillian(&spec, &quiet(), DissipatorSet::SingleBetaL).unwrap();
    for o in evolve_density(&spec, &l, &vacuum(4), &[0.0, 1.0, 10.0, 100.0]).unwrap() {
        assert!(o.excitation.abs() < 1e-12);
        assert!((o.purity - 1.0).abs() < 1e-10);
    }
}

#[test]
fn balanced_pairing_has_one_steady_state_per_tower() {
    for n in [1usize, 2] {
        let spec = uniform_chain(n, 1.0, 0.5, 1.0).unwrap();
        let l = build_spin_liouvillian(&spec, &quiet(), DissipatorSet::SingleBetaL).unwrap();
        assert_eq!(steady_states(&l).unwrap().count, n + 1);
    }
}

#[test]
fn six_site_chain_relaxes_to_the_rainbow_state() {
    let spec = uniform_chain(3, 1.0, 0.4, 1.0).unwrap();
    let l = build_spin_liouvillian(&spec, &quiet(), DissipatorSet::SingleBetaL).unwrap();
    let rho0 = random_density(64, &[0.3; 128], &(0..128).map(|k| (k as f64 * 0.37).sin()).collect::<Vec<_>>(), 0.6);
    let last = evolve_density(&spec, &l, &rho0, &[0.0, 5e4]).unwrap().pop().unwrap();
    assert!(last.rainbow_fidelity > 1.0 - 1e-6, "{}", last.rainbow_fidelity);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_physical(
        v2 in 0.0f64..1.0,
        gamma_phi in 0.0f64..0.2,
        gamma_rel in 0.0f64..0.2,
        re in prop::collection::vec(-1.0f64..1.0, 32),
        im in prop::collection::vec(-1.0f64..1.0, 32),
        w in 0.0f64..1.0,
    ) {
        let spec = uniform_chain(2, 1.0, v2, 1.0).unwrap();
        let noise = NoiseConfig::new(gamma_phi, gamma_rel).unwrap();
        let l = build_spin_liouvillian(&spec, &noise, DissipatorSet::BetaAAndBetaB).unwrap();
        let rho0 = random_density(16, &re, &im, w);
        for o in evolve_density(&spec, &l, &rho0, &[0.0, 0.1, 1.0, 10.0, 100.0]).unwrap() {
            prop_assert!((o.trace - 1.0).abs() < 1e-10);
            prop_assert!(o.min_eigenvalue > -1e-8);
        }
    }

    #[test]
    fn disordered_mirror_chains_keep_the_rainbow_steady_state(
        couplings in prop::collection::vec(0.5f64..2.0, 2),
        v2 in prop_oneof![0.02f64..0.48, 0.52f64..0.98],
    ) {
        let spec = mirror_chain(&couplings, v2);
        let l = build_spin_liouvillian(&spec, &quiet(), DissipatorSet::SingleBetaL).unwrap();
        let ss = steady_states(&l).unwrap();
        prop_assert_eq!(ss.count, 1);
        prop_assert!(purity(&ss.states[0]) > 1.0 - 1e-8);
        prop_assert!(fidelity_to_pure(&ss.states[0], &rainbow_state(2, spec.u, spec.v)) > 1.0 - 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn disordered_six_site_chains_keep_the_rainbow_steady_state(
        couplings in prop::collection::vec(0.5f64..2.0, 3),
        v2 in 0.1f64..0.4,
    ) {
        let spec = mirror_chain(&couplings, v2);
        let l = build_spin_liouvillian(&spec, &quiet(), DissipatorSet::SingleBetaL).unwrap();
        let ss = steady_states(&l).unwrap();
        prop_assert_eq!(ss.count, 1);
        prop_assert!(fidelity_to_pure(&ss.states[0], &rainbow_state(3, spec.u, spec.v)) > 1.0 - 1e-8);
    }
}
