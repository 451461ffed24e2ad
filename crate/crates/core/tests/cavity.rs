use dissipad_core::cavity::*;
use dissipad_core::fit::linear_fit;
use dissipad_core::linalg::{min_eigenvalue_herm, trace_distance};
use dissipad_core::C64;
use ndarray::Array2;

fn params(kappa_over_g: f64, v2: f64) -> DrivenCavityParams {
    DrivenCavityParams::from_effective(1.0, v2, kappa_over_g, 0.6, 40.0, 90.0, 60.0, 6).unwrap()
}

#[test]
fn elimination_matches_effective_model() {
    let p = params(20.0, 0.3);
    let m = effective_model(&p).unwrap();
    let r = verify_elimination(&p, &excited_ground(), &elimination_times(&m, 101)).unwrap();
    assert!((r.kappa_over_g - 20.0).abs() < 1e-12);
    assert!(r.max_trace_distance < 0.05);
    assert!(r.rate_error < 0.1);
}

#[test]
fn single_qubit_cooling_rate() {
    let p = params(20.0, 0.0);
    let m = effective_model(&p).unwrap();
    let times = elimination_times(&m, 101);
    let r = verify_elimination(&p, &excited_ground(), &times).unwrap();
    assert!(r.rate_error < 0.1, "{r:?}");
    let traj = simulate_rotating_frame(&p, false, &excited_ground(), &times).unwrap();
    let pts: Vec<(f64, f64)> = traj.iter().filter(|s| s.excitation_1 > 1e-3 && s.t > 0.0).map(|s| (s.t, s.excitation_1.ln())).collect();
    let (slope, _, _) = linear_fit(&pts);
    assert!((-slope - m.rate).abs() / m.rate < 0.1, "fitted {} vs {}", -slope, m.rate);
}

#[test]
fn elimination_error_shrinks_with_cavity_loss() {
    let mut errs = Vec::new();
    for ratio in [5.0, 10.0, 20.0, 40.0] {
        let p = params(ratio, 0.3);
        let m = effective_model(&p).unwrap();
        errs.push(verify_elimination(&p, &excited_ground(), &elimination_times(&m, 81)).unwrap().max_trace_distance);
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn resonant_model_reaches_dark_state() {
    let p = params(20.0, 0.3);
    let m = effective_model(&p).unwrap();
    let t_end = 40.0 / m.rate;
    let r = verify_elimination(&p, &excited_ground(), &[0.0, 0.5 * t_end, t_end]).unwrap();
    assert!(r.final_dark_population > 0.99, "{r:?}");
}

#[test]
fn frozen_qubits_when_couplings_vanish() {
    let p = DrivenCavityParams::new(40.0, 90.0, 60.0, 0.0, 0.0, 0.6, 0.6, 2.0, 4).unwrap();
    let mut q = Array2::zeros((4, 4));
    q[[1, 1]] = C64::new(0.5, 0.0);
    q[[2, 2]] = C64::new(0.5, 0.0);
    q[[1, 2]] = C64::new(0.5, 0.0);
    q[[2, 1]] = C64::new(0.5, 0.0);
    let traj = simulate_rotating_frame(&p, true, &q, &[0.0, 0.5, 1.0]).unwrap();
    for s in &traj {
        assert!(trace_distance(&s.qubits, &q).unwrap() < 1e-12);
        assert!(s.photons.abs() < 1e-14);
    }
}

#[test]
fn truncation_leakage_is_refused() {
    let p = DrivenCavityParams::from_effective(1.0, 0.9, 0.5, 0.6, 40.0, 90.0, 60.0, 2).unwrap();
    let err = simulate_rotating_frame(&p, false, &excited_ground(), &[0.0, 2.0, 4.0, 8.0]);
    assert!(matches!(err, Err(dissipad_core::Error::Leakage { suggested: 4, .. })), "{err:?}");
}

#[test]
fn trajectories_stay_physical() {
    let p = params(10.0, 0.3);
    let m = effective_model(&p).unwrap();
    let times = elimination_times(&m, 21);
    for cr in [false, true] {
        let traj = simulate_rotating_frame(&p, cr, &excited_ground(), &times[..if cr { 4 } else { 21 }]).unwrap();
        for s in &traj {
            assert!((s.trace - 1.0).abs() < 1e-10);
            assert!(min_eigenvalue_herm(&s.qubits).unwrap() > -1e-8);
        }
    }
}

#[test]
fn counterrotating_corrections_scale_inversely_with_frequency() {
    let mut pts = Vec::new();
    for scale in [20.0, 40.0, 80.0] {
        let p = DrivenCavityParams::from_effective(1.0, 0.3, 2.0, 1.2, scale, 2.0 * scale, 1.5 * scale, 10).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let rwa = simulate_rotating_frame(&p, false, &excited_ground(), &times).unwrap();
        let full = simulate_rotating_frame(&p, true, &excited_ground(), &times).unwrap();
        let dev = rwa.iter().zip(&full).map(|(a, b)| trace_distance(&a.qubits, &b.qubits).unwrap()).fold(0.0, f64::max);
        pts.push((scale.ln(), dev.ln()));
    }
    let (slope, _, _) = linear_fit(&pts);
    assert!(pts.windows(2).all(|w| w[1].1 < w[0].1));
    assert!((-1.5..=-0.5).contains(&slope), "slope {slope}");
}
