//! Two frequency-modulated qubits coupled to a lossy cavity.
//!
//! Hilbert space ordering is `qubit 1 (x) qubit 2 (x) cavity`; each qubit
//! uses `|g> = 0`, `|e> = 1` and the cavity keeps Fock levels `0..=n_max`.
//! Frequencies are angular, in rad/us, and times are in us.

use ndarray::Array2;
use serde::Serialize;
use std::f64::consts::PI;

use crate::linalg::{bessel_j, bessel_j_sequence, dagger, expm, kron, trace, trace_distance, ONE, ZERO};
use crate::spin_exact::evolve_states;
use crate::superop::{from_dense, lindblad, Jump, Superoperator};
use crate::{Error, Result, C64};

/// Highest Bessel harmonic kept in the time-dependent coupling.
pub const HARMONIC_CUTOFF: i64 = 5;
/// Magnus steps per period of the fastest retained frequency.
pub const STEPS_PER_PERIOD: f64 = 50.0;
/// Largest tolerated population of the top cavity level.
pub const LEAKAGE_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct DrivenCavityParams {
    pub omega_c: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub g_1: f64,
    pub g_2: f64,
    pub xi_1: f64,
    pub xi_2: f64,
    pub kappa: f64,
    pub n_max: usize,
}

impl DrivenCavityParams {
    /// Qubit 1 is modulated at the red sideband `omega_1 - omega_c` and qubit 2
    /// at the blue sideband `omega_2 + omega_c`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        omega_c: f64,
        omega_1: f64,
        omega_2: f64,
        g_1: f64,
        g_2: f64,
        xi_1: f64,
        xi_2: f64,
        kappa: f64,
        n_max: usize,
    ) -> Result<Self> {
        let all = [omega_c, omega_1, omega_2, g_1, g_2, xi_1, xi_2, kappa];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("cavity parameters must be finite".into()));
        }
        if kappa <= 0.0 {
            return Err(Error::InvalidSpec(format!("cavity decay rate must be positive, got {kappa}")));
        }
        if n_max < 2 {
            return Err(Error::InvalidSpec(format!("cavity truncation n_max = {n_max} is below 2")));
        }
        if omega_c <= 0.0 || omega_1 <= omega_c || omega_2 <= 0.0 {
            return Err(Error::InvalidSpec("need 0 < omega_c < omega_1 and omega_2 > 0 for positive sideband frequencies".into()));
        }
        if xi_1 < 0.0 || xi_2 < 0.0 {
            return Err(Error::InvalidSpec("modulation depths must be non-negative".into()));
        }
        Ok(Self { omega_c, omega_1, omega_2, g_1, g_2, xi_1, xi_2, kappa, n_max })
    }

    /// Chooses the bare couplings so that the resonant couplings have magnitude
    /// `g_eff * sqrt(1 - v2)` and `g_eff * sqrt(v2)` at a common modulation depth `xi`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_effective(
        g_eff: f64,
        v2: f64,
        kappa: f64,
        xi: f64,
        omega_c: f64,
        omega_1: f64,
        omega_2: f64,
        n_max: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&v2) {
            return Err(Error::InvalidSpec(format!("v^2 = {v2} outside [0, 1]")));
        }
        let j = bessel_j(1, xi).abs();
        if j < 1e-12 {
            return Err(Error::Degenerate(format!("J_1({xi}) vanishes")));
        }
        let g1 = g_eff * (1.0 - v2).sqrt() / j;
        let g2 = g_eff * v2.sqrt() / j;
        Self::new(omega_c, omega_1, omega_2, g1, g2, xi, xi, kappa, n_max)
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_1 - self.omega_c
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_2 + self.omega_c
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1)
    }

    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        let p = self.clone();
        Self::new(p.omega_c, p.omega_1, p.omega_2, p.g_1, p.g_2, p.xi_1, p.xi_2, p.kappa, n_max)
    }
}

/// Device numbers for the sideband scheme; frequencies in GHz and MHz (cyclic).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardwarePreset {
    pub qubit_ghz: f64,
    pub cavity_ghz: f64,
    pub blue_sideband_ghz: f64,
    pub drive_amplitude_ghz: f64,
    pub kappa_mhz: f64,
    pub g_mhz: f64,
    pub n_max: usize,
}

impl Default for HardwarePreset {
    fn default() -> Self {
        Self {
            qubit_ghz: 4.75,
            cavity_ghz: 2.75,
            blue_sideband_ghz: 7.5,
            drive_amplitude_ghz: 1.25,
            kappa_mhz: 10.0,
            g_mhz: 20.0,
            n_max: 6,
        }
    }
}

impl HardwarePreset {
    /// Modulation depth is the drive amplitude over the modulation frequency.
    pub fn params(&self) -> Result<DrivenCavityParams> {
        let w = |f_mhz: f64| 2.0 * PI * f_mhz;
        let omega_c = w(self.cavity_ghz * 1e3);
        let omega_1 = w(self.qubit_ghz * 1e3);
        let omega_2 = w(self.blue_sideband_ghz * 1e3) - omega_c;
        let red = self.qubit_ghz - self.cavity_ghz;
        if red <= 0.0 || self.blue_sideband_ghz <= self.cavity_ghz {
            return Err(Error::InvalidSpec("sideband frequencies must be positive".into()));
        }
        DrivenCavityParams::new(
            omega_c,
            omega_1,
            omega_2,
            w(self.g_mhz),
            w(self.g_mhz),
            self.drive_amplitude_ghz / red,
            self.drive_amplitude_ghz / self.blue_sideband_ghz,
            w(self.kappa_mhz),
            self.n_max,
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveModel {
    pub g1_eff: f64,
    pub g2_eff: f64,
    pub g: f64,
    pub u: f64,
    pub v: f64,
    pub rate: f64,
}

/// Resonant couplings `g_i' = J_{-1}(xi_i) g_i` and the eliminated-cavity rate
/// `4 g^2 / kappa`. The common sign of `u` and `v` does not enter the dissipator.
pub fn effective_model(params: &DrivenCavityParams) -> Result<EffectiveModel> {
    let g1_eff = bessel_j(-1, params.xi_1) * params.g_1;
    let g2_eff = bessel_j(-1, params.xi_2) * params.g_2;
    let g = g1_eff.hypot(g2_eff);
    if g == 0.0 {
        return Err(Error::Degenerate("both resonant couplings vanish".into()));
    }
    Ok(EffectiveModel { g1_eff, g2_eff, g, u: g1_eff / g, v: g2_eff / g, rate: 4.0 * g * g / params.kappa })
}

/// Modulation depth of qubit 2 that balances the two resonant couplings (`v^2 = 1/2`).
pub fn balancing_depth(params: &DrivenCavityParams) -> Result<f64> {
    let target = (bessel_j(1, params.xi_1) * params.g_1).abs();
    // J_1 increases monotonically up to its first maximum at x = 1.8412.
    let (mut lo, mut hi) = (0.0, 1.841_183_781_340_659);
    if (bessel_j(1, hi) * params.g_2).abs() < target {
        return Err(Error::Degenerate("qubit 2 coupling too weak to balance qubit 1".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (bessel_j(1, mid) * params.g_2).abs() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Truncated expansion `sum_{|n| <= cutoff} J_n(xi) e^{i n theta}` of `e^{i xi sin theta}`.
pub fn bessel_expansion(xi: f64, theta: f64, cutoff: usize) -> C64 {
    let j = bessel_j_sequence(cutoff, xi);
    let mut acc = C64::new(j[0], 0.0);
    for (n, &jn) in j.iter().enumerate().skip(1) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += C64::from_polar(jn, n as f64 * theta) + C64::from_polar(sign * jn, -(n as f64) * theta);
    }
    acc
}

struct Operators {
    a: Array2<C64>,
    sm1: Array2<C64>,
    sm2: Array2<C64>,
}

fn operators(n_max: usize) -> Operators {
    let nc = n_max + 1;
    let mut a = Array2::zeros((nc, nc));
    for n in 1..nc {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let mut sm = Array2::zeros((2, 2));
    sm[[0, 1]] = ONE;
    let i2 = Array2::eye(2);
    let ic = Array2::eye(nc);
    Operators {
        a: kron(&kron(&i2, &i2), &a),
        sm1: kron(&kron(&sm, &i2), &ic),
        sm2: kron(&kron(&i2, &sm), &ic),
    }
}

/// Time-independent resonant model `a^dag (g1' s1^- + g2' s2^+) + h.c.` with loss `kappa D[a]`.
pub fn rwa_liouvillian(params: &DrivenCavityParams) -> Result<Superoperator> {
    let eff = effective_model(params)?;
    let ops = operators(params.n_max);
    let k = dagger(&ops.a).dot(&(ops.sm1.mapv(|x| x * eff.g1_eff) + dagger(&ops.sm2).mapv(|x| x * eff.g2_eff)));
    let h = &k + &dagger(&k);
    Ok(lindblad(&from_dense(&h), &[Jump { rate: params.kappa, op: from_dense(&ops.a), label: "cavity loss".into() }]))
}

/// Two-qubit Lindbladian `rate * D[u s1^- + v s2^+]` left after eliminating the cavity.
pub fn effective_liouvillian(model: &EffectiveModel) -> Superoperator {
    let mut sm = Array2::zeros((2, 2));
    sm[[0, 1]] = ONE;
    let i2: Array2<C64> = Array2::eye(2);
    let op = kron(&sm, &i2).mapv(|x| x * model.u) + kron(&i2, &dagger(&sm)).mapv(|x| x * model.v);
    lindblad(&from_dense(&Array2::zeros((4, 4))), &[Jump { rate: model.rate, op: from_dense(&op), label: "eliminated cavity".into() }])
}

#[derive(Clone, Debug, Serialize)]
pub struct CavitySample {
    pub t: f64,
    #[serde(skip)]
    pub qubits: Array2<C64>,
    pub trace: f64,
    pub photons: f64,
    pub top_level: f64,
    pub excitation_1: f64,
    pub excitation_2: f64,
}

/// Partial trace over the cavity.
pub fn reduce_to_qubits(rho: &Array2<C64>, n_max: usize) -> Array2<C64> {
    let nc = n_max + 1;
    Array2::from_shape_fn((4, 4), |(i, j)| (0..nc).map(|n| rho[[i * nc + n, j * nc + n]]).sum())
}

/// Embeds a two-qubit state with the cavity in vacuum.
pub fn with_cavity_vacuum(qubits: &Array2<C64>, n_max: usize) -> Array2<C64> {
    let mut vac = Array2::zeros((n_max + 1, n_max + 1));
    vac[[0, 0]] = ONE;
    kron(qubits, &vac)
}

/// Product state with qubit 1 excited and qubit 2 in its ground state.
pub fn excited_ground() -> Array2<C64> {
    let mut rho = Array2::zeros((4, 4));
    rho[[2, 2]] = ONE;
    rho
}

fn sample(rho: &Array2<C64>, t: f64, n_max: usize) -> CavitySample {
    let nc = n_max + 1;
    let q = reduce_to_qubits(rho, n_max);
    let mut photons = 0.0;
    let mut top = 0.0;
    for b in 0..4 {
        for n in 0..nc {
            let p = rho[[b * nc + n, b * nc + n]].re;
            photons += n as f64 * p;
            if n == n_max {
                top += p;
            }
        }
    }
    CavitySample {
        t,
        trace: trace(rho).re,
        photons,
        top_level: top,
        excitation_1: (q[[2, 2]] + q[[3, 3]]).re,
        excitation_2: (q[[1, 1]] + q[[3, 3]]).re,
        qubits: q,
    }
}

fn check_leakage(samples: &[CavitySample], n_max: usize) -> Result<()> {
    let worst = samples.iter().map(|s| s.top_level).fold(0.0, f64::max);
    if worst > LEAKAGE_TOL {
        return Err(Error::Leakage { leakage: worst, suggested: 2 * n_max });
    }
    Ok(())
}

/// Largest angular frequency carried by the retained harmonics.
pub fn max_frequency(params: &DrivenCavityParams) -> f64 {
    let mut w: f64 = 0.0;
    for n in -HARMONIC_CUTOFF..=HARMONIC_CUTOFF {
        let nf = n as f64;
        for s in [-1.0, 1.0] {
            w = w.max((s * params.omega_c - params.omega_1 - nf * params.omega_r()).abs());
            w = w.max((s * params.omega_c - params.omega_2 - nf * params.omega_b()).abs());
        }
    }
    w
}

struct Modulation {
    harmonics: Vec<(f64, f64)>,
}

impl Modulation {
    fn new(xi: f64, carrier: f64, modulation: f64) -> Self {
        let j = bessel_j_sequence(HARMONIC_CUTOFF as usize, xi);
        let mut harmonics = Vec::new();
        for n in -HARMONIC_CUTOFF..=HARMONIC_CUTOFF {
            let jn = j[n.unsigned_abs() as usize] * if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 };
            harmonics.push((jn, carrier + n as f64 * modulation));
        }
        Self { harmonics }
    }

    /// `sum_n J_n(xi) e^{-i (omega + n nu) t}`.
    fn at(&self, t: f64) -> C64 {
        self.harmonics.iter().map(|&(j, w)| C64::from_polar(j, -w * t)).sum()
    }
}

fn counterrotating_trajectory(params: &DrivenCavityParams, rho0: &Array2<C64>, times: &[f64]) -> Result<Vec<Array2<C64>>> {
    let ops = operators(params.n_max);
    let ad = dagger(&ops.a);
    let sp1 = dagger(&ops.sm1);
    let sp2 = dagger(&ops.sm2);
    let ada = ad.dot(&ops.a);
    let f1 = Modulation::new(params.xi_1, params.omega_1, params.omega_r());
    let f2 = Modulation::new(params.xi_2, params.omega_2, params.omega_b());
    let hamiltonian = |t: f64| -> Array2<C64> {
        let field = ops.a.mapv(|x| x * C64::from_polar(1.0, -params.omega_c * t)) + ad.mapv(|x| x * C64::from_polar(1.0, params.omega_c * t));
        let (m1, m2) = (f1.at(t), f2.at(t));
        let q = ops.sm1.mapv(|x| x * m1 * params.g_1)
            + sp1.mapv(|x| x * m1.conj() * params.g_1)
            + ops.sm2.mapv(|x| x * m2 * params.g_2)
            + sp2.mapv(|x| x * m2.conj() * params.g_2);
        field.dot(&q)
    };
    let kappa = params.kappa;
    let loss = |rho: &Array2<C64>| -> Array2<C64> {
        let jump = ops.a.dot(rho).dot(&ad);
        let anti = ada.dot(rho) + rho.dot(&ada);
        (jump - anti.mapv(|x| x * 0.5)).mapv(|x| x * kappa)
    };
    let half_loss = |rho: &Array2<C64>, h: f64| -> Array2<C64> {
        let mut term = rho.clone();
        let mut out = rho.clone();
        for k in 1..=4 {
            term = loss(&term).mapv(|x| x * (h / k as f64));
            out += &term;
        }
        out
    };
    let dt_max = 2.0 * PI / (STEPS_PER_PERIOD * max_frequency(params));
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = (span / dt_max).ceil().max(0.0) as usize;
        if steps > 0 {
            let dt = span / steps as f64;
            for k in 0..steps {
                let mid = t + (k as f64 + 0.5) * dt;
                let u = expm(&hamiltonian(mid).mapv(|x| x * C64::new(0.0, -dt)))?;
                rho = half_loss(&rho, 0.5 * dt);
                rho = u.dot(&rho).dot(&dagger(&u));
                rho = half_loss(&rho, 0.5 * dt);
            }
            if rho.iter().any(|x| !x.is_finite()) {
                return Err(Error::Integrator { t: target, msg: "non-finite density matrix".into() });
            }
        }
        t = target;
        out.push(rho.clone());
    }
    Ok(out)
}

/// Qubit-cavity master equation in the frame rotating with the bare and
/// modulated frequencies. With `keep_counterrotating` the full sum over
/// harmonics `|n| <= 5` is propagated with midpoint (Magnus-1) unitary steps
/// and Strang-split cavity loss; otherwise only the resonant couplings remain.
pub fn simulate_rotating_frame(
    params: &DrivenCavityParams,
    keep_counterrotating: bool,
    qubits0: &Array2<C64>,
    times: &[f64],
) -> Result<Vec<CavitySample>> {
    if qubits0.dim() != (4, 4) {
        return Err(Error::InvalidSpec("initial qubit state must be 4 x 4".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Integrator { t: times.first().copied().unwrap_or(0.0), msg: "times must be increasing and non-negative".into() });
    }
    let rho0 = with_cavity_vacuum(qubits0, params.n_max);
    let states = if keep_counterrotating {
        counterrotating_trajectory(params, &rho0, times)?
    } else {
        evolve_states(&rwa_liouvillian(params)?, &rho0, times)?
    };
    let samples: Vec<CavitySample> = states.iter().zip(times).map(|(rho, &t)| sample(rho, t, params.n_max)).collect();
    check_leakage(&samples, params.n_max)?;
    Ok(samples)
}

/// Two-qubit trajectory under the eliminated-cavity Lindbladian.
pub fn simulate_effective(model: &EffectiveModel, qubits0: &Array2<C64>, times: &[f64]) -> Result<Vec<Array2<C64>>> {
    evolve_states(&effective_liouvillian(model), qubits0, times)
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationReport {
    pub kappa_over_g: f64,
    pub v2: f64,
    pub predicted_rate: f64,
    pub fitted_rate: f64,
    pub rate_error: f64,
    pub max_trace_distance: f64,
    /// Final population of the states annihilated by the jump: the paired
    /// state and `|g e>`.
    pub final_dark_population: f64,
    pub trace_distances: Vec<f64>,
}

/// Standard time grid `t in [0, 10 / rate]` with `points` samples.
pub fn elimination_times(model: &EffectiveModel, points: usize) -> Vec<f64> {
    let t_end = 10.0 / model.rate;
    (0..points).map(|k| t_end * k as f64 / (points - 1).max(1) as f64).collect()
}

fn mismatch(full: &[Array2<C64>], model: &EffectiveModel, rate: f64, qubits0: &Array2<C64>, times: &[f64]) -> Result<f64> {
    let trial = EffectiveModel { rate, ..model.clone() };
    let eff = simulate_effective(&trial, qubits0, times)?;
    Ok(full.iter().zip(&eff).map(|(a, b)| (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum())
}

/// Runs the resonant cavity model and the eliminated two-qubit model side by
/// side from the same qubit state, with the cavity starting in vacuum. The
/// fitted rate minimises the squared Frobenius mismatch of the two qubit
/// trajectories over the effective rate.
pub fn verify_elimination(params: &DrivenCavityParams, qubits0: &Array2<C64>, times: &[f64]) -> Result<EliminationReport> {
    let model = effective_model(params)?;
    let full: Vec<Array2<C64>> = simulate_rotating_frame(params, false, qubits0, times)?.into_iter().map(|s| s.qubits).collect();
    let eff = simulate_effective(&model, qubits0, times)?;
    let trace_distances = full.iter().zip(&eff).map(|(a, b)| trace_distance(a, b)).collect::<Result<Vec<f64>>>()?;
    let max_trace_distance = trace_distances.iter().cloned().fold(0.0, f64::max);

    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.5 * model.rate, 1.5 * model.rate);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = mismatch(&full, &model, x1, qubits0, times)?;
    let mut f2 = mismatch(&full, &model, x2, qubits0, times)?;
    while hi - lo > 1e-6 * model.rate {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = mismatch(&full, &model, x1, qubits0, times)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = mismatch(&full, &model, x2, qubits0, times)?;
        }
    }
    let fitted_rate = 0.5 * (lo + hi);

    let last = full.last().cloned().unwrap_or_else(|| Array2::zeros((4, 4)));
    let dark = dark_state(&model);
    let paired = dark.iter().enumerate().map(|(i, ai)| dark.iter().enumerate().map(|(j, aj)| ai.conj() * last[[i, j]] * aj).sum::<C64>()).sum::<C64>().re;
    let dark_pop = paired + last[[1, 1]].re;
    Ok(EliminationReport {
        kappa_over_g: params.kappa / model.g,
        v2: model.v * model.v,
        predicted_rate: model.rate,
        fitted_rate,
        rate_error: (fitted_rate - model.rate).abs() / model.rate,
        max_trace_distance,
        final_dark_population: dark_pop,
        trace_distances,
    })
}

/// The two-qubit state annihilated by `u s1^- + v s2^+`: `u|g g> - v|e e>`.
pub fn dark_state(model: &EffectiveModel) -> Vec<C64> {
    vec![C64::new(model.u, 0.0), ZERO, ZERO, C64::new(-model.v, 0.0)]
}
