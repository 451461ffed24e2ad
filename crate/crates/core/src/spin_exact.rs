//! Exact Lindblad treatment of the qubit lattice.
//!
//! Basis states are integers whose most significant bit is site 0 (chain label
//! `-N`); a set bit means the qubit is excited (`sigma^z = +1`).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigValsh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fit::{relaxation_rate, RelaxationEstimate};
use crate::linalg::{dagger, hermitize, purity, trace, ONE, ZERO};
use crate::model::LatticeSpec;
use crate::propagate::{arnoldi, dot, norm, Chebyshev};
use crate::superop::{apply, block_leakage, from_triplets, lindblad, restrict, Jump, SparseOp, Superoperator};
use crate::{Error, Result, C64};

/// Largest register handled by the exact solver unless overridden.
pub const DEFAULT_SITE_CAP: usize = 12;
/// Registers up to this size use dense steady-state solves.
pub const DENSE_SITE_LIMIT: usize = 4;
/// Largest register for which a dense count backs up an incomplete Krylov count.
pub const DENSE_COUNT_LIMIT: usize = 6;
const KRYLOV_TAU: f64 = 40.0;
const KRYLOV_DIM: usize = 24;
const NULL_TOL: f64 = 1e-10;

fn bit(n_sites: usize, k: usize) -> usize {
    1 << (n_sites - 1 - k)
}

pub fn sigma_minus(n_sites: usize, k: usize) -> SparseOp {
    let b = bit(n_sites, k);
    let entries: Vec<_> = (0..1usize << n_sites).filter(|s| s & b != 0).map(|s| (s ^ b, s, ONE)).collect();
    from_triplets(1 << n_sites, 1 << n_sites, &entries)
}

pub fn sigma_plus(n_sites: usize, k: usize) -> SparseOp {
    crate::superop::transpose(&sigma_minus(n_sites, k))
}

pub fn sigma_z(n_sites: usize, k: usize) -> SparseOp {
    let b = bit(n_sites, k);
    let entries: Vec<_> = (0..1usize << n_sites).map(|s| (s, s, if s & b != 0 { ONE } else { -ONE })).collect();
    from_triplets(1 << n_sites, 1 << n_sites, &entries)
}

pub fn sigma_x(n_sites: usize, k: usize) -> SparseOp {
    crate::superop::add(&sigma_minus(n_sites, k), &sigma_plus(n_sites, k))
}

/// `(-1)^{n_exc}` of a basis state, equal to `prod_i (-sigma^z_i)`.
pub fn state_parity(s: usize) -> f64 {
    if s.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `H_S = -sum_ij H_ij sigma^+_i sigma^-_j`.
pub fn spin_hamiltonian(spec: &LatticeSpec) -> SparseOp {
    let n = spec.n_sites();
    let dim = 1usize << n;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let h = spec.hopping[[i, j]];
            if h == ZERO {
                continue;
            }
            let (bi, bj) = (bit(n, i), bit(n, j));
            for s in 0..dim {
                if i == j {
                    if s & bi != 0 {
                        entries.push((s, s, -h));
                    }
                } else if s & bj != 0 && s & bi == 0 {
                    entries.push((s ^ bj ^ bi, s, -h));
                }
            }
        }
    }
    from_triplets(dim, dim, &entries)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NoiseConfig {
    pub gamma_phi: f64,
    pub gamma_rel: f64,
}

impl NoiseConfig {
    pub fn new(gamma_phi: f64, gamma_rel: f64) -> Result<Self> {
        if !(gamma_phi >= 0.0 && gamma_rel >= 0.0) {
            return Err(Error::InvalidSpec("noise rates must be non-negative".into()));
        }
        Ok(NoiseConfig { gamma_phi, gamma_rel })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DissipatorSet {
    /// `Gamma D[u sigma^-_0 + v e^{i phi} sigma^+_1]`.
    SingleBetaL,
    /// Adds the mirrored jump `u sigma^-_1 + v e^{i phi} sigma^+_0` at the same rate.
    BetaAAndBetaB,
}

/// Engineered and noise jump operators of the spin model.
pub fn spin_jumps(spec: &LatticeSpec, noise: &NoiseConfig, set: DissipatorSet) -> Vec<Jump> {
    let n = spec.n_sites();
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    let ve = C64::from_polar(spec.v, spec.phi);
    let beta = |a: usize, b: usize| {
        crate::superop::add(
            &crate::superop::scale(&sigma_minus(n, a), C64::new(spec.u, 0.0)),
            &crate::superop::scale(&sigma_plus(n, b), ve),
        )
    };
    let mut jumps = vec![Jump { rate: spec.gamma, op: beta(d0, d1), label: "beta_A".into() }];
    if set == DissipatorSet::BetaAAndBetaB {
        jumps.push(Jump { rate: spec.gamma, op: beta(d1, d0), label: "beta_B".into() });
    }
    for k in 0..n {
        if noise.gamma_phi > 0.0 {
            jumps.push(Jump { rate: noise.gamma_phi, op: sigma_z(n, k), label: format!("dephasing_{k}") });
        }
        if noise.gamma_rel > 0.0 {
            jumps.push(Jump { rate: noise.gamma_rel, op: sigma_minus(n, k), label: format!("relaxation_{k}") });
        }
    }
    jumps
}

pub fn build_spin_liouvillian(spec: &LatticeSpec, noise: &NoiseConfig, set: DissipatorSet) -> Result<Superoperator> {
    build_spin_liouvillian_capped(spec, noise, set, DEFAULT_SITE_CAP)
}

pub fn build_spin_liouvillian_capped(
    spec: &LatticeSpec,
    noise: &NoiseConfig,
    set: DissipatorSet,
    cap: usize,
) -> Result<Superoperator> {
    spec.validate()?;
    let n = spec.n_sites();
    if n > cap {
        return Err(Error::DimensionCap { sites: n, cap });
    }
    Ok(lindblad(&spin_hamiltonian(spec), &spin_jumps(spec, noise, set)))
}

/// Vectorized indices `i * d + j` whose total excitation parity `n_i + n_j` is even (or odd).
pub fn superparity_indices(hilbert_dim: usize, even: bool) -> Vec<usize> {
    let mut out = Vec::with_capacity(hilbert_dim * hilbert_dim / 2);
    for i in 0..hilbert_dim {
        for j in 0..hilbert_dim {
            if ((i.count_ones() + j.count_ones()) % 2 == 0) == even {
                out.push(i * hilbert_dim + j);
            }
        }
    }
    out
}

fn to_vec(rho: &Array2<C64>) -> Vec<C64> {
    rho.iter().cloned().collect()
}

fn to_mat(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), v.to_vec()).unwrap()
}

pub fn excitation_number(rho: &Array2<C64>) -> f64 {
    (0..rho.nrows()).map(|s| rho[[s, s]].re * s.count_ones() as f64).sum()
}

pub fn parity_expectation(rho: &Array2<C64>) -> f64 {
    (0..rho.nrows()).map(|s| rho[[s, s]].re * state_parity(s)).sum()
}

pub fn expectation(op: &SparseOp, rho: &Array2<C64>) -> C64 {
    op.iter().map(|(v, (r, c))| v * rho[[c, r]]).sum()
}

pub fn vacuum(n_sites: usize) -> Array2<C64> {
    let d = 1 << n_sites;
    let mut rho = Array2::zeros((d, d));
    rho[[0, 0]] = ONE;
    rho
}

pub fn projector(psi: &Array1<C64>) -> Array2<C64> {
    let d = psi.len();
    Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj())
}

/// `prod_{i=1..N} (u + (-1)^i v sigma^+_i sigma^+_{-i}) |0>`.
pub fn rainbow_state(n_pairs: usize, u: f64, v: f64) -> Array1<C64> {
    rainbow_state_with_phase(n_pairs, u, v, 0.0)
}

/// Rainbow state for a pairing phase `phi`: each pair amplitude carries `e^{i phi}`.
pub fn rainbow_state_with_phase(n_pairs: usize, u: f64, v: f64, phi: f64) -> Array1<C64> {
    let n = 2 * n_pairs;
    let mut psi = Array1::zeros(1 << n);
    psi[0] = ONE;
    for i in 1..=n_pairs {
        let left = bit(n, n_pairs - i);
        let right = bit(n, n_pairs - 1 + i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let amp = C64::from_polar(sign * v, phi);
        let mut next = Array1::zeros(1 << n);
        for s in 0..1usize << n {
            if psi[s] == ZERO {
                continue;
            }
            next[s] += psi[s] * u;
            next[s | left | right] += psi[s] * amp;
        }
        psi = next;
    }
    let nrm = psi.iter().map(|z: &C64| z.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv(|z| z / nrm)
}

pub fn fidelity_to_pure(rho: &Array2<C64>, psi: &Array1<C64>) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(i, a)| {
            let row: C64 = psi.iter().enumerate().map(|(j, b)| rho[[i, j]] * b).sum();
            a.conj() * row
        })
        .sum::<C64>()
        .re
}

/// Reduced state of sites `(a, b)`, with `a` as the more significant qubit.
pub fn reduced_two_site(rho: &Array2<C64>, n_sites: usize, a: usize, b: usize) -> Array2<C64> {
    let (ba, bb) = (bit(n_sites, a), bit(n_sites, b));
    let local = |s: usize| ((s & ba != 0) as usize) * 2 + (s & bb != 0) as usize;
    let mut out = Array2::zeros((4, 4));
    let d = rho.nrows();
    for s in 0..d {
        let rest = s & !(ba | bb);
        for la in 0..4 {
            let t = rest | if la & 2 != 0 { ba } else { 0 } | if la & 1 != 0 { bb } else { 0 };
            let v = rho[[s, t]];
            if v != ZERO {
                out[[local(s), la]] += v;
            }
        }
    }
    out
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence_2q(rho: &Array2<C64>) -> Result<f64> {
    let mut flip = Array2::zeros((4, 4));
    for (i, s) in [(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
        flip[[i, 3 - i]] = C64::new(s, 0.0);
    }
    let tilde = flip.dot(&rho.mapv(|z| z.conj())).dot(&flip);
    let (ev, _) = rho.dot(&tilde).eig()?;
    let mut lam: Vec<f64> = ev.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

pub fn concurrence(rho: &Array2<C64>, n_sites: usize, pair: (usize, usize)) -> Result<f64> {
    concurrence_2q(&reduced_two_site(rho, n_sites, pair.0, pair.1))
}

/// Site indices of bond `l` (`1..=N`), pairing labels `-l` and `l`.
pub fn bond_sites(n_pairs: usize, l: usize) -> (usize, usize) {
    (n_pairs - l, n_pairs - 1 + l)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpinObservables {
    pub t: f64,
    pub trace: f64,
    pub excitation: f64,
    pub parity: f64,
    pub purity: f64,
    pub rainbow_fidelity: f64,
    pub concurrences: Vec<f64>,
    pub energy: f64,
    pub min_eigenvalue: f64,
}

fn observe(rho: &Array2<C64>, t: f64, spec: &LatticeSpec, h: &SparseOp, rainbow: &Array1<C64>) -> Result<SpinObservables> {
    let n = spec.n_sites();
    let herm = hermitize(rho);
    let min_eig = herm.eigvalsh(UPLO::Lower)?[0];
    let concurrences = (1..=spec.n_pairs)
        .map(|l| concurrence(rho, n, bond_sites(spec.n_pairs, l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpinObservables {
        t,
        trace: trace(rho).re,
        excitation: excitation_number(rho),
        parity: parity_expectation(rho),
        purity: purity(rho),
        rainbow_fidelity: fidelity_to_pure(rho, rainbow),
        concurrences,
        energy: expectation(h, rho).re,
        min_eigenvalue: min_eig,
    })
}

/// Evolution of a spin-register density matrix under `L`.
///
/// Uses the dense exponential for superoperators up to dimension 256 and
/// Chebyshev propagation within invariant parity sectors otherwise.
pub fn evolve_states(l: &Superoperator, rho0: &Array2<C64>, times: &[f64]) -> Result<Vec<Array2<C64>>> {
    let d = rho0.nrows();
    if d * d != l.dim {
        return Err(Error::InvalidSpec("initial state does not match the superoperator".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Integrator { t: times.first().copied().unwrap_or(0.0), msg: "times must be increasing and non-negative".into() });
    }
    if l.dim <= 256 {
        let dense = l.to_dense();
        let mut out = Vec::with_capacity(times.len());
        let x = Array1::from(to_vec(rho0));
        for &t in times {
            let e = crate::linalg::expm(&dense.mapv(|z| z * t))?;
            out.push(to_mat(e.dot(&x).as_slice().unwrap(), d));
        }
        return Ok(out);
    }
    let x = to_vec(rho0);
    let mut total: Vec<Array2<C64>> = (0..times.len()).map(|_| Array2::zeros((d, d))).collect();
    let sectors: Vec<Vec<usize>> = {
        let even = superparity_indices(d, true);
        if block_leakage(&l.matrix, &even) == 0.0 {
            vec![even, superparity_indices(d, false)]
        } else {
            vec![(0..l.dim).collect()]
        }
    };
    for keep in sectors {
        let xs: Vec<C64> = keep.iter().map(|&i| x[i]).collect();
        if xs.iter().all(|z| *z == ZERO) {
            continue;
        }
        let op = restrict(&l.matrix, &keep);
        let cheb = Chebyshev::from_op(&op, 1e-12)?;
        let traj = cheb.evolve(&xs, times)?;
        for (k, ys) in traj.iter().enumerate() {
            let flat = total[k].as_slice_mut().unwrap();
            for (&i, y) in keep.iter().zip(ys) {
                flat[i] += y;
            }
        }
    }
    Ok(total)
}

/// Trajectory of the standard observables; times are offsets from the initial state.
pub fn evolve_density(
    spec: &LatticeSpec,
    l: &Superoperator,
    rho0: &Array2<C64>,
    times: &[f64],
) -> Result<Vec<SpinObservables>> {
    let states = evolve_states(l, rho0, times)?;
    let h = spin_hamiltonian(spec);
    let rainbow = rainbow_state_with_phase(spec.n_pairs, spec.u, spec.v, spec.phi);
    states.iter().zip(times).map(|(rho, &t)| observe(rho, t, spec, &h, &rainbow)).collect()
}

#[derive(Clone, Debug)]
pub struct SteadyStateSet {
    pub count: usize,
    pub states: Vec<Array2<C64>>,
    /// Parity expectation of each state.
    pub parities: Vec<f64>,
    /// Smallest singular values (dense) or `1 - |mu|` of leading Ritz values (Krylov).
    pub spectrum_probe: Vec<f64>,
    /// Slowest nonzero decay rate seen by the Krylov runs.
    pub gap_estimate: Option<f64>,
    /// Set when a Krylov sector found as many fixed vectors as it had starts.
    pub count_is_lower_bound: bool,
    pub residuals: Vec<f64>,
    pub physical_basis: bool,
    pub method: &'static str,
}

/// Null space of `L`, organised into physical (positive, unit-trace) states.
///
/// Small systems use a dense SVD. Larger ones use Arnoldi on `exp(tau L)` and
/// fall back to the dense count when the Krylov count may be incomplete.
pub fn steady_states(l: &Superoperator) -> Result<SteadyStateSet> {
    let d = l.hilbert_dim();
    if d <= 1 << DENSE_SITE_LIMIT {
        return steady_states_dense(l);
    }
    let fast = steady_states_krylov(l, 0, KRYLOV_TAU, KRYLOV_DIM)?;
    if fast.count_is_lower_bound && d <= 1 << DENSE_COUNT_LIMIT {
        steady_states_dense(l)
    } else {
        Ok(fast)
    }
}

fn sector_blocks(l: &Superoperator) -> Vec<Vec<usize>> {
    let d = l.hilbert_dim();
    let even = superparity_indices(d, true);
    if block_leakage(&l.matrix, &even) == 0.0 {
        vec![even, superparity_indices(d, false)]
    } else {
        vec![(0..l.dim).collect()]
    }
}

fn steady_states_dense(l: &Superoperator) -> Result<SteadyStateSet> {
    let d = l.hilbert_dim();
    let mut right: Vec<Vec<C64>> = Vec::new();
    let mut left: Vec<Vec<C64>> = Vec::new();
    let mut probe = Vec::new();
    let mut smax_all: f64 = 0.0;
    let mut blocks = Vec::new();
    for keep in sector_blocks(l) {
        let block = crate::superop::to_dense(&restrict(&l.matrix, &keep));
        let (u, s, vt) = crate::linalg::svd_full(&block)?;
        smax_all = smax_all.max(s[0]);
        blocks.push((keep, u, s, vt));
    }
    for (keep, u, s, vt) in &blocks {
        let m = s.len();
        for k in (0..m).rev().take(6) {
            probe.push(s[k] / smax_all);
        }
        for k in 0..m {
            if s[k] <= NULL_TOL * smax_all {
                let mut r = vec![ZERO; l.dim];
                let mut q = vec![ZERO; l.dim];
                for (p, &i) in keep.iter().enumerate() {
                    r[i] = vt[[k, p]].conj();
                    q[i] = u[[p, k]];
                }
                right.push(r);
                left.push(q);
            }
        }
    }
    probe.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probe.truncate(8);
    let _ = d;
    physical_basis(l, &right, &left, probe, "dense-svd")
}

/// Assembles positive steady states from right and left null vectors.
fn physical_basis(
    l: &Superoperator,
    right: &[Vec<C64>],
    left: &[Vec<C64>],
    probe: Vec<f64>,
    method: &'static str,
) -> Result<SteadyStateSet> {
    let d = l.hilbert_dim();
    let k = right.len();
    if k == 0 {
        return Err(Error::Linalg("no steady state found".into()));
    }
    let rmats: Vec<Array2<C64>> = right.iter().map(|r| to_mat(r, d)).collect();
    let mut overlap = Array2::<C64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            overlap[[i, j]] = crate::propagate::dot(&left[i], &right[j]);
        }
    }
    let id = crate::linalg::eye(d);
    let idv = to_vec(&id);
    let proj: Array1<C64> = left.iter().map(|q| crate::propagate::dot(q, &idv) / d as f64).collect();
    use ndarray_linalg::Solve;
    let coef = overlap.solve(&proj)?;
    let mut avg = Array2::<C64>::zeros((d, d));
    for (c, r) in coef.iter().zip(&rmats) {
        avg = avg + r.mapv(|z| z * c);
    }
    let avg = normalize_state(&hermitize(&avg));
    let mut states = Vec::new();
    let mut physical = true;
    if k == 1 {
        states.push(avg);
    } else {
        // A generic Hermitian conserved observable J acts on each extremal
        // steady state as a distinct scalar, so they diagonalize <R_i, J R_j>.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut j_obs = Array2::<C64>::zeros((d, d));
        for q in left {
            let qm = to_mat(q, d);
            let herm = hermitize(&qm);
            let anti = hermitize(&qm.mapv(|z| z * C64::new(0.0, -1.0)));
            j_obs = j_obs + herm.mapv(|z| z * (rng.random::<f64>() - 0.5)) + anti.mapv(|z| z * (rng.random::<f64>() - 0.5));
        }
        let mut a = Array2::<C64>::zeros((k, k));
        let jr: Vec<Array2<C64>> = rmats.iter().map(|r| j_obs.dot(r)).collect();
        for p in 0..k {
            for q in 0..k {
                a[[p, q]] = rmats[p].iter().zip(jr[q].iter()).map(|(x, y)| x.conj() * y).sum();
            }
        }
        let (aw, av) = crate::linalg::eigh_hermitian(&hermitize(&a))?;
        let spread = aw.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        if (1..k).any(|i| aw[i] - aw[i - 1] < 1e-8 * spread) {
            physical = false;
        }
        for c in 0..k {
            let mut rho = Array2::<C64>::zeros((d, d));
            for (p, r) in rmats.iter().enumerate() {
                rho = rho + r.mapv(|z| z * av[[p, c]]);
            }
            states.push(normalize_state(&hermitize(&rho)));
        }
    }
    let residuals = states.iter().map(|rho| crate::linalg::max_abs(&l.apply_rho(rho))).collect();
    let parities = states.iter().map(parity_expectation).collect();
    Ok(SteadyStateSet {
        count: k,
        count_is_lower_bound: false,
        states,
        parities,
        spectrum_probe: probe,
        gap_estimate: None,
        residuals,
        physical_basis: physical,
        method,
    })
}

fn normalize_state(rho: &Array2<C64>) -> Array2<C64> {
    let t = trace(rho);
    rho.mapv(|z| z / t)
}

fn random_hermitian_vec(d: usize, keep: &[usize], traceless: bool, positive: bool, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut a = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            a[[i, j]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let mut m = if positive { a.dot(&dagger(&a)) } else { hermitize(&a) };
    let mut mask = vec![false; d * d];
    for &i in keep {
        mask[i] = true;
    }
    for i in 0..d {
        for j in 0..d {
            if !mask[i * d + j] {
                m[[i, j]] = ZERO;
            }
        }
    }
    if traceless {
        let t = trace(&m) / d as f64;
        for i in 0..d {
            m[[i, i]] -= t;
        }
    }
    keep.iter().map(|&i| m.as_slice().unwrap()[i]).collect()
}

/// Steady states of large registers from Arnoldi iteration on `exp(tau L)`
/// restricted to each parity sector.
///
/// A density-matrix start vector yields the steady state; a traceless start
/// in the same sector and a start in the coherence sector detect further fixed
/// points. Ritz values within `1e-6` of one count as steady directions.
pub fn steady_states_krylov(l: &Superoperator, seed: u64, tau: f64, krylov_dim: usize) -> Result<SteadyStateSet> {
    let d = l.hilbert_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = sector_blocks(l);
    let mut right: Vec<Vec<C64>> = Vec::new();
    let mut probe = Vec::new();
    let mut slowest: f64 = 0.0;
    let mut saturated = false;
    for keep in &blocks {
        let op = restrict(&l.matrix, keep);
        let cheb = Chebyshev::from_op(&op, 1e-12)?;
        let diagonal_sector = keep.contains(&0);
        // Each Krylov run sees one vector of a degenerate fixed space, so the
        // number of independent starts caps the count found in a sector.
        let starts: Vec<Vec<C64>> = if diagonal_sector {
            vec![random_hermitian_vec(d, keep, false, true, &mut rng), random_hermitian_vec(d, keep, true, false, &mut rng)]
        } else {
            vec![random_hermitian_vec(d, keep, false, false, &mut rng)]
        };
        let mut found: Vec<Vec<C64>> = Vec::new();
        for start in &starts {
            let ritz = arnoldi(|x| cheb.propagate(x, tau), start, krylov_dim)?;
            let mut fixed = Vec::new();
            for (i, mu) in ritz.values.iter().enumerate() {
                let lv = norm(&apply(&op, &ritz.vectors[i])) / norm(&ritz.vectors[i]);
                if (mu - ONE).norm() < 1e-6 && lv < NULL_TOL * cheb.scale() {
                    fixed.push(i);
                } else if ritz.residuals[i] < 1e-6 && mu.norm() < 1.0 {
                    slowest = slowest.max(mu.norm());
                }
            }
            if let Some(i) = (0..ritz.values.len()).find(|i| !fixed.contains(i)) {
                probe.push(1.0 - ritz.values[i].norm());
            }
            for i in fixed {
                let mut v = ritz.vectors[i].clone();
                for prev in &found {
                    let c = dot(prev, &v);
                    for (x, p) in v.iter_mut().zip(prev) {
                        *x -= c * p;
                    }
                }
                let nv = norm(&v);
                if nv > 1e-6 {
                    v.iter_mut().for_each(|x| *x /= nv);
                    found.push(v);
                }
            }
        }
        saturated |= found.len() >= starts.len();
        for v in found {
            let mut full = vec![ZERO; l.dim];
            for (&idx, x) in keep.iter().zip(&v) {
                full[idx] = *x;
            }
            right.push(full);
        }
    }
    if right.is_empty() {
        return Err(Error::Linalg("no Ritz value converged to the fixed point".into()));
    }
    let k = right.len();
    let states: Vec<Array2<C64>> = if k == 1 {
        let rho = to_mat(&right[0], d);
        let t = trace(&rho);
        vec![hermitize(&rho.mapv(|z| z / t))]
    } else {
        right.iter().map(|r| hermitize(&to_mat(r, d))).collect()
    };
    let residuals = states.iter().map(|rho| crate::linalg::max_abs(&l.apply_rho(rho))).collect();
    let parities = states.iter().map(parity_expectation).collect();
    Ok(SteadyStateSet {
        count: k,
        count_is_lower_bound: saturated,
        states,
        parities,
        spectrum_probe: probe,
        gap_estimate: (slowest > 0.0).then(|| -slowest.ln() / tau),
        residuals,
        physical_basis: k == 1,
        method: "krylov-exponential",
    })
}

/// Eigenvalues of a (dense-sized) superoperator, sorted by decreasing real part.
pub fn liouvillian_spectrum(l: &Superoperator) -> Result<Vec<C64>> {
    let mut all = Vec::new();
    for keep in sector_blocks(l) {
        let block = crate::superop::to_dense(&restrict(&l.matrix, &keep));
        let (ev, _) = block.eig()?;
        all.extend(ev.iter().cloned());
    }
    all.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Ok(all)
}

/// Smallest nonzero decay rate `|Re lambda|` among eigenvalues.
pub fn dissipative_gap(spectrum: &[C64], zero_tol: f64) -> f64 {
    spectrum.iter().map(|z| -z.re).filter(|&r| r > zero_tol).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize)]
pub struct BondOptimum {
    pub bond: usize,
    pub v2: f64,
    pub concurrence: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Steady-state concurrence of bond `l` over a grid of `v^2`; returns the maximizer.
pub fn optimize_bond_concurrence(
    spec: &LatticeSpec,
    bond: usize,
    noise: &NoiseConfig,
    set: DissipatorSet,
    v2_grid: &[f64],
) -> Result<BondOptimum> {
    if bond == 0 || bond > spec.n_pairs {
        return Err(Error::InvalidSpec(format!("bond {bond} outside 1..={}", spec.n_pairs)));
    }
    let mut curve = Vec::with_capacity(v2_grid.len());
    for &v2 in v2_grid {
        let s = spec.clone().with_v2(v2)?;
        let c = bond_concurrences(&s, noise, set)?[bond - 1];
        curve.push((v2, c));
    }
    let best = curve
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or_else(|| Error::InvalidSpec("empty v^2 grid".into()))?;
    Ok(BondOptimum { bond, v2: best.0, concurrence: best.1, curve })
}

/// Concurrence of every bond `1..=N` in the (unique) steady state.
pub fn bond_concurrences(spec: &LatticeSpec, noise: &NoiseConfig, set: DissipatorSet) -> Result<Vec<f64>> {
    let l = build_spin_liouvillian(spec, noise, set)?;
    let ss = steady_states(&l)?;
    if ss.count != 1 {
        return Err(Error::Degenerate(format!("{} steady states", ss.count)));
    }
    (1..=spec.n_pairs).map(|b| concurrence(&ss.states[0], spec.n_sites(), bond_sites(spec.n_pairs, b))).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ParityCheck {
    pub holds: bool,
    pub max_error: f64,
}

/// Tests `L(P rho P) = P L(rho) P` on random Hermitian matrices.
pub fn check_weak_parity_symmetry(l: &Superoperator, seed: u64) -> ParityCheck {
    let d = l.hilbert_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = |i: usize, j: usize| state_parity(i) * state_parity(j);
    let scale = l.matrix.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max).max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let x: Vec<C64> = (0..l.dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let px: Vec<C64> = (0..l.dim).map(|k| x[k] * sign(k / d, k % d)).collect();
        let a = l.apply(&px);
        let b = l.apply(&x);
        for k in 0..l.dim {
            worst = worst.max((a[k] - b[k] * sign(k / d, k % d)).norm());
        }
    }
    let max_error = worst / scale;
    ParityCheck { holds: max_error < 1e-10, max_error }
}

#[derive(Clone, Debug)]
pub struct TwoDReport {
    pub spin_purity: f64,
    pub spin_steady_count: usize,
    pub fermion_purity_residual: f64,
    pub spin_anomalous: Array2<C64>,
    pub fermion_anomalous: Array2<C64>,
    pub spin_normal: Array2<C64>,
}

/// Steady state of a lattice with spins in place of fermions, contrasted with the free-fermion steady state.
pub fn two_d_qubit_counterexample(spec2d: &LatticeSpec) -> Result<TwoDReport> {
    let n = spec2d.n_sites();
    let l = build_spin_liouvillian(spec2d, &NoiseConfig::default(), DissipatorSet::SingleBetaL)?;
    let ss = steady_states(&l)?;
    let rho = &ss.states[0];
    let mut anomalous = Array2::zeros((n, n));
    let mut normal = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                anomalous[[i, j]] = expectation(&crate::superop::mul(&sigma_minus(n, i), &sigma_minus(n, j)), rho);
            }
            normal[[i, j]] = expectation(&crate::superop::mul(&sigma_plus(n, i), &sigma_minus(n, j)), rho);
        }
    }
    let cov = crate::fermi_gaussian::steady_covariance(spec2d)?;
    Ok(TwoDReport {
        spin_purity: purity(rho),
        spin_steady_count: ss.count,
        fermion_purity_residual: cov.purity_residual(),
        spin_anomalous: anomalous,
        fermion_anomalous: cov.anomalous,
        spin_normal: normal,
    })
}

/// `n` logarithmically spaced times over `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Window for the residual fits of the parity and number relaxation.
pub const RELAXATION_WINDOW: (f64, f64) = (1e-6, 1e-1);

#[derive(Clone, Debug, Serialize)]
pub struct ModelRelaxation {
    pub parity: Option<RelaxationEstimate>,
    pub number: Option<RelaxationEstimate>,
    /// Excitation-number rate over parity rate.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationComparison {
    pub times: Vec<f64>,
    pub steady_parity: f64,
    pub steady_number: f64,
    pub spin_parity: Vec<f64>,
    pub spin_number: Vec<f64>,
    pub fermion_parity: Vec<f64>,
    pub fermion_number: Vec<f64>,
    pub spin: ModelRelaxation,
    pub fermion: ModelRelaxation,
}

fn model_relaxation(times: &[f64], parity: &[f64], number: &[f64], p_ss: f64, n_ss: f64) -> ModelRelaxation {
    let (lo, hi) = RELAXATION_WINDOW;
    let pr: Vec<f64> = parity.iter().map(|p| (p - p_ss).abs()).collect();
    let nr: Vec<f64> = number.iter().map(|x| (x - n_ss).abs()).collect();
    let parity = relaxation_rate(times, &pr, lo, hi);
    let number = relaxation_rate(times, &nr, lo, hi);
    let ratio = match (&parity, &number) {
        (Some(p), Some(n)) => n.rate / p.rate,
        _ => f64::NAN,
    };
    ModelRelaxation { parity, number, ratio }
}

/// Parity and excitation-number relaxation from the vacuum for the qubit
/// chain and for the free-fermion model with the same lattice. Both relax to
/// the Gaussian steady state, whose parity and number serve as references.
pub fn relaxation_comparison(spec: &LatticeSpec, times: &[f64]) -> Result<RelaxationComparison> {
    use crate::fermi_gaussian::{evolve_covariance, steady_covariance, PairCovariance};
    let n = spec.n_sites();
    let ss = steady_covariance(spec)?;
    let (p_ss, n_ss) = (ss.parity(), ss.total_number());
    let l = build_spin_liouvillian(spec, &NoiseConfig::default(), DissipatorSet::SingleBetaL)?;
    let states = evolve_states(&l, &vacuum(n), times)?;
    let spin_parity: Vec<f64> = states.iter().map(parity_expectation).collect();
    let spin_number: Vec<f64> = states.iter().map(excitation_number).collect();
    let flow = evolve_covariance(spec, &PairCovariance::vacuum(n), times)?;
    let fermion_parity: Vec<f64> = flow.iter().map(|c| c.parity()).collect();
    let fermion_number: Vec<f64> = flow.iter().map(|c| c.total_number()).collect();
    Ok(RelaxationComparison {
        spin: model_relaxation(times, &spin_parity, &spin_number, p_ss, n_ss),
        fermion: model_relaxation(times, &fermion_parity, &fermion_number, p_ss, n_ss),
        times: times.to_vec(),
        steady_parity: p_ss,
        steady_number: n_ss,
        spin_parity,
        spin_number,
        fermion_parity,
        fermion_number,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, uniform_chain};

    #[test]
    fn operators_act_on_msb_convention() {
        let sm = crate::superop::to_dense(&sigma_minus(2, 0));
        assert_eq!(sm[[0b01, 0b11]], ONE);
        assert_eq!(sm[[0b00, 0b10]], ONE);
        assert_eq!(sm[[0b00, 0b01]], ZERO);
    }

    #[test]
    fn rainbow_small_cases() {
        let psi = rainbow_state(1, 0.8, 0.6);
        assert!((psi[0].re - 0.8).abs() < 1e-15 && (psi[3].re + 0.6).abs() < 1e-15);
        let vac = rainbow_state(2, 1.0, 0.0);
        assert_eq!(vac[0], ONE);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = rainbow_state(2, r, r);
        let nrm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((nrm - 1.0).abs() < 1e-15);
        assert_eq!(psi.iter().filter(|z| z.norm() > 1e-12).count(), 4);
    }

    #[test]
    fn closed_two_site_spectrum_is_imaginary() {
        let s = build_chain(1, &[1.0], true).unwrap().with_gamma(0.0).unwrap();
        let l = build_spin_liouvillian(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL).unwrap();
        let spec = liouvillian_spectrum(&l).unwrap();
        assert!(spec.iter().all(|z| z.re.abs() < 1e-12));
        assert!(l.trace_preservation_error() < 1e-12);
    }

    #[test]
    fn rainbow_is_the_unique_steady_state() {
        let s = build_chain(2, &[1.0, 0.7], true).unwrap().with_v2(0.3).unwrap();
        let l = build_spin_liouvillian(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL).unwrap();
        let ss = steady_states(&l).unwrap();
        assert_eq!(ss.count, 1);
        let f = fidelity_to_pure(&ss.states[0], &rainbow_state(2, s.u, s.v));
        assert!(f > 1.0 - 1e-10, "{f}");
    }

    #[test]
    fn rainbow_with_phase_is_dark() {
        let s = uniform_chain(2, 1.0, 0.35, 1.0).unwrap().with_phi(0.7);
        let l = build_spin_liouvillian(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL).unwrap();
        let rho = projector(&rainbow_state_with_phase(2, s.u, s.v, s.phi));
        assert!(crate::linalg::max_abs(&l.apply_rho(&rho)) < 1e-12);
    }

    #[test]
    fn rainbow_concurrences() {
        let (u, v) = (0.8f64, 0.6f64);
        let rho = projector(&rainbow_state(2, u, v));
        for l in 1..=2 {
            let c = concurrence(&rho, 4, bond_sites(2, l)).unwrap();
            assert!((c - 2.0 * u * v).abs() < 1e-10);
        }
        let mixed = Array2::from_diag(&Array1::from_elem(4, C64::new(0.25, 0.0)));
        assert!(concurrence_2q(&mixed).unwrap() < 1e-12);
    }

    #[test]
    fn parity_weak_symmetry() {
        let s = uniform_chain(1, 1.0, 0.3, 1.0).unwrap();
        let l = build_spin_liouvillian(&s, &NoiseConfig::new(0.0, 0.1).unwrap(), DissipatorSet::SingleBetaL).unwrap();
        assert!(check_weak_parity_symmetry(&l, 0).holds);
        let h = crate::superop::add(&spin_hamiltonian(&s), &crate::superop::scale(&sigma_x(2, 0), ONE * 0.3));
        let l2 = lindblad(&h, &spin_jumps(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL));
        assert!(!check_weak_parity_symmetry(&l2, 0).holds);
    }

    #[test]
    fn vacuum_is_dark_without_pairing() {
        let s = uniform_chain(2, 1.0, 0.0, 1.0).unwrap();
        let l = build_spin_liouvillian(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL).unwrap();
        let traj = evolve_density(&s, &l, &vacuum(4), &[0.0, 1.0, 10.0]).unwrap();
        for o in traj {
            assert!(o.excitation.abs() < 1e-12);
            assert!((o.rainbow_fidelity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_cap() {
        let s = uniform_chain(2, 1.0, 0.3, 1.0).unwrap();
        let e = build_spin_liouvillian_capped(&s, &NoiseConfig::default(), DissipatorSet::SingleBetaL, 2);
        assert!(matches!(e, Err(Error::DimensionCap { .. })));
    }
}
