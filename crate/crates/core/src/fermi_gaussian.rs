//! Free-fermion side: paired eigenmodes, Bogoliubov coefficients, Gaussian
//! steady states and covariance-matrix Lindblad dynamics.
//!
//! Majorana operators are `w_{2j} = c_j + c_j^dagger` and
//! `w_{2j+1} = -i (c_j - c_j^dagger)`; the covariance matrix is
//! `Gamma_ab = (i/2) <[w_a, w_b]>`, so the vacuum has `Gamma_{2j,2j+1} = -1`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use serde::Serialize;

use crate::linalg::{dagger, lyapunov, pfaffian, I, ONE, ZERO};
use crate::model::{chiral_signs, LatticeSpec, DARK_THRESHOLD};
use crate::ode::{dopri5, Tolerances};
use crate::{Error, Result, C64};

const CONSTRAINT_TOL: f64 = 1e-9;

/// Chiral-paired eigenmodes. Columns `0..N` hold the positive-energy modes in
/// ascending order; column `k + N` is the partner `C psi_k` with energy `-e_k`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub n_pairs: usize,
    pub energies: Vec<f64>,
    pub wavefunctions: Array2<C64>,
}

impl EigenBasis {
    pub fn partner(&self, k: usize) -> usize {
        if k < self.n_pairs {
            k + self.n_pairs
        } else {
            k - self.n_pairs
        }
    }

    pub fn mode(&self, k: usize) -> Array1<C64> {
        self.wavefunctions.column(k).to_owned()
    }

    /// Largest pairing-constraint residual over the positive modes.
    pub fn constraint_residuals(&self, d0: usize, d1: usize) -> (Option<usize>, f64) {
        let psi = &self.wavefunctions;
        let mut worst = None;
        let mut max = 0.0;
        for g in 0..self.n_pairs {
            let m = self.partner(g);
            let r = (psi[[d0, g]] * psi[[d1, g]].conj() + psi[[d0, m]] * psi[[d1, m]].conj()).norm();
            if r > max || worst.is_none() {
                max = r;
                worst = Some(g);
            }
        }
        (worst, max)
    }
}

/// Builds the gauge-fixed, chiral-paired eigenbasis of the hopping matrix.
pub fn eigenbasis(spec: &LatticeSpec) -> Result<EigenBasis> {
    let signs = chiral_signs(spec).ok_or_else(|| Error::Pairing("hopping matrix has no chiral sign operator".into()))?;
    let n = spec.n_sites();
    let np = spec.n_pairs;
    let (evals, evecs) = spec.hopping.eigh(UPLO::Lower)?;
    let scale = evals.iter().map(|e| e.abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(k) = (0..n).find(|&k| evals[k].abs() < 1e-10 * scale) {
        return Err(Error::Pairing(format!("zero-energy mode at index {k}; pairing requires nonzero energies")));
    }
    let pos: Vec<usize> = (0..n).filter(|&k| evals[k] > 0.0).collect();
    if pos.len() != np {
        return Err(Error::Pairing(format!("{} positive modes for {np} pairs", pos.len())));
    }
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    let mut modes: Vec<(f64, Array1<C64>)> = Vec::with_capacity(np);
    let mut start = 0;
    while start < pos.len() {
        let mut end = start + 1;
        while end < pos.len() && evals[pos[end]] - evals[pos[start]] < 1e-9 * scale {
            end += 1;
        }
        let cluster: Vec<usize> = pos[start..end].to_vec();
        let rotated = rotate_cluster(&evecs, &cluster, d0, d1)?;
        for (j, vec) in rotated.into_iter().enumerate() {
            modes.push((evals[cluster[j]], vec));
        }
        start = end;
    }
    let mut wf = Array2::zeros((n, n));
    let mut energies = vec![0.0; n];
    for (k, (e, mut psi)) in modes.into_iter().enumerate() {
        fix_gauge(&mut psi, d0);
        let partner: Array1<C64> = psi.iter().zip(&signs).map(|(z, &s)| z * s).collect();
        wf.column_mut(k).assign(&psi);
        wf.column_mut(k + np).assign(&partner);
        energies[k] = e;
        energies[k + np] = -e;
    }
    Ok(EigenBasis { n_pairs: np, energies, wavefunctions: wf })
}

/// Rotates a degenerate cluster so that at most two modes touch the dissipation sites.
fn rotate_cluster(evecs: &Array2<C64>, cluster: &[usize], d0: usize, d1: usize) -> Result<Vec<Array1<C64>>> {
    let m = cluster.len();
    let cols: Vec<Array1<C64>> = cluster.iter().map(|&k| evecs.column(k).to_owned()).collect();
    if m == 1 {
        return Ok(cols);
    }
    let mut ov = Array2::zeros((2, m));
    for (j, c) in cols.iter().enumerate() {
        ov[[0, j]] = c[d0];
        ov[[1, j]] = c[d1];
    }
    let (_, _, vt) = crate::linalg::svd_full(&ov)?;
    let v = dagger(&vt);
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc = Array1::<C64>::zeros(cols[0].len());
        for (k, c) in cols.iter().enumerate() {
            acc = acc + c.mapv(|z| z * v[[k, j]]);
        }
        out.push(acc);
    }
    Ok(out)
}

fn fix_gauge(psi: &mut Array1<C64>, d0: usize) {
    let reference = if psi[d0].norm() > 1e-12 {
        psi[d0]
    } else {
        *psi.iter().find(|z| z.norm() > 1e-8).unwrap_or(&ONE)
    };
    let phase = reference.conj() / reference.norm();
    psi.mapv_inplace(|z| z * phase);
}

#[derive(Clone, Debug, Serialize)]
pub struct BogoliubovData {
    pub u_alpha: Vec<C64>,
    pub v_alpha: Vec<C64>,
    pub n_alpha: Vec<f64>,
    pub x_gamma: Vec<C64>,
}

impl BogoliubovData {
    pub fn dark_modes(&self) -> Vec<usize> {
        let max = self.n_alpha.iter().cloned().fold(0.0, f64::max);
        (0..self.n_alpha.len()).filter(|&k| self.n_alpha[k] <= DARK_THRESHOLD * max || max == 0.0).collect()
    }
}

/// Bogoliubov coefficients without checking the pairing constraint.
pub fn bogoliubov_unchecked(spec: &LatticeSpec, basis: &EigenBasis) -> BogoliubovData {
    let psi = &basis.wavefunctions;
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    let (u, v) = (spec.u, spec.v);
    let phase = C64::from_polar(1.0, spec.phi);
    let mut data = BogoliubovData { u_alpha: vec![], v_alpha: vec![], n_alpha: vec![], x_gamma: vec![] };
    for g in 0..basis.n_pairs {
        let m = basis.partner(g);
        let p = psi[[d0, g]];
        let q = psi[[d1, m]];
        let norm = (u * u * p.norm_sqr() + v * v * q.norm_sqr()).sqrt();
        let (ua, va) = if norm > 0.0 { (p * u / norm, phase * q.conj() * v / norm) } else { (ONE, ZERO) };
        data.u_alpha.push(ua);
        data.v_alpha.push(va);
        data.n_alpha.push(norm);
        let den = psi[[d0, m]];
        data.x_gamma.push(if den.norm() > 1e-14 { p / den } else { C64::new(f64::NAN, f64::NAN) });
    }
    data
}

/// Bogoliubov coefficients `u_alpha = u psi[0]/N`, `v_alpha = v e^{i phi} psi_-[1]^* / N`.
pub fn bogoliubov(spec: &LatticeSpec, basis: &EigenBasis) -> Result<BogoliubovData> {
    let (worst, res) = basis.constraint_residuals(spec.diss_site_0, spec.diss_site_1);
    if res > CONSTRAINT_TOL {
        return Err(Error::Constraint { mode: worst.unwrap_or(0), residual: res });
    }
    Ok(bogoliubov_unchecked(spec, basis))
}

/// Normal `<c_i^dagger c_j>` and anomalous `<c_i c_j>` two-point matrices.
#[derive(Clone, Debug)]
pub struct PairCovariance {
    pub normal: Array2<C64>,
    pub anomalous: Array2<C64>,
}

impl PairCovariance {
    pub fn vacuum(n_sites: usize) -> Self {
        PairCovariance { normal: Array2::zeros((n_sites, n_sites)), anomalous: Array2::zeros((n_sites, n_sites)) }
    }

    pub fn n_sites(&self) -> usize {
        self.normal.nrows()
    }

    /// Largest violation of Hermiticity, occupation bounds and antisymmetry.
    pub fn invariant_violation(&self) -> Result<f64> {
        use ndarray_linalg::EigValsh;
        let herm = (&self.normal - &dagger(&self.normal)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let anti = (&self.anomalous + &self.anomalous.t()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let ev = crate::linalg::hermitize(&self.normal).eigvalsh(UPLO::Lower)?;
        let lo = ev.iter().map(|&e| (-e).max(0.0)).fold(0.0, f64::max);
        let hi = ev.iter().map(|&e| (e - 1.0).max(0.0)).fold(0.0, f64::max);
        Ok(herm.max(anti).max(lo).max(hi))
    }

    pub fn to_majorana(&self) -> Array2<f64> {
        let n = self.n_sites();
        let mut q = Array2::<C64>::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                q[[i, j]] = self.anomalous[[i, j]];
                q[[i, n + j]] = if i == j { ONE } else { ZERO } - self.normal[[j, i]];
                q[[n + i, j]] = self.normal[[i, j]];
                q[[n + i, n + j]] = -self.anomalous[[i, j]].conj();
            }
        }
        let t = majorana_transform(n);
        let k = t.dot(&q).dot(&t.t());
        let mut g = Array2::zeros((2 * n, 2 * n));
        for a in 0..2 * n {
            for b in 0..2 * n {
                let id = if a == b { ONE } else { ZERO };
                g[[a, b]] = (I * (k[[a, b]] - id)).re;
            }
        }
        antisymmetrize(&g)
    }

    pub fn from_majorana(gamma: &Array2<f64>) -> Self {
        let n2 = gamma.nrows();
        let n = n2 / 2;
        let mut k = Array2::<C64>::zeros((n2, n2));
        for a in 0..n2 {
            for b in 0..n2 {
                let id = if a == b { 1.0 } else { 0.0 };
                k[[a, b]] = C64::new(id, -gamma[[a, b]]);
            }
        }
        let s = inverse_majorana_transform(n);
        let q = s.dot(&k).dot(&s.t());
        let normal = q.slice(ndarray::s![n.., ..n]).to_owned();
        let anomalous = q.slice(ndarray::s![..n, ..n]).to_owned();
        PairCovariance { normal, anomalous }
    }

    pub fn max_abs_diff(&self, other: &PairCovariance) -> f64 {
        let a = (&self.normal - &other.normal).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b = (&self.anomalous - &other.anomalous).iter().map(|z| z.norm()).fold(0.0, f64::max);
        a.max(b)
    }

    /// Largest entry of `Gamma^2 + 1`; zero for pure Gaussian states.
    pub fn purity_residual(&self) -> f64 {
        let g = self.to_majorana();
        let sq = g.dot(&g);
        let n = sq.nrows();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let id = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((sq[[a, b]] + id).abs());
            }
        }
        worst
    }

    /// Expectation of the number parity `(-1)^N`.
    pub fn parity(&self) -> f64 {
        let n = self.n_sites();
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * pfaffian(&self.to_majorana())
    }

    pub fn total_number(&self) -> f64 {
        self.normal.diag().iter().map(|z| z.re).sum()
    }

    /// `sum_ij H_ij <c_i^dagger c_j>`.
    pub fn energy(&self, hopping: &Array2<C64>) -> f64 {
        hopping.iter().zip(self.normal.iter()).map(|(h, g)| (h * g).re).sum()
    }
}

fn antisymmetrize(g: &Array2<f64>) -> Array2<f64> {
    (g - &g.t()).mapv(|x| 0.5 * x)
}

/// `T` with `w = T (c; c^dagger)`.
fn majorana_transform(n: usize) -> Array2<C64> {
    let mut t = Array2::zeros((2 * n, 2 * n));
    for j in 0..n {
        t[[2 * j, j]] = ONE;
        t[[2 * j, n + j]] = ONE;
        t[[2 * j + 1, j]] = -I;
        t[[2 * j + 1, n + j]] = I;
    }
    t
}

fn inverse_majorana_transform(n: usize) -> Array2<C64> {
    let mut s = Array2::zeros((2 * n, 2 * n));
    for j in 0..n {
        s[[j, 2 * j]] = C64::new(0.5, 0.0);
        s[[j, 2 * j + 1]] = C64::new(0.0, 0.5);
        s[[n + j, 2 * j]] = C64::new(0.5, 0.0);
        s[[n + j, 2 * j + 1]] = C64::new(0.0, -0.5);
    }
    s
}

/// Steady-state correlators of the joint Bogoliubov vacuum, rotated to real space.
pub fn analytic_steady_correlators(bog: &BogoliubovData, basis: &EigenBasis) -> Result<PairCovariance> {
    let dark = bog.dark_modes();
    if !dark.is_empty() {
        return Err(Error::DarkModes(dark));
    }
    let np = basis.n_pairs;
    let n = 2 * np;
    let psi = &basis.wavefunctions;
    let mut gd = vec![0.0; n];
    let mut fd = Array2::<C64>::zeros((n, n));
    for a in 0..np {
        let v2 = bog.v_alpha[a].norm_sqr();
        gd[a] = v2;
        gd[a + np] = v2;
        let uv = bog.u_alpha[a].conj() * bog.v_alpha[a];
        fd[[a, a + np]] = -uv;
        fd[[a + np, a]] = uv;
    }
    let mut normal = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for a in 0..n {
                acc += psi[[i, a]].conj() * psi[[j, a]] * gd[a];
            }
            normal[[i, j]] = acc;
        }
    }
    let anomalous = psi.dot(&fd).dot(&psi.t());
    Ok(PairCovariance { normal, anomalous })
}

/// A jump operator `L = sum_j a_j c_j + b_j c_j^dagger` with rate `gamma`.
#[derive(Clone, Debug)]
pub struct LinearJump {
    pub rate: f64,
    pub annihilation: Array1<C64>,
    pub creation: Array1<C64>,
}

/// The engineered jump `u c_0 - v e^{i phi} c_1^dagger` at rate `Gamma`.
pub fn engineered_jump(spec: &LatticeSpec) -> LinearJump {
    let n = spec.n_sites();
    let mut a = Array1::zeros(n);
    let mut b = Array1::zeros(n);
    a[spec.diss_site_0] = C64::new(spec.u, 0.0);
    b[spec.diss_site_1] = -C64::from_polar(spec.v, spec.phi);
    LinearJump { rate: spec.gamma, annihilation: a, creation: b }
}

/// Drift `X` and diffusion `Y` of `dGamma/dt = X Gamma + Gamma X^T + Y`.
#[derive(Clone, Debug)]
pub struct MajoranaFlow {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

pub fn majorana_flow(hopping: &Array2<C64>, jumps: &[LinearJump]) -> MajoranaFlow {
    let n = hopping.nrows();
    let omega = inverse_majorana_transform(n).slice(ndarray::s![..n, ..]).to_owned();
    let m = dagger(&omega).dot(hopping).dot(&omega);
    let mut a = Array2::zeros((2 * n, 2 * n));
    for p in 0..2 * n {
        for q in 0..2 * n {
            let anti = (m[[p, q]] - m[[q, p]]) * 0.5;
            a[[p, q]] = (C64::new(0.0, -4.0) * anti).re;
        }
    }
    let mut re_m = Array2::<f64>::zeros((2 * n, 2 * n));
    let mut im_m = Array2::<f64>::zeros((2 * n, 2 * n));
    for jump in jumps {
        let l: Array1<C64> = (0..2 * n)
            .map(|p| {
                (0..n)
                    .map(|j| jump.annihilation[j] * omega[[j, p]] + jump.creation[j] * omega[[j, p]].conj())
                    .sum::<C64>()
            })
            .collect();
        for p in 0..2 * n {
            for q in 0..2 * n {
                let z = l[p] * l[q].conj() * jump.rate;
                re_m[[p, q]] += z.re;
                im_m[[p, q]] += z.im;
            }
        }
    }
    MajoranaFlow { x: a - re_m.mapv(|v| 2.0 * v), y: im_m.mapv(|v| 4.0 * v) }
}

pub fn spec_flow(spec: &LatticeSpec) -> MajoranaFlow {
    majorana_flow(&spec.hopping, &[engineered_jump(spec)])
}

/// Integrates the covariance flow and returns the state at every time.
pub fn evolve_covariance(spec: &LatticeSpec, state0: &PairCovariance, times: &[f64]) -> Result<Vec<PairCovariance>> {
    evolve_flow(&spec_flow(spec), state0, times)
}

pub fn evolve_flow(flow: &MajoranaFlow, state0: &PairCovariance, times: &[f64]) -> Result<Vec<PairCovariance>> {
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Integrator { t: times[0], msg: "negative start time".into() });
    }
    let g0 = state0.to_majorana();
    let m = g0.nrows();
    let x = &flow.x;
    let y = &flow.y;
    let rhs = |_: f64, g: &[f64], dg: &mut [f64]| {
        let gm = ndarray::ArrayView2::from_shape((m, m), g).unwrap();
        let xg = x.dot(&gm);
        for a in 0..m {
            for b in 0..m {
                dg[a * m + b] = xg[[a, b]] - xg[[b, a]] + y[[a, b]];
            }
        }
    };
    let flat: Vec<f64> = g0.iter().cloned().collect();
    let traj = dopri5(rhs, &flat, times, &Tolerances::default())?;
    Ok(traj
        .into_iter()
        .map(|v| {
            let g = Array2::from_shape_vec((m, m), v).unwrap();
            PairCovariance::from_majorana(&antisymmetrize(&g))
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct RapiditySpectrum {
    /// All eigenvalues of the drift matrix (two per site), sorted.
    pub rates: Vec<C64>,
    pub gap: f64,
}

impl RapiditySpectrum {
    /// Every subset sum of the rates: the full Liouvillian spectrum.
    pub fn liouvillian_eigenvalues(&self) -> Vec<C64> {
        let mut sums = vec![ZERO];
        for &r in &self.rates {
            let extra: Vec<C64> = sums.iter().map(|s| s + r).collect();
            sums.extend(extra);
        }
        sums
    }

    /// The `k` Liouvillian eigenvalues with the smallest decay rate `-Re`,
    /// by best-first enumeration of subset sums.
    pub fn slowest_liouvillian_eigenvalues(&self, k: usize) -> Vec<C64> {
        use std::cmp::Ordering;
        use std::collections::BinaryHeap;
        struct Node {
            w: f64,
            last: usize,
            sum: C64,
        }
        impl PartialEq for Node {
            fn eq(&self, o: &Self) -> bool {
                self.cmp(o) == Ordering::Equal
            }
        }
        impl Eq for Node {}
        impl PartialOrd for Node {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Node {
            fn cmp(&self, o: &Self) -> Ordering {
                o.w.total_cmp(&self.w).then(o.last.cmp(&self.last))
            }
        }
        let mut rates = self.rates.clone();
        rates.sort_by(|a, b| (-a.re).max(0.0).total_cmp(&(-b.re).max(0.0)).then(a.im.total_cmp(&b.im)));
        let w: Vec<f64> = rates.iter().map(|z| (-z.re).max(0.0)).collect();
        let mut out = Vec::with_capacity(k);
        if k == 0 {
            return out;
        }
        out.push(ZERO);
        let mut heap = BinaryHeap::new();
        if !rates.is_empty() {
            heap.push(Node { w: w[0], last: 0, sum: rates[0] });
        }
        let mut cutoff = f64::INFINITY;
        while let Some(n) = heap.pop() {
            if out.len() >= k && n.w > cutoff {
                break;
            }
            out.push(n.sum);
            if out.len() == k {
                cutoff = n.w + TIE_TOL * (1.0 + n.w);
            }
            if n.last + 1 < rates.len() {
                let j = n.last + 1;
                heap.push(Node { w: n.w + w[j], last: j, sum: n.sum + rates[j] });
                heap.push(Node { w: n.w - w[n.last] + w[j], last: j, sum: n.sum - rates[n.last] + rates[j] });
            }
        }
        order_by_decay(&mut out);
        out.truncate(k);
        out
    }
}

/// Decay rates closer than this (relative) count as tied.
const TIE_TOL: f64 = 1e-9;

/// Sorts by decay rate `-Re`; runs of tied rates are ordered by `Im`.
pub fn order_by_decay(values: &mut [C64]) {
    values.sort_by(|a, b| (-a.re).total_cmp(&(-b.re)));
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && (values[end].re - values[end - 1].re).abs() <= TIE_TOL * (1.0 + values[end].re.abs()) {
            end += 1;
        }
        values[start..end].sort_by(|a, b| a.im.total_cmp(&b.im));
        start = end;
    }
}

pub fn rapidity_spectrum(spec: &LatticeSpec) -> Result<RapiditySpectrum> {
    flow_rapidities(&spec_flow(spec))
}

pub fn flow_rapidities(flow: &MajoranaFlow) -> Result<RapiditySpectrum> {
    let (ev, _) = flow.x.eig()?;
    let mut rates: Vec<C64> = ev.to_vec();
    crate::linalg::sort_spectrum(&mut rates);
    let scale = rates.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let gap = rates
        .iter()
        .filter(|z| z.re < -1e-10 * scale)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    Ok(RapiditySpectrum { rates, gap: if gap.is_finite() { gap } else { 0.0 } })
}

/// Fixed point of the covariance flow (continuous Lyapunov equation).
pub fn steady_covariance(spec: &LatticeSpec) -> Result<PairCovariance> {
    let flow = spec_flow(spec);
    let rap = flow_rapidities(&flow)?;
    let scale = rap.rates.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    if rap.rates.iter().any(|z| z.re.abs() <= 1e-10 * scale) {
        let dark = eigenbasis(spec).map(|b| bogoliubov_unchecked(spec, &b).dark_modes()).unwrap_or_default();
        return Err(Error::DarkModes(dark));
    }
    let g = lyapunov(&flow.x, &flow.y)?;
    Ok(PairCovariance::from_majorana(&antisymmetrize(&g)))
}

/// `<beta_L^dagger beta_L>` in a Gaussian state.
pub fn jump_occupation(spec: &LatticeSpec, cov: &PairCovariance) -> f64 {
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    let (u, v) = (spec.u, spec.v);
    let ph = C64::from_polar(1.0, spec.phi);
    let g = &cov.normal;
    let f = &cov.anomalous;
    let val = g[[d0, d0]] * u * u - ph * f[[d1, d0]].conj() * u * v - ph.conj() * f[[d1, d0]] * u * v
        + (ONE - g[[d1, d1]]) * v * v;
    val.re
}

/// `sum_alpha log2(1 + 2 |u_alpha v_alpha|)`.
pub fn log_negativity(bog: &BogoliubovData) -> f64 {
    bog.u_alpha
        .iter()
        .zip(&bog.v_alpha)
        .map(|(u, v)| (1.0 + 2.0 * (u * v).norm()).log2())
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct GapScaling {
    pub rows: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Rapidity gap for each `N` and a least-squares fit of `log gap` against `log N`.
pub fn gap_scaling<F>(family: F, n_values: &[usize]) -> Result<GapScaling>
where
    F: Fn(usize) -> Result<LatticeSpec>,
{
    let mut rows = Vec::new();
    for &n in n_values {
        let spec = family(n)?;
        rows.push((n, rapidity_spectrum(&spec)?.gap));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, g)| ((n as f64).ln(), g.ln())).collect();
    let (slope, intercept, residual) = crate::fit::linear_fit(&pts);
    Ok(GapScaling { rows, slope, intercept, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chain, uniform_chain};

    #[test]
    fn slowest_eigenvalues_match_full_enumeration() {
        let spec = uniform_chain(2, 1.0, 0.3, 1.0).unwrap();
        let rap = rapidity_spectrum(&spec).unwrap();
        let mut all: Vec<f64> = rap.liouvillian_eigenvalues().iter().map(|z| -z.re).collect();
        all.sort_by(f64::total_cmp);
        let few: Vec<f64> = rap.slowest_liouvillian_eigenvalues(60).iter().map(|z| -z.re).collect();
        assert_eq!(few.len(), 60);
        for (a, b) in few.iter().zip(&all) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(rap.slowest_liouvillian_eigenvalues(0).is_empty());
    }

    #[test]
    fn slowest_eigenvalues_do_not_depend_on_pairing() {
        let reference = rapidity_spectrum(&uniform_chain(3, 1.0, 0.1, 1.0).unwrap()).unwrap().slowest_liouvillian_eigenvalues(40);
        for v2 in [0.2, 0.3, 0.45, 0.5] {
            let ev = rapidity_spectrum(&uniform_chain(3, 1.0, v2, 1.0).unwrap()).unwrap().slowest_liouvillian_eigenvalues(40);
            for (a, b) in ev.iter().zip(&reference) {
                assert!((a - b).norm() < 1e-10, "v2={v2}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn two_site_basis() {
        let s = build_chain(1, &[0.8], true).unwrap();
        let b = eigenbasis(&s).unwrap();
        assert!((b.energies[0] - 0.8).abs() < 1e-14);
        assert!((b.energies[1] + 0.8).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.wavefunctions[[0, 0]].re - r).abs() < 1e-14);
        assert!((b.wavefunctions[[1, 0]].re - r).abs() < 1e-14);
        assert!((b.wavefunctions[[1, 1]].re + r).abs() < 1e-14);
    }

    #[test]
    fn basis_invariants() {
        let s = build_chain(4, &[1.0, 0.6, 1.7, 0.9], true).unwrap();
        let b = eigenbasis(&s).unwrap();
        let psi = &b.wavefunctions;
        let ov = dagger(psi).dot(psi);
        for i in 0..8 {
            for j in 0..8 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((ov[[i, j]] - C64::new(id, 0.0)).norm() < 1e-10);
            }
            let hv = s.hopping.dot(&psi.column(i));
            let res: f64 = hv.iter().zip(psi.column(i)).map(|(a, p)| (a - p * b.energies[i]).norm_sqr()).sum();
            assert!(res.sqrt() < 1e-10);
            assert!((b.energies[i] + b.energies[b.partner(i)]).abs() < 1e-10);
        }
    }

    #[test]
    fn mirror_chain_coefficients() {
        let s = build_chain(3, &[1.0, 1.4, 0.7], true).unwrap().with_v2(0.3).unwrap();
        let b = eigenbasis(&s).unwrap();
        let bog = bogoliubov(&s, &b).unwrap();
        for a in 0..3 {
            assert!((bog.u_alpha[a] - C64::new(s.u, 0.0)).norm() < 1e-12);
            assert!((bog.v_alpha[a].norm() - s.v).abs() < 1e-12);
            assert!((bog.u_alpha[a].norm_sqr() + bog.v_alpha[a].norm_sqr() - 1.0).abs() < 1e-12);
            assert!((bog.x_gamma[a] - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn no_pairing_limit() {
        let s = uniform_chain(2, 1.0, 0.0, 1.0).unwrap();
        let b = eigenbasis(&s).unwrap();
        let bog = bogoliubov(&s, &b).unwrap();
        assert!(bog.v_alpha.iter().all(|v| v.norm() == 0.0));
        let cov = analytic_steady_correlators(&bog, &b).unwrap();
        assert!(cov.max_abs_diff(&PairCovariance::vacuum(4)) < 1e-15);
    }

    #[test]
    fn full_pairing_limit_fills_lattice() {
        let s = uniform_chain(2, 1.0, 1.0, 1.0).unwrap();
        let b = eigenbasis(&s).unwrap();
        let cov = analytic_steady_correlators(&bogoliubov(&s, &b).unwrap(), &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((cov.normal[[i, j]] - C64::new(id, 0.0)).norm() < 1e-12);
                assert!(cov.anomalous[[i, j]].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_chain_density_is_flat() {
        let s = uniform_chain(3, 1.0, 0.4, 1.0).unwrap();
        let b = eigenbasis(&s).unwrap();
        let cov = analytic_steady_correlators(&bogoliubov(&s, &b).unwrap(), &b).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 0.4 } else { 0.0 };
                assert!((cov.normal[[i, j]] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!(cov.purity_residual() < 1e-10);
        assert!(jump_occupation(&s, &cov).abs() < 1e-12);
        assert!(cov.energy(&s.hopping).abs() < 1e-10);
        assert!((cov.parity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn majorana_round_trip() {
        let s = build_chain(2, &[1.0, 0.5], true).unwrap().with_v2(0.3).unwrap();
        let b = eigenbasis(&s).unwrap();
        let cov = analytic_steady_correlators(&bogoliubov(&s, &b).unwrap(), &b).unwrap();
        let back = PairCovariance::from_majorana(&cov.to_majorana());
        assert!(back.max_abs_diff(&cov) < 1e-14);
        let vac = PairCovariance::vacuum(2).to_majorana();
        assert!((vac[[0, 1]] + 1.0).abs() < 1e-15);
        assert!((PairCovariance::vacuum(3).parity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn steady_covariance_matches_analytic() {
        let s = build_chain(3, &[1.0, 1.3, 0.6], true).unwrap().with_v2(0.35).unwrap();
        let b = eigenbasis(&s).unwrap();
        let want = analytic_steady_correlators(&bogoliubov(&s, &b).unwrap(), &b).unwrap();
        let got = steady_covariance(&s).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-10, "{}", got.max_abs_diff(&want));
    }

    #[test]
    fn decoupled_pair_rates() {
        let s = build_chain(1, &[0.0], false).unwrap().with_v2(0.3).unwrap();
        let r = rapidity_spectrum(&s).unwrap();
        let mut nonzero: Vec<f64> = r.rates.iter().filter(|z| z.norm() > 1e-12).map(|z| z.re).collect();
        nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero.iter().all(|&x| (x + 0.5).abs() < 1e-12));
        assert!(steady_covariance(&s).is_err());
    }

    #[test]
    fn closed_system_rates_are_imaginary() {
        let s = uniform_chain(2, 1.0, 0.3, 0.0).unwrap();
        let r = rapidity_spectrum(&s).unwrap();
        assert!(r.rates.iter().all(|z| z.re.abs() < 1e-12));
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn closed_evolution_conserves_occupations() {
        use ndarray_linalg::{EigValsh, UPLO};
        let s = uniform_chain(2, 1.0, 0.3, 0.0).unwrap();
        let mut cov = PairCovariance::vacuum(4);
        cov.normal[[0, 0]] = ONE;
        cov.normal[[2, 2]] = C64::new(0.5, 0.0);
        let traj = evolve_covariance(&s, &cov, &[0.0, 1.0, 7.5]).unwrap();
        let ev0 = crate::linalg::hermitize(&traj[0].normal).eigvalsh(UPLO::Lower).unwrap();
        let ev2 = crate::linalg::hermitize(&traj[2].normal).eigvalsh(UPLO::Lower).unwrap();
        for k in 0..4 {
            assert!((ev0[k] - ev2[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn log_negativity_uniform() {
        let s = uniform_chain(4, 1.0, 0.5, 1.0).unwrap();
        let b = eigenbasis(&s).unwrap();
        let e = log_negativity(&bogoliubov(&s, &b).unwrap());
        assert!((e - 4.0).abs() < 1e-12);
        let s0 = uniform_chain(4, 1.0, 0.0, 1.0).unwrap();
        let b0 = eigenbasis(&s0).unwrap();
        assert_eq!(log_negativity(&bogoliubov(&s0, &b0).unwrap()), 0.0);
    }
}
