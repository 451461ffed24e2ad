//! Lattice definitions, chiral-symmetry checks and the polar pairing map.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::Serialize;

use crate::fermi_gaussian::{bogoliubov_unchecked, eigenbasis};
use crate::linalg::{dagger, fro, hermiticity_error, svd_full};
use crate::{Error, Result, C64};

/// Relative threshold below which a Bogoliubov norm `N_alpha` counts as dark.
pub const DARK_THRESHOLD: f64 = 1e-8;
const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sublattice {
    A,
    B,
    Unassigned,
}

#[derive(Clone, Debug)]
pub struct LatticeSpec {
    pub n_pairs: usize,
    pub hopping: Array2<C64>,
    pub sublattice: Vec<Sublattice>,
    pub diss_site_0: usize,
    pub diss_site_1: usize,
    pub u: f64,
    pub v: f64,
    pub phi: f64,
    pub gamma: f64,
    /// Site involution `k -> mirror[k]` when the spec was built as a mirror chain.
    pub mirror: Option<Vec<usize>>,
}

impl LatticeSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_pairs: usize,
        hopping: Array2<C64>,
        sublattice: Vec<Sublattice>,
        diss_site_0: usize,
        diss_site_1: usize,
        u: f64,
        v: f64,
        phi: f64,
        gamma: f64,
    ) -> Result<Self> {
        let spec = LatticeSpec {
            n_pairs,
            hopping,
            sublattice,
            diss_site_0,
            diss_site_1,
            u,
            v,
            phi,
            gamma,
            mirror: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = 2 * self.n_pairs;
        if self.n_pairs < 1 {
            return Err(Error::InvalidSpec("n_pairs must be at least 1".into()));
        }
        if self.hopping.dim() != (n, n) {
            return Err(Error::InvalidSpec(format!(
                "hopping is {:?}, expected {n}x{n}",
                self.hopping.dim()
            )));
        }
        if hermiticity_error(&self.hopping) > 1e-12 {
            return Err(Error::InvalidSpec("hopping matrix is not Hermitian".into()));
        }
        if self.sublattice.len() != n {
            return Err(Error::InvalidSpec("one sublattice label per site required".into()));
        }
        if (self.u * self.u + self.v * self.v - 1.0).abs() > 1e-12 || self.u < 0.0 || self.v < 0.0 {
            return Err(Error::InvalidSpec(format!("u^2 + v^2 = 1 violated (u={}, v={})", self.u, self.v)));
        }
        if self.diss_site_0 >= n || self.diss_site_1 >= n || self.diss_site_0 == self.diss_site_1 {
            return Err(Error::InvalidSpec("dissipation sites must be distinct valid indices".into()));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::InvalidSpec("gamma must be non-negative".into()));
        }
        if self.labels_assigned() {
            let na = self.sublattice.iter().filter(|&&s| s == Sublattice::A).count();
            if na != self.n_pairs {
                return Err(Error::InvalidSpec(format!("sublattice A has {na} sites, expected {}", self.n_pairs)));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_pairs
    }

    pub fn v2(&self) -> f64 {
        self.v * self.v
    }

    pub fn labels_assigned(&self) -> bool {
        self.sublattice.iter().all(|&s| s != Sublattice::Unassigned)
    }

    /// Chain label of site index `k`: `-N..=-1` then `1..=N`.
    pub fn site_label(&self, k: usize) -> i64 {
        let n = self.n_pairs as i64;
        let k = k as i64;
        if k < n {
            k - n
        } else {
            k - n + 1
        }
    }

    pub fn with_v2(mut self, v2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v2) {
            return Err(Error::InvalidSpec(format!("v^2 = {v2} outside [0, 1]")));
        }
        self.v = v2.sqrt();
        self.u = (1.0 - v2).sqrt();
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
        self
    }

    pub fn with_dissipator(mut self, site0: usize, site1: usize) -> Result<Self> {
        self.diss_site_0 = site0;
        self.diss_site_1 = site1;
        self.validate()?;
        Ok(self)
    }

    /// Nonzero hopping bonds `(i, j, H_ij)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize, C64)> {
        let n = self.n_sites();
        let scale = self.hopping.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let h = self.hopping[[i, j]];
                if h.norm() > 1e-14 * scale.max(1.0) {
                    out.push((i, j, h));
                }
            }
        }
        out
    }

    /// True for a nearest-neighbour chain in index order with the dissipator on
    /// the two central sites.
    pub fn is_central_chain(&self) -> bool {
        let n = self.n_sites();
        let np = self.n_pairs;
        let adjacent = self.bonds().iter().all(|&(i, j, _)| j == i + 1);
        let diag_free = (0..n).all(|k| self.hopping[[k, k]].norm() < 1e-14);
        let sites = (self.diss_site_0, self.diss_site_1) == (np - 1, np);
        adjacent && diag_free && sites
    }
}

/// Nearest-neighbour chain on sites `-N..=-1, 1..=N`.
///
/// With `mirror = true` the couplings list holds the `N` independent bonds
/// starting from the central one and moving outwards; otherwise it holds all
/// `2N - 1` bonds from left to right. Pairing defaults to `v = 0`, `Gamma = 1`.
pub fn build_chain(n_pairs: usize, couplings: &[f64], mirror: bool) -> Result<LatticeSpec> {
    if n_pairs < 1 {
        return Err(Error::InvalidSpec("chain needs at least one pair".into()));
    }
    let n = 2 * n_pairs;
    let bonds: Vec<f64> = if mirror {
        if couplings.len() != n_pairs {
            return Err(Error::InvalidSpec(format!(
                "mirror chain expects {n_pairs} couplings, got {}",
                couplings.len()
            )));
        }
        let mut b = vec![0.0; n - 1];
        b[n_pairs - 1] = couplings[0];
        for k in 1..n_pairs {
            b[n_pairs - 1 + k] = couplings[k];
            b[n_pairs - 1 - k] = couplings[k];
        }
        b
    } else {
        if couplings.len() != n - 1 {
            return Err(Error::InvalidSpec(format!(
                "chain expects {} couplings, got {}",
                n - 1,
                couplings.len()
            )));
        }
        couplings.to_vec()
    };
    let mut h = Array2::zeros((n, n));
    for (b, &j) in bonds.iter().enumerate() {
        h[[b, b + 1]] = C64::new(j, 0.0);
        h[[b + 1, b]] = C64::new(j, 0.0);
    }
    let sublattice = (0..n).map(|k| if k % 2 == 0 { Sublattice::A } else { Sublattice::B }).collect();
    let mut spec = LatticeSpec::new(n_pairs, h, sublattice, n_pairs - 1, n_pairs, 1.0, 0.0, 0.0, 1.0)?;
    let symmetric = (0..n - 1).all(|b| (bonds[b] - bonds[n - 2 - b]).abs() < 1e-14);
    if symmetric {
        spec.mirror = Some((0..n).map(|k| n - 1 - k).collect());
    }
    Ok(spec)
}

/// Uniform mirror chain with hopping `j`, pairing `v^2` and rate `gamma`.
pub fn uniform_chain(n_pairs: usize, j: f64, v2: f64, gamma: f64) -> Result<LatticeSpec> {
    build_chain(n_pairs, &vec![j; n_pairs], true)?.with_v2(v2)?.with_gamma(gamma)
}

/// Site reference `(sublattice, index within sublattice)`.
pub type SiteRef = (Sublattice, usize);

/// Bipartite lattice from an edge list. A sites occupy indices `0..N`, B sites
/// `N..2N`; the dissipator defaults to `(A0, B0)`.
pub fn build_bipartite(edges: &[(SiteRef, SiteRef, C64)], n_pairs: usize) -> Result<LatticeSpec> {
    if n_pairs < 1 {
        return Err(Error::InvalidSpec("lattice needs at least one pair".into()));
    }
    let n = 2 * n_pairs;
    let mut h = Array2::zeros((n, n));
    for &((s1, i1), (s2, i2), amp) in edges {
        if s1 == s2 {
            return Err(Error::InvalidSpec(format!("edge {s1:?}{i1}-{s2:?}{i2} stays within one sublattice")));
        }
        if i1 >= n_pairs || i2 >= n_pairs {
            return Err(Error::InvalidSpec(format!(
                "site index exceeds sublattice size {n_pairs}: sublattices must have equal size"
            )));
        }
        let (a, b, amp) = match s1 {
            Sublattice::A => (i1, i2, amp),
            Sublattice::B => (i2, i1, amp.conj()),
            Sublattice::Unassigned => return Err(Error::InvalidSpec("edge endpoint without sublattice".into())),
        };
        if s2 == Sublattice::Unassigned {
            return Err(Error::InvalidSpec("edge endpoint without sublattice".into()));
        }
        h[[a, n_pairs + b]] += amp;
        h[[n_pairs + b, a]] += amp.conj();
    }
    let sublattice = (0..n).map(|k| if k < n_pairs { Sublattice::A } else { Sublattice::B }).collect();
    LatticeSpec::new(n_pairs, h, sublattice, 0, n_pairs, 1.0, 0.0, 0.0, 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiralReport {
    pub is_bipartite_hopping: bool,
    pub chiral_ok: bool,
    pub constraint_ok: bool,
    pub dark_modes: Vec<usize>,
    pub max_constraint_residual: f64,
    pub worst_mode: Option<usize>,
    pub min_norm: f64,
    pub notes: Vec<String>,
}

impl ChiralReport {
    pub fn passed(&self) -> bool {
        self.chiral_ok && self.constraint_ok && self.dark_modes.is_empty()
    }
}

fn coupling_tol(h: &Array2<C64>) -> f64 {
    1e-12 * h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300)
}

/// Diagonal sign operator `C` with `C H C = -H`, if one exists.
///
/// Signs are fixed by a breadth-first two-colouring with `C = +1` on the
/// component seed; the component holding `diss_site_0` is seeded there.
pub fn chiral_signs(spec: &LatticeSpec) -> Option<Vec<f64>> {
    let n = spec.n_sites();
    let h = &spec.hopping;
    let tol = coupling_tol(h);
    if (0..n).any(|k| h[[k, k]].norm() > tol) {
        return None;
    }
    let mut sign = vec![0.0f64; n];
    let mut seeds = vec![spec.diss_site_0];
    seeds.extend(0..n);
    for s in seeds {
        if sign[s] != 0.0 {
            continue;
        }
        sign[s] = 1.0;
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j == i || h[[i, j]].norm() <= tol {
                    continue;
                }
                if sign[j] == 0.0 {
                    sign[j] = -sign[i];
                    queue.push_back(j);
                } else if sign[j] == sign[i] {
                    return None;
                }
            }
        }
    }
    Some(sign)
}

pub fn is_bipartite_hopping(spec: &LatticeSpec) -> bool {
    if !spec.labels_assigned() {
        return chiral_signs(spec).is_some();
    }
    let n = spec.n_sites();
    let tol = coupling_tol(&spec.hopping);
    (0..n).all(|i| (0..n).all(|j| spec.sublattice[i] != spec.sublattice[j] || spec.hopping[[i, j]].norm() <= tol))
}

/// Checks bipartiteness, chiral symmetry, the pairing constraint
/// `psi_g[0] psi_g[1]^* + psi_-g[0] psi_-g[1]^* = 0` and the absence of dark modes.
pub fn verify_chiral(spec: &LatticeSpec) -> Result<ChiralReport> {
    spec.validate()?;
    let bip = is_bipartite_hopping(spec);
    let chiral = chiral_signs(spec).is_some();
    let mut report = ChiralReport {
        is_bipartite_hopping: bip,
        chiral_ok: chiral,
        constraint_ok: false,
        dark_modes: Vec::new(),
        max_constraint_residual: f64::NAN,
        worst_mode: None,
        min_norm: f64::NAN,
        notes: Vec::new(),
    };
    if !chiral {
        report.notes.push("no sign operator anticommutes with the hopping matrix".into());
        return Ok(report);
    }
    let basis = match eigenbasis(spec) {
        Ok(b) => b,
        Err(e) => {
            report.notes.push(e.to_string());
            return Ok(report);
        }
    };
    let (worst, res) = basis.constraint_residuals(spec.diss_site_0, spec.diss_site_1);
    report.max_constraint_residual = res;
    report.worst_mode = worst;
    report.constraint_ok = res < CONSTRAINT_TOL;
    if !report.constraint_ok {
        report.notes.push(format!("pairing constraint violated (residual {res:.3e})"));
    }
    let bog = bogoliubov_unchecked(spec, &basis);
    report.min_norm = bog.n_alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    report.dark_modes = bog.dark_modes();
    if !report.dark_modes.is_empty() {
        report.notes.push(format!("dark modes {:?}", report.dark_modes));
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct PolarStructure {
    pub u: Array2<C64>,
    pub w: Array2<C64>,
    pub v: Array2<C64>,
    pub a_sites: Vec<usize>,
    pub b_sites: Vec<usize>,
    pub singular: bool,
    pub reconstruction_error: f64,
}

/// Right polar decomposition `V = W U` of the A-to-B hopping block.
///
/// Rows follow A sites in ascending order. Columns follow B sites in ascending
/// order, or the mirror images of the A sites when the spec carries a mirror map.
pub fn polar_pairing(spec: &LatticeSpec) -> Result<PolarStructure> {
    if !is_bipartite_hopping(spec) {
        return Err(Error::InvalidSpec("polar pairing needs a bipartite hopping matrix".into()));
    }
    let signs = chiral_signs(spec).ok_or_else(|| Error::InvalidSpec("no chiral sign operator".into()))?;
    let n = spec.n_sites();
    let (a_sites, b_sites): (Vec<usize>, Vec<usize>) = if spec.labels_assigned() {
        let a: Vec<usize> = (0..n).filter(|&k| spec.sublattice[k] == Sublattice::A).collect();
        let b = match &spec.mirror {
            Some(m) if a.iter().all(|&k| spec.sublattice[m[k]] == Sublattice::B) => a.iter().map(|&k| m[k]).collect(),
            _ => (0..n).filter(|&k| spec.sublattice[k] == Sublattice::B).collect(),
        };
        (a, b)
    } else {
        let a: Vec<usize> = (0..n).filter(|&k| signs[k] > 0.0).collect();
        let b: Vec<usize> = (0..n).filter(|&k| signs[k] < 0.0).collect();
        (a, b)
    };
    if a_sites.len() != b_sites.len() {
        return Err(Error::InvalidSpec("sublattices differ in size".into()));
    }
    let m = a_sites.len();
    let v = Array2::from_shape_fn((m, m), |(i, j)| spec.hopping[[a_sites[i], b_sites[j]]]);
    let (x, s, yh) = svd_full(&v)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let singular = s.iter().any(|&sv| sv <= 1e-12 * smax.max(1e-300));
    let u = x.dot(&yh);
    let mut sig = Array2::<C64>::zeros((m, m));
    for k in 0..m {
        sig[[k, k]] = C64::new(s[k], 0.0);
    }
    let w = x.dot(&sig).dot(&dagger(&x));
    let vnorm = fro(&v);
    let reconstruction_error = if vnorm > 0.0 { fro(&(&w.dot(&u) - &v)) / vnorm } else { 0.0 };
    Ok(PolarStructure { u, w, v, a_sites, b_sites, singular, reconstruction_error })
}

/// Eight-site branched lattice on a 2 x 4 grid.
///
/// Grid cell `(r, c)` is on sublattice A when `r + c` is even. The dissipator
/// sits on `(0, 2)` (A) and `(0, 1)` (B). Bonds:
/// `free[0]`: (0,2)-(0,1), `free[1]`: (0,1)-(0,0), `free[2]`: (0,1)-(1,1),
/// `free[3]`: (1,1)-(1,0); the dependent path (0,2)-(0,3)-(1,3)-(1,2) is
/// solved so that both dissipation sites have the same local density of
/// states, which makes every Bogoliubov mode share the pairing `v`.
#[derive(Clone, Debug)]
pub struct BranchedLattice {
    pub spec: LatticeSpec,
    pub free: [f64; 4],
    pub dependent: [f64; 3],
    pub moment_residual: f64,
}

/// Grid cell `(r, c)` of the branched lattice to its site index.
pub fn branched_site(r: usize, c: usize) -> usize {
    const SITES: [[usize; 4]; 2] = [[0, 4, 1, 5], [6, 2, 7, 3]];
    SITES[r][c]
}

fn branched_hopping(free: &[f64; 4], dep: &[f64; 3]) -> Array2<C64> {
    let s = branched_site;
    let bonds = [
        (s(0, 2), s(0, 1), free[0]),
        (s(0, 1), s(0, 0), free[1]),
        (s(0, 1), s(1, 1), free[2]),
        (s(1, 1), s(1, 0), free[3]),
        (s(0, 2), s(0, 3), dep[0]),
        (s(0, 3), s(1, 3), dep[1]),
        (s(1, 3), s(1, 2), dep[2]),
    ];
    let mut h = Array2::zeros((8, 8));
    for (i, j, x) in bonds {
        h[[i, j]] = C64::new(x, 0.0);
        h[[j, i]] = C64::new(x, 0.0);
    }
    h
}

fn moment_gaps(free: &[f64; 4], dep: &[f64; 3]) -> [f64; 3] {
    let h = branched_hopping(free, dep).mapv(|z| z.re);
    let (d0, d1) = (branched_site(0, 2), branched_site(0, 1));
    let h2 = h.dot(&h);
    let mut p = h2.clone();
    let mut out = [0.0; 3];
    for g in out.iter_mut() {
        *g = p[[d0, d0]] - p[[d1, d1]];
        p = p.dot(&h2);
    }
    out
}

pub fn build_branched_2d(free: [f64; 4]) -> Result<BranchedLattice> {
    use ndarray_linalg::Solve;
    let mut dep = [1.0; 3];
    let scale = free.iter().map(|x| x * x).sum::<f64>().powi(3).max(1e-300);
    let mut res = f64::INFINITY;
    for _ in 0..100 {
        let f = moment_gaps(&free, &dep);
        res = f.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
        if res < 1e-14 {
            break;
        }
        let mut jac = Array2::<f64>::zeros((3, 3));
        for k in 0..3 {
            let h = 1e-7 * dep[k].abs().max(1.0);
            let mut dp = dep;
            dp[k] += h;
            let fp = moment_gaps(&free, &dp);
            for r in 0..3 {
                jac[[r, k]] = (fp[r] - f[r]) / h;
            }
        }
        let step = jac.solve(&ndarray::arr1(&f)).map_err(|e| Error::Linalg(e.to_string()))?;
        for k in 0..3 {
            dep[k] -= step[k];
        }
    }
    if res.is_nan() || res >= 1e-10 {
        return Err(Error::InvalidSpec(format!("branched lattice bonds did not converge (residual {res:.3e})")));
    }
    let h = branched_hopping(&free, &dep);
    let sublattice = (0..8).map(|k| if k < 4 { Sublattice::A } else { Sublattice::B }).collect();
    let spec = LatticeSpec::new(4, h, sublattice, branched_site(0, 2), branched_site(0, 1), 1.0, 0.0, 0.0, 1.0)?;
    Ok(BranchedLattice { spec, free, dependent: dep, moment_residual: res })
}

/// Hopping matrix gauge transform `H -> D H D^dagger` with `D = diag(e^{i theta})`.
pub fn gauge_transform(spec: &LatticeSpec, theta: &[f64]) -> LatticeSpec {
    let mut out = spec.clone();
    let n = spec.n_sites();
    for i in 0..n {
        for j in 0..n {
            let phase = C64::from_polar(1.0, theta[i] - theta[j]);
            out.hopping[[i, j]] = spec.hopping[[i, j]] * phase;
        }
    }
    out
}
