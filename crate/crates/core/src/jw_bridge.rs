//! Jordan-Wigner bridge between the spin register and Fock space.
//!
//! Fock states are occupation bitmasks with site `k` (in `LatticeSpec` order,
//! labels `-N..-1, 1..N`) on bit `k`, and `|n> = prod_{k ascending} (c_k^dagger)^{n_k} |0>`,
//! so `c_k |n> = (-1)^{sum_{j<k} n_j} n_k |n - e_k>`. The spin-side fermions use
//! strings referenced to the first site right of the centre:
//! `c_i = (prod_{j=1}^{i} Z_j) s^-_i` for `i >= 1` and
//! `c_i = (prod_{j=1}^{N} Z_j)(prod_{j=-N}^{i} Z_j) s^-_i` for `i <= -1`, with `Z = (-1)^n`.

use ndarray::Array2;
use serde::Serialize;

use crate::fermi_gaussian::{steady_covariance, LinearJump};
use crate::linalg::{dagger, ONE, ZERO};
use crate::model::LatticeSpec;
use crate::superop::{add, from_triplets, lindblad, mul, scale, to_dense, transpose, Jump, SparseOp, Superoperator};
use crate::{Error, Result, C64};

/// Largest register for the Fock-space oracle.
pub const FOCK_SITE_CAP: usize = 8;

/// Sparse Fock-space operator with a symbolic description.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub matrix: SparseOp,
    pub description: String,
}

fn check_cap(n_sites: usize) -> Result<()> {
    if n_sites > FOCK_SITE_CAP {
        return Err(Error::DimensionCap { sites: n_sites, cap: FOCK_SITE_CAP });
    }
    Ok(())
}

/// `c_k` in the little-endian Fock basis.
pub fn annihilator(n_sites: usize, k: usize) -> SparseOp {
    let dim = 1usize << n_sites;
    let mut entries = Vec::with_capacity(dim / 2);
    for n in 0..dim {
        if n >> k & 1 == 1 {
            let below = (n & ((1 << k) - 1)).count_ones();
            let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
            entries.push((n ^ (1 << k), n, C64::new(sign, 0.0)));
        }
    }
    from_triplets(dim, dim, &entries)
}

pub fn creator(n_sites: usize, k: usize) -> SparseOp {
    transpose(&annihilator(n_sites, k))
}

/// `(-1)^N` on Fock states.
pub fn parity_operator(n_sites: usize) -> SparseOp {
    let dim = 1usize << n_sites;
    let entries: Vec<_> =
        (0..dim).map(|n| (n, n, C64::new(if n.count_ones() % 2 == 0 { 1.0 } else { -1.0 }, 0.0))).collect();
    from_triplets(dim, dim, &entries)
}

fn same(a: &SparseOp, b: &SparseOp) -> bool {
    to_dense(a) == to_dense(b)
}

/// Checks `{c_i, c_j^dagger} = delta_ij` and `{c_i, c_j} = 0` exactly.
pub fn anticommutation_holds(n_sites: usize) -> bool {
    let dim = 1usize << n_sites;
    let id = crate::superop::identity(dim);
    let zero = from_triplets(dim, dim, &[]);
    let cs: Vec<SparseOp> = (0..n_sites).map(|k| annihilator(n_sites, k)).collect();
    let cds: Vec<SparseOp> = cs.iter().map(transpose).collect();
    for i in 0..n_sites {
        for j in 0..n_sites {
            let mixed = add(&mul(&cs[i], &cds[j]), &mul(&cds[j], &cs[i]));
            let pure = add(&mul(&cs[i], &cs[j]), &mul(&cs[j], &cs[i]));
            if !same(&mixed, if i == j { &id } else { &zero }) || !same(&pure, &zero) {
                return false;
            }
        }
    }
    true
}

/// Sites whose `Z` factors enter the string of `c_k` (central chain, `n_sites = 2N`).
fn string_sites(n_sites: usize, k: usize) -> Vec<usize> {
    let np = n_sites / 2;
    if k >= np {
        (np..=k).collect()
    } else {
        (np..n_sites).chain(0..=k).collect()
    }
}

fn spin_bit(n_sites: usize, k: usize) -> usize {
    1 << (n_sites - 1 - k)
}

/// `c_k` written in the spin basis through the string convention above.
pub fn spin_annihilator(n_sites: usize, k: usize) -> SparseOp {
    let dim = 1usize << n_sites;
    let string = string_sites(n_sites, k);
    let mut entries = Vec::with_capacity(dim / 2);
    for s in 0..dim {
        if s & spin_bit(n_sites, k) != 0 {
            let t = s ^ spin_bit(n_sites, k);
            let flips = string.iter().filter(|&&j| t & spin_bit(n_sites, j) != 0).count();
            entries.push((t, s, C64::new(if flips % 2 == 0 { 1.0 } else { -1.0 }, 0.0)));
        }
    }
    from_triplets(dim, dim, &entries)
}

/// The Jordan-Wigner unitary `W` (spin <- Fock): column `n` is the spin image of Fock state `n`.
pub fn jw_unitary(n_sites: usize) -> Result<SparseOp> {
    check_cap(n_sites)?;
    let dim = 1usize << n_sites;
    let mut entries = Vec::with_capacity(dim);
    for n in 0..dim {
        let mut state = 0usize;
        let mut sign = 1.0;
        for k in (0..n_sites).rev() {
            if n >> k & 1 == 1 {
                let flips = string_sites(n_sites, k).iter().filter(|&&j| state & spin_bit(n_sites, j) != 0).count();
                if flips % 2 == 1 {
                    sign = -sign;
                }
                state |= spin_bit(n_sites, k);
            }
        }
        entries.push((state, n, C64::new(sign, 0.0)));
    }
    Ok(from_triplets(dim, dim, &entries))
}

/// `W^dagger A W`: a spin-basis operator expressed in Fock space.
pub fn to_fock(w: &SparseOp, a: &SparseOp) -> SparseOp {
    mul(&mul(&crate::superop::adjoint(w), a), w)
}

/// `W A W^dagger`: a Fock-space operator expressed in the spin basis.
pub fn to_spin(w: &SparseOp, a: &SparseOp) -> SparseOp {
    mul(&mul(w, a), &crate::superop::adjoint(w))
}

fn hopping_term(n_sites: usize, i: usize, j: usize, h: C64) -> SparseOp {
    scale(&mul(&creator(n_sites, i), &annihilator(n_sites, j)), h)
}

/// Fermionized spin Hamiltonian and engineered jump.
///
/// Bulk bonds become `-H_ij c_i^dagger c_j`; the central bond carries the
/// parity string, `+H_ij (-1)^N c_i^dagger c_j`. The jump is
/// `u c_0 (-1)^N - v e^{i phi} c_1^dagger`, equal to minus the spin jump.
pub fn jw_fermionize(spec: &LatticeSpec) -> Result<(FockOperator, FockOperator)> {
    if !spec.is_central_chain() {
        return Err(Error::InvalidSpec(
            "fermionization needs a nearest-neighbour chain dissipated on its two central sites".into(),
        ));
    }
    let n = spec.n_sites();
    check_cap(n)?;
    let dim = 1usize << n;
    let parity = parity_operator(n);
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    let mut h = from_triplets(dim, dim, &[]);
    for (i, j, hij) in spec.bonds() {
        let central = (i, j) == (d0.min(d1), d0.max(d1));
        let (fwd, back) = (hopping_term(n, i, j, hij), hopping_term(n, j, i, hij.conj()));
        let pair = add(&fwd, &back);
        let term = if central { mul(&parity, &pair) } else { scale(&pair, -ONE) };
        h = add(&h, &term);
    }
    let beta = add(
        &scale(&mul(&annihilator(n, d0), &parity), C64::new(spec.u, 0.0)),
        &scale(&creator(n, d1), -C64::from_polar(spec.v, spec.phi)),
    );
    Ok((
        FockOperator {
            matrix: h,
            description: "-sum_bulk J_i (c_i^dag c_{i+1} + h.c.) + J_c (-1)^N (c_0^dag c_1 + h.c.)".into(),
        },
        FockOperator { matrix: beta, description: "u c_0 (-1)^N - v e^{i phi} c_1^dag".into() },
    ))
}

/// Coefficients of the engineered jump on the two parity sectors:
/// `beta_L = beta_A P_even - [a beta_A + b beta_B^dagger] (1 - P_even)`,
/// with `beta_A = u c_0 - v c_1^dagger` and `beta_B = u c_1 + v c_0^dagger`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParityDecomposition {
    /// `(coefficient of beta_A, coefficient of beta_B^dagger)` on even states.
    pub even_op: (f64, f64),
    /// `(a, b) = (u^2 - v^2, 2uv)` on odd states, entering with an overall minus sign.
    pub odd_op: (f64, f64),
}

pub fn parity_decompose(u: f64, v: f64) -> ParityDecomposition {
    ParityDecomposition { even_op: (1.0, 0.0), odd_op: (u * u - v * v, 2.0 * u * v) }
}

impl ParityDecomposition {
    /// Rebuilds `beta_L` in Fock space from the local Bogoliubov operators.
    pub fn assemble(&self, n_sites: usize, d0: usize, d1: usize, u: f64, v: f64) -> SparseOp {
        let dim = 1usize << n_sites;
        let r = |x: f64| C64::new(x, 0.0);
        let beta_a = add(&scale(&annihilator(n_sites, d0), r(u)), &scale(&creator(n_sites, d1), r(-v)));
        let beta_b = add(&scale(&annihilator(n_sites, d1), r(u)), &scale(&creator(n_sites, d0), r(v)));
        let beta_b_dag = crate::superop::adjoint(&beta_b);
        let parity = parity_operator(n_sites);
        let id = crate::superop::identity(dim);
        let p_even = scale(&add(&id, &parity), r(0.5));
        let p_odd = scale(&add(&id, &scale(&parity, -ONE)), r(0.5));
        let even = add(&scale(&beta_a, r(self.even_op.0)), &scale(&beta_b_dag, r(self.even_op.1)));
        let odd = add(&scale(&beta_a, r(self.odd_op.0)), &scale(&beta_b_dag, r(self.odd_op.1)));
        add(&mul(&even, &p_even), &scale(&mul(&odd, &p_odd), -ONE))
    }
}

/// Lindblad generator on Fock space; `jumps` are `(rate, operator)` pairs.
pub fn fock_liouvillian(h: &FockOperator, jumps: &[(f64, &FockOperator)]) -> Result<Superoperator> {
    let n = h.matrix.rows().trailing_zeros() as usize;
    check_cap(n)?;
    let js: Vec<Jump> =
        jumps.iter().map(|(rate, op)| Jump { rate: *rate, op: op.matrix.clone(), label: op.description.clone() }).collect();
    Ok(lindblad(&h.matrix, &js))
}

/// Fermionized spin Liouvillian `-i[H, .] + Gamma D[beta_L]`.
pub fn fermionized_liouvillian(spec: &LatticeSpec) -> Result<Superoperator> {
    let (h, beta) = jw_fermionize(spec)?;
    fock_liouvillian(&h, &[(spec.gamma, &beta)])
}

/// Linear jump `sum_j a_j c_j + b_j c_j^dagger` as a Fock operator.
pub fn linear_jump_operator(n_sites: usize, jump: &LinearJump) -> FockOperator {
    let dim = 1usize << n_sites;
    let mut op = from_triplets(dim, dim, &[]);
    for j in 0..n_sites {
        if jump.annihilation[j] != ZERO {
            op = add(&op, &scale(&annihilator(n_sites, j), jump.annihilation[j]));
        }
        if jump.creation[j] != ZERO {
            op = add(&op, &scale(&creator(n_sites, j), jump.creation[j]));
        }
    }
    FockOperator { matrix: op, description: "sum_j a_j c_j + b_j c_j^dag".into() }
}

/// Quadratic model `sum_ij H_ij c_i^dagger c_j` with the free-fermion jump, in Fock space.
pub fn quadratic_model(spec: &LatticeSpec) -> Result<(FockOperator, FockOperator)> {
    let n = spec.n_sites();
    check_cap(n)?;
    let dim = 1usize << n;
    let mut h = from_triplets(dim, dim, &[]);
    for i in 0..n {
        for j in 0..n {
            if spec.hopping[[i, j]] != ZERO {
                h = add(&h, &hopping_term(n, i, j, spec.hopping[[i, j]]));
            }
        }
    }
    let jump = linear_jump_operator(n, &crate::fermi_gaussian::engineered_jump(spec));
    Ok((FockOperator { matrix: h, description: "sum_ij H_ij c_i^dag c_j".into() }, jump))
}

/// Quadratic model obtained from the fermionized spin chain by setting `(-1)^N = 1`.
pub fn even_sector_spec(spec: &LatticeSpec) -> LatticeSpec {
    let mut out = spec.clone();
    let (d0, d1) = (spec.diss_site_0, spec.diss_site_1);
    out.hopping = spec.hopping.mapv(|z| -z);
    out.hopping[[d0, d1]] = spec.hopping[[d0, d1]];
    out.hopping[[d1, d0]] = spec.hopping[[d1, d0]];
    out
}

/// Distribution of the total Bogoliubov excitation number.
#[derive(Clone, Debug, Serialize)]
pub struct TowerHistogram {
    pub probabilities: Vec<f64>,
    pub degeneracies: Vec<usize>,
}

impl TowerHistogram {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Levels carrying more than `tol` probability.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.probabilities.len()).filter(|&m| self.probabilities[m] > tol).collect()
    }

    /// Expectation of `ceil(N_Bog / 2)`, the label of the conserved pair blocks.
    pub fn block_label(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(m, p)| m.div_ceil(2) as f64 * p).sum()
    }
}

/// Bogoliubov number operator of the even-sector model, in Fock space.
///
/// With `Gamma` the Majorana covariance of the Gaussian steady state,
/// `N_Bog = n/2 - (i/4) sum_ab Gamma_ab w_a w_b`.
pub fn bogoliubov_number(spec: &LatticeSpec) -> Result<Array2<C64>> {
    let n = spec.n_sites();
    check_cap(n)?;
    let gamma = steady_covariance(&even_sector_spec(spec))?.to_majorana();
    let w: Vec<Array2<C64>> = (0..n)
        .flat_map(|j| {
            let c = to_dense(&annihilator(n, j));
            let cd = dagger(&c);
            [&c + &cd, (&c - &cd).mapv(|z| z * C64::new(0.0, -1.0))]
        })
        .collect();
    let dim = 1usize << n;
    let mut out = crate::linalg::eye(dim).mapv(|z| z * (n as f64 / 2.0));
    for a in 0..2 * n {
        for b in 0..2 * n {
            if gamma[[a, b]] != 0.0 {
                let coef = C64::new(0.0, -0.25 * gamma[[a, b]]);
                out = out + w[a].dot(&w[b]).mapv(|z| z * coef);
            }
        }
    }
    Ok(crate::linalg::hermitize(&out))
}

/// Level projectors of `N_Bog`, indexed by excitation number.
pub fn tower_projectors(spec: &LatticeSpec) -> Result<Vec<Array2<C64>>> {
    let n = spec.n_sites();
    let nb = bogoliubov_number(spec)?;
    let (vals, vecs) = crate::linalg::eigh_hermitian(&nb)?;
    let dim = 1usize << n;
    let mut proj = vec![Array2::<C64>::zeros((dim, dim)); n + 1];
    for (c, &e) in vals.iter().enumerate() {
        let m = e.round();
        if (e - m).abs() > 1e-6 || m < 0.0 || m as usize > n {
            return Err(Error::Linalg(format!("Bogoliubov number eigenvalue {e} is not an integer level")));
        }
        let col = vecs.column(c);
        let p = &mut proj[m as usize];
        for i in 0..dim {
            for j in 0..dim {
                p[[i, j]] += col[i] * col[j].conj();
            }
        }
    }
    Ok(proj)
}

/// Tower occupation of a spin-basis density matrix.
pub fn tower_histogram(rho_spin: &Array2<C64>, spec: &LatticeSpec) -> Result<TowerHistogram> {
    let projectors = tower_projectors(spec)?;
    tower_histogram_with(rho_spin, spec, &projectors)
}

/// Same as [`tower_histogram`] with precomputed projectors.
pub fn tower_histogram_with(
    rho_spin: &Array2<C64>,
    spec: &LatticeSpec,
    projectors: &[Array2<C64>],
) -> Result<TowerHistogram> {
    let n = spec.n_sites();
    let w = to_dense(&jw_unitary(n)?);
    let rho = dagger(&w).dot(rho_spin).dot(&w);
    let probabilities = projectors.iter().map(|p| crate::linalg::trace(&p.dot(&rho)).re).collect();
    let degeneracies = (0..=n).map(|m| binomial(n, m)).collect();
    Ok(TowerHistogram { probabilities, degeneracies })
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
