//! Sparse operators and vectorized Lindblad superoperators.
//!
//! Density matrices are vectorized row-major, `vec(rho)[i * d + j] = rho_ij`,
//! so `vec(A rho B) = (A kron B^T) vec(rho)`.

use ndarray::Array2;
use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::linalg::ZERO;
use crate::C64;

pub type SparseOp = CsMat<C64>;

/// Sparse matrix from `(row, col, value)` triplets; duplicates are summed.
pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, C64)]) -> SparseOp {
    let mut tri = TriMat::with_capacity((rows, cols), entries.len());
    for &(r, c, v) in entries {
        tri.add_triplet(r, c, v);
    }
    let m: SparseOp = tri.to_csr();
    prune(&m)
}

fn prune(m: &SparseOp) -> SparseOp {
    let mut tri = TriMat::with_capacity(m.shape(), m.nnz());
    for (v, (r, c)) in m.iter() {
        if *v != ZERO {
            tri.add_triplet(r, c, *v);
        }
    }
    tri.to_csr()
}

pub fn identity(n: usize) -> SparseOp {
    CsMat::eye(n)
}

pub fn from_dense(a: &Array2<C64>) -> SparseOp {
    let mut entries = Vec::new();
    for ((r, c), v) in a.indexed_iter() {
        if *v != ZERO {
            entries.push((r, c, *v));
        }
    }
    from_triplets(a.nrows(), a.ncols(), &entries)
}

pub fn to_dense(m: &SparseOp) -> Array2<C64> {
    let mut out = Array2::zeros(m.shape());
    for (v, (r, c)) in m.iter() {
        out[[r, c]] += *v;
    }
    out
}

pub fn transpose(m: &SparseOp) -> SparseOp {
    m.transpose_view().to_csr()
}

pub fn conj(m: &SparseOp) -> SparseOp {
    m.map(|z| z.conj())
}

pub fn adjoint(m: &SparseOp) -> SparseOp {
    conj(&transpose(m))
}

pub fn scale(m: &SparseOp, s: C64) -> SparseOp {
    m.map(|z| z * s)
}

pub fn add(a: &SparseOp, b: &SparseOp) -> SparseOp {
    prune(&(a + b))
}

pub fn mul(a: &SparseOp, b: &SparseOp) -> SparseOp {
    prune(&(a * b))
}

pub fn kron(a: &SparseOp, b: &SparseOp) -> SparseOp {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut tri = TriMat::with_capacity((ra * rb, ca * cb), a.nnz() * b.nnz());
    for (va, (ia, ja)) in a.iter() {
        for (vb, (ib, jb)) in b.iter() {
            tri.add_triplet(ia * rb + ib, ja * cb + jb, va * vb);
        }
    }
    tri.to_csr()
}

/// `y = M x`, parallel over rows.
pub fn matvec(m: &SparseOp, x: &[C64], y: &mut [C64]) {
    let indptr = m.indptr();
    let indptr = indptr.raw_storage();
    let idx = m.indices();
    let data = m.data();
    y.par_chunks_mut(4096).enumerate().for_each(|(chunk, ys)| {
        let base = chunk * 4096;
        for (k, yk) in ys.iter_mut().enumerate() {
            let r = base + k;
            let mut acc = ZERO;
            for p in indptr[r]..indptr[r + 1] {
                acc += data[p] * x[idx[p]];
            }
            *yk = acc;
        }
    });
}

pub fn apply(m: &SparseOp, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; m.rows()];
    matvec(m, x, &mut y);
    y
}

/// A jump operator with its rate: contributes `rate * D[op]`.
#[derive(Clone, Debug)]
pub struct Jump {
    pub rate: f64,
    pub op: SparseOp,
    pub label: String,
}

/// Vectorized Lindblad generator with metadata about the included jumps.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: SparseOp,
    pub jumps: Vec<String>,
}

impl Superoperator {
    pub fn hilbert_dim(&self) -> usize {
        (self.dim as f64).sqrt().round() as usize
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        apply(&self.matrix, x)
    }

    pub fn apply_rho(&self, rho: &Array2<C64>) -> Array2<C64> {
        let d = rho.nrows();
        let v: Vec<C64> = rho.iter().cloned().collect();
        Array2::from_shape_vec((d, d), self.apply(&v)).unwrap()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        to_dense(&self.matrix)
    }

    /// `|| 1^T L ||`: the trace functional must be a left null vector.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.hilbert_dim();
        let mut acc = vec![ZERO; self.dim];
        for (v, (r, c)) in self.matrix.iter() {
            if r / d == r % d {
                acc[c] += *v;
            }
        }
        acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Principal block on the given vectorized indices.
    pub fn restrict(&self, keep: &[usize]) -> SparseOp {
        restrict(&self.matrix, keep)
    }
}

/// Principal submatrix of `m` on `keep`; entries leaving the block are dropped.
pub fn restrict(m: &SparseOp, keep: &[usize]) -> SparseOp {
    let mut pos = vec![usize::MAX; m.cols()];
    for (k, &i) in keep.iter().enumerate() {
        pos[i] = k;
    }
    let mut tri = TriMat::new((keep.len(), keep.len()));
    for (k, &r) in keep.iter().enumerate() {
        if let Some(row) = m.outer_view(r) {
            for (c, v) in row.iter() {
                if pos[c] != usize::MAX {
                    tri.add_triplet(k, pos[c], *v);
                }
            }
        }
    }
    tri.to_csr()
}

/// Largest entry coupling `keep` to its complement.
pub fn block_leakage(m: &SparseOp, keep: &[usize]) -> f64 {
    let mut inside = vec![false; m.cols()];
    for &i in keep {
        inside[i] = true;
    }
    m.iter()
        .filter(|(_, (r, c))| inside[*r] != inside[*c])
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max)
}

/// `L = -i(H x 1 - 1 x H^T) + sum_k rate_k (A x A^* - 1/2 A^dag A x 1 - 1/2 1 x (A^dag A)^T)`.
pub fn lindblad(h: &SparseOp, jumps: &[Jump]) -> Superoperator {
    let d = h.rows();
    let id = identity(d);
    let mi = C64::new(0.0, -1.0);
    let mut total = add(&scale(&kron(h, &id), mi), &scale(&kron(&id, &transpose(h)), -mi));
    let mut labels = Vec::new();
    for j in jumps {
        if j.rate == 0.0 {
            continue;
        }
        let a = &j.op;
        let ad = adjoint(a);
        let ada = mul(&ad, a);
        let r = C64::new(j.rate, 0.0);
        let term = add(
            &kron(a, &conj(a)),
            &add(&scale(&kron(&ada, &id), C64::new(-0.5, 0.0)), &scale(&kron(&id, &transpose(&ada)), C64::new(-0.5, 0.0))),
        );
        total = add(&total, &scale(&term, r));
        labels.push(j.label.clone());
    }
    Superoperator { dim: d * d, matrix: total, jumps: labels }
}
