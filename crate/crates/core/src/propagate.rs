//! Matrix-free propagation for large sparse generators: Chebyshev expansion of
//! `exp(t L) x`, Lanczos bounds on the numerical range, and Arnoldi iteration.

use ndarray::Array2;
use ndarray_linalg::Eig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{bessel_j_sequence, ZERO};
use crate::superop::{adjoint, matvec, SparseOp};
use crate::{Error, Result, C64};

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Rectangle containing the numerical range of an operator.
#[derive(Clone, Copy, Debug)]
pub struct RangeBounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// Extremal eigenvalues of a Hermitian operator by Lanczos with full reorthogonalization.
pub fn lanczos_extremes<F>(mut apply: F, n: usize, iters: usize, seed: u64) -> Result<(f64, f64)>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let m = iters.min(n);
    let mut basis: Vec<Vec<C64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..m {
        let mut w = apply(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(&mut w, -c, b);
            }
        }
        let nb = norm(&w);
        if nb < 1e-12 || j + 1 == m {
            break;
        }
        beta.push(nb);
        w.iter_mut().for_each(|z| *z /= nb);
        basis.push(w);
    }
    let k = alpha.len();
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alpha[i];
        if i + 1 < k {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    use ndarray_linalg::{EigValsh, UPLO};
    let ev = t.eigvalsh(UPLO::Lower)?;
    Ok((ev[0], ev[k - 1]))
}

/// Bendixson rectangle of `op` from Lanczos estimates of its Hermitian and skew parts.
pub fn range_bounds(op: &SparseOp) -> Result<RangeBounds> {
    let adj = adjoint(op);
    let n = op.rows();
    let mut y1 = vec![ZERO; n];
    let mut y2 = vec![ZERO; n];
    let (re_min, re_max) = lanczos_extremes(
        |x| {
            matvec(op, x, &mut y1);
            matvec(&adj, x, &mut y2);
            y1.iter().zip(&y2).map(|(a, b)| (a + b) * 0.5).collect()
        },
        n,
        60,
        1,
    )?;
    let (im_min, im_max) = lanczos_extremes(
        |x| {
            matvec(op, x, &mut y1);
            matvec(&adj, x, &mut y2);
            y1.iter().zip(&y2).map(|(a, b)| (a - b) * C64::new(0.0, -0.5)).collect()
        },
        n,
        60,
        2,
    )?;
    let pad_re = 0.02 * (re_max - re_min) + 1e-9;
    let pad_im = 0.02 * (im_max - im_min) + 1e-9;
    Ok(RangeBounds { re_min: re_min - pad_re, re_max: re_max + pad_re, im_min: im_min - pad_im, im_max: im_max + pad_im })
}

/// Chebyshev propagator on an ellipse with vertical foci enclosing the range rectangle.
pub struct Chebyshev<'a> {
    op: &'a SparseOp,
    center: C64,
    focal: f64,
    growth: f64,
    step: f64,
    tol: f64,
    pub matvecs: std::cell::Cell<usize>,
}

impl<'a> Chebyshev<'a> {
    pub fn new(op: &'a SparseOp, bounds: RangeBounds, tol: f64) -> Self {
        let p = 0.5 * (bounds.re_max - bounds.re_min);
        let q = (0.5 * (bounds.im_max - bounds.im_min)).max(1.2 * p).max(1e-6);
        let a = std::f64::consts::SQRT_2 * p;
        let b = std::f64::consts::SQRT_2 * q;
        let focal = (b * b - a * a).sqrt();
        let center = C64::new(0.5 * (bounds.re_max + bounds.re_min), 0.5 * (bounds.im_max + bounds.im_min));
        let excess = (center.re + a).max(1e-3);
        let step = 3.0 / excess;
        Chebyshev { op, center, focal, growth: (a + b) / focal, step, tol, matvecs: std::cell::Cell::new(0) }
    }

    /// Size of the enclosing ellipse, a proxy for the operator norm.
    pub fn scale(&self) -> f64 {
        self.center.norm() + self.focal * self.growth
    }

    pub fn from_op(op: &'a SparseOp, tol: f64) -> Result<Self> {
        Ok(Self::new(op, range_bounds(op)?, tol))
    }

    /// `exp(h L) x` for a single step `h <= step`.
    fn single(&self, x: &[C64], h: f64) -> Vec<C64> {
        let n = x.len();
        let hf = h * self.focal;
        let kmax = (hf * 1.3) as usize + 60;
        let jk = bessel_j_sequence(kmax, hf);
        let pref = (self.center * h).exp();
        let scale = pref.norm();
        let inv_f = 1.0 / self.focal;
        let mut out: Vec<C64> = x.iter().map(|z| z * pref * jk[0]).collect();
        let mut prev = x.to_vec();
        let mut cur = vec![ZERO; n];
        matvec(self.op, &prev, &mut cur);
        cur.iter_mut().zip(&prev).for_each(|(c, p)| *c = (*c - self.center * p) * inv_f);
        let mut count = 1;
        let mut tmp = vec![ZERO; n];
        let mut rho_k = self.growth;
        for k in 1..=kmax {
            let coef = pref * 2.0 * jk[k];
            axpy(&mut out, coef, &cur);
            rho_k *= self.growth;
            if k as f64 > hf && 2.0 * jk[k].abs() * rho_k * scale < self.tol * 1e-2 {
                break;
            }
            matvec(self.op, &cur, &mut tmp);
            count += 1;
            for i in 0..n {
                tmp[i] = 2.0 * (tmp[i] - self.center * cur[i]) * inv_f + prev[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut tmp);
        }
        self.matvecs.set(self.matvecs.get() + count);
        out
    }

    /// `exp(t L) x` for `t >= 0`.
    pub fn propagate(&self, x: &[C64], t: f64) -> Vec<C64> {
        if t <= 0.0 {
            return x.to_vec();
        }
        let steps = (t / self.step).ceil().max(1.0);
        let h = t / steps;
        let mut y = x.to_vec();
        for _ in 0..steps as usize {
            y = self.single(&y, h);
        }
        y
    }

    /// States at every time of an increasing grid starting from `x` at `times[0]`.
    pub fn evolve(&self, x: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Integrator { t: times[0], msg: "output times must be increasing".into() });
        }
        let mut out = Vec::with_capacity(times.len());
        let mut y = x.to_vec();
        let mut t = times.first().copied().unwrap_or(0.0);
        for &target in times {
            y = self.propagate(&y, target - t);
            t = target;
            if y.iter().any(|z| !z.is_finite()) {
                return Err(Error::Integrator { t, msg: "non-finite state".into() });
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

/// Ritz pairs of an Arnoldi factorization, sorted by descending modulus.
#[derive(Clone, Debug)]
pub struct RitzPairs {
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
}

/// Arnoldi iteration of dimension `m` started from `start`.
pub fn arnoldi<F>(mut apply: F, start: &[C64], m: usize) -> Result<RitzPairs>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let n0 = norm(start);
    if n0 == 0.0 {
        return Err(Error::Linalg("Arnoldi start vector is zero".into()));
    }
    let mut basis: Vec<Vec<C64>> = vec![start.iter().map(|z| z / n0).collect()];
    let mut h = Array2::<C64>::zeros((m + 1, m));
    let mut k = 0;
    while k < m {
        let mut w = apply(&basis[k]);
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &w);
                h[[i, k]] += c;
                axpy(&mut w, -c, b);
            }
        }
        let nw = norm(&w);
        h[[k + 1, k]] = C64::new(nw, 0.0);
        k += 1;
        if nw < 1e-13 {
            break;
        }
        w.iter_mut().for_each(|z| *z /= nw);
        basis.push(w);
    }
    let hk = h.slice(ndarray::s![..k, ..k]).to_owned();
    let (vals, vecs) = hk.eig()?;
    let tail = h[[k, k - 1]].norm();
    let n = start.len();
    let mut pairs: Vec<(C64, Vec<C64>, f64)> = (0..k)
        .map(|j| {
            let y = vecs.column(j);
            let mut v = vec![ZERO; n];
            for (i, b) in basis.iter().take(k).enumerate() {
                axpy(&mut v, y[i], b);
            }
            (vals[j], v, tail * y[k - 1].norm())
        })
        .collect();
    pairs.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(RitzPairs {
        values: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.2).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, I, ONE};
    use crate::superop::{from_dense, lindblad, Jump};

    fn damped_oscillator() -> SparseOp {
        let h = from_dense(&ndarray::arr2(&[[ONE, ONE * 0.5, ZERO], [ONE * 0.5, -ONE, I], [ZERO, -I, ONE * 2.0]]));
        let a = from_dense(&ndarray::arr2(&[[ZERO, ONE, ZERO], [ZERO, ZERO, ONE * 1.3], [ZERO, ZERO, ZERO]]));
        lindblad(&h, &[Jump { rate: 0.4, op: a, label: "a".into() }]).matrix
    }

    #[test]
    fn chebyshev_matches_dense_expm() {
        let l = damped_oscillator();
        let dense = crate::superop::to_dense(&l);
        let x: Vec<C64> = (0..9).map(|k| C64::new((k as f64 * 0.7).sin(), (k as f64).cos() * 0.3)).collect();
        let cheb = Chebyshev::from_op(&l, 1e-12).unwrap();
        for &t in &[0.3, 2.0, 17.5] {
            let e = expm(&dense.mapv(|z| z * t)).unwrap();
            let want = e.dot(&ndarray::Array1::from(x.clone()));
            let got = cheb.propagate(&x, t);
            let err: f64 = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "t={t} err={err}");
        }
    }

    #[test]
    fn lanczos_finds_extremes() {
        let d = from_dense(&Array2::from_diag(&ndarray::arr1(&[ONE * -3.0, ONE, ONE * 2.5, ONE * 0.1])));
        let (lo, hi) = lanczos_extremes(|x| crate::superop::apply(&d, x), 4, 10, 0).unwrap();
        assert!((lo + 3.0).abs() < 1e-10 && (hi - 2.5).abs() < 1e-10);
    }

    #[test]
    fn arnoldi_recovers_spectrum() {
        let d = from_dense(&Array2::from_diag(&ndarray::arr1(&[ONE, ONE * 0.5, ONE * 0.25])));
        let r = arnoldi(|x| crate::superop::apply(&d, x), &[ONE, ONE, ONE], 5).unwrap();
        assert_eq!(r.values.len(), 3);
        assert!((r.values[0] - ONE).norm() < 1e-12);
        assert!((r.values[2] - ONE * 0.25).norm() < 1e-12);
    }
}
