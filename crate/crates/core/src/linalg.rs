//! Dense linear-algebra helpers shared by the solvers.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eig, Eigh, Inverse, JobSvd, Norm, Solve, UPLO, SVDDC};

use crate::{Error, Result, C64};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn eye(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|x| x.conj())
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&b.mapv(|y| x * y));
    }
    out
}

pub fn fro(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|a><b|`.
pub fn outer(a: &Array1<C64>, b: &Array1<C64>) -> Array2<C64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Relative deviation from Hermiticity in the Frobenius norm.
pub fn hermiticity_error(a: &Array2<C64>) -> f64 {
    let n = fro(a);
    if n == 0.0 {
        return 0.0;
    }
    fro(&(a - &dagger(a))) / n
}

pub fn hermitize(a: &Array2<C64>) -> Array2<C64> {
    (a + &dagger(a)).mapv(|x| x * 0.5)
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = a
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.mapv(|x| x * 2f64.powi(-s));
    let id = eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let sc = |m: &Array2<C64>, c: f64| m.mapv(|x| x * c);
    let inner_u = &sc(&a6, B[13]) + &sc(&a4, B[11]) + &sc(&a2, B[9]);
    let u = a.dot(&(&a6.dot(&inner_u) + &sc(&a6, B[7]) + &sc(&a4, B[5]) + &sc(&a2, B[3]) + &sc(&id, B[1])));
    let inner_v = &sc(&a6, B[12]) + &sc(&a4, B[10]) + &sc(&a2, B[8]);
    let v = &a6.dot(&inner_v) + &sc(&a6, B[6]) + &sc(&a4, B[4]) + &sc(&a2, B[2]) + &sc(&id, B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.inv()?.dot(&p);
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Pfaffian of a real antisymmetric matrix (Parlett-Reid with partial pivoting).
pub fn pfaffian(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[[k + 1, k]].abs();
        for i in k + 2..n {
            if a[[i, k]].abs() > best {
                best = a[[i, k]].abs();
                kp = i;
            }
        }
        if kp != k + 1 {
            for j in 0..n {
                a.swap([k + 1, j], [kp, j]);
            }
            for i in 0..n {
                a.swap([i, k + 1], [i, kp]);
            }
            pf = -pf;
        }
        if a[[k + 1, k]] == 0.0 {
            return 0.0;
        }
        pf *= a[[k, k + 1]];
        if k + 2 < n {
            let piv = a[[k, k + 1]];
            let tau: Vec<f64> = (k + 2..n).map(|j| a[[k, j]] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[[i, k + 1]]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[[i, j]] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Solves the real continuous Lyapunov equation `X G + G X^T + Y = 0`.
///
/// Uses the eigendecomposition of `X` and falls back to the vectorized
/// Kronecker system when `X` is badly conditioned.
pub fn lyapunov(x: &Array2<f64>, y: &Array2<f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    let residual = |g: &Array2<f64>| {
        let r = x.dot(g) + g.dot(&x.t()) + y;
        r.norm_l2() / (1.0 + y.norm_l2())
    };
    if let Ok(g) = lyapunov_eig(x, y) {
        if residual(&g) < 1e-12 {
            return Ok(g);
        }
    }
    if n > 60 {
        return Err(Error::Linalg("Lyapunov solve did not reach tolerance".into()));
    }
    let m = n * n;
    let mut k = Array2::<f64>::zeros((m, m));
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for l in 0..n {
                k[[row, l * n + j]] += x[[i, l]];
                k[[row, i * n + l]] += x[[j, l]];
            }
        }
    }
    let rhs: Array1<f64> = y.iter().map(|v| -v).collect();
    let sol = k.solve(&rhs)?;
    let g = sol.into_shape_with_order((n, n)).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(g)
}

fn lyapunov_eig(x: &Array2<f64>, y: &Array2<f64>) -> Result<Array2<f64>> {
    let (lam, v) = x.eig()?;
    let vinv = v.inv()?;
    let yc = y.mapv(|r| C64::new(r, 0.0));
    let mut t = vinv.dot(&yc).dot(&vinv.t());
    let n = x.nrows();
    for i in 0..n {
        for j in 0..n {
            let d = lam[i] + lam[j];
            if d.norm() < 1e-14 {
                return Err(Error::Linalg("singular Lyapunov operator".into()));
            }
            t[[i, j]] = -t[[i, j]] / d;
        }
    }
    let g = v.dot(&t).dot(&v.t());
    Ok(g.mapv(|z| z.re))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors as columns. Uses column-major input like [`svd_full`].
pub fn eigh_hermitian(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let f = a.t().as_standard_layout().t().to_owned();
    let (w, v) = f.eigh(UPLO::Lower)?;
    Ok((w.to_vec(), v))
}

/// Full SVD `A = U S V^dagger` (divide and conquer). The input is copied to
/// column-major layout first, which LAPACK handles without transposition.
pub fn svd_full(a: &Array2<C64>) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>)> {
    let f = a.t().as_standard_layout().t().to_owned();
    let (u, s, vt) = f.svddc(JobSvd::All)?;
    let u = u.ok_or_else(|| Error::Linalg("SVD returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("SVD returned no right vectors".into()))?;
    Ok((u, s.to_vec(), vt))
}

/// Orthonormal basis (as columns) of the numerical null space of a square matrix.
///
/// Singular values below `rel_tol` times the largest count as zero. Also
/// returns the full singular spectrum in ascending order.
pub fn null_space(a: &Array2<C64>, rel_tol: f64) -> Result<(Array2<C64>, Vec<f64>)> {
    let (_, sv, vt) = svd_full(a)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] <= rel_tol * smax.max(f64::MIN_POSITIVE)).collect();
    let mut basis = Array2::zeros((a.ncols(), idx.len()));
    for (c, &k) in idx.iter().enumerate() {
        basis.column_mut(c).assign(&vt.row(k).mapv(|z| z.conj()));
    }
    let mut svals = sv.to_vec();
    svals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((basis, svals))
}

/// Lexicographic sort by (real, imaginary) after rounding at 1e-12.
pub fn sort_spectrum(v: &mut [C64]) {
    let key = |z: &C64| ((z.re / 1e-12).round(), (z.im / 1e-12).round());
    v.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
}

/// Largest distance in a greedy nearest-neighbour matching of two multisets.
///
/// Returns infinity when the sizes differ.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut bs: Vec<C64> = b.to_vec();
    bs.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
    let mut a_sorted = a.to_vec();
    a_sorted.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
    let mut used = vec![false; bs.len()];
    let mut worst: f64 = 0.0;
    for z in &a_sorted {
        let start = bs.partition_point(|w| w.re < z.re);
        let mut best = f64::INFINITY;
        let mut best_k = usize::MAX;
        let mut k = start;
        while k < bs.len() && bs[k].re - z.re <= best {
            if !used[k] {
                let d = (bs[k] - z).norm();
                if d < best {
                    best = d;
                    best_k = k;
                }
            }
            k += 1;
        }
        let mut k = start;
        while k > 0 && z.re - bs[k - 1].re <= best {
            k -= 1;
            if !used[k] {
                let d = (bs[k] - z).norm();
                if d < best {
                    best = d;
                    best_k = k;
                }
            }
        }
        if best_k == usize::MAX {
            return f64::INFINITY;
        }
        used[best_k] = true;
        worst = worst.max(best);
    }
    worst
}

/// Trace norm distance `0.5 * ||a - b||_1` for Hermitian matrices.
pub fn trace_distance(a: &Array2<C64>, b: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let d = hermitize(&(a - b));
    let ev = d.eigvalsh(UPLO::Lower)?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

pub fn min_eigenvalue_herm(a: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let ev = hermitize(a).eigvalsh(UPLO::Lower)?;
    Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
}

pub fn purity(rho: &Array2<C64>) -> f64 {
    rho.iter().zip(dagger(rho).iter()).map(|(a, b)| (a * b).re).sum()
}

/// Bessel functions `J_0(x) ..= J_n(x)` by Miller's downward recurrence.
pub fn bessel_j_sequence(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = n.max(ax as usize) + 40 + (ax.sqrt() * 8.0) as usize;
    let start = start + start % 2;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= n {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// `J_n(x)` for any integer order.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let v = bessel_j_sequence(n.unsigned_abs() as usize, x)[n.unsigned_abs() as usize];
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 2.5) - 0.497_094_102_464_274_4).abs() < 1e-14);
        assert!((bessel_j(-1, 0.63) + bessel_j(1, 0.63)).abs() < 1e-16);
        assert!((bessel_j(5, 10.0) + 0.234_061_528_186_793_5).abs() < 1e-13);
        assert!((bessel_j(40, 30.0) - 3.612_023_608_896_570_5e-4).abs() < 1e-15);
        let seq = bessel_j_sequence(60, 45.0);
        assert!((seq[60] - 2.032_875_819_327_279_2e-5).abs() < 1e-16);
        assert!((seq[3] + 0.038_531_851_851_078_71).abs() < 1e-14);
    }

    #[test]
    fn expm_of_pauli_rotation() {
        let theta = 0.7;
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = C64::new(0.0, -theta);
        a[[1, 0]] = C64::new(0.0, -theta);
        let e = expm(&a).unwrap();
        assert!((e[[0, 0]] - C64::new(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((e[[0, 1]] - C64::new(0.0, -theta.sin())).norm() < 1e-14);
    }

    #[test]
    fn expm_large_norm_diagonal() {
        let mut a = Array2::zeros((3, 3));
        a[[0, 0]] = C64::new(-30.0, 5.0);
        a[[1, 1]] = C64::new(2.0, 0.0);
        a[[2, 2]] = C64::new(0.0, 40.0);
        let e = expm(&a).unwrap();
        for k in 0..3 {
            let want = a[[k, k]].exp();
            assert!((e[[k, k]] - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn pfaffian_of_block_diagonal() {
        let mut a = Array2::zeros((4, 4));
        a[[0, 1]] = 2.0;
        a[[1, 0]] = -2.0;
        a[[2, 3]] = -3.0;
        a[[3, 2]] = 3.0;
        assert!((pfaffian(&a) + 6.0).abs() < 1e-14);
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        use ndarray_linalg::Determinant;
        let n = 6;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * (i as f64);
                a[[i, j]] = v;
                a[[j, i]] = -v;
            }
        }
        let pf = pfaffian(&a);
        let det = a.det().unwrap();
        assert!((pf * pf - det).abs() < 1e-9 * det.abs().max(1.0));
    }

    #[test]
    fn lyapunov_residual() {
        let x = ndarray::arr2(&[[-1.0, 0.5, 0.0], [-0.5, -0.2, 0.3], [0.1, -0.3, -0.7]]);
        let y = ndarray::arr2(&[[0.0, 1.0, 0.2], [-1.0, 0.0, 0.4], [-0.2, -0.4, 0.0]]);
        let g = lyapunov(&x, &y).unwrap();
        let r = x.dot(&g) + g.dot(&x.t()) + &y;
        assert!(r.norm_l2() < 1e-12);
    }

    #[test]
    fn multiset_distance_detects_permutation_and_mismatch() {
        let a = vec![C64::new(-1.0, 2.0), C64::new(-1.0, -2.0), C64::new(0.0, 0.0)];
        let b = vec![C64::new(0.0, 0.0), C64::new(-1.0, -2.0), C64::new(-1.0, 2.0)];
        assert!(multiset_distance(&a, &b) < 1e-15);
        let c = vec![C64::new(0.0, 0.0), C64::new(-1.0, -2.0), C64::new(-1.0, -2.0)];
        assert!(multiset_distance(&a, &c) > 1.0);
    }

    #[test]
    fn null_space_of_projector() {
        let mut a = eye(3);
        a[[2, 2]] = ZERO;
        let (ns, _) = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 1);
        assert!((ns[[2, 0]].norm() - 1.0).abs() < 1e-14);
    }
}
