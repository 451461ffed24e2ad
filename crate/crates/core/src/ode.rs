//! Adaptive Dormand-Prince 5(4) integrator for real vector fields.

use crate::{Error, Result};

pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const BSTAR: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `times[0]` and records `y` at every entry of `times`.
pub fn dopri5<F>(mut f: F, y0: &[f64], times: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return Ok(out);
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Integrator { t: times[0], msg: "output times must be increasing".into() });
    }
    let mut t = times[0];
    let mut y = y0.to_vec();
    out.push(y.clone());
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], tol, times.last().unwrap() - t);
    for &target in &times[1..] {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::Integrator { t, msg: "step size underflow".into() });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += step * A[s][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * step, &tmp, &mut k[s]);
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut acc = y[i];
                let mut e = 0.0;
                for s in 0..7 {
                    acc += step * B[s] * k[s][i];
                    e += step * (B[s] - BSTAR[s]) * k[s][i];
                }
                ynew[i] = acc;
                let sc = tol.atol + tol.rtol * y[i].abs().max(acc.abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integrator { t, msg: "non-finite state".into() });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integrator { t, msg: "step size underflow".into() });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(y: &[f64], f0: &[f64], tol: &Tolerances, span: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let d0 = (y.iter().map(|v| (v / (tol.atol + tol.rtol * v.abs())).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (y
        .iter()
        .zip(f0)
        .map(|(v, d)| (d / (tol.atol + tol.rtol * v.abs())).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs().max(1e-12))
}
