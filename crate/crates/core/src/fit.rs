//! Least-squares fits for decay rates and scaling exponents.

use serde::Serialize;

/// Ordinary least squares `y = slope x + intercept`; returns `(slope, intercept, rms residual)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub points: usize,
    pub window: (f64, f64),
    pub rms_log_residual: f64,
}

/// Fits `r(t) ~ A e^{-rate t}` to the samples after the maximum of `r` whose
/// values lie inside `[lo, hi]`.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<DecayFit> {
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?
        .0;
    let pts: Vec<(f64, f64)> = times[peak..]
        .iter()
        .zip(&values[peak..])
        .filter(|(_, &v)| v >= lo && v <= hi)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (slope, intercept, rms) = linear_fit(&pts);
    Some(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        points: pts.len(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        rms_log_residual: rms,
    })
}

/// Relaxation rate from the mean relaxation time after the peak of `r`:
/// `rate = r_peak / int_{t_peak}^inf r dt`.
#[derive(Clone, Debug, Serialize)]
pub struct MeanRelaxation {
    pub rate: f64,
    pub peak: f64,
    pub peak_time: f64,
    /// Integral over the sampled range (trapezoid rule).
    pub sampled_area: f64,
    /// Exponential extrapolation beyond the last sample, `r(T) / tail_rate`.
    pub tail_area: f64,
    /// Decay rate of the latest half of the samples, when they decay.
    pub tail_rate: Option<f64>,
}

pub fn mean_relaxation(times: &[f64], values: &[f64]) -> Option<MeanRelaxation> {
    if times.len() < 3 || times.len() != values.len() {
        return None;
    }
    let peak_idx = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?
        .0;
    let peak = values[peak_idx];
    if peak.is_nan() || peak <= 0.0 {
        return None;
    }
    let sampled_area: f64 = (peak_idx + 1..times.len())
        .map(|k| 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]))
        .sum();
    let t_end = *times.last()?;
    let late: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .skip(peak_idx)
        .filter(|(&t, &v)| t >= 0.5 * t_end && v > 1e-12 * peak)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    let tail_rate = (late.len() >= 3).then(|| -linear_fit(&late).0).filter(|r| *r > 0.0);
    let tail_area = tail_rate.map_or(0.0, |r| values[values.len() - 1] / r);
    let area = sampled_area + tail_area;
    Some(MeanRelaxation { rate: peak / area, peak, peak_time: times[peak_idx], sampled_area, tail_area, tail_rate })
}

/// Largest rms log-residual for which a windowed fit counts as single-exponential.
pub const WINDOW_FIT_MAX_RMS: f64 = 0.1;
const WINDOW_FIT_MIN_POINTS: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationEstimate {
    pub rate: f64,
    pub method: &'static str,
    pub window_fit: Option<DecayFit>,
    pub mean: Option<MeanRelaxation>,
}

/// Windowed exponential fit of the residual `r = |O - O_ss|` over `[lo, hi]`
/// when it is well described by one exponential, otherwise the mean relaxation rate.
pub fn relaxation_rate(times: &[f64], residuals: &[f64], lo: f64, hi: f64) -> Option<RelaxationEstimate> {
    let window_fit = fit_exponential_decay(times, residuals, lo, hi);
    let mean = mean_relaxation(times, residuals);
    let good = window_fit
        .as_ref()
        .filter(|f| f.points >= WINDOW_FIT_MIN_POINTS && f.rms_log_residual <= WINDOW_FIT_MAX_RMS && f.rate > 0.0);
    if let Some(f) = good {
        let rate = f.rate;
        return Some(RelaxationEstimate { rate, method: "window-fit", window_fit, mean });
    }
    let rate = mean.as_ref()?.rate;
    Some(RelaxationEstimate { rate, method: "mean-time", window_fit, mean })
}
