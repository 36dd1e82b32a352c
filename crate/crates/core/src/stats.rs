//! Estimators for the distributional claims: tail index, isotropy, law
//! distances and the exponential tail of the maximum.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StableFitMethod {
    Hill,
    CfRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableFit {
    pub alpha_hat: f64,
    pub alpha_se: f64,
    pub k_used: usize,
    pub method: StableFitMethod,
}

pub const DEFAULT_K_FRACTION: f64 = 0.05;
pub const SENSITIVITY_K_FRACTIONS: [f64; 3] = [0.02, 0.05, 0.1];

/// Hill estimator from the top `ceil(k_fraction * n)` order statistics:
/// `alpha = k / sum_{i < k} ln(X_(i) / X_(k))` with standard error
/// `alpha / sqrt(k)`.
pub fn hill_estimator(moduli: &[f64], k_fraction: f64) -> Result<StableFit> {
    if moduli.len() < 100 {
        return Err(invalid(format!("Hill estimator needs >= 100 samples, got {}", moduli.len())));
    }
    if !(k_fraction > 0.0 && k_fraction <= 0.2) {
        return Err(invalid(format!("k_fraction must lie in (0, 0.2], got {k_fraction}")));
    }
    if let Some(bad) = moduli.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("Hill estimator needs positive finite samples, got {bad}")));
    }
    let mut sorted = moduli.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = (k_fraction * sorted.len() as f64).ceil() as usize;
    let k = k.max(10).min(sorted.len() - 1);
    let threshold = sorted[k].ln();
    let spacing: f64 = sorted[..k].iter().map(|v| v.ln() - threshold).sum();
    if !(spacing > 0.0) {
        return Err(Error::Fit("zero log-spacings above the threshold".into()));
    }
    let alpha_hat = k as f64 / spacing;
    Ok(StableFit {
        alpha_hat,
        alpha_se: alpha_hat / (k as f64).sqrt(),
        k_used: k,
        method: StableFitMethod::Hill,
    })
}

/// `(1/n) sum_j e^{i Re(conj(z) Y_j)}`.
pub fn empirical_cf(samples: &[Complex64], z: Complex64) -> Complex64 {
    let n = samples.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for y in samples {
        let phase = z.re * y.re + z.im * y.im;
        let (s, c) = phase.sin_cos();
        re += c;
        im += s;
    }
    Complex64::new(re / n, im / n)
}

/// `max_{r, theta, theta'} |phi(r e^{i theta}) - phi(r e^{i theta'})|` over
/// `n_angles` equally spaced angles.
pub fn isotropy_statistic(samples: &[Complex64], radii: &[f64], n_angles: usize) -> Result<f64> {
    if n_angles < 4 {
        return Err(invalid(format!("need at least 4 angles, got {n_angles}")));
    }
    if samples.is_empty() {
        return Err(invalid("isotropy statistic needs samples"));
    }
    let mut worst = 0.0f64;
    for &r in radii {
        let values: Vec<Complex64> = (0..n_angles)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / n_angles as f64;
                empirical_cf(samples, Complex64::from_polar(r, theta))
            })
            .collect();
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                worst = worst.max((a - b).norm());
            }
        }
    }
    Ok(worst)
}

/// Radii at which the angle-averaged `|phi|` falls in `[lo, hi]`, chosen from a
/// log-spaced scan between the reciprocals of the sample modulus quantiles.
pub fn select_radii(samples: &[Complex64], n_angles: usize, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut moduli: Vec<f64> = samples.iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
    if moduli.is_empty() {
        return Vec::new();
    }
    moduli.sort_by(f64::total_cmp);
    let q = |p: f64| moduli[((moduli.len() - 1) as f64 * p) as usize];
    let r_min = 0.01 / q(0.99);
    let r_max = 100.0 / q(0.01);
    let steps = 200;
    let mut hits = Vec::new();
    for i in 0..=steps {
        let r = r_min * (r_max / r_min).powf(i as f64 / steps as f64);
        let avg: f64 = (0..n_angles)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / n_angles as f64;
                empirical_cf(samples, Complex64::from_polar(r, theta)).norm()
            })
            .sum::<f64>()
            / n_angles as f64;
        if (lo..=hi).contains(&avg) {
            hits.push(r);
        }
    }
    if hits.len() <= count {
        return hits;
    }
    (0..count)
        .map(|i| hits[i * (hits.len() - 1) / (count - 1).max(1)])
        .collect()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS distance needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Shape assumed for the upper tail in [`max_tail_exponent_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailShape {
    /// `P(Y > y) ∝ (kappa y + b) e^{-kappa y}` with free offset `b`, fitted by
    /// maximum likelihood on the exceedances of the upper
    /// [`DEFAULT_TAIL_FRACTION`]. This is the tail of
    /// `1 - E exp(-C Z e^{-kappa y})` when `P(Z > z) ~ 1/z`.
    OffsetLinear,
    /// `P(Y > y) ≈ c y e^{-kappa y}`: regress `log S(y) - log y` on `y` over
    /// the upper decile.
    LinearPrefactor,
    /// `P(Y > y) ≈ c e^{-kappa y}`: regress `log S(y)` on `y` over the upper decile.
    PureExponential,
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;

/// Exponential rate of the upper tail of shifted maxima, with the
/// [`TailShape::OffsetLinear`] model.
pub fn max_tail_exponent(shifted_max_samples: &[f64]) -> Result<f64> {
    max_tail_exponent_with(shifted_max_samples, TailShape::OffsetLinear)
}

pub fn max_tail_exponent_with(samples: &[f64], shape: TailShape) -> Result<f64> {
    let n = samples.len();
    if n < 2000 {
        return Err(invalid(format!("tail exponent needs >= 2000 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("tail exponent needs finite samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    match shape {
        TailShape::OffsetLinear => offset_linear_mle(&sorted, DEFAULT_TAIL_FRACTION),
        _ => survival_regression(&sorted, shape),
    }
}

/// Minimizes `f` on `[lo, hi]`: a coarse scan, then golden section around the best cell.
fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> (f64, f64) {
    let h = (hi - lo) / steps as f64;
    let mut best = (lo, f(lo));
    for i in 1..=steps {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v < best.1 {
        (x, v)
    } else {
        best
    }
}

/// Exceedances `d = y - u` over the threshold `u` have density
/// `kappa e^{-kappa d} (kappa d + c) / (1 + c)`, `c >= 0`. The negative
/// log-likelihood is profiled over `ln c` and minimized over `ln kappa`.
fn offset_linear_mle(sorted: &[f64], fraction: f64) -> Result<f64> {
    let n = sorted.len();
    let k = ((fraction * n as f64) as usize).clamp(10, n - 1);
    let u = sorted[n - k - 1];
    let d: Vec<f64> = sorted[n - k..].iter().map(|y| y - u).collect();
    let m = d.len() as f64;
    let sum_d: f64 = d.iter().sum();
    if !(sum_d > 0.0) {
        return Err(Error::Fit("no spread above the tail threshold".into()));
    }
    let nll = |kappa: f64, c: f64| -> f64 {
        let log_terms: f64 = d.iter().map(|&x| (kappa * x + c).ln()).sum();
        kappa * sum_d - log_terms + m * ((1.0 + c) / kappa).ln()
    };
    let profile = |log_kappa: f64| -> f64 {
        let kappa = log_kappa.exp();
        minimize_1d(|log_c| nll(kappa, log_c.exp()), -20.0, 12.0, 64).1
    };
    let (log_kappa, value) = minimize_1d(profile, -4.0, 4.0, 80);
    if !value.is_finite() {
        return Err(Error::Fit("tail likelihood is not finite".into()));
    }
    Ok(log_kappa.exp())
}

/// Weighted least-squares slope over the upper decile of the empirical
/// survival function; weights `n S(y)` are the inverse variances of
/// `log S(y)`. Returns the magnitude of the slope.
fn survival_regression(sorted: &[f64], shape: TailShape) -> Result<f64> {
    let n = sorted.len();
    let start = n - n / 10;
    // Drop the last few points, where S(y) rests on a handful of samples.
    let end = n - 5;
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (i, &y) in sorted.iter().enumerate().take(end).skip(start) {
        if shape == TailShape::LinearPrefactor && y <= 0.0 {
            continue;
        }
        // Survival just above y_(i), with the plotting-position offset.
        let surv = (n - i) as f64 - 0.5;
        let mut target = (surv / n as f64).ln();
        if shape == TailShape::LinearPrefactor {
            target -= y.ln();
        }
        let w = surv;
        sw += w;
        sx += w * y;
        sy += w * target;
        sxx += w * y * y;
        sxy += w * y * target;
        used += 1;
    }
    let var = sxx * sw - sx * sx;
    if used < 10 || !(var > 1e-12 * sw * sw) {
        return Err(Error::Fit("not enough spread in the upper tail".into()));
    }
    let slope = (sxy * sw - sx * sy) / var;
    Ok(slope.abs())
}

/// One estimator result with its pass/fail verdict, for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub estimator: String,
    pub parameters: serde_json::Value,
    pub estimate: f64,
    pub standard_error: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated empirical quantile.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}
