//! Partition-function statistics of one realization.
//!
//! Exponential sums are evaluated as `e^S * sum_k e^{a_k - S + i b_k}` with
//! `S = max_k a_k`, summing the real and imaginary parts with Neumaier
//! compensation in leaf order. Results are bit-stable for a given field.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::CorrelatedField;

/// `beta = sigma + i tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexTemperature {
    pub sigma: f64,
    pub tau: f64,
}

impl ComplexTemperature {
    pub const fn new(sigma: f64, tau: f64) -> Self {
        Self { sigma, tau }
    }

    pub const fn real(sigma: f64) -> Self {
        Self { sigma, tau: 0.0 }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.sigma, self.tau)
    }

    /// `lambda = sigma + i rho tau`, the effective exponent of the `X` field.
    pub fn lambda(&self, rho: f64) -> Complex64 {
        Complex64::new(self.sigma, rho * self.tau)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.sigma, -self.tau)
    }
}

impl std::fmt::Display for ComplexTemperature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:+}i", self.sigma, self.tau)
    }
}

impl std::str::FromStr for ComplexTemperature {
    type Err = crate::error::Error;

    /// Accepts `1.2`, `1.2+0.9i`, `0.5-1.5i`, `1.5i` and `-i`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || invalid(format!("cannot parse complex temperature {s:?}"));
        let Some(body) = s.strip_suffix('i') else {
            return s.parse::<f64>().map(Self::real).map_err(|_| bad());
        };
        // Split at the last sign that is not part of an exponent.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(Self::new(re.parse::<f64>().map_err(|_| bad())?, im))
    }
}

/// Centering of the maximum, `m(t) = sqrt(2) t - 3/(2 sqrt(2)) log t`.
pub fn m_of_t(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("m(t) needs t > 0, got {t}")));
    }
    Ok(SQRT_2 * t - 3.0 / (2.0 * SQRT_2) * t.ln())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// A complex number stored as `e^{log_scale} * mantissa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    pub log_scale: f64,
    pub mantissa: Complex64,
}

impl ScaledComplex {
    pub const ZERO: Self = Self {
        log_scale: 0.0,
        mantissa: Complex64 { re: 0.0, im: 0.0 },
    };

    /// `e^{log_scale + shift} * mantissa` as a plain complex number.
    pub fn to_complex_shifted(&self, shift: f64) -> Complex64 {
        self.mantissa * (self.log_scale + shift).exp()
    }

    pub fn to_complex(&self) -> Complex64 {
        self.to_complex_shifted(0.0)
    }

    /// `log |value|`; negative infinity for an exact zero.
    pub fn ln_abs(&self) -> f64 {
        let m = self.mantissa.norm();
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + m.ln()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }
}

/// `sum_{k in selected} exp(a_k + i b_k)` in log-scale form. `terms(k)`
/// returns `(a_k, b_k)`; `select(k)` filters leaves.
fn exp_sum(
    n: usize,
    terms: impl Fn(usize) -> (f64, f64),
    select: impl Fn(usize) -> bool,
) -> ScaledComplex {
    let mut scale = f64::NEG_INFINITY;
    for k in (0..n).filter(|&k| select(k)) {
        scale = scale.max(terms(k).0);
    }
    if scale == f64::NEG_INFINITY {
        return ScaledComplex::ZERO;
    }
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    for k in (0..n).filter(|&k| select(k)) {
        let (a, b) = terms(k);
        let w = (a - scale).exp();
        let (s, c) = b.sin_cos();
        re.add(w * c);
        im.add(w * s);
    }
    ScaledComplex {
        log_scale: scale,
        mantissa: Complex64::new(re.value(), im.value()),
    }
}

/// `sum_k exp(sigma x_k + i tau y_k)` in log-scale form.
pub fn partition_function_scaled(field: &CorrelatedField<'_>, beta: ComplexTemperature) -> ScaledComplex {
    let (x, y) = (field.x(), field.y());
    exp_sum(
        field.len(),
        |k| (beta.sigma * x[k], beta.tau * y[k]),
        |_| true,
    )
}

/// `sum_k exp(sigma x_k + i tau y_k)`. Overflows to infinity only when the
/// value itself is not representable; use [`partition_function_scaled`] then.
pub fn partition_function(field: &CorrelatedField<'_>, beta: ComplexTemperature) -> Complex64 {
    partition_function_scaled(field, beta).to_complex()
}

/// `(e^{-beta m(t)} raw, e^{-sigma m(t)} raw)`: the normalizations used for
/// `|rho| = 1` and `|rho| < 1` respectively.
pub fn rescaled_partition(
    field: &CorrelatedField<'_>,
    beta: ComplexTemperature,
) -> Result<(Complex64, Complex64)> {
    let m = m_of_t(field.horizon())?;
    let raw = partition_function_scaled(field, beta);
    let real = raw.to_complex_shifted(-beta.sigma * m);
    let full = real * Complex64::from_polar(1.0, -beta.tau * m);
    Ok((full, real))
}

/// Phase attached to each leaf in [`truncated_partition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// `e^{sigma (x_k - m) + i tau y_k}`; the pieces add up to the
    /// `e^{-sigma m}`-rescaled partition function.
    #[default]
    Unrotated,
    /// `e^{(sigma + i rho tau)(x_k - m) + i sqrt(1 - rho^2) tau z_k - i rho tau m}`,
    /// the summand of the independent-component representation. Differs from
    /// `Unrotated` by the global factor `e^{-2 i rho tau m}`.
    Rotated,
}

/// `(kept, discarded)`: the rescaled sum split by `x_k - m(t) >= -A`.
pub fn truncated_partition(
    field: &CorrelatedField<'_>,
    beta: ComplexTemperature,
    a: f64,
    phase: PhaseConvention,
) -> Result<(Complex64, Complex64)> {
    if !(a >= 0.0) {
        return Err(invalid(format!("truncation level A must be nonnegative, got {a}")));
    }
    let m = m_of_t(field.horizon())?;
    let (x, y) = (field.x(), field.y());
    let rho = field.rho();
    let z = field.z();
    let w = (1.0 - rho * rho).max(0.0).sqrt();
    let terms = |k: usize| {
        let shifted = x[k] - m;
        let b = match phase {
            PhaseConvention::Unrotated => beta.tau * y[k],
            PhaseConvention::Rotated => {
                let zk = z.map_or(0.0, |z| z[k]);
                rho * beta.tau * shifted + w * beta.tau * zk - rho * beta.tau * m
            }
        };
        (beta.sigma * shifted, b)
    };
    let kept = exp_sum(field.len(), terms, |k| x[k] - m >= -a).to_complex();
    let discarded = exp_sum(field.len(), terms, |k| x[k] - m < -a).to_complex();
    Ok((kept, discarded))
}

/// Additive martingale `e^{-t(1 + sigma^2/2 - tau^2/2 + i rho sigma tau)} raw`,
/// normalized so that `E M = 1` for every `rho`.
pub fn additive_martingale(field: &CorrelatedField<'_>, beta: ComplexTemperature) -> Complex64 {
    let t = field.horizon();
    let (s, tau, rho) = (beta.sigma, beta.tau, field.rho());
    let raw = partition_function_scaled(field, beta);
    let growth = t * (1.0 + 0.5 * s * s - 0.5 * tau * tau);
    raw.to_complex_shifted(-growth) * Complex64::from_polar(1.0, -t * rho * s * tau)
}

/// `Z(t) = sum_k (sqrt(2) t - x_k) e^{-sqrt(2) (sqrt(2) t - x_k)}`.
pub fn derivative_martingale(field: &CorrelatedField<'_>) -> f64 {
    derivative_martingale_of(field.x(), field.horizon())
}

pub fn derivative_martingale_of(x: &[f64], t: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for &xk in x {
        let gap = SQRT_2 * t - xk;
        acc.add(gap * (-SQRT_2 * gap).exp());
    }
    acc.value()
}

/// `p_t(beta) = log |raw| / t`; negative infinity when `raw` vanishes.
pub fn log_partition(field: &CorrelatedField<'_>, beta: ComplexTemperature) -> Result<f64> {
    let t = field.horizon();
    if !(t > 0.0) {
        return Err(invalid(format!("log-partition needs t > 0, got {t}")));
    }
    Ok(partition_function_scaled(field, beta).ln_abs() / t)
}

/// Every statistic of one realization at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionStatistics {
    pub raw: ScaledComplex,
    pub rescaled_full: Complex64,
    pub rescaled_real: Complex64,
    pub martingale: Complex64,
    pub derivative_martingale: f64,
    pub log_partition: f64,
    pub t: f64,
    pub beta: ComplexTemperature,
    pub rho: f64,
    pub leaves: usize,
}

impl PartitionStatistics {
    pub fn compute(field: &CorrelatedField<'_>, beta: ComplexTemperature) -> Result<Self> {
        let t = field.horizon();
        let m = m_of_t(t)?;
        let raw = partition_function_scaled(field, beta);
        let rescaled_real = raw.to_complex_shifted(-beta.sigma * m);
        let rescaled_full = rescaled_real * Complex64::from_polar(1.0, -beta.tau * m);
        let rho = field.rho();
        let growth = t * (1.0 + 0.5 * beta.sigma * beta.sigma - 0.5 * beta.tau * beta.tau);
        let martingale =
            raw.to_complex_shifted(-growth) * Complex64::from_polar(1.0, -t * rho * beta.sigma * beta.tau);
        Ok(Self {
            raw,
            rescaled_full,
            rescaled_real,
            martingale,
            derivative_martingale: derivative_martingale(field),
            log_partition: raw.ln_abs() / t,
            t,
            beta,
            rho,
            leaves: field.len(),
        })
    }

    /// `rescaled_real` with the global factor `e^{-2 i rho tau m(t)}` applied.
    pub fn rescaled_rotated(&self) -> Complex64 {
        let m = m_of_t(self.t).expect("t > 0 checked at construction");
        self.rescaled_real * Complex64::from_polar(1.0, -2.0 * self.rho * self.beta.tau * m)
    }
}
