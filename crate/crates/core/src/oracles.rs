//! Closed-form targets for the simulator.
//!
//! Everything here is exact arithmetic on antiderivatives; nothing depends on
//! simulation output except [`bridge_stays_below_probability`], which is the
//! Monte Carlo counterpart of [`bridge_barrier_bound`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::partition::m_of_t;
use crate::rng::{stream_rng, Stream};

/// `e^{-x^2/2} / (sqrt(2 pi) x)`, an upper bound on `P(N(0,1) < -x)` for `x > 0`.
pub fn gaussian_tail_bound(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("tail bound needs x > 0, got {x}")));
    }
    Ok((-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * x))
}

/// `2a / (t - 2a)`: bound on the probability that a Brownian bridge from 0 to
/// 0 in time `t` stays nonpositive on `[a, t - a]`.
pub fn bridge_barrier_bound(a: f64, t: f64) -> Result<f64> {
    if !(a > 0.0 && 2.0 * a < t) {
        return Err(invalid(format!("need 0 < 2a < t, got a = {a}, t = {t}")));
    }
    Ok(2.0 * a / (t - 2.0 * a))
}

/// Monte Carlo estimate of `P{xi(s) <= 0 for all grid s in [a, t - a]}` for a
/// Brownian bridge `xi` from 0 to 0 in time `t`, sampled exactly on a grid of
/// step `step`. Returns `(probability, standard error)`.
///
/// Monitoring on a grid misses excursions between grid points, so this
/// overestimates the continuous-time probability.
pub fn bridge_stays_below_probability(
    a: f64,
    t: f64,
    step: f64,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(a > 0.0 && 2.0 * a < t) {
        return Err(invalid(format!("need 0 < 2a < t, got a = {a}, t = {t}")));
    }
    if !(step > 0.0) || paths == 0 {
        return Err(invalid("need a positive step and at least one path"));
    }
    let n_steps = (t / step).round() as usize;
    let h = t / n_steps as f64;
    let first = (a / h).ceil() as usize;
    let last = ((t - a) / h).floor() as usize;
    let mut rng = stream_rng(seed, Stream::Aux);
    let mut stayed = 0usize;
    for _ in 0..paths {
        let mut v = 0.0;
        let mut ok = true;
        for i in 1..=last {
            let s = (i - 1) as f64 * h;
            let remaining = t - s;
            let mean = v * (1.0 - h / remaining);
            let sd = (h * (remaining - h) / remaining).max(0.0).sqrt();
            let z: f64 = StandardNormal.sample(&mut rng);
            v = mean + sd * z;
            if i >= first && v > 0.0 {
                ok = false;
                break;
            }
        }
        if ok {
            stayed += 1;
        }
    }
    let p = stayed as f64 / paths as f64;
    Ok((p, (p * (1.0 - p) / paths as f64).sqrt()))
}

/// Inputs of the second moment of the additive martingale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentParams {
    pub sigma: f64,
    pub tau: f64,
    pub t: f64,
    /// Second factorial moment of the offspring law.
    pub k: f64,
    /// Set when `sigma^2 + tau^2 >= 1`: the formula is still exact at finite
    /// `t` but the martingale is no longer bounded in `L^2`.
    pub outside_l2_regime: bool,
}

impl SecondMomentParams {
    /// Requires `sigma^2 + tau^2 < 1`.
    pub fn new(sigma: f64, tau: f64, t: f64, k: f64) -> Result<Self> {
        let p = Self::relaxed(sigma, tau, t, k)?;
        if p.outside_l2_regime {
            return Err(invalid(format!(
                "sigma^2 + tau^2 = {} must be < 1",
                sigma * sigma + tau * tau
            )));
        }
        Ok(p)
    }

    /// Accepts any `(sigma, tau)` and flags the non-`L^2` regime.
    pub fn relaxed(sigma: f64, tau: f64, t: f64, k: f64) -> Result<Self> {
        if !(t >= 0.0) || !(k >= 0.0) {
            return Err(invalid(format!("need t >= 0 and K >= 0, got t = {t}, K = {k}")));
        }
        Ok(Self {
            sigma,
            tau,
            t,
            k,
            outside_l2_regime: sigma * sigma + tau * tau >= 1.0,
        })
    }
}

/// `int_0^t e^{a q} dq`, with the `a = 0` limit.
fn exp_integral(a: f64, t: f64) -> f64 {
    if a == 0.0 {
        t
    } else {
        (a * t).exp_m1() / a
    }
}

/// `E|M_beta(t)|^2 = e^{a t} + K int_0^t e^{a q} dq` with
/// `a = sigma^2 + tau^2 - 1`. The first term is the diagonal `k = l` of the
/// double sum, the second the branching pairs. Independent of `rho`.
pub fn martingale_second_moment(p: &SecondMomentParams) -> f64 {
    let a = p.sigma * p.sigma + p.tau * p.tau - 1.0;
    (a * p.t).exp() + p.k * exp_integral(a, p.t)
}

/// `E[sum_{k != l} e^{conj(lambda) x_l + lambda x_k} e^{-(1 - rho^2) tau^2 (t - q_kl)}]`
/// `= K int_0^t e^{2t - q} e^{2 sigma^2 q + (sigma^2 - tau^2)(t - q)} dq`,
/// with `sigma = Re lambda`. `lambda` must equal `sigma + i rho tau`.
pub fn many_to_two_pair_moment(lambda: Complex64, rho: f64, tau: f64, t: f64, k: f64) -> Result<f64> {
    if (lambda.im - rho * tau).abs() > 1e-12 * (1.0 + tau.abs()) {
        return Err(invalid(format!(
            "Im lambda = {} does not match rho tau = {}",
            lambda.im,
            rho * tau
        )));
    }
    if !(t >= 0.0) || !(k >= 0.0) {
        return Err(invalid(format!("need t >= 0 and K >= 0, got t = {t}, K = {k}")));
    }
    let s2 = lambda.re * lambda.re;
    let t2 = tau * tau;
    let prefactor = ((2.0 + s2 - t2) * t).exp();
    Ok(k * prefactor * exp_integral(s2 + t2 - 1.0, t))
}

/// `U(s) = (s/t) m(t) + min(s, t - s)^gamma`.
pub fn envelope_curve(s: f64, t: f64, gamma: f64) -> f64 {
    let m = m_of_t(t).expect("horizon checked by callers");
    s / t * m + s.min(t - s).max(0.0).powf(gamma)
}

/// Checked form of [`envelope_curve`].
pub fn envelope_curve_checked(s: f64, t: f64, gamma: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("envelope needs t > 0, got {t}")));
    }
    if !(0.0..=t).contains(&s) {
        return Err(invalid(format!("s = {s} outside [0, {t}]")));
    }
    Ok(envelope_curve(s, t, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bound_values() {
        assert!((gaussian_tail_bound(1.0).unwrap() - 0.241_970_7).abs() < 1e-7);
        assert!((gaussian_tail_bound(2.0).unwrap() - 0.026_995_5).abs() < 1e-7);
        assert!(gaussian_tail_bound(0.0).is_err());
        assert!(gaussian_tail_bound(-1.0).is_err());
    }

    #[test]
    fn bridge_bound_values() {
        assert_eq!(bridge_barrier_bound(1.0, 10.0).unwrap(), 0.25);
        assert!(bridge_barrier_bound(1.0, 1e12).unwrap() < 1e-11);
        assert!(bridge_barrier_bound(5.0, 10.0).is_err());
        assert!(bridge_barrier_bound(0.0, 10.0).is_err());
    }

    #[test]
    fn second_moment_values() {
        let p = SecondMomentParams::new(0.5, 0.0, 0.0, 2.0).unwrap();
        assert_eq!(martingale_second_moment(&p), 1.0);
        // Diagonal e^{-1.5} plus 2 (1 - e^{-1.5}) / 0.75.
        let p = SecondMomentParams::new(0.5, 0.0, 2.0, 2.0).unwrap();
        assert!((martingale_second_moment(&p) - 2.294_783_07).abs() < 1e-8);
        let p = SecondMomentParams::new(0.5, 0.0, 200.0, 2.0).unwrap();
        assert!((martingale_second_moment(&p) - 2.0 / 0.75).abs() < 1e-12);
        assert!(SecondMomentParams::new(0.8, 0.8, 1.0, 2.0).is_err());
        let relaxed = SecondMomentParams::relaxed(0.8, 0.6, 3.0, 2.0).unwrap();
        assert!(relaxed.outside_l2_regime);
        assert!((martingale_second_moment(&relaxed) - (1.0 + 2.0 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn pair_moment_degenerate_cases() {
        let l = Complex64::new(0.5, 0.4 * 0.3);
        assert_eq!(many_to_two_pair_moment(l, 0.4, 0.3, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(many_to_two_pair_moment(l, 0.4, 0.3, 3.0, 0.0).unwrap(), 0.0);
        assert!(many_to_two_pair_moment(Complex64::new(0.5, 0.9), 0.4, 0.3, 3.0, 2.0).is_err());
    }

    #[test]
    fn envelope_values() {
        let t = 10.0;
        assert_eq!(envelope_curve_checked(0.0, t, 0.4).unwrap(), 0.0);
        assert!((envelope_curve_checked(t, t, 0.4).unwrap() - m_of_t(t).unwrap()).abs() < 1e-12);
        assert!((envelope_curve_checked(5.0, t, 0.4).unwrap() - 7.753_591_6).abs() < 1e-7);
        assert!(envelope_curve_checked(-0.1, t, 0.4).is_err());
        assert!(envelope_curve_checked(10.1, t, 0.4).is_err());
    }
}
