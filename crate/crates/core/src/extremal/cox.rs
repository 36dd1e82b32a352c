//! Estimation of the constant `C` in `P(max - m(t) <= y) -> E exp(-C Z e^{-sqrt(2) y})`.

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Error, Result};

pub const MIN_COX_SAMPLES: usize = 500;
const GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxFit {
    pub c_hat: f64,
    /// Root-mean-square gap between the empirical and fitted CDFs on the grid.
    pub residual: f64,
    pub grid_points: usize,
    /// Nonpositive `Z` values dropped before fitting.
    pub dropped_z: usize,
}

fn model_cdf(log_c: f64, z: &[f64], y: f64) -> f64 {
    let scale = (log_c - SQRT_2 * y).exp();
    z.iter().map(|&zj| (-scale * zj).exp()).sum::<f64>() / z.len() as f64
}

/// Least-squares fit of `C` over a grid of empirical quantiles of
/// `max_samples` (5% to 95%), with the law of `Z` taken from `z_samples`.
pub fn estimate_cox_constants(max_samples: &[f64], z_samples: &[f64]) -> Result<CoxFit> {
    if max_samples.len() < MIN_COX_SAMPLES {
        return Err(invalid(format!(
            "need at least {MIN_COX_SAMPLES} maxima, got {}",
            max_samples.len()
        )));
    }
    if max_samples.iter().chain(z_samples).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let z: Vec<f64> = z_samples.iter().copied().filter(|&v| v > 0.0).collect();
    if z.is_empty() {
        return Err(Error::Fit("no positive Z samples".into()));
    }
    let mut sorted = max_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Fit("all maxima are equal".into()));
    }
    let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let p = 0.05 + 0.9 * i as f64 / (GRID_POINTS - 1) as f64;
            let y = sorted[((p * n as f64) as usize).min(n - 1)];
            let ecdf = sorted.partition_point(|&v| v <= y) as f64 / n as f64;
            (y, ecdf)
        })
        .collect();
    let loss = |log_c: f64| -> f64 {
        grid.iter()
            .map(|&(y, e)| (model_cdf(log_c, &z, y) - e).powi(2))
            .sum::<f64>()
    };

    // Coarse scan, then golden-section refinement around the best cell.
    let (lo, hi, steps) = (-15.0, 15.0, 120);
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + h * i as f64)
        .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
        .expect("nonempty scan");
    let (mut a, mut b) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (loss(c), loss(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = loss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = loss(d);
        }
    }
    let log_c = 0.5 * (a + b);
    Ok(CoxFit {
        c_hat: log_c.exp(),
        residual: (loss(log_c) / GRID_POINTS as f64).sqrt(),
        grid_points: GRID_POINTS,
        dropped_z: z_samples.len() - z.len(),
    })
}
