//! Phase regions of the complex temperature plane and the limiting free energy.
//!
//! `B2 = {2 sigma^2 > 1, |sigma| + |tau| > sqrt 2}`,
//! `B3 = {2 sigma^2 < 1, sigma^2 + tau^2 > 1}`, and `B1` is the complement of
//! the closure of `B2 ∪ B3`. Classification is purely analytic.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::partition::ComplexTemperature;

pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseTag {
    B1,
    B2,
    B3,
    Boundary,
}

impl std::fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhaseTag::B1 => "B1",
            PhaseTag::B2 => "B2",
            PhaseTag::B3 => "B3",
            PhaseTag::Boundary => "BOUNDARY",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRegion {
    pub tag: PhaseTag,
    pub boundary_tolerance: f64,
}

/// Signed distances to the three defining equalities.
struct Margins {
    /// `2 sigma^2 - 1`
    glassy: f64,
    /// `|sigma| + |tau| - sqrt 2`
    diagonal: f64,
    /// `sigma^2 + tau^2 - 1`
    circle: f64,
}

fn margins(beta: ComplexTemperature) -> Margins {
    let (s, t) = (beta.sigma, beta.tau);
    Margins {
        glassy: 2.0 * s * s - 1.0,
        diagonal: s.abs() + t.abs() - SQRT_2,
        circle: s * s + t * t - 1.0,
    }
}

fn in_closure_b2(m: &Margins, tol: f64) -> bool {
    m.glassy >= -tol && m.diagonal >= -tol
}

fn in_closure_b3(m: &Margins, tol: f64) -> bool {
    m.glassy <= tol && m.circle >= -tol
}

pub fn classify(beta: ComplexTemperature) -> PhaseRegion {
    classify_with_tolerance(beta, DEFAULT_BOUNDARY_TOLERANCE)
}

pub fn classify_with_tolerance(beta: ComplexTemperature, tol: f64) -> PhaseRegion {
    let m = margins(beta);
    let tag = if m.glassy > tol && m.diagonal > tol {
        PhaseTag::B2
    } else if m.glassy < -tol && m.circle > tol {
        PhaseTag::B3
    } else if !in_closure_b2(&m, tol) && !in_closure_b3(&m, tol) {
        PhaseTag::B1
    } else {
        PhaseTag::Boundary
    };
    PhaseRegion {
        tag,
        boundary_tolerance: tol,
    }
}

fn b1_value(beta: ComplexTemperature) -> f64 {
    1.0 + 0.5 * (beta.sigma * beta.sigma - beta.tau * beta.tau)
}

fn b2_value(beta: ComplexTemperature) -> f64 {
    SQRT_2 * beta.sigma.abs()
}

fn b3_value(beta: ComplexTemperature) -> f64 {
    0.5 + beta.sigma * beta.sigma
}

/// Conjectured limit of `p_t(beta)`. On shared boundaries the case formulas
/// agree and their common value is returned.
pub fn limiting_free_energy(beta: ComplexTemperature) -> f64 {
    let tol = DEFAULT_BOUNDARY_TOLERANCE;
    let m = margins(beta);
    let mut values = Vec::with_capacity(3);
    if in_closure_b2(&m, tol) {
        values.push(b2_value(beta));
    }
    if in_closure_b3(&m, tol) {
        values.push(b3_value(beta));
    }
    // Closure of B1: everything not strictly inside B2 or B3.
    let strictly_b2 = m.glassy > tol && m.diagonal > tol;
    let strictly_b3 = m.glassy < -tol && m.circle > tol;
    if !strictly_b2 && !strictly_b3 {
        values.push(b1_value(beta));
    }
    let first = values[0];
    // A point within `tol` of a boundary sees the formulas differ by O(tol).
    let agreement = 1e-9 + 8.0 * tol * (1.0 + beta.sigma.abs() + beta.tau.abs());
    for v in &values[1..] {
        assert!(
            (v - first).abs() <= agreement,
            "free-energy case formulas disagree at {beta}: {values:?}"
        );
    }
    first
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: f64, t: f64) -> ComplexTemperature {
        ComplexTemperature::new(s, t)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(b(1.0, 1.0)).tag, PhaseTag::B2);
        assert_eq!(classify(b(0.5, 0.5)).tag, PhaseTag::B1);
        assert_eq!(classify(b(0.0, 1.5)).tag, PhaseTag::B3);
        assert_eq!(classify(b(0.8, 0.1)).tag, PhaseTag::B1);
        assert_eq!(classify(b(1.0, SQRT_2 - 1.0)).tag, PhaseTag::Boundary);
        assert_eq!(classify(b(0.5f64.sqrt(), 1.0)).tag, PhaseTag::Boundary);
        assert_eq!(classify(b(0.6, 0.8)).tag, PhaseTag::Boundary);
    }

    #[test]
    fn free_energy_examples() {
        assert_eq!(limiting_free_energy(b(0.0, 0.0)), 1.0);
        assert!((limiting_free_energy(b(2.0, 0.0)) - 2.0 * SQRT_2).abs() < 1e-15);
        assert!((limiting_free_energy(b(0.5, 1.5)) - 0.75).abs() < 1e-15);
        assert!((limiting_free_energy(b(0.3, 0.3)) - 1.0).abs() < 1e-15);
        assert!((limiting_free_energy(b(1.2, 0.9)) - 1.2 * SQRT_2).abs() < 1e-15);
        assert!((limiting_free_energy(b(0.2, 1.2)) - 0.54).abs() < 1e-15);
    }

    #[test]
    fn real_axis_is_never_b3() {
        for i in 0..=400 {
            let s = -4.0 + 0.02 * i as f64;
            assert_ne!(classify(b(s, 0.0)).tag, PhaseTag::B3);
        }
    }
}
