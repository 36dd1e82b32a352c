//! Upper-envelope diagnostics for ancestral paths.
//!
//! A leaf violates the envelope when its ancestral path exceeds
//! `U(s) = (s/t) m(t) + min(s, t - s)^gamma` somewhere in `[r, t - r]`.
//! The path is inspected at edge endpoints, at `r` and `t - r`, and on a
//! global grid of step `grid_step`; between edge endpoints the path is filled in
//! with Brownian bridges drawn from a dedicated keystream, so the leaf values
//! of the field are untouched. Prescribed fields are filled in linearly.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::field::BbmField;
use crate::oracles::envelope_curve;
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSpec {
    gamma: f64,
    r: f64,
}

impl EnvelopeSpec {
    pub fn new(gamma: f64, r: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(invalid(format!("gamma must lie in (0, 1/2), got {gamma}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("r must be finite and nonnegative, got {r}")));
        }
        Ok(Self { gamma, r })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub violating_leaves: usize,
    pub leaves: usize,
    pub grid_step: f64,
}

impl EnvelopeReport {
    pub fn any_violation(&self) -> bool {
        self.violating_leaves > 0
    }
}

pub fn envelope_violations(field: &BbmField<'_>, spec: &EnvelopeSpec) -> Result<EnvelopeReport> {
    envelope_violations_with_step(field, spec, DEFAULT_GRID_STEP)
}

pub fn envelope_violations_with_step(
    field: &BbmField<'_>,
    spec: &EnvelopeSpec,
    grid_step: f64,
) -> Result<EnvelopeReport> {
    let node_pos = field
        .node_positions()
        .ok_or_else(|| Error::State("envelope checks need a field sampled with paths".into()))?;
    if !(grid_step > 0.0) {
        return Err(invalid(format!("grid step must be positive, got {grid_step}")));
    }
    let tree = field.tree();
    let t = tree.horizon();
    let (lo, hi) = (spec.r, t - spec.r);
    if !(t > 2.0 * spec.r) {
        return Err(invalid(format!(
            "empty window: horizon {t} must exceed 2r = {}",
            2.0 * spec.r
        )));
    }
    let envelope = |s: f64| envelope_curve(s, t, spec.gamma);

    let mut rng = stream_rng(field.seed(), Stream::Bridge);
    let mut violated = vec![false; tree.node_count()];
    let mut points = Vec::new();
    for (id, (parent, birth, end)) in tree.edge_bounds().enumerate() {
        let (inherited, start_pos) = if parent == u32::MAX {
            (false, 0.0)
        } else {
            (violated[parent as usize], node_pos[parent as usize])
        };
        if inherited {
            violated[id] = true;
            continue;
        }
        let end_pos = node_pos[id];
        let a = birth.max(lo);
        let b = end.min(hi);
        if a > b {
            continue;
        }
        // Checkpoints strictly inside the edge, in increasing order.
        points.clear();
        if a > birth {
            points.push(a);
        }
        let first = (a / grid_step).floor() as i64 + 1;
        let mut j = first;
        loop {
            let s = j as f64 * grid_step;
            if s >= b {
                break;
            }
            if s > a {
                points.push(s);
            }
            j += 1;
        }
        if b < end && b > a {
            points.push(b);
        }

        let mut hit = false;
        if birth >= lo && birth <= hi && start_pos > envelope(birth) {
            hit = true;
        }
        if !hit && end >= lo && end <= hi && end_pos > envelope(end) {
            hit = true;
        }
        let (mut s_prev, mut v_prev) = (birth, start_pos);
        for &s in &points {
            if hit {
                break;
            }
            let span = end - s_prev;
            let h = s - s_prev;
            let mean = v_prev + h / span * (end_pos - v_prev);
            let v = if field.is_prescribed() {
                mean
            } else {
                let sd = (h * (end - s) / span).max(0.0).sqrt();
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sd * z
            };
            if v > envelope(s) {
                hit = true;
            }
            s_prev = s;
            v_prev = v;
        }
        violated[id] = hit;
    }

    let violating_leaves = tree
        .leaf_indices()
        .iter()
        .filter(|&&i| violated[i as usize])
        .count();
    Ok(EnvelopeReport {
        violating_leaves,
        leaves: tree.leaf_count(),
        grid_step,
    })
}

/// Fraction of replicas in which at least one leaf violates the envelope.
pub fn violation_probability(reports: &[EnvelopeReport]) -> f64 {
    if reports.is_empty() {
        return f64::NAN;
    }
    reports.iter().filter(|r| r.any_violation()).count() as f64 / reports.len() as f64
}
