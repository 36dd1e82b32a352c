//! Offspring laws of the continuous-time Galton–Watson skeleton.

use rand::Rng;

use crate::error::{invalid, Result};

/// Largest supported number of children per split unless overridden.
pub const DEFAULT_MAX_SUPPORT: usize = 16;

const SUM_TOLERANCE: f64 = 1e-12;
const MEAN_TOLERANCE: f64 = 1e-9;

/// Which mean number of children a law must have to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanPolicy {
    /// Mean exactly two, the normalization under which `E n(t) = e^t`.
    #[default]
    Normalized,
    /// Any supercritical mean (> 1).
    Supercritical,
    /// No constraint on the mean. Used for degenerate test laws such as
    /// `p_1 = 1`, which never branch.
    Unchecked,
}

/// A reproduction law `(p_1, ..., p_kmax)` with `p_0 = 0`: particles never die.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    mean: f64,
    second_factorial_moment: f64,
    /// Set when all mass sits on one value; sampling then consumes no randomness.
    point_mass: Option<usize>,
}

impl OffspringDistribution {
    /// Builds a law from `(k, p_k)` pairs. Pairs may come in any order and
    /// repeated `k` are summed.
    pub fn from_pairs(pairs: &[(usize, f64)], policy: MeanPolicy) -> Result<Self> {
        Self::from_pairs_with_max_support(pairs, policy, DEFAULT_MAX_SUPPORT)
    }

    pub fn from_pairs_with_max_support(
        pairs: &[(usize, f64)],
        policy: MeanPolicy,
        max_support: usize,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(invalid("offspring law has no atoms"));
        }
        let kmax = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0);
        if kmax > max_support {
            return Err(invalid(format!(
                "offspring count {kmax} exceeds the supported maximum {max_support}"
            )));
        }
        let mut probabilities = vec![0.0; kmax];
        for &(k, p) in pairs {
            if k == 0 {
                return Err(invalid("p_0 must be zero: particles never die"));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(invalid(format!("p_{k} = {p} is not a probability")));
            }
            probabilities[k - 1] += p;
        }
        Self::from_probabilities(probabilities, policy)
    }

    /// Builds a law from `probabilities[k - 1] = p_k`.
    pub fn from_probabilities(probabilities: Vec<f64>, policy: MeanPolicy) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("offspring probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid(format!(
                "offspring probabilities sum to {total}, expected 1"
            )));
        }
        let mean: f64 = probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum();
        match policy {
            MeanPolicy::Normalized if (mean - 2.0).abs() > MEAN_TOLERANCE => {
                return Err(invalid(format!(
                    "mean number of children is {mean}, expected 2"
                )));
            }
            MeanPolicy::Supercritical if mean <= 1.0 => {
                return Err(invalid(format!(
                    "mean number of children is {mean}, the process must be supercritical"
                )));
            }
            _ => {}
        }
        let second_factorial_moment = probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let k = (i + 1) as f64;
                k * (k - 1.0) * p
            })
            .sum();
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let point_mass = probabilities.iter().position(|&p| p == 1.0).map(|i| i + 1);
        Ok(Self {
            probabilities,
            cumulative,
            mean,
            second_factorial_moment,
            point_mass,
        })
    }

    /// Binary splitting, `p_2 = 1`.
    pub fn binary() -> Self {
        Self::from_pairs(&[(2, 1.0)], MeanPolicy::Normalized).expect("binary law is valid")
    }

    /// The law `p_1 = 1`: a single lineage that never branches.
    pub fn single_lineage() -> Self {
        Self::from_pairs(&[(1, 1.0)], MeanPolicy::Unchecked).expect("single-child law is valid")
    }

    /// `p_k` for `k >= 1`; zero outside the support.
    pub fn probability(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probabilities.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn max_children(&self) -> usize {
        self.probabilities.len()
    }

    /// `(k, p_k)` for every atom with positive mass.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i + 1, *p))
            .collect()
    }

    pub fn mean_children(&self) -> f64 {
        self.mean
    }

    /// `K = sum_k k (k - 1) p_k`.
    pub fn second_factorial_moment(&self) -> f64 {
        self.second_factorial_moment
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let Some(k) = self.point_mass {
            return k;
        }
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .map_or(self.probabilities.len(), |i| i + 1)
    }
}

impl std::fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .pairs()
            .iter()
            .map(|(k, p)| format!("{k}:{p}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl OffspringDistribution {
    /// Parses the `Display` form `k:p,k:p`, e.g. `2:1` or `1:0.2,2:0.6,3:0.2`.
    pub fn parse(s: &str, policy: MeanPolicy) -> Result<Self> {
        let pairs = s
            .split(',')
            .map(|part| {
                let (k, p) = part
                    .split_once(':')
                    .ok_or_else(|| invalid(format!("expected k:p, got {part:?}")))?;
                let k = k.trim().parse::<usize>().map_err(|e| invalid(format!("{k:?}: {e}")))?;
                let p = p.trim().parse::<f64>().map_err(|e| invalid(format!("{p:?}: {e}")))?;
                Ok((k, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(&pairs, policy)
    }
}

impl std::str::FromStr for OffspringDistribution {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, MeanPolicy::Normalized)
    }
}
