//! Finite-time approximation of the cluster law: BBM run to `t_cond` and
//! accepted when its maximum reaches `sqrt(2) t_cond`, recentered at the max.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::CorrelatedField;
use crate::offspring::OffspringDistribution;
use crate::rng::replica_seed;
use crate::tree::GwTree;

/// Atoms of one conditioned run relative to its maximum, sorted decreasing, so
/// `atoms[0] == 0`. `z_offsets[l]` is the independent-field value of atom `l`
/// minus that of the top atom; it feeds the circle decorations.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub atoms: Vec<f64>,
    pub z_offsets: Vec<f64>,
}

/// An accepted cluster and the number of attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDraw {
    pub cluster: Cluster,
    pub attempts: u64,
}

/// One conditioned run. Returns `None` when the maximum stays below
/// `sqrt(2) t_cond`.
pub fn conditioned_attempt(t_cond: f64, dist: &OffspringDistribution, seed: u64) -> Result<Option<Cluster>> {
    let tree = GwTree::sample(dist, t_cond, seed)?;
    let field = CorrelatedField::sample(&tree, 0.0, seed, false)?;
    let (max, top) = field.max_position();
    if max < SQRT_2 * t_cond {
        return Ok(None);
    }
    let x = field.x();
    let z = field.z().expect("rho = 0 samples an independent component");
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    debug_assert_eq!(order[0], top);
    let atoms = order.iter().map(|&k| x[k] - max).collect();
    let z_offsets = order.iter().map(|&k| z[k] - z[top]).collect();
    Ok(Some(Cluster { atoms, z_offsets }))
}

/// Repeats [`conditioned_attempt`] with seeds `replica_seed(seed, i)` for
/// `i = 0, 1, ...` and returns the first acceptance in that order.
pub fn sample_cluster(
    t_cond: f64,
    dist: &OffspringDistribution,
    seed: u64,
    max_attempts: u64,
) -> Result<ClusterDraw> {
    if !(t_cond > 0.0) {
        return Err(invalid(format!("t_cond must be positive, got {t_cond}")));
    }
    let found = (0..max_attempts).into_par_iter().find_map_first(|i| {
        match conditioned_attempt(t_cond, dist, replica_seed(seed, i)) {
            Ok(Some(c)) => Some(Ok((i, c))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    });
    match found {
        Some(Ok((i, cluster))) => Ok(ClusterDraw {
            cluster,
            attempts: i + 1,
        }),
        Some(Err(e)) => Err(e),
        None => Err(Error::RejectionExhausted {
            attempts: max_attempts,
        }),
    }
}

/// A bank of i.i.d. clusters with the statistics of their acceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBank {
    pub t_cond: f64,
    pub dist: String,
    pub attempts: u64,
    pub clusters: Vec<Cluster>,
}

impl ClusterBank {
    /// Draws `count` clusters; cluster `j` uses base seed `replica_seed(seed, j)`.
    pub fn build(
        t_cond: f64,
        dist: &OffspringDistribution,
        seed: u64,
        count: usize,
        max_attempts_per_cluster: u64,
    ) -> Result<Self> {
        let mut clusters = Vec::with_capacity(count);
        let mut attempts = 0;
        for j in 0..count {
            let draw = sample_cluster(t_cond, dist, replica_seed(seed, j as u64), max_attempts_per_cluster)?;
            attempts += draw.attempts;
            clusters.push(draw.cluster);
        }
        Ok(Self {
            t_cond,
            dist: dist.to_string(),
            attempts,
            clusters,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.clusters.len() as f64 / self.attempts as f64
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// One cluster per line: space-separated atoms, then ` | ` and the
    /// z-offsets. Header lines start with `#`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# cluster_bank v1");
        let _ = writeln!(out, "# t_cond={}", self.t_cond);
        let _ = writeln!(out, "# dist={}", self.dist);
        let _ = writeln!(out, "# attempts={}", self.attempts);
        let _ = writeln!(out, "# acceptance_rate={}", self.acceptance_rate());
        let _ = writeln!(out, "# approximation=finite-t rejection; decorations harvested from the same runs");
        for c in &self.clusters {
            let atoms: Vec<String> = c.atoms.iter().map(f64::to_string).collect();
            let z: Vec<String> = c.z_offsets.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{} | {}", atoms.join(" "), z.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::State(format!("cluster bank: {msg}"));
        let mut t_cond = None;
        let mut dist = String::new();
        let mut attempts = None;
        let mut clusters = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if let Some((key, value)) = header.trim().split_once('=') {
                    match key {
                        "t_cond" => t_cond = value.parse::<f64>().ok(),
                        "dist" => dist = value.to_string(),
                        "attempts" => attempts = value.parse::<u64>().ok(),
                        _ => {}
                    }
                }
                continue;
            }
            let (atoms, z) = line.split_once('|').unwrap_or((line, ""));
            let parse = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v}: {e}"))))
                    .collect()
            };
            let atoms = parse(atoms)?;
            let mut z_offsets = parse(z)?;
            if atoms.first() != Some(&0.0) {
                return Err(bad("cluster does not start at its maximum 0".into()));
            }
            if z_offsets.is_empty() {
                z_offsets = vec![0.0; atoms.len()];
            } else if z_offsets.len() != atoms.len() {
                return Err(bad("atoms and z-offsets differ in length".into()));
            }
            clusters.push(Cluster { atoms, z_offsets });
        }
        Ok(Self {
            t_cond: t_cond.ok_or_else(|| bad("missing t_cond header".into()))?,
            dist,
            attempts: attempts.ok_or_else(|| bad("missing attempts header".into()))?,
            clusters,
        })
    }
}
