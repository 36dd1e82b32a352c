//! Monte Carlo scan of the free energy over a grid of complex temperatures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::CorrelatedField;
use crate::offspring::OffspringDistribution;
use crate::partition::{log_partition, ComplexTemperature};
use crate::phase::{classify, limiting_free_energy, PhaseTag};
use crate::replicas::run_replicas;
use crate::stats::mean_and_stderr;
use crate::tree::{GwTree, DEFAULT_NODE_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub sigma_range: (f64, f64),
    pub tau_range: (f64, f64),
    /// Points per axis. A value of 1 uses the lower end of each range.
    pub resolution: (usize, usize),
    pub t: f64,
    pub replicas: usize,
    pub rho: f64,
    pub seed: u64,
    pub node_budget: u64,
}

impl ScanConfig {
    pub fn new(sigma_range: (f64, f64), tau_range: (f64, f64), resolution: usize, t: f64, replicas: usize) -> Self {
        Self {
            sigma_range,
            tau_range,
            resolution: (resolution, resolution),
            t,
            replicas,
            rho: 0.0,
            seed: 0,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    /// Temperatures in row-major order: `sigma` outer, `tau` inner.
    pub fn grid(&self) -> Vec<ComplexTemperature> {
        let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        };
        let taus = axis(self.tau_range, self.resolution.1);
        axis(self.sigma_range, self.resolution.0)
            .into_iter()
            .flat_map(|s| taus.iter().map(move |&t| ComplexTemperature::new(s, t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub sigma: f64,
    pub tau: f64,
    pub phase: PhaseTag,
    pub p_limit: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub n_replicas: usize,
    pub t: f64,
    /// Replicas that produced no finite value in this cell, with the first error.
    pub failures: usize,
    pub first_error: Option<String>,
}

pub const SCAN_CSV_HEADER: &str = "sigma,tau,phase,p_limit,p_hat,stderr,n_replicas,t";

impl ScanRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.sigma, self.tau, self.phase, self.p_limit, self.p_hat, self.stderr, self.n_replicas, self.t
        )
    }
}

/// Scans `config.grid()`. See [`scan_temperatures`].
pub fn grid_scan(config: &ScanConfig, dist: &OffspringDistribution) -> Result<Vec<ScanRow>> {
    if config.resolution.0 == 0 || config.resolution.1 == 0 {
        return Err(invalid("grid resolution must be at least 1 per axis"));
    }
    scan_temperatures(&config.grid(), config, dist)
}

/// Every replica samples one tree and one field pair, shared by all cells.
/// Replicas that fail (e.g. on the node budget) count as failures in every
/// cell; the scan itself always completes. Only `t`, `replicas`, `rho`,
/// `seed` and `node_budget` are read from `config`.
pub fn scan_temperatures(
    grid: &[ComplexTemperature],
    config: &ScanConfig,
    dist: &OffspringDistribution,
) -> Result<Vec<ScanRow>> {
    if config.replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    if !(config.t > 0.0) {
        return Err(invalid(format!("t must be positive, got {}", config.t)));
    }
    let per_replica: Vec<Result<Vec<f64>>> = run_replicas(config.seed, config.replicas, |_, seed| {
        let tree = GwTree::sample_with_budget(dist, config.t, seed, config.node_budget)?;
        let field = CorrelatedField::sample(&tree, config.rho, seed, false)?;
        grid.iter().map(|&b| log_partition(&field, b)).collect()
    });
    Ok(grid
        .iter()
        .enumerate()
        .map(|(cell, &beta)| {
            let mut values = Vec::with_capacity(per_replica.len());
            let mut first_error = None;
            for r in &per_replica {
                match r {
                    Ok(v) if v[cell].is_finite() => values.push(v[cell]),
                    Ok(_) => {
                        first_error.get_or_insert_with(|| "partition function vanished".to_string());
                    }
                    Err(e) => {
                        first_error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let (p_hat, stderr) = mean_and_stderr(&values);
            ScanRow {
                sigma: beta.sigma,
                tau: beta.tau,
                phase: classify(beta).tag,
                p_limit: limiting_free_energy(beta),
                p_hat,
                stderr,
                n_replicas: values.len(),
                t: config.t,
                failures: per_replica.len() - values.len(),
                first_error,
            }
        })
        .collect())
}

/// Fails when every cell lost every replica.
pub fn require_some_success(rows: &[ScanRow]) -> Result<()> {
    if rows.iter().all(|r| r.n_replicas == 0) {
        let msg = rows.iter().find_map(|r| r.first_error.clone()).unwrap_or_default();
        return Err(Error::State(format!("no replica succeeded: {msg}")));
    }
    Ok(())
}
