//! Experiment runner: configuration, replica orchestration and artifacts.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

pub use config::{Beta, Experiment, ExperimentConfig, UsageError};
pub use experiments::{compute, ExperimentOutput, RunError};
pub use output::{csv_body, emit_phase_figure_data, Manifest, Table};

pub const DEFAULT_OUTPUT_DIR: &str = "runs";
/// Runs with a larger share of failed replicas exit with status 1.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub output: ExperimentOutput,
}

impl RunReport {
    pub fn too_many_failures(&self) -> bool {
        self.output.failure_fraction() > MAX_FAILURE_FRACTION
    }
}

/// Runs the experiment and writes its tables, extra files and `manifest.json`
/// into a fresh subdirectory of `output_dir`. Nothing is written when the
/// configuration is invalid.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, RunError> {
    let experiment = cfg.validate()?;
    let start = Instant::now();
    let output = compute(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let root = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let io = |e: std::io::Error| RunError::Failed(format!("writing artifacts: {e}"));
    let dir = output::fresh_run_dir(&root).map_err(io)?;
    let mut artifacts = Vec::new();
    for table in &output.tables {
        let path = dir.join(format!("{}.csv", table.name));
        fs::write(&path, table.to_csv(cfg)).map_err(io)?;
        artifacts.push(path);
    }
    for (name, contents) in &output.files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io)?;
        artifacts.push(path);
    }
    let manifest = Manifest {
        experiment: experiment.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_time_seconds: wall,
        replicas: output.replicas,
        failed_replicas: output.failed_replicas,
        seed_schedules: output.seed_schedules.clone(),
        artifacts: artifacts.clone(),
        notes: output.notes.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Failed(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json).map_err(io)?;
    Ok(RunReport { dir, manifest, output })
}
