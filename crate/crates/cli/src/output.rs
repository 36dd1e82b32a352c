//! CSV tables, run directories and manifests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bbm_core::ScanRow;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One CSV artifact. Cells are preformatted; floats use the shortest string
/// that round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }

    /// Column header plus rows, without the comment header.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// `#`-prefixed config echo followed by [`Table::body`].
    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# table = {}", self.name);
        let _ = writeln!(out, "# bbm-cli {}", env!("CARGO_PKG_VERSION"));
        for line in config.to_toml().lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&self.body());
        out
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Strips `#` lines, leaving the part that must be identical across reruns.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn cell<T: ToString>(v: T) -> String {
    v.to_string()
}

pub fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Creates `<root>/run-<unix seconds>-<nanos>` (with a numeric suffix if taken).
pub fn fresh_run_dir(root: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    let stem = format!("run-{}-{:09}", now.as_secs(), now.subsec_nanos());
    for i in 0u32.. {
        let dir = if i == 0 {
            root.join(&stem)
        } else {
            root.join(format!("{stem}-{i}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
    pub replicas: usize,
    pub failed_replicas: usize,
    /// Base seed of each replica, in replica-index order, per seed schedule.
    pub seed_schedules: Vec<SeedSchedule>,
    pub artifacts: Vec<PathBuf>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSchedule {
    pub label: String,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
}

/// Contour-ready grid: `sigma,tau,p_limit,p_hat` in scan order.
pub fn emit_phase_figure_data(rows: &[ScanRow]) -> Result<(String, String), String> {
    if rows.is_empty() {
        return Err("empty scan table".into());
    }
    let mut table = Table::new("scan", &bbm_core::scan::SCAN_CSV_HEADER.split(',').collect::<Vec<_>>());
    let mut grid = Table::new("grid", &["sigma", "tau", "p_limit", "p_hat"]);
    for r in rows {
        table.push(r.csv().split(',').map(str::to_string).collect());
        grid.push(vec![cell(r.sigma), cell(r.tau), cell(r.p_limit), cell(r.p_hat)]);
    }
    Ok((table.body(), grid.body()))
}
