//! The ten experiments. Each has a typed `compute` step, used directly by the
//! acceptance suite, and a table view written by [`crate::run`].

use std::f64::consts::{PI, SQRT_2};

use bbm_core::envelope::{envelope_violations, violation_probability, EnvelopeSpec};
use bbm_core::extremal::{estimate_cox_constants, ClusterBank, CoxFit, LimitModel, LimitSampler};
use bbm_core::oracles::{
    bridge_barrier_bound, bridge_stays_below_probability, gaussian_tail_bound, martingale_second_moment,
    SecondMomentParams,
};
use bbm_core::partition::{
    derivative_martingale, m_of_t, rescaled_partition, truncated_partition, PartitionStatistics,
    PhaseConvention,
};
use bbm_core::replicas::{run_replicas, seed_schedule};
use bbm_core::rng::{replica_seed, stream_rng, Stream};
use bbm_core::stats::{
    hill_estimator, isotropy_statistic, ks_distance, max_tail_exponent, mean_and_stderr, median,
    select_radii, StableFit, DEFAULT_K_FRACTION, SENSITIVITY_K_FRACTIONS,
};
use bbm_core::tree::DEFAULT_NODE_BUDGET;
use bbm_core::{
    classify, scan_temperatures, BbmField, Complex64, ComplexTemperature, CorrelatedField, Error, GwTree,
    OffspringDistribution, PhaseTag, ScanConfig, ScanRow,
};
use rand::Rng;

use crate::config::{
    Experiment, ExperimentConfig, UsageError, DEFAULT_BRIDGE_A, DEFAULT_BRIDGE_STEP, DEFAULT_DELTA,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::output::{cell, emit_phase_figure_data, opt_cell, SeedSchedule, Table};

/// Everything an experiment produces before it touches the filesystem.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    /// Non-CSV artifacts: file name and contents.
    pub files: Vec<(String, String)>,
    pub replicas: usize,
    pub failed_replicas: usize,
    pub seed_schedules: Vec<SeedSchedule>,
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    pub fn failure_fraction(&self) -> f64 {
        if self.replicas == 0 {
            0.0
        } else {
            self.failed_replicas as f64 / self.replicas as f64
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Errors of one experiment run (not of single replicas).
#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Failed(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(u) => write!(f, "usage: {u}"),
            RunError::Failed(m) => write!(f, "experiment failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<UsageError> for RunError {
    fn from(u: UsageError) -> Self {
        RunError::Usage(u)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Failed(e.to_string())
    }
}

pub fn compute(cfg: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    match cfg.validate()? {
        Experiment::TreeMoments => tree_moments(cfg).map(|r| r.output),
        Experiment::Martingale => martingale(cfg).map(|r| r.output),
        Experiment::FreeEnergyScan => free_energy_scan(cfg).map(|r| r.output),
        Experiment::GlassyTail => glassy_tail(cfg).map(|r| r.output),
        Experiment::Isotropy => isotropy(cfg).map(|r| r.output),
        Experiment::Truncation => truncation(cfg).map(|r| r.output),
        Experiment::ExtremalMax => extremal_max(cfg).map(|r| r.output),
        Experiment::BridgeCheck => bridge_check(cfg).map(|r| r.output),
        Experiment::ClusterBank => cluster_bank(cfg).map(|r| r.output),
        Experiment::LimitObject => limit_object(cfg).map(|r| r.output),
    }
}

/// Base seed of the `h`-th horizon; horizons after the first get independent streams.
pub fn horizon_seed(seed: u64, h: usize) -> u64 {
    if h == 0 {
        seed
    } else {
        replica_seed(seed, u64::MAX - h as u64)
    }
}

fn node_budget(cfg: &ExperimentConfig) -> u64 {
    cfg.node_budget.unwrap_or(DEFAULT_NODE_BUDGET)
}

fn schedule(label: impl Into<String>, base: u64, count: usize) -> SeedSchedule {
    SeedSchedule {
        label: label.into(),
        base_seed: base,
        seeds: seed_schedule(base, count),
    }
}

fn required<T: Copy>(v: Option<T>, name: &str) -> Result<T, RunError> {
    v.ok_or_else(|| RunError::Usage(UsageError(format!("missing {name}"))))
}

/// Replica results with their failures split out into an error table.
struct Collected<T> {
    ok: Vec<(usize, u64, T)>,
    errors: Vec<(usize, u64, String)>,
}

fn collect<T>(base: u64, results: Vec<bbm_core::Result<T>>) -> Collected<T> {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let seed = replica_seed(base, i as u64);
        match r {
            Ok(v) => ok.push((i, seed, v)),
            Err(e) => errors.push((i, seed, e.to_string())),
        }
    }
    Collected { ok, errors }
}

fn error_table(name: &str, label: &str, errors: &[(usize, u64, String)], out: &mut Table) {
    if out.rows.is_empty() && out.columns.is_empty() {
        *out = Table::new(name, &["schedule", "replica", "seed", "error"]);
    }
    for (i, s, e) in errors {
        out.push(vec![label.to_string(), cell(i), cell(s), e.replace(',', ";")]);
    }
}

fn finish_errors(output: &mut ExperimentOutput, errors: Table) {
    if !errors.rows.is_empty() {
        output.failed_replicas += errors.rows.len();
        output.tables.push(errors);
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSummary {
    pub t: f64,
    pub replicas: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `e^{(mu - 1) t}` for mean offspring `mu`.
    pub expected: f64,
}

pub struct TreeMomentsResult {
    pub summaries: Vec<PopulationSummary>,
    pub output: ExperimentOutput,
}

pub fn tree_moments(cfg: &ExperimentConfig) -> Result<TreeMomentsResult, RunError> {
    let dist = cfg.offspring()?;
    let n = cfg.replicas();
    let budget = node_budget(cfg);
    let mut output = ExperimentOutput::default();
    let mut rows = Table::new("replicas", &["t", "replica", "seed", "leaves", "nodes"]);
    let mut summary = Table::new("summary", &["t", "replicas", "mean_n", "stderr", "expected"]);
    let mut errors = Table::new("errors", &[]);
    let mut summaries = Vec::new();
    for (h, t) in cfg.horizons().into_iter().enumerate() {
        let base = horizon_seed(cfg.seed(), h);
        let res = run_replicas(base, n, |_, seed| {
            GwTree::sample_with_budget(&dist, t, seed, budget).map(|tree| (tree.leaf_count(), tree.node_count()))
        });
        let c = collect(base, res);
        for (i, s, (leaves, nodes)) in &c.ok {
            rows.push(vec![cell(t), cell(i), cell(s), cell(leaves), cell(nodes)]);
        }
        let values: Vec<f64> = c.ok.iter().map(|(_, _, (l, _))| *l as f64).collect();
        let (mean, stderr) = mean_and_stderr(&values);
        let expected = ((dist.mean_children() - 1.0) * t).exp();
        summary.push(vec![cell(t), cell(values.len()), cell(mean), cell(stderr), cell(expected)]);
        summaries.push(PopulationSummary {
            t,
            replicas: values.len(),
            mean,
            stderr,
            expected,
        });
        error_table("errors", &format!("t={t}"), &c.errors, &mut errors);
        output.replicas += n;
        output.seed_schedules.push(schedule(format!("t={t}"), base, n));
    }
    output.tables.extend([summary, rows]);
    finish_errors(&mut output, errors);
    Ok(TreeMomentsResult { summaries, output })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleSummary {
    pub beta: ComplexTemperature,
    pub rho: f64,
    pub t: f64,
    pub replicas: usize,
    pub mean: Complex64,
    pub stderr: Complex64,
    pub mean_sq: f64,
    pub stderr_sq: f64,
    pub oracle_sq: f64,
}

pub struct MartingaleResult {
    pub summaries: Vec<MartingaleSummary>,
    pub output: ExperimentOutput,
}

pub const PARTITION_COLUMNS: [&str; 16] = [
    "replica", "seed", "t", "rho", "sigma", "tau", "n", "re_raw", "im_raw", "re_rescaled_real",
    "im_rescaled_real", "re_m", "im_m", "z", "p_t", "ln_abs_raw",
];

fn partition_row(i: usize, seed: u64, s: &PartitionStatistics) -> Vec<String> {
    let raw = s.raw.to_complex();
    vec![
        cell(i),
        cell(seed),
        cell(s.t),
        cell(s.rho),
        cell(s.beta.sigma),
        cell(s.beta.tau),
        cell(s.leaves),
        cell(raw.re),
        cell(raw.im),
        cell(s.rescaled_real.re),
        cell(s.rescaled_real.im),
        cell(s.martingale.re),
        cell(s.martingale.im),
        cell(s.derivative_martingale),
        cell(s.log_partition),
        cell(s.raw.ln_abs()),
    ]
}

pub fn martingale(cfg: &ExperimentConfig) -> Result<MartingaleResult, RunError> {
    let dist = cfg.offspring()?;
    let t = required(cfg.t, "t")?;
    let rho = required(cfg.rho, "rho")?;
    let betas = cfg.betas();
    let n = cfg.replicas();
    let budget = node_budget(cfg);
    let base = cfg.seed();
    let res = run_replicas(base, n, |_, seed| {
        let tree = GwTree::sample_with_budget(&dist, t, seed, budget)?;
        let field = CorrelatedField::sample(&tree, rho, seed, false)?;
        betas
            .iter()
            .map(|&b| PartitionStatistics::compute(&field, b))
            .collect::<bbm_core::Result<Vec<_>>>()
    });
    let c = collect(base, res);
    let mut rows = Table::new("replicas", &PARTITION_COLUMNS);
    for (i, s, stats) in &c.ok {
        for st in stats {
            rows.push(partition_row(*i, *s, st));
        }
    }
    let mut summary = Table::new(
        "summary",
        &[
            "sigma", "tau", "rho", "t", "replicas", "mean_re_m", "se_re_m", "mean_im_m", "se_im_m", "mean_abs_m_sq",
            "se_abs_m_sq", "oracle_abs_m_sq", "l2_regime",
        ],
    );
    let k = dist.second_factorial_moment();
    let mut summaries = Vec::new();
    for (bi, &beta) in betas.iter().enumerate() {
        let ms: Vec<Complex64> = c.ok.iter().map(|(_, _, v)| v[bi].martingale).collect();
        let (mr, sr) = mean_and_stderr(&ms.iter().map(|m| m.re).collect::<Vec<_>>());
        let (mi, si) = mean_and_stderr(&ms.iter().map(|m| m.im).collect::<Vec<_>>());
        let (m2, s2) = mean_and_stderr(&ms.iter().map(|m| m.norm_sqr()).collect::<Vec<_>>());
        let params = SecondMomentParams::relaxed(beta.sigma, beta.tau, t, k)?;
        let oracle = martingale_second_moment(&params);
        summary.push(vec![
            cell(beta.sigma),
            cell(beta.tau),
            cell(rho),
            cell(t),
            cell(ms.len()),
            cell(mr),
            cell(sr),
            cell(mi),
            cell(si),
            cell(m2),
            cell(s2),
            cell(oracle),
            cell(!params.outside_l2_regime),
        ]);
        summaries.push(MartingaleSummary {
            beta,
            rho,
            t,
            replicas: ms.len(),
            mean: Complex64::new(mr, mi),
            stderr: Complex64::new(sr, si),
            mean_sq: m2,
            stderr_sq: s2,
            oracle_sq: oracle,
        });
    }
    let mut output = ExperimentOutput {
        replicas: n,
        seed_schedules: vec![schedule("replicas", base, n)],
        ..Default::default()
    };
    output.tables.extend([summary, rows]);
    let mut errors = Table::new("errors", &[]);
    error_table("errors", "replicas", &c.errors, &mut errors);
    finish_errors(&mut output, errors);
    Ok(MartingaleResult { summaries, output })
}

// ---------------------------------------------------------------------------

pub struct FreeEnergyResult {
    /// One scan per horizon, in `cfg.horizons()` order.
    pub scans: Vec<(f64, Vec<ScanRow>)>,
    pub output: ExperimentOutput,
}

pub fn free_energy_scan(cfg: &ExperimentConfig) -> Result<FreeEnergyResult, RunError> {
    let dist = cfg.offspring()?;
    let rho = required(cfg.rho, "rho")?;
    let n = cfg.replicas();
    let betas = if cfg.beta_list.as_ref().is_some_and(|b| !b.is_empty()) {
        cfg.betas()
    } else {
        let (s, t, res) = cfg.grid().expect("validated");
        if res == 0 {
            return Err(UsageError("resolution must be at least 1".into()).into());
        }
        ScanConfig::new((s[0], s[1]), (t[0], t[1]), res, 1.0, 1).grid()
    };
    let mut output = ExperimentOutput::default();
    let mut scans = Vec::new();
    for (h, t) in cfg.horizons().into_iter().enumerate() {
        let base = horizon_seed(cfg.seed(), h);
        let sc = ScanConfig {
            rho,
            seed: base,
            node_budget: node_budget(cfg),
            ..ScanConfig::new((0.0, 0.0), (0.0, 0.0), 1, t, n)
        };
        let rows = scan_temperatures(&betas, &sc, &dist)?;
        let (scan_csv, grid_csv) = emit_phase_figure_data(&rows).map_err(RunError::Failed)?;
        output.tables.push(csv_table(&format!("scan_t{t}"), &scan_csv));
        output.tables.push(csv_table(&format!("grid_t{t}"), &grid_csv));
        output.failed_replicas += rows.iter().map(|r| r.failures).max().unwrap_or(0);
        output.replicas += n;
        output.seed_schedules.push(schedule(format!("t={t}"), base, n));
        if let Some(e) = rows.iter().find_map(|r| r.first_error.clone()) {
            output.notes.push(format!("t={t}: {e}"));
        }
        scans.push((t, rows));
    }
    output.notes.push("BOUNDARY cells are reported but carry no acceptance verdict".into());
    Ok(FreeEnergyResult { scans, output })
}

fn csv_table(name: &str, body: &str) -> Table {
    let mut lines = body.lines();
    let columns: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let mut t = Table::new(name, &columns);
    for l in lines {
        t.push(l.split(',').map(str::to_string).collect());
    }
    t
}

// ---------------------------------------------------------------------------

/// `e^{-sigma m(t)}`-rescaled partition functions, one vector per temperature,
/// all temperatures evaluated on the same fields.
pub fn rescaled_samples(
    cfg: &ExperimentConfig,
    betas: &[ComplexTemperature],
) -> Result<(Vec<Vec<Complex64>>, ExperimentOutput), RunError> {
    let dist = cfg.offspring()?;
    let t = required(cfg.t, "t")?;
    let rho = required(cfg.rho, "rho")?;
    let n = cfg.replicas();
    let budget = node_budget(cfg);
    let base = cfg.seed();
    let res = run_replicas(base, n, |_, seed| {
        let tree = GwTree::sample_with_budget(&dist, t, seed, budget)?;
        let field = CorrelatedField::sample(&tree, rho, seed, false)?;
        betas
            .iter()
            .map(|&b| rescaled_partition(&field, b).map(|(_, real)| real))
            .collect::<bbm_core::Result<Vec<_>>>()
    });
    let c = collect(base, res);
    let mut rows = Table::new("replicas", &["replica", "seed", "t", "rho", "sigma", "tau", "re", "im", "modulus"]);
    for (i, s, v) in &c.ok {
        for (b, z) in betas.iter().zip(v) {
            rows.push(vec![
                cell(i),
                cell(s),
                cell(t),
                cell(rho),
                cell(b.sigma),
                cell(b.tau),
                cell(z.re),
                cell(z.im),
                cell(z.norm()),
            ]);
        }
    }
    let per_beta = (0..betas.len())
        .map(|bi| c.ok.iter().map(|(_, _, v)| v[bi]).collect())
        .collect();
    let mut output = ExperimentOutput {
        replicas: n,
        seed_schedules: vec![schedule("replicas", base, n)],
        ..Default::default()
    };
    output.tables.push(rows);
    let mut errors = Table::new("errors", &[]);
    error_table("errors", "replicas", &c.errors, &mut errors);
    finish_errors(&mut output, errors);
    Ok((per_beta, output))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailSummary {
    pub beta: ComplexTemperature,
    pub phase: PhaseTag,
    /// `sqrt(2) / sigma`.
    pub target: f64,
    /// One fit per k-fraction, in the configured order.
    pub fits: Vec<(f64, StableFit)>,
}

pub struct GlassyTailResult {
    pub summaries: Vec<TailSummary>,
    pub output: ExperimentOutput,
}

fn k_fractions(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.k_fractions.clone().unwrap_or_else(|| SENSITIVITY_K_FRACTIONS.to_vec())
}

pub fn tail_summary(beta: ComplexTemperature, samples: &[Complex64], k_fractions: &[f64]) -> bbm_core::Result<TailSummary> {
    let moduli: Vec<f64> = samples.iter().map(|z| z.norm()).collect();
    let fits = k_fractions
        .iter()
        .map(|&k| hill_estimator(&moduli, k).map(|fit| (k, fit)))
        .collect::<bbm_core::Result<Vec<_>>>()?;
    Ok(TailSummary {
        beta,
        phase: classify(beta).tag,
        target: SQRT_2 / beta.sigma.abs(),
        fits,
    })
}

pub fn glassy_tail(cfg: &ExperimentConfig) -> Result<GlassyTailResult, RunError> {
    let betas = cfg.betas();
    let (samples, mut output) = rescaled_samples(cfg, &betas)?;
    let mut summary = Table::new(
        "summary",
        &["sigma", "tau", "phase", "k_fraction", "k_used", "alpha_hat", "alpha_se", "target"],
    );
    let mut summaries = Vec::new();
    for (beta, zs) in betas.iter().zip(&samples) {
        let ts = tail_summary(*beta, zs, &k_fractions(cfg))?;
        for (k, fit) in &ts.fits {
            summary.push(vec![
                cell(beta.sigma),
                cell(beta.tau),
                cell(ts.phase),
                cell(k),
                cell(fit.k_used),
                cell(fit.alpha_hat),
                cell(fit.alpha_se),
                cell(ts.target),
            ]);
        }
        summaries.push(ts);
    }
    output.tables.insert(0, summary);
    Ok(GlassyTailResult { summaries, output })
}

pub const ISOTROPY_ANGLES: usize = 16;
pub const ISOTROPY_RADII: usize = 5;
/// Range of the angle-averaged `|phi|` at which radii are probed.
pub const ISOTROPY_CF_BAND: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropySummary {
    pub beta: ComplexTemperature,
    pub radii: Vec<f64>,
    pub statistic: f64,
    /// The statistic on the same moduli with independent uniform phases.
    pub calibration: f64,
    /// `tau = 0` with the same `sigma` and fields.
    pub control_statistic: f64,
    pub control_calibration: f64,
}

pub struct IsotropyResult {
    pub summaries: Vec<IsotropySummary>,
    pub output: ExperimentOutput,
}

/// Same moduli, phases replaced by i.i.d. uniform angles.
pub fn isotropic_surrogate(samples: &[Complex64], seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, Stream::Aux);
    samples
        .iter()
        .map(|z| Complex64::from_polar(z.norm(), rng.random::<f64>() * 2.0 * PI))
        .collect()
}

/// `(radii, statistic, calibration)`. Radii come from the surrogate so the
/// data under test does not choose where it is probed.
pub fn isotropy_with_calibration(samples: &[Complex64], seed: u64) -> bbm_core::Result<(Vec<f64>, f64, f64)> {
    let surrogate = isotropic_surrogate(samples, seed);
    let radii = select_radii(&surrogate, ISOTROPY_ANGLES, ISOTROPY_CF_BAND.0, ISOTROPY_CF_BAND.1, ISOTROPY_RADII);
    if radii.is_empty() {
        return Err(Error::Fit("no radius with |phi| in the probing band".into()));
    }
    let stat = isotropy_statistic(samples, &radii, ISOTROPY_ANGLES)?;
    let calib = isotropy_statistic(&surrogate, &radii, ISOTROPY_ANGLES)?;
    Ok((radii, stat, calib))
}

/// Isotropy of `samples` and of the `tau = 0` `control`, each against its own
/// uniform-phase surrogate.
pub fn isotropy_summary(
    beta: ComplexTemperature,
    samples: &[Complex64],
    control: &[Complex64],
    seed: u64,
) -> bbm_core::Result<IsotropySummary> {
    let (radii, statistic, calibration) = isotropy_with_calibration(samples, seed)?;
    let (_, control_statistic, control_calibration) = isotropy_with_calibration(control, seed)?;
    Ok(IsotropySummary {
        beta,
        radii,
        statistic,
        calibration,
        control_statistic,
        control_calibration,
    })
}

/// Seed of the surrogate phases for the `index`-th temperature.
pub fn calibration_seed(seed: u64, index: usize) -> u64 {
    replica_seed(seed, u64::MAX / 2 + index as u64)
}

pub fn isotropy(cfg: &ExperimentConfig) -> Result<IsotropyResult, RunError> {
    let betas = cfg.betas();
    let mut all = betas.clone();
    all.extend(betas.iter().map(|b| ComplexTemperature::real(b.sigma)));
    let (samples, mut output) = rescaled_samples(cfg, &all)?;
    let mut summary = Table::new(
        "summary",
        &[
            "sigma", "tau", "radii", "statistic", "calibration", "control_statistic", "control_calibration",
        ],
    );
    let mut summaries = Vec::new();
    for (bi, beta) in betas.iter().enumerate() {
        let s = isotropy_summary(*beta, &samples[bi], &samples[betas.len() + bi], calibration_seed(cfg.seed(), bi))?;
        let radii_text: Vec<String> = s.radii.iter().map(f64::to_string).collect();
        summary.push(vec![
            cell(beta.sigma),
            cell(beta.tau),
            radii_text.join(" "),
            cell(s.statistic),
            cell(s.calibration),
            cell(s.control_statistic),
            cell(s.control_calibration),
        ]);
        summaries.push(s);
    }
    output.tables.insert(0, summary);
    output.notes.push("control rows use tau = 0 on the same fields".into());
    Ok(IsotropyResult { summaries, output })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSummary {
    pub beta: ComplexTemperature,
    pub a: f64,
    pub delta: f64,
    pub replicas: usize,
    pub exceed_probability: f64,
    pub stderr: f64,
}

pub struct TruncationResult {
    pub summaries: Vec<TruncationSummary>,
    pub output: ExperimentOutput,
}

pub fn truncation(cfg: &ExperimentConfig) -> Result<TruncationResult, RunError> {
    let dist = cfg.offspring()?;
    let t = required(cfg.t, "t")?;
    let rho = required(cfg.rho, "rho")?;
    let delta = cfg.delta.unwrap_or(DEFAULT_DELTA);
    let betas = cfg.betas();
    let a_list = cfg.a_list.clone().unwrap_or_default();
    let n = cfg.replicas();
    let budget = node_budget(cfg);
    let base = cfg.seed();
    let res = run_replicas(base, n, |_, seed| {
        let tree = GwTree::sample_with_budget(&dist, t, seed, budget)?;
        let field = CorrelatedField::sample(&tree, rho, seed, false)?;
        let mut out = Vec::with_capacity(betas.len() * a_list.len());
        for &b in &betas {
            for &a in &a_list {
                out.push(truncated_partition(&field, b, a, PhaseConvention::Unrotated)?);
            }
        }
        Ok(out)
    });
    let c = collect(base, res);
    let mut rows = Table::new(
        "replicas",
        &["replica", "seed", "sigma", "tau", "A", "re_kept", "im_kept", "abs_discarded"],
    );
    for (i, s, v) in &c.ok {
        for (bi, b) in betas.iter().enumerate() {
            for (ai, a) in a_list.iter().enumerate() {
                let (kept, disc) = v[bi * a_list.len() + ai];
                rows.push(vec![
                    cell(i),
                    cell(s),
                    cell(b.sigma),
                    cell(b.tau),
                    cell(a),
                    cell(kept.re),
                    cell(kept.im),
                    cell(disc.norm()),
                ]);
            }
        }
    }
    let mut summary = Table::new("summary", &["sigma", "tau", "A", "delta", "replicas", "p_exceed", "stderr"]);
    let mut summaries = Vec::new();
    for (bi, b) in betas.iter().enumerate() {
        for (ai, a) in a_list.iter().enumerate() {
            let hits: Vec<f64> = c
                .ok
                .iter()
                .map(|(_, _, v)| f64::from(u8::from(v[bi * a_list.len() + ai].1.norm() > delta)))
                .collect();
            let (p, se) = mean_and_stderr(&hits);
            summary.push(vec![
                cell(b.sigma),
                cell(b.tau),
                cell(a),
                cell(delta),
                cell(hits.len()),
                cell(p),
                cell(se),
            ]);
            summaries.push(TruncationSummary {
                beta: *b,
                a: *a,
                delta,
                replicas: hits.len(),
                exceed_probability: p,
                stderr: se,
            });
        }
    }
    let mut output = ExperimentOutput {
        replicas: n,
        seed_schedules: vec![schedule("replicas", base, n)],
        ..Default::default()
    };
    output.tables.extend([summary, rows]);
    let mut errors = Table::new("errors", &[]);
    error_table("errors", "replicas", &c.errors, &mut errors);
    finish_errors(&mut output, errors);
    Ok(TruncationResult { summaries, output })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct MaxSummary {
    pub t: f64,
    /// `max - m(t)` per replica, in replica order.
    pub shifted_max: Vec<f64>,
    pub derivative_martingale: Vec<f64>,
    pub median: f64,
    pub tail_exponent: Option<f64>,
    pub cox: Option<CoxFit>,
}

pub struct ExtremalMaxResult {
    pub summaries: Vec<MaxSummary>,
    /// KS distance between consecutive horizons.
    pub ks: Vec<(f64, f64, f64)>,
    pub output: ExperimentOutput,
}

pub fn extremal_max(cfg: &ExperimentConfig) -> Result<ExtremalMaxResult, RunError> {
    let dist = cfg.offspring()?;
    let n = cfg.replicas();
    let budget = node_budget(cfg);
    let mut output = ExperimentOutput::default();
    let mut rows = Table::new("replicas", &["t", "replica", "seed", "shifted_max", "z"]);
    let mut summary = Table::new(
        "summary",
        &["t", "replicas", "median", "tail_exponent", "cox_c_hat", "cox_residual"],
    );
    let mut errors = Table::new("errors", &[]);
    let mut summaries = Vec::new();
    for (h, t) in cfg.horizons().into_iter().enumerate() {
        let base = horizon_seed(cfg.seed(), h);
        let m = m_of_t(t)?;
        let res = run_replicas(base, n, |_, seed| {
            let tree = GwTree::sample_with_budget(&dist, t, seed, budget)?;
            let field = BbmField::sample(&tree, seed, false);
            let pair = CorrelatedField::from_parts(field, None, 1.0)?;
            Ok((pair.max_position().0 - m, derivative_martingale(&pair)))
        });
        let c = collect(base, res);
        for (i, s, (mx, z)) in &c.ok {
            rows.push(vec![cell(t), cell(i), cell(s), cell(mx), cell(z)]);
        }
        let shifted_max: Vec<f64> = c.ok.iter().map(|(_, _, v)| v.0).collect();
        let zs: Vec<f64> = c.ok.iter().map(|(_, _, v)| v.1).collect();
        let tail = max_tail_exponent(&shifted_max).ok();
        let cox = estimate_cox_constants(&shifted_max, &zs).ok();
        let med = median(&shifted_max);
        summary.push(vec![
            cell(t),
            cell(shifted_max.len()),
            cell(med),
            opt_cell(tail),
            opt_cell(cox.map(|c| c.c_hat)),
            opt_cell(cox.map(|c| c.residual)),
        ]);
        summaries.push(MaxSummary {
            t,
            shifted_max,
            derivative_martingale: zs,
            median: med,
            tail_exponent: tail,
            cox,
        });
        error_table("errors", &format!("t={t}"), &c.errors, &mut errors);
        output.replicas += n;
        output.seed_schedules.push(schedule(format!("t={t}"), base, n));
    }
    let mut ks_table = Table::new("ks", &["t_a", "t_b", "ks_distance"]);
    let mut ks = Vec::new();
    for w in summaries.windows(2) {
        let d = ks_distance(&w[0].shifted_max, &w[1].shifted_max)?;
        ks_table.push(vec![cell(w[0].t), cell(w[1].t), cell(d)]);
        ks.push((w[0].t, w[1].t, d));
    }
    output.tables.extend([summary, ks_table, rows]);
    finish_errors(&mut output, errors);
    Ok(ExtremalMaxResult { summaries, ks, output })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSummary {
    /// `(x, bound, exact tail)` on the grid `0.1, 0.2, ..., 10`.
    pub tails: Vec<(f64, f64, f64)>,
    pub a: f64,
    pub t: f64,
    pub probability: f64,
    pub stderr: f64,
    pub bound: f64,
    pub envelope_violation: Option<f64>,
}

pub struct BridgeResult {
    pub summary: BridgeSummary,
    pub output: ExperimentOutput,
}

/// `P(N(0,1) < -x)` from the complementary error function.
pub fn normal_lower_tail(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / SQRT_2)
}

pub fn bridge_check(cfg: &ExperimentConfig) -> Result<BridgeResult, RunError> {
    let t = required(cfg.t, "t")?;
    let a = cfg.bridge_a.unwrap_or(DEFAULT_BRIDGE_A);
    let step = cfg.step.unwrap_or(DEFAULT_BRIDGE_STEP);
    let n = cfg.replicas();
    let mut tails_table = Table::new("gaussian_tail", &["x", "bound", "tail", "dominates"]);
    let mut tails = Vec::new();
    for i in 1..=100 {
        let x = i as f64 / 10.0;
        let bound = gaussian_tail_bound(x)?;
        let exact = normal_lower_tail(x);
        tails_table.push(vec![cell(x), cell(bound), cell(exact), cell(bound >= exact)]);
        tails.push((x, bound, exact));
    }
    let (p, se) = bridge_stays_below_probability(a, t, step, n, cfg.seed())?;
    let bound = bridge_barrier_bound(a, t)?;
    let mut bridge = Table::new("bridge", &["a", "t", "step", "paths", "probability", "stderr", "bound"]);
    bridge.push(vec![cell(a), cell(t), cell(step), cell(n), cell(p), cell(se), cell(bound)]);
    let mut output = ExperimentOutput {
        replicas: n,
        ..Default::default()
    };
    output.notes.push("bridge paths are monitored on a grid, which overestimates the continuous-time probability".into());

    let mut envelope_violation = None;
    if let (Some(gamma), Some(r), Some(_)) = (cfg.gamma, cfg.r, cfg.dist.as_ref()) {
        let dist = cfg.offspring()?;
        let spec = EnvelopeSpec::new(gamma, r)?;
        let budget = node_budget(cfg);
        let base = cfg.seed();
        let res = run_replicas(base, n, |_, seed| {
            let tree = GwTree::sample_with_budget(&dist, t, seed, budget)?;
            let field = BbmField::sample(&tree, seed, true);
            envelope_violations(&field, &spec)
        });
        let c = collect(base, res);
        let mut env = Table::new("envelope", &["replica", "seed", "leaves", "violating_leaves"]);
        for (i, s, rep) in &c.ok {
            env.push(vec![cell(i), cell(s), cell(rep.leaves), cell(rep.violating_leaves)]);
        }
        let reports: Vec<_> = c.ok.iter().map(|(_, _, r)| *r).collect();
        let prob = violation_probability(&reports);
        envelope_violation = Some(prob);
        bridge.columns.push("envelope_violation_probability".into());
        bridge.rows[0].push(cell(prob));
        output.tables.push(env);
        output.seed_schedules.push(schedule("envelope", base, n));
        let mut errors = Table::new("errors", &[]);
        error_table("errors", "envelope", &c.errors, &mut errors);
        finish_errors(&mut output, errors);
    }
    output.tables.insert(0, tails_table);
    output.tables.insert(0, bridge);
    Ok(BridgeResult {
        summary: BridgeSummary {
            tails,
            a,
            t,
            probability: p,
            stderr: se,
            bound,
            envelope_violation,
        },
        output,
    })
}

// ---------------------------------------------------------------------------

pub struct ClusterBankResult {
    pub bank: ClusterBank,
    pub output: ExperimentOutput,
}

pub fn build_bank(cfg: &ExperimentConfig, dist: &OffspringDistribution) -> Result<ClusterBank, RunError> {
    if let Some(path) = &cfg.bank_path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Failed(format!("reading {}: {e}", path.display())))?;
        return Ok(ClusterBank::from_text(&text)?);
    }
    let t_cond = required(cfg.t_cond, "t_cond")?;
    let count = required(cfg.clusters, "clusters")?;
    Ok(ClusterBank::build(
        t_cond,
        dist,
        cfg.seed(),
        count,
        cfg.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS),
    )?)
}

fn bank_summary(bank: &ClusterBank) -> Table {
    let mut t = Table::new(
        "bank_summary",
        &["t_cond", "dist", "clusters", "attempts", "acceptance_rate", "mean_atoms"],
    );
    let mean_atoms = bank.clusters.iter().map(|c| c.atoms.len() as f64).sum::<f64>() / bank.len().max(1) as f64;
    t.push(vec![
        cell(bank.t_cond),
        bank.dist.replace(',', ";"),
        cell(bank.len()),
        cell(bank.attempts),
        cell(bank.acceptance_rate()),
        cell(mean_atoms),
    ]);
    t
}

pub fn cluster_bank(cfg: &ExperimentConfig) -> Result<ClusterBankResult, RunError> {
    let dist = cfg.offspring()?;
    let bank = build_bank(cfg, &dist)?;
    let mut output = ExperimentOutput {
        replicas: bank.len(),
        ..Default::default()
    };
    output.seed_schedules.push(schedule("clusters", cfg.seed(), bank.len()));
    output.tables.push(bank_summary(&bank));
    output.files.push(("cluster_bank.txt".into(), bank.to_text()));
    output
        .notes
        .push("clusters approximate the limit law by rejection at finite t_cond".into());
    Ok(ClusterBankResult { bank, output })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSummary {
    pub beta: ComplexTemperature,
    pub a: f64,
    pub values: Vec<Complex64>,
    pub atom_counts: Vec<u64>,
    pub expected_atoms: f64,
    /// Variance over mean of the Cox atom count.
    pub dispersion: f64,
    pub hill: Option<StableFit>,
    pub target: f64,
}

pub struct LimitObjectResult {
    pub bank: ClusterBank,
    pub summaries: Vec<LimitSummary>,
    pub output: ExperimentOutput,
}

pub fn limit_object(cfg: &ExperimentConfig) -> Result<LimitObjectResult, RunError> {
    let dist = cfg.offspring()?;
    let rho = required(cfg.rho, "rho")?;
    let bank = build_bank(cfg, &dist)?;
    let model = LimitModel::new(cfg.cox_c.unwrap_or(1.0), cfg.cox_z.unwrap_or(1.0), bank.clusters.clone())?;
    let n = cfg.replicas();
    let draw_base = replica_seed(cfg.seed(), u64::MAX / 3);
    let mut rows = Table::new("draws", &["replica", "seed", "sigma", "tau", "A", "re", "im", "cox_atoms"]);
    let mut summary = Table::new(
        "summary",
        &[
            "sigma", "tau", "A", "draws", "expected_atoms", "mean_atoms", "dispersion", "hill_alpha", "target",
        ],
    );
    let mut summaries = Vec::new();
    for beta in cfg.betas() {
        for &a in cfg.a_list.iter().flatten() {
            let sampler = LimitSampler::new(&model, beta, rho, a)?;
            let draws = run_replicas(draw_base, n, |_, seed| sampler.sample(seed));
            let seeds = seed_schedule(draw_base, n);
            for (i, (d, s)) in draws.iter().zip(&seeds).enumerate() {
                rows.push(vec![
                    cell(i),
                    cell(s),
                    cell(beta.sigma),
                    cell(beta.tau),
                    cell(a),
                    cell(d.value.re),
                    cell(d.value.im),
                    cell(d.cox_atoms),
                ]);
            }
            let counts: Vec<u64> = draws.iter().map(|d| d.cox_atoms).collect();
            let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let (mean, se) = mean_and_stderr(&cf);
            let var = se * se * cf.len() as f64;
            let values: Vec<Complex64> = draws.iter().map(|d| d.value).collect();
            let moduli: Vec<f64> = values.iter().map(|v| v.norm()).filter(|m| *m > 0.0).collect();
            let hill = hill_estimator(&moduli, DEFAULT_K_FRACTION).ok();
            let target = SQRT_2 / beta.sigma.abs();
            summary.push(vec![
                cell(beta.sigma),
                cell(beta.tau),
                cell(a),
                cell(n),
                cell(model.expected_atoms(a)),
                cell(mean),
                cell(var / mean),
                opt_cell(hill.map(|h| h.alpha_hat)),
                cell(target),
            ]);
            summaries.push(LimitSummary {
                beta,
                a,
                values,
                atom_counts: counts,
                expected_atoms: model.expected_atoms(a),
                dispersion: var / mean,
                hill,
                target,
            });
        }
    }
    let mut output = ExperimentOutput {
        replicas: n,
        ..Default::default()
    };
    output.seed_schedules.push(schedule("clusters", cfg.seed(), bank.len()));
    output.seed_schedules.push(schedule("draws", draw_base, n));
    output.tables.extend([summary, bank_summary(&bank), rows]);
    output.notes.push(format!(
        "C = {}, Z = {}; clusters from finite-t rejection at t_cond = {}",
        model.c(),
        model.z(),
        bank.t_cond
    ));
    if rho.abs() < 1.0 && model.decorations_are_approximate() {
        output
            .notes
            .push("circle decorations are harvested from the conditioned runs (approximate)".into());
    }
    Ok(LimitObjectResult { bank, summaries, output })
}
