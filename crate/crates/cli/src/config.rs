//! Declarative experiment configuration (TOML) and its validation.

use std::fmt;
use std::path::PathBuf;

use bbm_core::{ComplexTemperature, MeanPolicy, OffspringDistribution};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    TreeMoments,
    Martingale,
    FreeEnergyScan,
    GlassyTail,
    Isotropy,
    Truncation,
    ExtremalMax,
    BridgeCheck,
    ClusterBank,
    LimitObject,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::TreeMoments,
        Experiment::Martingale,
        Experiment::FreeEnergyScan,
        Experiment::GlassyTail,
        Experiment::Isotropy,
        Experiment::Truncation,
        Experiment::ExtremalMax,
        Experiment::BridgeCheck,
        Experiment::ClusterBank,
        Experiment::LimitObject,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::TreeMoments => "tree_moments",
            Experiment::Martingale => "martingale",
            Experiment::FreeEnergyScan => "free_energy_scan",
            Experiment::GlassyTail => "glassy_tail",
            Experiment::Isotropy => "isotropy",
            Experiment::Truncation => "truncation",
            Experiment::ExtremalMax => "extremal_max",
            Experiment::BridgeCheck => "bridge_check",
            Experiment::ClusterBank => "cluster_bank",
            Experiment::LimitObject => "limit_object",
        }
    }

    /// Keys that must be present (in the file or as a CLI override).
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            Experiment::TreeMoments => &["dist", "t", "replicas", "seed"],
            Experiment::Martingale => &["dist", "t", "replicas", "seed", "rho", "beta_list"],
            Experiment::FreeEnergyScan => &["dist", "t", "replicas", "seed", "rho"],
            Experiment::GlassyTail | Experiment::Isotropy => {
                &["dist", "t", "replicas", "seed", "rho", "beta_list"]
            }
            Experiment::Truncation => &["dist", "t", "replicas", "seed", "rho", "beta_list", "A_list"],
            Experiment::ExtremalMax => &["dist", "t", "replicas", "seed"],
            Experiment::BridgeCheck => &["t", "replicas", "seed"],
            Experiment::ClusterBank => &["dist", "t_cond", "clusters", "seed"],
            Experiment::LimitObject => {
                &["dist", "t_cond", "clusters", "replicas", "seed", "beta_list", "rho", "A_list"]
            }
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A temperature given either as a string (`"1.2+0.9i"`), a real number, or a
/// `{ sigma, tau }` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BetaRepr", into = "String")]
pub struct Beta(pub ComplexTemperature);

#[derive(Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Text(String),
    Real(f64),
    Parts { sigma: f64, tau: f64 },
}

impl TryFrom<BetaRepr> for Beta {
    type Error = String;

    fn try_from(r: BetaRepr) -> Result<Self, String> {
        match r {
            BetaRepr::Text(s) => s.parse().map(Beta).map_err(|e| e.to_string()),
            BetaRepr::Real(v) => Ok(Beta(ComplexTemperature::real(v))),
            BetaRepr::Parts { sigma, tau } => Ok(Beta(ComplexTemperature::new(sigma, tau))),
        }
    }
}

impl From<Beta> for String {
    fn from(b: Beta) -> String {
        b.0.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanPolicySpec {
    #[default]
    Normalized,
    Supercritical,
    Unchecked,
}

impl From<MeanPolicySpec> for MeanPolicy {
    fn from(p: MeanPolicySpec) -> Self {
        match p {
            MeanPolicySpec::Normalized => MeanPolicy::Normalized,
            MeanPolicySpec::Supercritical => MeanPolicy::Supercritical,
            MeanPolicySpec::Unchecked => MeanPolicy::Unchecked,
        }
    }
}

/// Every knob of every experiment. Unused keys for a given experiment are
/// ignored; required ones are checked by [`ExperimentConfig::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    /// Offspring law as `k:p,k:p`.
    pub dist: Option<String>,
    pub mean_policy: Option<MeanPolicySpec>,
    pub t: Option<f64>,
    /// Extra horizons; experiments that compare horizons run `t` and each of these.
    pub t_list: Option<Vec<f64>>,
    pub replicas: Option<usize>,
    pub rho: Option<f64>,
    pub beta_list: Option<Vec<Beta>>,
    #[serde(rename = "A_list")]
    pub a_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub r: Option<f64>,
    pub output_dir: Option<PathBuf>,
    /// Threshold on `|discarded|` in the truncation experiment.
    pub delta: Option<f64>,
    pub k_fractions: Option<Vec<f64>>,
    pub node_budget: Option<u64>,
    pub sigma_range: Option<[f64; 2]>,
    pub tau_range: Option<[f64; 2]>,
    pub resolution: Option<usize>,
    /// Bridge experiment: window parameter `a` and grid step.
    pub bridge_a: Option<f64>,
    pub step: Option<f64>,
    pub t_cond: Option<f64>,
    pub clusters: Option<usize>,
    pub max_attempts: Option<u64>,
    pub cox_c: Option<f64>,
    pub cox_z: Option<f64>,
    /// Reuse a bank written by the `cluster_bank` experiment.
    pub bank_path: Option<PathBuf>,
}

/// Invalid configuration; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_BRIDGE_A: f64 = 1.0;
pub const DEFAULT_BRIDGE_STEP: f64 = 0.01;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn has(&self, field: &str) -> bool {
        match field {
            "dist" => self.dist.is_some(),
            "t" => self.t.is_some(),
            "replicas" => self.replicas.is_some(),
            "seed" => self.seed.is_some(),
            "rho" => self.rho.is_some(),
            "beta_list" => self.beta_list.as_ref().is_some_and(|b| !b.is_empty()),
            "A_list" => self.a_list.as_ref().is_some_and(|a| !a.is_empty()),
            "t_cond" => self.t_cond.is_some(),
            "clusters" => self.clusters.is_some() || self.bank_path.is_some(),
            _ => unreachable!("unknown required field {field}"),
        }
    }

    pub fn experiment(&self) -> Result<Experiment, UsageError> {
        self.experiment
            .ok_or_else(|| UsageError("no experiment selected".into()))
    }

    /// Checks required fields and value ranges.
    pub fn validate(&self) -> Result<Experiment, UsageError> {
        let exp = self.experiment()?;
        let missing: Vec<&str> = exp
            .required_fields()
            .iter()
            .copied()
            .filter(|f| !self.has(f))
            .collect();
        if !missing.is_empty() {
            return Err(UsageError(format!(
                "experiment {exp} requires missing field(s): {}",
                missing.join(", ")
            )));
        }
        if self.replicas == Some(0) {
            return Err(UsageError("replicas must be at least 1".into()));
        }
        for t in self.horizons() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(UsageError(format!("horizon must be positive, got {t}")));
            }
        }
        if let Some(rho) = self.rho {
            if !(-1.0..=1.0).contains(&rho) {
                return Err(UsageError(format!("rho must lie in [-1, 1], got {rho}")));
            }
        }
        if self.dist.is_some() {
            self.offspring()?;
        }
        if exp == Experiment::FreeEnergyScan && !self.has("beta_list") && self.grid().is_none() {
            return Err(UsageError(
                "free_energy_scan requires beta_list or sigma_range, tau_range and resolution".into(),
            ));
        }
        Ok(exp)
    }

    pub fn offspring(&self) -> Result<OffspringDistribution, UsageError> {
        let spec = self.dist.as_deref().ok_or_else(|| UsageError("missing dist".into()))?;
        let policy = self.mean_policy.unwrap_or_default().into();
        OffspringDistribution::parse(spec, policy).map_err(|e| UsageError(format!("dist: {e}")))
    }

    /// `t` followed by `t_list`, without duplicates.
    pub fn horizons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.t.into_iter().collect();
        for &t in self.t_list.iter().flatten() {
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    pub fn betas(&self) -> Vec<ComplexTemperature> {
        self.beta_list.iter().flatten().map(|b| b.0).collect()
    }

    pub fn grid(&self) -> Option<([f64; 2], [f64; 2], usize)> {
        Some((self.sigma_range?, self.tau_range?, self.resolution?))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn replicas(&self) -> usize {
        self.replicas.unwrap_or(1)
    }
}
