//! Extremal point process of the field and its parametric limit.

pub mod cluster;
pub mod cox;
pub mod limit;
pub mod sample;

pub use cluster::{conditioned_attempt, sample_cluster, Cluster, ClusterBank, ClusterDraw};
pub use cox::{estimate_cox_constants, CoxFit, MIN_COX_SAMPLES};
pub use limit::{sample_limit_partition, CircleDecoration, HarvestedMarks, LimitDraw, LimitModel, LimitSampler};
pub use sample::{extremal_sample, phi_functional, phi_tilde_functional, ExtremalSample};
