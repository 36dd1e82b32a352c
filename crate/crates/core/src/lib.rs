//! Branching Brownian motion energy model at complex inverse temperature.
//!
//! Continuous-time Galton-Watson trees carry a pair of correlated Brownian
//! fields; the crate evaluates partition functions, martingales and extremal
//! statistics on them, samples the limiting point-process objects, and
//! provides closed-form oracles for testing the simulation.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod extremal;
pub mod field;
pub mod offspring;
pub mod oracles;
pub mod partition;
pub mod phase;
pub mod replicas;
pub mod rng;
pub mod scan;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use field::{sample_correlated_pair, sample_field, BbmField, CorrelatedField};
pub use offspring::{MeanPolicy, OffspringDistribution};
pub use partition::{ComplexTemperature, PartitionStatistics, PhaseConvention, ScaledComplex};
pub use phase::{classify, limiting_free_energy, PhaseRegion, PhaseTag};
pub use rng::{replica_seed, stream_rng, Stream};
pub use scan::{grid_scan, scan_temperatures, ScanConfig, ScanRow};
pub use tree::{GwTree, NodeId, OverlapMatrix};

pub use num_complex::Complex64;
