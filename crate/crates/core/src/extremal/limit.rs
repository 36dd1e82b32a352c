//! The limiting partition function built from its point-process ingredients:
//! Cox atoms with intensity `C Z e^{-sqrt(2) y} dy`, i.i.d. clusters drawn from
//! a bank, and circle marks.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{invalid, Error, Result};
use crate::extremal::cluster::Cluster;
use crate::partition::ComplexTemperature;
use crate::rng::{stream_rng, Stream};

/// Source of the circle decorations `W~_l` attached to the atoms of a cluster.
pub trait CircleDecoration: Send + Sync {
    fn marks(&self, cluster: &Cluster, tau: f64, rho: f64) -> Vec<Complex64>;

    /// Whether the decorations are only an approximation of the limit law.
    fn is_approximate(&self) -> bool;
}

/// Marks `e^{i sqrt(1 - rho^2) tau (z_l - z_top)}` harvested from the
/// independent field of the same conditioned run that produced the cluster.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarvestedMarks;

impl CircleDecoration for HarvestedMarks {
    fn marks(&self, cluster: &Cluster, tau: f64, rho: f64) -> Vec<Complex64> {
        let w = (1.0 - rho * rho).max(0.0).sqrt();
        cluster
            .z_offsets
            .iter()
            .map(|&dz| Complex64::from_polar(1.0, w * tau * dz))
            .collect()
    }

    fn is_approximate(&self) -> bool {
        true
    }
}

pub struct LimitModel {
    c: f64,
    z: f64,
    clusters: Vec<Cluster>,
    decoration: Box<dyn CircleDecoration>,
}

impl std::fmt::Debug for LimitModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitModel")
            .field("c", &self.c)
            .field("z", &self.z)
            .field("clusters", &self.clusters.len())
            .field("approximate_decorations", &self.decoration.is_approximate())
            .finish()
    }
}

impl LimitModel {
    pub fn new(c: f64, z: f64, clusters: Vec<Cluster>) -> Result<Self> {
        Self::with_decoration(c, z, clusters, Box::new(HarvestedMarks))
    }

    pub fn with_decoration(
        c: f64,
        z: f64,
        clusters: Vec<Cluster>,
        decoration: Box<dyn CircleDecoration>,
    ) -> Result<Self> {
        if !(c > 0.0) || !(z > 0.0) {
            return Err(invalid(format!("C and Z must be positive, got C = {c}, Z = {z}")));
        }
        if let Some(bad) = clusters.iter().find(|cl| cl.atoms.first() != Some(&0.0)) {
            return Err(invalid(format!(
                "cluster maximum must be exactly 0, got {:?}",
                bad.atoms.first()
            )));
        }
        Ok(Self {
            c,
            z,
            clusters,
            decoration,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn decorations_are_approximate(&self) -> bool {
        self.decoration.is_approximate()
    }

    /// Mean number of Cox atoms in `[-A, inf)`: `C Z e^{sqrt(2) A} / sqrt(2)`.
    pub fn expected_atoms(&self, a: f64) -> f64 {
        self.c * self.z * (SQRT_2 * a).exp() / SQRT_2
    }
}

/// One draw of the truncated limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitDraw {
    pub value: Complex64,
    pub cox_atoms: u64,
}

/// Per-(beta, rho, A) precomputation: prefix sums of the cluster weights so a
/// draw costs `O(N log L)` for `N` Cox atoms and clusters of size `L`.
pub struct LimitSampler<'m> {
    model: &'m LimitModel,
    a: f64,
    full_correlation: bool,
    /// `sigma + i rho tau` for `|rho| = 1`, `sigma` otherwise.
    exponent: Complex64,
    prefix: Vec<Vec<Complex64>>,
    poisson: Option<Poisson<f64>>,
}

impl<'m> LimitSampler<'m> {
    pub fn new(model: &'m LimitModel, beta: ComplexTemperature, rho: f64, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid(format!("A must be positive, got {a}")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(invalid(format!("rho must lie in [-1, 1], got {rho}")));
        }
        if model.clusters.is_empty() {
            return Err(Error::State("cluster bank is empty".into()));
        }
        let full_correlation = rho.abs() == 1.0;
        let exponent = if full_correlation {
            beta.lambda(rho)
        } else {
            Complex64::new(beta.sigma, 0.0)
        };
        let prefix = model
            .clusters
            .iter()
            .map(|cl| {
                let marks = (!full_correlation).then(|| model.decoration.marks(cl, beta.tau, rho));
                let mut acc = Complex64::new(0.0, 0.0);
                let mut out = Vec::with_capacity(cl.atoms.len() + 1);
                out.push(acc);
                for (l, &d) in cl.atoms.iter().enumerate() {
                    let mut w = (exponent * d).exp();
                    if let Some(m) = &marks {
                        w *= m[l];
                    }
                    acc += w;
                    out.push(acc);
                }
                out
            })
            .collect();
        let mean = model.expected_atoms(a);
        let poisson = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?)
        } else {
            None
        };
        Ok(Self {
            model,
            a,
            full_correlation,
            exponent,
            prefix,
            poisson,
        })
    }

    /// Number of Cox atoms for the draw with this seed.
    pub fn sample_atom_count(&self, seed: u64) -> u64 {
        let mut rng = stream_rng(seed, Stream::Cox);
        self.atom_count(&mut rng)
    }

    fn atom_count<R: Rng>(&self, rng: &mut R) -> u64 {
        self.poisson.as_ref().map_or(0, |p| p.sample(rng) as u64)
    }

    pub fn sample(&self, seed: u64) -> LimitDraw {
        let mut rng = stream_rng(seed, Stream::Cox);
        let n = self.atom_count(&mut rng);
        let mut value = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let e: f64 = Exp1.sample(&mut rng);
            let eta = -self.a + e / SQRT_2;
            let idx = rng.random_range(0..self.model.clusters.len());
            let atoms = &self.model.clusters[idx].atoms;
            // Keep cluster atoms with eta + delta >= -A.
            let floor = -self.a - eta;
            let kept = atoms.partition_point(|&d| d >= floor);
            let mut term = (self.exponent * eta).exp() * self.prefix[idx][kept];
            if !self.full_correlation {
                let theta: f64 = rng.random::<f64>() * 2.0 * PI;
                term *= Complex64::from_polar(1.0, theta);
            }
            value += term;
        }
        LimitDraw { value, cox_atoms: n }
    }
}

pub fn sample_limit_partition(
    model: &LimitModel,
    beta: ComplexTemperature,
    rho: f64,
    a: f64,
    seed: u64,
) -> Result<Complex64> {
    Ok(LimitSampler::new(model, beta, rho, a)?.sample(seed).value)
}
