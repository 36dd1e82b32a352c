use std::f64::consts::SQRT_2;

use bbm_core::extremal::{
    conditioned_attempt, phi_functional, Cluster, ClusterBank, LimitModel, LimitSampler,
};
use bbm_core::replicas::run_replicas;
use bbm_core::stats::{hill_estimator, ks_distance, mean_and_stderr};
use bbm_core::{Complex64, ComplexTemperature, OffspringDistribution};
use proptest::prelude::*;
use statrs::function::erf::erfc;

fn point_cluster() -> Cluster {
    Cluster {
        atoms: vec![0.0],
        z_offsets: vec![0.0],
    }
}

#[test]
fn single_lineage_acceptance_rate() {
    // A lone Brownian motion ends above sqrt(2) t with probability P(N > sqrt(2 t)).
    let dist = OffspringDistribution::single_lineage();
    let n = 400_000;
    let hits: Vec<f64> = run_replicas(1, n, |_, s| {
        f64::from(u8::from(conditioned_attempt(4.0, &dist, s).unwrap().is_some()))
    });
    let (rate, se) = mean_and_stderr(&hits);
    let exact = 0.5 * erfc(2.0);
    assert!((exact - 0.00233886).abs() < 1e-7);
    assert!((rate - exact).abs() < 4.0 * se, "{rate} vs {exact} (se {se})");
}

#[test]
fn bank_round_trips_through_text() {
    let bank = ClusterBank::build(3.0, &OffspringDistribution::binary(), 2, 10, 1_000_000).unwrap();
    assert_eq!(bank.len(), 10);
    assert!(bank.attempts >= 10);
    for c in &bank.clusters {
        assert_eq!(c.atoms[0], 0.0);
        assert!(c.atoms.windows(2).all(|w| w[0] >= w[1]));
    }
    let back = ClusterBank::from_text(&bank.to_text()).unwrap();
    assert_eq!(back.clusters, bank.clusters);
    assert_eq!(back.attempts, bank.attempts);
}

#[test]
fn cox_atom_count_is_poisson() {
    let model = LimitModel::new(0.7, 1.3, vec![point_cluster()]).unwrap();
    let sampler = LimitSampler::new(&model, ComplexTemperature::real(1.5), 1.0, 2.0).unwrap();
    let counts: Vec<f64> = run_replicas(3, 100_000, |_, s| sampler.sample_atom_count(s) as f64);
    let (mean, se) = mean_and_stderr(&counts);
    let expected = model.expected_atoms(2.0);
    assert!((expected - 0.7 * 1.3 * (SQRT_2 * 2.0).exp() / SQRT_2).abs() < 1e-12);
    assert!((mean - expected).abs() < 4.0 * se);
    let dispersion = se * se * counts.len() as f64 / mean;
    assert!((0.97..=1.03).contains(&dispersion), "{dispersion}");
}

#[test]
fn point_cluster_limit_has_stable_tail() {
    let model = LimitModel::new(1.0, 1.0, vec![point_cluster()]).unwrap();
    let sampler = LimitSampler::new(&model, ComplexTemperature::real(1.6), 1.0, 4.0).unwrap();
    let moduli: Vec<f64> = run_replicas(4, 20_000, |_, s| sampler.sample(s).value.norm());
    let fit = hill_estimator(&moduli, 0.05).unwrap();
    let target = SQRT_2 / 1.6;
    assert!((fit.alpha_hat - target).abs() < 0.1, "{fit:?} vs {target}");
}

#[test]
fn limit_is_isotropic_below_full_correlation() {
    let bank = ClusterBank::build(3.0, &OffspringDistribution::binary(), 5, 30, 1_000_000).unwrap();
    let model = LimitModel::new(1.0, 1.0, bank.clusters).unwrap();
    assert!(model.decorations_are_approximate());
    let sampler = LimitSampler::new(&model, ComplexTemperature::new(1.5, 0.7), 0.5, 3.0).unwrap();
    let draws: Vec<Complex64> = run_replicas(6, 20_000, |_, s| sampler.sample(s).value);
    let re: Vec<f64> = draws.iter().map(|z| z.re).collect();
    let rotated: Vec<f64> = draws.iter().map(|z| (z * Complex64::from_polar(1.0, 1.0)).re).collect();
    let d = ks_distance(&re, &rotated).unwrap();
    assert!(d <= 0.02, "KS {d}");
}

#[test]
fn sampler_rejects_bad_parameters() {
    let model = LimitModel::new(1.0, 1.0, vec![point_cluster()]).unwrap();
    let b = ComplexTemperature::real(1.5);
    assert!(LimitSampler::new(&model, b, 1.0, 0.0).is_err());
    assert!(LimitSampler::new(&model, b, 1.2, 1.0).is_err());
}

proptest! {
    #[test]
    fn phi_levels_telescope(points in prop::collection::vec(-8.0f64..0.0, 0..40), a1 in 0.1f64..4.0, extra in 0.0f64..4.0, s in 0.5f64..2.0, t in -2.0f64..2.0) {
        let beta = ComplexTemperature::new(s, t);
        let a2 = a1 + extra;
        let low = phi_functional(&points, beta, a1).unwrap();
        let high = phi_functional(&points, beta, a2).unwrap();
        let band: Complex64 = points
            .iter()
            .filter(|&&p| p > -a2 && p <= -a1)
            .map(|&p| (beta.as_complex() * p).exp())
            .sum();
        prop_assert!((high - low - band).norm() < 1e-10 * (1.0 + high.norm()));
    }

    #[test]
    fn draws_are_deterministic(seed in any::<u64>()) {
        let model = LimitModel::new(1.0, 1.0, vec![point_cluster()]).unwrap();
        let sampler = LimitSampler::new(&model, ComplexTemperature::new(1.5, 0.3), 0.2, 2.0).unwrap();
        prop_assert_eq!(sampler.sample(seed), sampler.sample(seed));
    }
}
