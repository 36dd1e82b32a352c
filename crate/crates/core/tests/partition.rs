use bbm_core::extremal::{extremal_sample, phi_tilde_functional};
use bbm_core::oracles::{martingale_second_moment, SecondMomentParams};
use bbm_core::partition::{
    additive_martingale, log_partition, m_of_t, partition_function, partition_function_scaled,
    rescaled_partition, truncated_partition, PhaseConvention,
};
use bbm_core::replicas::run_replicas;
use bbm_core::stats::mean_and_stderr;
use bbm_core::{Complex64, ComplexTemperature, CorrelatedField, GwTree, OffspringDistribution, PartitionStatistics};
use proptest::prelude::*;

fn binary() -> OffspringDistribution {
    OffspringDistribution::binary()
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + a.norm().max(b.norm()))
}

#[test]
fn martingale_has_mean_one_and_the_oracle_second_moment() {
    let beta = ComplexTemperature::new(0.3, 0.5);
    for (rho, seed) in [(0.0, 11), (0.7, 12)] {
        let m: Vec<Complex64> = run_replicas(seed, 40_000, |_, s| {
            let tree = GwTree::sample(&binary(), 1.5, s).unwrap();
            additive_martingale(&CorrelatedField::sample(&tree, rho, s, false).unwrap(), beta)
        });
        let (re, se_re) = mean_and_stderr(&m.iter().map(|z| z.re).collect::<Vec<_>>());
        let (im, se_im) = mean_and_stderr(&m.iter().map(|z| z.im).collect::<Vec<_>>());
        assert!((re - 1.0).abs() < 4.0 * se_re, "rho {rho}: Re {re} (se {se_re})");
        assert!(im.abs() < 4.0 * se_im, "rho {rho}: Im {im} (se {se_im})");
        let (sq, se_sq) = mean_and_stderr(&m.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
        let oracle = martingale_second_moment(&SecondMomentParams::new(0.3, 0.5, 1.5, 2.0).unwrap());
        assert!((sq - oracle).abs() < 4.0 * se_sq, "rho {rho}: {sq} vs {oracle} (se {se_sq})");
    }
}

#[test]
fn huge_populations_stay_finite_in_log_scale() {
    let tree = GwTree::sample(&binary(), 9.0, 3).unwrap();
    let field = CorrelatedField::sample(&tree, 0.5, 3, false).unwrap();
    let beta = ComplexTemperature::new(60.0, 1.0);
    let scaled = partition_function_scaled(&field, beta);
    assert!(scaled.ln_abs().is_finite());
    assert!(partition_function(&field, beta).re.is_infinite() || partition_function(&field, beta).norm() > 0.0);
    let p = log_partition(&field, beta).unwrap();
    assert!(p.is_finite() && p > 0.0);
}

#[test]
fn statistics_agree_with_the_free_functions() {
    let tree = GwTree::sample(&binary(), 5.0, 21).unwrap();
    let field = CorrelatedField::sample(&tree, 0.4, 21, false).unwrap();
    let beta = ComplexTemperature::new(1.2, 0.9);
    let s = PartitionStatistics::compute(&field, beta).unwrap();
    let (full, real) = rescaled_partition(&field, beta).unwrap();
    assert!(close(s.rescaled_full, full, 1e-12));
    assert!(close(s.rescaled_real, real, 1e-12));
    assert!(close(s.martingale, additive_martingale(&field, beta), 1e-12));
    assert_eq!(s.leaves, tree.leaf_count());
    // |e^{-beta m}| = e^{-sigma m}: the two normalizations differ by a phase.
    assert!((full.norm() - real.norm()).abs() <= 1e-12 * real.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_temperature_conjugates(seed in any::<u64>(), sigma in -2.0f64..2.0, tau in -2.0f64..2.0, rho in -1.0f64..=1.0) {
        let tree = GwTree::sample(&binary(), 3.0, seed).unwrap();
        let field = CorrelatedField::sample(&tree, rho, seed, false).unwrap();
        let beta = ComplexTemperature::new(sigma, tau);
        let a = partition_function(&field, beta);
        let b = partition_function(&field, beta.conj());
        prop_assert!(close(a.conj(), b, 1e-12));
    }

    #[test]
    fn truncation_splits_exactly(seed in any::<u64>(), sigma in 0.0f64..2.5, tau in -2.0f64..2.0, rho in -1.0f64..=1.0, a in 0.0f64..6.0) {
        let tree = GwTree::sample(&binary(), 4.0, seed).unwrap();
        let field = CorrelatedField::sample(&tree, rho, seed, false).unwrap();
        let beta = ComplexTemperature::new(sigma, tau);
        let (kept, discarded) = truncated_partition(&field, beta, a, PhaseConvention::Unrotated).unwrap();
        let (_, real) = rescaled_partition(&field, beta).unwrap();
        prop_assert!(close(kept + discarded, real, 1e-10));

        let (rk, rd) = truncated_partition(&field, beta, a, PhaseConvention::Rotated).unwrap();
        let m = m_of_t(4.0).unwrap();
        let rotation = Complex64::from_polar(1.0, -2.0 * rho * tau * m);
        prop_assert!(close(rk + rd, real * rotation, 1e-10));
    }

    #[test]
    fn phi_tilde_matches_truncation_at_zero_correlation(seed in any::<u64>(), sigma in 0.5f64..2.0, tau in -2.0f64..2.0, a in 0.1f64..5.0) {
        let tree = GwTree::sample(&binary(), 4.0, seed).unwrap();
        let field = CorrelatedField::sample(&tree, 0.0, seed, false).unwrap();
        let beta = ComplexTemperature::new(sigma, tau);
        let sample = extremal_sample(&field, tau).unwrap();
        let phi = phi_tilde_functional(&sample, beta, 0.0, a).unwrap();
        let (kept, _) = truncated_partition(&field, beta, a, PhaseConvention::Rotated).unwrap();
        prop_assert!(close(phi, kept, 1e-10), "{} vs {}", phi, kept);
    }
}
