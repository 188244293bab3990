//! Property tests for the structural invariants: monotonicity of the
//! maximum-principle bound, kernel mass/support/positivity, growth-bound
//! preservation under smoothing, and stream reproducibility.

use proptest::prelude::*;

use fbsde::coefficients::bound_r;
use fbsde::mollifier::{make_kernel, mollify_scalar};
use fbsde::rng::standard_normal;
use fbsde::verify::stats::ks_critical_value;

proptest! {
    #[test]
    fn bound_r_monotone_in_each_argument(
        k2 in 0.0..3.0f64,
        k3 in 0.0..5.0f64,
        horizon in 0.01..4.0f64,
        bump in 0.0..1.0f64,
    ) {
        let base = bound_r(k2, k3, horizon);
        prop_assert!(bound_r(k2 + bump, k3, horizon) >= base);
        prop_assert!(bound_r(k2, k3 + bump, horizon) >= base);
        prop_assert!(bound_r(k2, k3, horizon + bump) >= base);
    }

    #[test]
    fn kernel_mass_support_positivity(level in 1u32..24, dim in 1usize..3, order in 4usize..20) {
        let k = make_kernel(level, dim, order);
        prop_assert!((k.mass() - 1.0).abs() < 1e-8);
        let radius = 1.0 / level as f64;
        for i in 0..k.len() {
            let r: f64 = k.node(i).iter().map(|u| u * u).sum::<f64>().sqrt();
            prop_assert!(r <= radius + 1e-15);
            prop_assert!(k.weight(i) > 0.0);
        }
    }

    #[test]
    fn smoothing_preserves_sup_bounds(level in 1u32..16, scale in 0.1..3.0f64) {
        // |f| ≤ scale pointwise implies |f_n| ≤ scale: convex combination
        let k = make_kernel(level, 1, 12);
        let f = move |u: &[f64]| scale * (5.0 * u[0]).sin();
        let f_n = mollify_scalar(f, &k);
        for i in -10..=10 {
            let x = i as f64 * 0.3;
            prop_assert!(f_n(&[x]).abs() <= scale * (1.0 + 1e-12));
        }
    }

    #[test]
    fn counter_rng_is_a_pure_function(seed in any::<u64>(), path in 0u64..1000, step in 0u64..1000) {
        let a = standard_normal(seed, path, step, 0);
        let b = standard_normal(seed, path, step, 0);
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a.is_finite());
    }

    #[test]
    fn ks_critical_decreases_with_sample_size(n in 100.0..10_000.0f64, factor in 1.1..10.0f64) {
        let alpha = 1e-3;
        prop_assert!(ks_critical_value(alpha, n * factor, n * factor) < ks_critical_value(alpha, n, n));
    }
}
