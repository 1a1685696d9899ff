use nbro_core::baselines::{pb_posterior, pb_sample_distribution, Family};
use nbro_core::rng::SeedLineage;
use nbro_core::simulators::{
    ccf_run, ccf_true_inputs, exponential_quantiles, inventory_analytic_cost, CcfConfig, InventoryConfig,
    RenewalCostEvaluator,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ccf_flow_is_conserved(x1 in 1u32..20, x2 in 1u32..20, x3 in 1u32..40, seed in any::<u64>()) {
        let inputs = ccf_true_inputs().dists;
        let cfg = CcfConfig { days: 60.0, warmup: 20.0, ..CcfConfig::default() };
        let x = [x1 as f64, x2 as f64, x3 as f64];
        let run = ccf_run(&x, &inputs, &cfg, &mut SeedLineage::new(seed).stream("p", 0)).unwrap();
        prop_assert_eq!(run.arrivals, run.denials + run.exits + run.in_system);
        prop_assert!(run.counted_denials <= run.denials);
    }

    #[test]
    fn renewal_cost_tracks_formula(s in 10_000.0f64..22_500.0, gap in 100.0f64..12_000.0) {
        let demand = exponential_quantiles(0.0002, 4000).unwrap();
        let eval = RenewalCostEvaluator::new(&demand, &InventoryConfig::default(), 5.0, 13_000.0).unwrap();
        let x = [s, s + gap];
        let rel = (eval.cost(&x) - inventory_analytic_cost(&x, 0.0002)).abs() / inventory_analytic_cost(&x, 0.0002);
        prop_assert!(rel < 0.01, "relative error {}", rel);
    }

    #[test]
    fn pb_draws_are_valid_distributions(data in prop::collection::vec(0.01f64..50.0, 2..30), seed in any::<u64>(), lognormal in any::<bool>()) {
        let family = if lognormal { Family::Lognormal } else { Family::Exponential };
        let post = pb_posterior(family, &data).unwrap();
        let d = pb_sample_distribution(&post, &mut SeedLineage::new(seed).stream("pb", 0), 200).unwrap();
        prop_assert!(d.support().iter().all(|a| a.is_finite() && *a >= 0.0));
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
