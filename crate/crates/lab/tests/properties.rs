use nls_lab_cli::{fit_log_law, fit_power_law, ExperimentConfig, Scenario};
use proptest::prelude::*;

fn sigmas(n: usize, top: f64, ratio: f64) -> Vec<f64> {
    (0..n).map(|i| top * ratio.powi(i as i32)).collect()
}

proptest! {
    #[test]
    fn power_fit_recovers_exponent(theta in 0.05f64..3.0, c in 0.01f64..100.0, n in 4usize..10, ratio in 0.2f64..0.5) {
        let pts: Vec<_> = sigmas(n, 0.5, ratio).into_iter().map(|x| (x, c * x.powf(theta))).collect();
        prop_assume!((pts[0].0 / pts[n - 1].0).log10() >= 1.0);
        let f = fit_power_law(&pts).unwrap();
        prop_assert!((f.slope - theta).abs() < 1e-9);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-8);
    }

    #[test]
    fn log_fit_recovers_slope(k in 0.01f64..10.0, b in -1.0f64..1.0, n in 5usize..10) {
        let pts: Vec<_> = sigmas(n, 0.4, 0.5).into_iter().map(|x| (x, k / x.ln().abs() + b)).collect();
        let f = fit_log_law(&pts).unwrap();
        prop_assert!((f.slope - k).abs() < 1e-9 * k.max(1.0));
        prop_assert!((f.intercept - b).abs() < 1e-9);
    }

    #[test]
    fn hash_ignores_threads_and_output(threads in 1usize..64, seed in any::<u64>()) {
        let mut a = ExperimentConfig::default_for(Scenario::StabilityCurve);
        a.seed = seed;
        let mut b = a.clone();
        b.threads = Some(threads);
        b.output_dir = Some("elsewhere".into());
        prop_assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = seed.wrapping_add(1);
        prop_assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn effective_config_round_trips(seed in any::<u64>()) {
        for s in [Scenario::ValidateKernels, Scenario::ScatterConvergence, Scenario::RecoverySweep, Scenario::StabilityCurve, Scenario::ModifiedStructure] {
            let mut cfg = ExperimentConfig::default_for(s);
            cfg.seed = seed;
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            prop_assert_eq!(back.hash(), cfg.hash());
        }
    }
}
