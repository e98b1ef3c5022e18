use std::sync::Arc;

use nls_lab::recovery::modified_structure;
use nls_lab::{
    gaussian_probe, make_grid, modified_scattering_map, operator_distance, Coefficient, Generator, NonlinearitySpec,
    NormKind, PairingConfig, ProbeSpec, ScatterConfig,
};

fn power(p: f64, gen: Generator<f64>, grid: &Arc<nls_lab::Grid<f64>>) -> NonlinearitySpec<f64> {
    NonlinearitySpec::power(p, Arc::new(Coefficient::new(gen, grid.clone()).unwrap())).unwrap()
}

fn fixed_horizon(t: f64) -> ScatterConfig<f64> {
    ScatterConfig { t0: t, t_max: t, tol: 1.0, relative: true, strict: false, ..ScatterConfig::for_probe(1.0) }
}

#[test]
fn operator_distance_is_symmetric() {
    let g = make_grid(2048, 512.0).unwrap();
    let a = power(3.0, Generator::gaussian(1.0, 1.0, 0.0), &g);
    let b = power(3.0, Generator::gaussian(1.0, 0.7, 0.5), &g);
    let probes: Vec<_> = [-1.0, 0.5]
        .iter()
        .map(|&x0| gaussian_probe(&g, &ProbeSpec::new(1.0, x0, 0.05)).unwrap())
        .collect();
    let cfg = fixed_horizon(8.0);
    let ab = operator_distance(&a, &b, &probes, NormKind::L2, &cfg).unwrap().value;
    let ba = operator_distance(&b, &a, &probes, NormKind::L2, &cfg).unwrap().value;
    assert!(ab > 0.0);
    assert!((ab - ba).abs() < 1e-12 * ab.max(1e-300) + 1e-18, "{ab} vs {ba}");
    let aa = operator_distance(&a, &a, &probes, NormKind::L2, &cfg).unwrap().value;
    assert_eq!(aa, 0.0);
}

#[test]
fn distance_grows_with_perturbation() {
    let g = make_grid(2048, 512.0).unwrap();
    let base = Generator::gaussian(1.0, 1.0, 0.0);
    let a = power(2.0, base.clone(), &g);
    let probes = vec![gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap()];
    let cfg = fixed_horizon(8.0);
    let mut prev = 0.0;
    for delta in [0.05, 0.1, 0.2, 0.4] {
        let b = power(2.0, base.clone().plus(delta, Generator::gaussian(1.0, 0.7, 0.5)), &g);
        let d = operator_distance(&a, &b, &probes, NormKind::L2, &cfg).unwrap().value;
        assert!(d > prev);
        prev = d;
    }
}

#[test]
fn modified_phase_is_nondecreasing() {
    let g = make_grid(4096, 2048.0).unwrap();
    let spec = NonlinearitySpec::perturbed_cubic(Arc::new(Coefficient::new(Generator::gaussian(0.5, 1.0, 0.0), g.clone()).unwrap()));
    let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
    let cfg = ScatterConfig { strict: false, t_max: 32.0, ..ScatterConfig::for_probe(1.0) };
    let rec = modified_scattering_map(&u0, &spec, &cfg).unwrap();
    assert!(rec.phase_history.len() >= 2);
    for w in rec.phase_history.windows(2) {
        for (a, b) in w[0].1.iter().zip(&w[1].1) {
            assert!(b >= a, "phase decreased from {a} to {b}");
        }
    }
}

#[test]
fn modified_structure_residual_is_quartic() {
    let cfg = PairingConfig { horizon: Some(64.0), dt_factor: 0.02, ..PairingConfig::default() };
    let a = Generator::gaussian(0.3, 1.0, 0.0);
    let r: Vec<f64> = [0.1, 0.05]
        .iter()
        .map(|&e| modified_structure(&a, &ProbeSpec::new(1.0, 0.0, e), &cfg).unwrap().residual.norm())
        .collect();
    let slope = (r[0] / r[1]).log2();
    assert!((slope - 4.0).abs() < 1.2, "slope {slope}");
}
