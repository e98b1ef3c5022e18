use std::sync::Arc;

use nls_lab::{evolve, free_propagate, gaussian_probe, make_grid, Coefficient, Generator, NonlinearitySpec, ProbeSpec, SolverConfig};
use num_complex::Complex;

fn spec(p: Option<f64>, gen: Generator<f64>, n: usize, len: f64) -> NonlinearitySpec<f64> {
    let grid = make_grid(n, len).unwrap();
    let c = Arc::new(Coefficient::new(gen, grid).unwrap());
    match p {
        Some(p) => NonlinearitySpec::power(p, c).unwrap(),
        None => NonlinearitySpec::perturbed_cubic(c),
    }
}

fn run(spec: &NonlinearitySpec<f64>, amp: f64, dt: f64, t: f64) -> nls_lab::Field<f64> {
    let u0 = gaussian_probe(spec.grid(), &ProbeSpec::new(1.0, 0.5, amp)).unwrap();
    let mut cfg = SolverConfig::new(dt, t);
    cfg.eta = f64::INFINITY;
    evolve(&u0, spec, &cfg).unwrap().state
}

/// `log₂(‖u_h - u_{h/2}‖ / ‖u_{h/2} - u_{h/4}‖)`.
fn observed_order(spec: &NonlinearitySpec<f64>, amp: f64) -> f64 {
    let (h, t) = (0.04, 2.0);
    let a = run(spec, amp, h, t);
    let b = run(spec, amp, h / 2.0, t);
    let c = run(spec, amp, h / 4.0, t);
    (a.sub(&b).unwrap().l2_norm() / b.sub(&c).unwrap().l2_norm()).log2()
}

#[test]
fn strang_order_two_on_three_scenarios() {
    let bump = || Generator::gaussian(1.0, 1.0, 0.0);
    let cases = [
        ("p=2", spec(Some(2.0), bump(), 1024, 80.0)),
        ("p=3", spec(Some(3.0), bump(), 1024, 80.0)),
        ("cubic", spec(None, bump(), 1024, 80.0)),
    ];
    for (name, s) in &cases {
        let q = observed_order(s, 1.0);
        assert!((q - 2.0).abs() < 0.2, "{name}: observed order {q}");
    }
}

#[test]
fn zero_coefficient_is_free_flow() {
    let s = spec(Some(2.0), Generator::Zero, 4096, 400.0);
    let u0 = gaussian_probe(s.grid(), &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
    let ev = evolve(&u0, &s, &SolverConfig::new(0.01, 10.0)).unwrap();
    let tc = Complex::new(1.0, 10.0);
    let err = s
        .grid()
        .xs()
        .iter()
        .zip(ev.state.values())
        .map(|(&x, v)| (tc.powf(-0.5) * (-(x * x) / (tc * 4.0)).exp() * 0.05 - v).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "sup error {err:e}");
    assert!(ev.state.sub(&free_propagate(&u0, 10.0)).unwrap().linf_norm() < 1e-10);
}

#[test]
fn mass_conserved_over_long_horizon() {
    let s = spec(Some(3.0), Generator::gaussian(1.0, 1.0, 0.0), 4096, 800.0);
    let u0 = gaussian_probe(s.grid(), &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
    let ev = evolve(&u0, &s, &SolverConfig::new(0.01, 20.0)).unwrap();
    let d = ev.diagnostics;
    assert!((d.final_norm - d.initial_norm).abs() / d.initial_norm < 1e-10, "{d:?}");
}

#[test]
fn cubic_with_zero_perturbation_is_plain_cubic() {
    let a = spec(None, Generator::Zero, 512, 60.0);
    let grid = a.grid().clone();
    let u0 = gaussian_probe(&grid, &ProbeSpec::new(1.0, 0.0, 0.3)).unwrap();
    let cfg = SolverConfig::new(0.01, 1.0);
    let cubic = evolve(&u0, &a, &cfg).unwrap().state;
    // cross-check against the explicit split step with V = |u|²
    let mut u = u0.clone();
    for _ in 0..100 {
        let half = free_propagate(&u, 0.005);
        let kicked: Vec<_> = half
            .values()
            .iter()
            .map(|v| v * Complex::from_polar(1.0, -0.01 * v.norm_sqr()))
            .collect();
        u = free_propagate(&nls_lab::Field::new(grid.clone(), kicked).unwrap(), 0.005);
    }
    assert!(cubic.sub(&u).unwrap().linf_norm() < 1e-12);
}
