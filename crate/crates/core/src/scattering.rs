//! Scattering maps as numerical `T → ∞` limits.
//!
//! `S_a(u₀) = lim e^{-iTΔ} u(T)` is approximated on a doubling horizon schedule
//! `T₀, 2T₀, …` until the `L²` gap between successive horizons drops below the
//! tolerance. The modified map of the perturbed cubic equation uses the
//! frequency-side profile
//!
//! ```text
//! w(t) = exp{i ∫₀ᵗ |F e^{-isΔ}u(s)|² ds/(2s+1)} · F e^{-itΔ}u(t)
//! ```
//!
//! with the phase accumulated by the trapezoid rule on the solver's time
//! lattice. Differences `S_a - S_b` are computed by a paired integration so
//! they keep full relative precision.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::{default_dt, step_plan, Nonlinearity, NonlinearitySpec, PairStepper};
use crate::spectral::{gaussian_probe, Field, Grid, ProbeSpec, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterConfig<T: Real> {
    pub dt: T,
    /// First horizon `T₀`.
    pub t0: T,
    pub t_max: T,
    /// Gap tolerance (`L²` for `S_a`, band-limited sup norm for the modified map).
    pub tol: T,
    /// Measure gaps relative to the current output norm.
    pub relative: bool,
    /// Small-data radius in `L²`.
    pub eta: T,
    /// Small-data radius in `H^{1,1}` for the modified map.
    pub eta_h11: T,
    /// Horizons must satisfy `L ≥ domain_factor · spread(T)`.
    pub domain_factor: T,
    /// Fail with `NoConvergence` instead of returning an unconverged record.
    pub strict: bool,
}

impl<T: Real> ScatterConfig<T> {
    /// Defaults for data of width `σ`: `T₀ = 8 max(1, σ²)`, `T_max = 512 T₀`, tol `1e-6`.
    pub fn for_probe(sigma: T) -> Self {
        let t0 = T::lit(8.0) * T::one().max(sigma * sigma);
        Self {
            dt: default_dt(sigma),
            t0,
            t_max: T::lit(512.0) * t0,
            tol: T::tol(1e-6),
            relative: false,
            eta: T::lit(0.1),
            eta_h11: T::lit(0.25),
            domain_factor: T::lit(40.0),
            strict: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.dt > T::zero()) {
            return bad("dt must be positive");
        }
        if !(self.t0 > T::zero()) || !(self.t_max >= self.t0) {
            return bad("horizons need 0 < t0 <= t_max");
        }
        if !(self.tol > T::zero()) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    /// Step size dividing `T₀/2`, so every horizon is hit exactly.
    fn lattice_dt(&self) -> T {
        step_plan(self.t0 / T::lit(2.0), self.dt).1
    }
}

/// Second moments of `|u|²` and `|F u|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spread<T: Real> {
    pub sigma_x: T,
    pub sigma_xi: T,
    pub mean_xi: T,
}

pub fn spread<T: Real>(u: &Field<T>) -> Spread<T> {
    let moments = |w: &mut dyn Iterator<Item = (T, T)>| {
        let (m0, m1, m2) = w.fold((T::zero(), T::zero(), T::zero()), |(a, b, c), (x, d)| {
            (a + d, b + d * x, c + d * x * x)
        });
        if m0 == T::zero() {
            return (T::zero(), T::zero());
        }
        let mean = m1 / m0;
        (mean, (m2 / m0 - mean * mean).max(T::zero()).sqrt())
    };
    let g = u.grid();
    let (_, sx) = moments(&mut g.xs().iter().zip(u.values()).map(|(&x, v)| (x, v.norm_sqr())));
    let s = u.spectrum();
    let (mk, sk) = moments(&mut g.ks().iter().zip(s.values()).map(|(&k, v)| (k, v.norm_sqr())));
    Spread { sigma_x: sx, sigma_xi: sk, mean_xi: mk }
}

/// `factor · max(σ_x, 2tσ_ξ + 2|ξ̄|t)`: for a Gaussian probe, `factor · max(σ, t/σ + 2|v|t)`.
pub fn required_length<T: Real>(u: &Field<T>, t: T, factor: T) -> T {
    let s = spread(u);
    let two = T::lit(2.0);
    factor * s.sigma_x.max(two * t * s.sigma_xi + two * s.mean_xi.abs() * t)
}

fn check_domain<T: Real>(u0: &Field<T>, horizon: T, cfg: &ScatterConfig<T>) -> Result<()> {
    let need = required_length(u0, horizon, cfg.domain_factor);
    let have = u0.grid().length();
    if need > have {
        return Err(Error::DomainTooSmall { horizon: horizon.as_f64(), required: need.as_f64(), length: have.as_f64() });
    }
    Ok(())
}

/// `(‖u‖₂² + ‖∂ₓu‖₂² + ‖xu‖₂²)^{1/2}` with a spectral derivative.
pub fn h11_norm<T: Real>(u: &Field<T>) -> T {
    let d = u.derivative().l2_norm();
    let xu = u
        .values()
        .iter()
        .zip(u.grid().xs())
        .fold(T::zero(), |s, (v, &x)| s + v.norm_sqr() * x * x)
        * u.grid().dx();
    let n = u.l2_norm();
    (n * n + d * d + xu).sqrt()
}

#[derive(Clone, Debug)]
pub struct ScatterRecord<T: Real> {
    pub probe: Option<ProbeSpec<T>>,
    pub u_plus: Field<T>,
    /// `u_plus - u₀`, computed directly.
    pub deviation: Field<T>,
    /// `(T, ‖e^{-iTΔ}u(T) - e^{-i(T/2)Δ}u(T/2)‖₂)`.
    pub horizons: Vec<(T, T)>,
    pub converged: bool,
    pub horizon: T,
}

#[derive(Clone, Debug)]
pub struct DifferenceRecord<T: Real> {
    /// `S_a(u₀) - S_b(u₀)`.
    pub difference: Field<T>,
    pub horizons: Vec<(T, T)>,
    pub converged: bool,
    pub horizon: T,
}

struct Doubling<T: Real> {
    horizons: Vec<(T, T)>,
    converged: bool,
    horizon: T,
}

/// Runs `gap_at` on `T₀/2, T₀, 2T₀, …` until the gap is below tolerance.
fn doubling<T: Real>(
    u0: &Field<T>,
    cfg: &ScatterConfig<T>,
    mut gap_at: impl FnMut(T) -> Result<T>,
) -> Result<Doubling<T>> {
    let two = T::lit(2.0);
    check_domain(u0, cfg.t0, cfg)?;
    gap_at(cfg.t0 / two)?;
    let mut horizons = Vec::new();
    let mut t = cfg.t0;
    loop {
        check_domain(u0, t, cfg)?;
        let gap = gap_at(t)?;
        horizons.push((t, gap));
        if gap < cfg.tol {
            return Ok(Doubling { horizons, converged: true, horizon: t });
        }
        if t * two > cfg.t_max * (T::one() + T::lit(1e-12)) {
            if cfg.strict {
                return Err(Error::NoConvergence { horizon: t.as_f64(), gap: gap.as_f64(), tol: cfg.tol.as_f64() });
            }
            return Ok(Doubling { horizons, converged: false, horizon: t });
        }
        t = t * two;
    }
}

fn check_small<T: Real>(u0: &Field<T>, cfg: &ScatterConfig<T>) -> Result<()> {
    let n = u0.l2_norm();
    if n >= cfg.eta {
        return Err(Error::NotSmallData { norm: n.as_f64(), eta: cfg.eta.as_f64() });
    }
    Ok(())
}

fn gap_measure<T: Real>(gap: T, current: T, relative: bool) -> T {
    if relative {
        if current > T::zero() {
            gap / current
        } else {
            gap
        }
    } else {
        gap
    }
}

/// Deviation profile `F[e^{-iTΔ}(u_target - u_ref)(T)]` at a converged horizon.
fn paired_scatter<T: Real>(
    u0: &Field<T>,
    reference: Option<&NonlinearitySpec<T>>,
    target: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<(Spectrum<T>, Doubling<T>)> {
    let mut stepper = PairStepper::new(u0, reference, target, cfg.lattice_dt())?;
    let mut previous: Option<Spectrum<T>> = None;
    let mut current = Spectrum::zeros(u0.grid().clone());
    let run = doubling(u0, cfg, |t| {
        stepper.advance_to(t);
        let dev = stepper.deviation_profile();
        let gap = match &previous {
            Some(prev) => gap_measure(dev.sub(prev)?.l2_norm(), dev.l2_norm(), cfg.relative),
            None => T::infinity(),
        };
        previous = Some(dev.clone());
        current = dev;
        Ok(gap)
    })?;
    Ok((current, run))
}

/// `S_a(u₀)` on the doubling schedule.
pub fn scattering_map<T: Real>(
    u0: &Field<T>,
    spec: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<ScatterRecord<T>> {
    cfg.validate()?;
    if !u0.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    check_small(u0, cfg)?;
    if spec.is_trivial() || u0.linf_norm() == T::zero() {
        return Ok(ScatterRecord {
            probe: None,
            u_plus: u0.clone(),
            deviation: Field::zeros(u0.grid().clone()),
            horizons: vec![(cfg.t0, T::zero())],
            converged: true,
            horizon: cfg.t0,
        });
    }
    let (dev, run) = paired_scatter(u0, None, spec, cfg)?;
    let deviation = dev.to_field();
    Ok(ScatterRecord {
        probe: None,
        u_plus: u0.add(&deviation)?,
        deviation,
        horizons: run.horizons,
        converged: run.converged,
        horizon: run.horizon,
    })
}

/// [`scattering_map`] of a Gaussian probe, with the probe recorded.
pub fn scattering_map_probe<T: Real>(
    probe: &ProbeSpec<T>,
    spec: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<ScatterRecord<T>> {
    let u0 = gaussian_probe(spec.grid(), probe)?;
    let mut rec = scattering_map(&u0, spec, cfg)?;
    rec.probe = Some(*probe);
    Ok(rec)
}

/// `S_a(u₀) - S_b(u₀)`; gaps are measured on the difference itself.
pub fn scattering_difference<T: Real>(
    u0: &Field<T>,
    spec_a: &NonlinearitySpec<T>,
    spec_b: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<DifferenceRecord<T>> {
    cfg.validate()?;
    if !u0.grid().same_as(spec_a.grid()) || !u0.grid().same_as(spec_b.grid()) {
        return Err(Error::GridMismatch);
    }
    check_small(u0, cfg)?;
    let (dev, run) = paired_scatter(u0, Some(spec_b), spec_a, cfg)?;
    Ok(DifferenceRecord {
        difference: dev.to_field(),
        horizons: run.horizons,
        converged: run.converged,
        horizon: run.horizon,
    })
}

#[derive(Clone, Debug)]
pub struct ModScatterRecord<T: Real> {
    pub probe: Option<ProbeSpec<T>>,
    pub w_plus: Spectrum<T>,
    /// `(T, Φ(T, ξ))` at each horizon.
    pub phase_history: Vec<(T, Vec<T>)>,
    /// `(T, sup_{|ξ| ≤ ξ_max/2} |w(T) - w(T/2)|)`.
    pub cauchy_gaps: Vec<(T, T)>,
    pub converged: bool,
    pub horizon: T,
}

#[derive(Clone, Debug)]
pub struct ModDifferenceRecord<T: Real> {
    pub w_a: Spectrum<T>,
    pub w_b: Spectrum<T>,
    /// `w_a - w_b`, computed directly.
    pub difference: Spectrum<T>,
    pub cauchy_gaps: Vec<(T, T)>,
    pub converged: bool,
    pub horizon: T,
}

fn require_cubic<T: Real>(spec: &NonlinearitySpec<T>) -> Result<()> {
    if spec.kind() != Nonlinearity::PerturbedCubic {
        return Err(Error::InvalidParameter("the modified map needs the perturbed cubic nonlinearity".into()));
    }
    Ok(())
}

fn check_small_h11<T: Real>(u0: &Field<T>, cfg: &ScatterConfig<T>) -> Result<()> {
    let n = h11_norm(u0);
    if n >= cfg.eta_h11 {
        return Err(Error::NotSmallData { norm: n.as_f64(), eta: cfg.eta_h11.as_f64() });
    }
    Ok(())
}

/// `e^{iθ}`.
fn unimodular<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `e^{iθ} - 1`, accurate for small `θ`.
fn unimodular_m1<T: Real>(theta: T) -> Complex<T> {
    let s = (theta / T::lit(2.0)).sin();
    Complex::new(-T::lit(2.0) * s * s, theta.sin())
}

fn band_gap<T: Real>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<T> {
    let k_cut = a.grid().k_max() / T::lit(2.0);
    Ok(a.sub(b)?.linf_norm_band(k_cut))
}

fn band_norm<T: Real>(a: &Spectrum<T>) -> T {
    a.linf_norm_band(a.grid().k_max() / T::lit(2.0))
}

/// `S̃_a(u₀) = lim w(t)` for the perturbed cubic equation.
pub fn modified_scattering_map<T: Real>(
    u0: &Field<T>,
    spec: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<ModScatterRecord<T>> {
    cfg.validate()?;
    require_cubic(spec)?;
    if !u0.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    check_small_h11(u0, cfg)?;
    let grid = u0.grid().clone();
    let mut stepper = PairStepper::new(u0, None, spec, cfg.lattice_dt())?.track_phase();
    let mut previous: Option<Spectrum<T>> = None;
    let mut phase_history = Vec::new();
    let mut current = Spectrum::zeros(grid.clone());
    let run = doubling(u0, cfg, |t| {
        stepper.advance_to(t);
        let p = stepper.reference_profile();
        let d = stepper.deviation_profile();
        let (phi_ref, dphi) = stepper.phases().expect("phase tracking is on");
        let phi: Vec<T> = phi_ref.iter().zip(dphi).map(|(a, b)| *a + *b).collect();
        let values = p
            .values()
            .iter()
            .zip(d.values())
            .zip(&phi)
            .map(|((a, b), th)| (a + b) * unimodular(*th))
            .collect();
        let w = Spectrum::new(grid.clone(), values)?;
        let gap = match &previous {
            Some(prev) => gap_measure(band_gap(&w, prev)?, band_norm(&w), cfg.relative),
            None => T::infinity(),
        };
        if previous.is_some() {
            phase_history.push((t, phi));
        }
        previous = Some(w.clone());
        current = w;
        Ok(gap)
    })?;
    Ok(ModScatterRecord {
        probe: None,
        w_plus: current,
        phase_history,
        cauchy_gaps: run.horizons,
        converged: run.converged,
        horizon: run.horizon,
    })
}

/// `S̃_a(u₀)` and `S̃_b(u₀)` with their difference, from one paired run.
pub fn modified_difference<T: Real>(
    u0: &Field<T>,
    spec_a: &NonlinearitySpec<T>,
    spec_b: &NonlinearitySpec<T>,
    cfg: &ScatterConfig<T>,
) -> Result<ModDifferenceRecord<T>> {
    cfg.validate()?;
    require_cubic(spec_a)?;
    require_cubic(spec_b)?;
    if !u0.grid().same_as(spec_a.grid()) || !u0.grid().same_as(spec_b.grid()) {
        return Err(Error::GridMismatch);
    }
    check_small_h11(u0, cfg)?;
    let grid = u0.grid().clone();
    let mut stepper = PairStepper::new(u0, Some(spec_b), spec_a, cfg.lattice_dt())?.track_phase();
    let mut previous: Option<Spectrum<T>> = None;
    let mut current: Option<(Spectrum<T>, Spectrum<T>)> = None;
    let run = doubling(u0, cfg, |t| {
        stepper.advance_to(t);
        let (w_b, diff) = modified_pair_at(&stepper, &grid)?;
        let gap = match &previous {
            Some(prev) => gap_measure(band_gap(&diff, prev)?, band_norm(&diff), cfg.relative),
            None => T::infinity(),
        };
        previous = Some(diff.clone());
        current = Some((w_b, diff));
        Ok(gap)
    })?;
    let (w_b, difference) = current.expect("at least one horizon");
    let w_a_values = w_b.values().iter().zip(difference.values()).map(|(a, b)| a + b).collect();
    Ok(ModDifferenceRecord {
        w_a: Spectrum::new(grid, w_a_values)?,
        w_b,
        difference,
        cauchy_gaps: run.horizons,
        converged: run.converged,
        horizon: run.horizon,
    })
}

/// `(w_b, w_a - w_b)` at the stepper's current time.
pub(crate) fn modified_pair_at<T: Real>(
    stepper: &PairStepper<'_, T>,
    grid: &std::sync::Arc<Grid<T>>,
) -> Result<(Spectrum<T>, Spectrum<T>)> {
    let p = stepper.reference_profile();
    let d = stepper.deviation_profile();
    let (phi_b, dphi) = stepper.phases().ok_or_else(|| Error::InvalidParameter("phase tracking is off".into()))?;
    let n = grid.n();
    let mut w_b = Vec::with_capacity(n);
    let mut diff = Vec::with_capacity(n);
    for k in 0..n {
        let rot = unimodular(phi_b[k]);
        let pb = p.values()[k];
        let dk = d.values()[k];
        w_b.push(pb * rot);
        // e^{iΦ_b} [(e^{iΔΦ} - 1)(P_b + D) + D]
        diff.push(rot * (unimodular_m1(dphi[k]) * (pb + dk) + dk));
    }
    Ok((Spectrum::new(grid.clone(), w_b)?, Spectrum::new(grid.clone(), diff)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// `‖S_a φ - S_b φ‖₂ / ‖φ‖₂`.
    L2,
    /// `‖S̃_a φ - S̃_b φ‖_∞ / ‖φ‖_{H^{1,1}}`, sup over `|ξ| ≤ ξ_max/2`.
    ModifiedLinf,
}

#[derive(Clone, Debug)]
pub struct DistanceReport<T: Real> {
    /// Max of `ratios`: a lower bound on the operator distance.
    pub value: T,
    pub ratios: Vec<T>,
    pub all_converged: bool,
}

/// Sampled lower bound on `‖S_a - S_b‖` (or its modified analogue) over `probes`.
pub fn operator_distance<T: Real>(
    spec_a: &NonlinearitySpec<T>,
    spec_b: &NonlinearitySpec<T>,
    probes: &[Field<T>],
    kind: NormKind,
    cfg: &ScatterConfig<T>,
) -> Result<DistanceReport<T>> {
    if probes.is_empty() {
        return Err(Error::EmptyProbeSet);
    }
    let results: Vec<Result<(T, bool)>> = probes
        .par_iter()
        .map(|phi| {
            let norm = match kind {
                NormKind::L2 => phi.l2_norm(),
                NormKind::ModifiedLinf => h11_norm(phi),
            };
            if norm == T::zero() {
                return Err(Error::InvalidParameter("probes must be nonzero".into()));
            }
            match kind {
                NormKind::L2 => {
                    let rec = scattering_difference(phi, spec_a, spec_b, cfg)?;
                    Ok((rec.difference.l2_norm() / norm, rec.converged))
                }
                NormKind::ModifiedLinf => {
                    let rec = modified_difference(phi, spec_a, spec_b, cfg)?;
                    Ok((band_norm(&rec.difference) / norm, rec.converged))
                }
            }
        })
        .collect();
    let mut ratios = Vec::with_capacity(results.len());
    let mut all_converged = true;
    for r in results {
        let (ratio, conv) = r?;
        ratios.push(ratio);
        all_converged &= conv;
    }
    let value = ratios.iter().fold(T::zero(), |m, r| m.max(*r));
    Ok(DistanceReport { value, ratios, all_converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{Coefficient, Generator};
    use crate::solver::{evolve, SolverConfig};
    use crate::spectral::{free_propagate, make_grid};
    use std::sync::Arc;

    fn power_spec(grid: &Arc<Grid<f64>>, p: f64, gen: Generator<f64>) -> NonlinearitySpec<f64> {
        NonlinearitySpec::power(p, Arc::new(Coefficient::new(gen, grid.clone()).unwrap())).unwrap()
    }

    fn quick_cfg() -> ScatterConfig<f64> {
        ScatterConfig { t0: 1.0, t_max: 64.0, dt: 0.01, tol: 1e-9, domain_factor: 10.0, ..ScatterConfig::for_probe(1.0) }
    }

    #[test]
    fn zero_coefficient_is_identity() {
        let g = make_grid(256, 200.0).unwrap();
        let spec = power_spec(&g, 3.0, Generator::Zero);
        let probe = ProbeSpec::new(1.0, 0.0, 0.03);
        let rec = scattering_map_probe(&probe, &spec, &ScatterConfig::for_probe(1.0)).unwrap();
        let u0 = gaussian_probe(&g, &probe).unwrap();
        assert_eq!(rec.u_plus.values(), u0.values());
        assert_eq!(rec.horizons.len(), 1);
        assert!(rec.converged);
    }

    #[test]
    fn zero_data_maps_to_zero() {
        let g = make_grid(256, 200.0).unwrap();
        let spec = power_spec(&g, 3.0, Generator::gaussian(1.0, 1.0, 0.0));
        let rec = scattering_map(&Field::zeros(g), &spec, &ScatterConfig::for_probe(1.0)).unwrap();
        assert_eq!(rec.u_plus.linf_norm(), 0.0);
    }

    #[test]
    fn large_data_is_rejected() {
        let g = make_grid(256, 200.0).unwrap();
        let spec = power_spec(&g, 3.0, Generator::gaussian(1.0, 1.0, 0.0));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 1.0)).unwrap();
        assert!(matches!(scattering_map(&u0, &spec, &ScatterConfig::for_probe(1.0)), Err(Error::NotSmallData { .. })));
    }

    #[test]
    fn map_matches_direct_evolution_at_horizon() {
        let g = make_grid(1024, 160.0).unwrap();
        let spec = power_spec(&g, 2.0, Generator::gaussian(1.0, 1.0, 0.0));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.2, 0.05)).unwrap();
        let cfg = ScatterConfig { tol: 1.0, ..quick_cfg() };
        let rec = scattering_map(&u0, &spec, &cfg).unwrap();
        assert_eq!(rec.horizon, 1.0);
        let direct = evolve(&u0, &spec, &SolverConfig::new(0.01, 1.0)).unwrap().state;
        let back = free_propagate(&direct, -1.0);
        assert!(back.sub(&rec.u_plus).unwrap().linf_norm() < 1e-13);
        assert!((rec.u_plus.l2_norm() - u0.l2_norm()).abs() < 1e-10 * u0.l2_norm());
    }

    #[test]
    fn gaps_decrease_and_converge() {
        let g = make_grid(4096, 1280.0).unwrap();
        let spec = power_spec(&g, 3.0, Generator::gaussian(1.0, 1.0, 0.0));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let rec = scattering_map(&u0, &spec, &ScatterConfig { tol: 1e-6, ..quick_cfg() }).unwrap();
        assert!(rec.converged);
        assert!(rec.horizons.len() >= 3);
        // early gaps grow while the probe is still concentrated
        for w in rec.horizons[2..].windows(2) {
            assert!(w[1].1 < w[0].1, "{:?}", rec.horizons);
        }
    }

    #[test]
    fn domain_limit_is_enforced() {
        let g = make_grid(256, 100.0).unwrap();
        let spec = power_spec(&g, 3.0, Generator::gaussian(1.0, 1.0, 0.0));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let r = scattering_map(&u0, &spec, &ScatterConfig::for_probe(1.0));
        assert!(matches!(r, Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn non_strict_returns_unconverged_record() {
        let g = make_grid(1024, 640.0).unwrap();
        let spec = power_spec(&g, 2.0, Generator::gaussian(1.0, 1.0, 0.0));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let cfg = ScatterConfig { t_max: 4.0, tol: 1e-14, ..quick_cfg() };
        assert!(matches!(scattering_map(&u0, &spec, &cfg), Err(Error::NoConvergence { .. })));
        let rec = scattering_map(&u0, &spec, &ScatterConfig { strict: false, ..cfg }).unwrap();
        assert!(!rec.converged);
        assert_eq!(rec.horizons.len(), 3);
    }

    #[test]
    fn difference_matches_separate_maps() {
        let g = make_grid(2048, 640.0).unwrap();
        let a = power_spec(&g, 2.5, Generator::gaussian(1.0, 1.0, 0.0));
        let b = power_spec(&g, 2.5, Generator::gaussian(0.8, 1.2, 0.5));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.06)).unwrap();
        let cfg = ScatterConfig { tol: 1.0, ..quick_cfg() };
        let d = scattering_difference(&u0, &a, &b, &cfg).unwrap();
        let sa = scattering_map(&u0, &a, &cfg).unwrap();
        let sb = scattering_map(&u0, &b, &cfg).unwrap();
        let sep = sa.u_plus.sub(&sb.u_plus).unwrap();
        assert!(d.difference.sub(&sep).unwrap().linf_norm() < 1e-13);
        let same = scattering_difference(&u0, &a, &a, &cfg).unwrap();
        assert_eq!(same.difference.linf_norm(), 0.0);
    }

    #[test]
    fn h11_of_unit_gaussian() {
        let g = make_grid(1024, 200.0).unwrap();
        let u = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 1.0)).unwrap();
        let exact = (2.25 * (2.0 * std::f64::consts::PI).sqrt()).sqrt();
        assert!((h11_norm(&u) - exact).abs() < 1e-8);
        assert_eq!(h11_norm(&Field::zeros(g.clone())), 0.0);
        let narrow = gaussian_probe(&g, &ProbeSpec::new(0.25, 0.0, 1.0)).unwrap();
        let s: f64 = 0.25;
        let closed = ((2.0 * std::f64::consts::PI).sqrt() * s * (1.0 + 0.25 / (s * s) + s * s)).sqrt();
        assert!((h11_norm(&narrow) - closed).abs() < 1e-8);
    }

    #[test]
    fn spread_of_modulated_probe() {
        let g = make_grid(2048, 200.0).unwrap();
        let u = gaussian_probe(&g, &ProbeSpec::new(0.5, 1.0, 1.0).with_modulation(1.5)).unwrap();
        let s: Spread<f64> = spread(&u);
        assert!((s.sigma_x - 0.5).abs() < 1e-10);
        assert!((s.sigma_xi - 1.0).abs() < 1e-10);
        assert!((s.mean_xi - 1.5).abs() < 1e-10);
        let need: f64 = required_length(&u, 4.0, 40.0);
        let probe = ProbeSpec::<f64>::new(0.5, 1.0, 1.0).with_modulation(1.5);
        assert!((need - probe.required_length(4.0)).abs() < 1e-8);
    }

    fn cubic_spec(grid: &Arc<Grid<f64>>, gen: Generator<f64>) -> NonlinearitySpec<f64> {
        NonlinearitySpec::perturbed_cubic(Arc::new(Coefficient::new(gen, grid.clone()).unwrap()))
    }

    #[test]
    fn modified_map_basic_properties() {
        let g = make_grid(2048, 640.0).unwrap();
        let spec = cubic_spec(&g, Generator::gaussian(0.5, 1.0, 0.0));
        let cfg = ScatterConfig { tol: 1e-4, strict: false, t_max: 8.0, ..quick_cfg() };
        let zero = modified_scattering_map(&Field::zeros(g.clone()), &spec, &cfg).unwrap();
        assert_eq!(zero.w_plus.linf_norm(), 0.0);
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let rec = modified_scattering_map(&u0, &spec, &cfg).unwrap();
        for w in rec.phase_history.windows(2) {
            for (a, b) in w[0].1.iter().zip(&w[1].1) {
                assert!(b >= a);
            }
        }
        // |w| = |F e^{-itΔ} u(t)|
        let direct = evolve(&u0, &spec, &SolverConfig::new(cfg.lattice_dt(), rec.horizon)).unwrap().state;
        let prof = free_propagate(&direct, -rec.horizon).spectrum();
        for (w, f) in rec.w_plus.values().iter().zip(prof.values()) {
            assert!((w.norm() - f.norm()).abs() < 1e-12);
        }
        let power = power_spec(&g, 2.0, Generator::gaussian(0.5, 1.0, 0.0));
        assert!(modified_scattering_map(&u0, &power, &cfg).is_err());
    }

    #[test]
    fn modified_difference_is_antisymmetric() {
        let g = make_grid(2048, 640.0).unwrap();
        let a = cubic_spec(&g, Generator::gaussian(0.5, 1.0, 0.0));
        let b = cubic_spec(&g, Generator::gaussian(0.3, 0.8, 0.5));
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let cfg = ScatterConfig { tol: 1.0, ..quick_cfg() };
        let ab = modified_difference(&u0, &a, &b, &cfg).unwrap();
        let ba = modified_difference(&u0, &b, &a, &cfg).unwrap();
        let scale = band_norm(&ab.difference);
        assert!(scale > 0.0);
        for (x, y) in ab.difference.values().iter().zip(ba.difference.values()) {
            assert!((x + y).norm() < 1e-9 * scale);
        }
        let ma = modified_scattering_map(&u0, &a, &cfg).unwrap();
        assert!(band_gap(&ab.w_a, &ma.w_plus).unwrap() < 1e-12);
        let same = modified_difference(&u0, &a, &a, &cfg).unwrap();
        assert_eq!(same.difference.linf_norm(), 0.0);
    }

    #[test]
    fn operator_distance_properties() {
        let g = make_grid(1024, 640.0).unwrap();
        let a = power_spec(&g, 3.0, Generator::gaussian(1.0, 1.0, 0.0));
        let b = power_spec(&g, 3.0, Generator::gaussian(1.1, 1.0, 0.0));
        let probes: Vec<Field<f64>> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&x0| gaussian_probe(&g, &ProbeSpec::new(1.0, x0, 0.05)).unwrap())
            .collect();
        let cfg = ScatterConfig { tol: 0.1, relative: true, t_max: 16.0, ..quick_cfg() };
        assert!(matches!(operator_distance(&a, &b, &[], NormKind::L2, &cfg), Err(Error::EmptyProbeSet)));
        let same = operator_distance(&a, &a, &probes, NormKind::L2, &cfg).unwrap();
        assert_eq!(same.value, 0.0);
        let ab = operator_distance(&a, &b, &probes, NormKind::L2, &cfg).unwrap();
        let ba = operator_distance(&b, &a, &probes, NormKind::L2, &cfg).unwrap();
        assert!(ab.value > 0.0);
        assert!((ab.value - ba.value).abs() < 1e-2 * ab.value);
        let sub = operator_distance(&a, &b, &probes[..1], NormKind::L2, &cfg).unwrap();
        assert!(ab.value >= sub.value);
    }
}
