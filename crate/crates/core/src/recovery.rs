//! Pointwise reconstruction of the coefficient from scattering data.
//!
//! For `p ∈ (2, 4]`
//!
//! ```text
//! Re i⟨S_a(εφ) - S_b(εφ), εφ⟩ ≈ ε^{p+2} σ³ λ(p) [a(x₀) - b(x₀)],
//! ```
//!
//! at `p = 2` the normalization becomes `√π ε⁴ σ³ |log σ|`, and for the
//! perturbed cubic equation the modified maps are paired against `φ̂` with a
//! computable cubic correction.
//!
//! Scattering data enter through [`ScatteringAccess`] (pairings of the
//! unmodified maps) and [`ModifiedAccess`] (pairings of the modified maps).
//! [`SolverMap`] and [`ModifiedSolverPair`] evaluate them with the paired
//! split-step integrator; [`BornMap`] is the first-order (Born) model.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::coefficient::{Coefficient, Generator};
use crate::error::{Error, Result};
use crate::kernels::{born_functional, lambda_p, log_coefficient};
use crate::scalar::Real;
use crate::scattering::modified_pair_at;
use crate::solver::{step_plan, NonlinearitySpec, PairStepper};
use crate::spectral::{gaussian_probe, make_grid, Grid, ProbeSpec};

/// Discretization and horizon rules for solver-based pairings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingConfig<T: Real> {
    /// Horizon `T = horizon_factor · σ · R`, `R` the distance from `x₀` to the far end of `a`.
    pub horizon_factor: T,
    /// Fixed horizon, overriding `horizon_factor`.
    pub horizon: Option<T>,
    /// Grid points per `σ`.
    pub points_per_sigma: T,
    /// `dt = dt_factor · σ²`.
    pub dt_factor: T,
    /// Periodic images must stay `alias_factor · T/σ` away from the coefficient.
    pub alias_factor: T,
    /// Remove the `T^{-p/2}` tail by combining the pairings at `T/2` and `T`.
    pub extrapolate: bool,
    /// Richardson combination of `dt` and `dt/2`.
    pub richardson: bool,
    /// Small-data radius in `L²`.
    pub eta: T,
    pub max_points: usize,
}

impl<T: Real> Default for PairingConfig<T> {
    fn default() -> Self {
        Self {
            horizon_factor: T::lit(4.0),
            horizon: None,
            points_per_sigma: T::lit(3.0),
            dt_factor: T::lit(0.1),
            alias_factor: T::lit(8.0),
            extrapolate: true,
            richardson: false,
            eta: T::lit(0.1),
            max_points: 1 << 22,
        }
    }
}

/// Grid, step and horizon chosen for one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPlan<T: Real> {
    pub n: usize,
    pub length: T,
    pub dt: T,
    pub horizon: T,
}

/// Interval where `|g| ≥ 1e-13 max|g|`, or `None` for the zero generator.
pub fn effective_extent<T: Real>(gen: &Generator<T>) -> Option<(T, T)> {
    let (lo, hi) = gen.support()?;
    let m = 4096;
    let h = (hi - lo) / T::from_usize_lossy(m);
    let vals: Vec<T> = (0..=m).map(|i| gen.eval(lo + h * T::from_usize_lossy(i)).abs()).collect();
    let peak = vals.iter().fold(T::zero(), |a, v| a.max(*v));
    if peak == T::zero() {
        return None;
    }
    let cut = peak * T::lit(1e-13);
    let first = vals.iter().position(|v| *v >= cut)?;
    let last = vals.iter().rposition(|v| *v >= cut)?;
    let a = lo + h * T::from_usize_lossy(first.saturating_sub(1));
    let b = lo + h * T::from_usize_lossy((last + 1).min(m));
    Some((a, b))
}

fn hull<T: Real>(a: Option<(T, T)>, b: Option<(T, T)>) -> Option<(T, T)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((a0, a1)), Some((b0, b1))) => Some((a0.min(b0), a1.max(b1))),
    }
}

/// Grid for a probe of width `σ` at `x₀` interacting with a coefficient on `extent`.
pub fn plan_grid<T: Real>(
    sigma: T,
    x0: T,
    extent: Option<(T, T)>,
    length_scale: T,
    cfg: &PairingConfig<T>,
) -> Result<GridPlan<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let (lo, hi) = extent.unwrap_or((x0, x0));
    let reach = (lo - x0).abs().max((hi - x0).abs()).max(sigma);
    let horizon = cfg.horizon.unwrap_or_else(|| cfg.horizon_factor * sigma * reach.max(sigma));
    let far = lo.abs().max(hi.abs()).max(x0.abs());
    let length = (reach + cfg.alias_factor * horizon / sigma)
        .max(T::lit(2.5) * far)
        .max(T::lit(40.0) * sigma);
    let mut dx = sigma / cfg.points_per_sigma;
    if length_scale.is_finite() {
        dx = dx.min(length_scale / T::lit(4.0));
    }
    let n = (length / dx).ceil().to_usize().unwrap_or(usize::MAX).max(64).next_power_of_two();
    if n > cfg.max_points {
        return Err(Error::InvalidParameter(format!("grid of {n} points exceeds the limit of {}", cfg.max_points)));
    }
    Ok(GridPlan { n, length, dt: cfg.dt_factor * sigma * sigma, horizon })
}

/// `i⟨S_a(φ) - S_b(φ), φ⟩` with its discretization record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingEval<T: Real> {
    /// Tail-corrected value (equals `raw` when extrapolation is off).
    pub value: Complex<T>,
    /// Value at the horizon.
    pub raw: Complex<T>,
    pub horizon: T,
    pub n: usize,
    pub dt: T,
}

/// Access to the unmodified maps through the pairing `i⟨S_a(φ) - S_b(φ), φ⟩`.
pub trait ScatteringAccess<T: Real>: Sync {
    /// Power `p` of the nonlinearity.
    fn power(&self) -> T;
    /// The pairing for a probe with amplitude included.
    fn pairing(&self, probe: &ProbeSpec<T>) -> Result<PairingEval<T>>;
}

/// Solver-backed `S_a` (and optionally `S_b`) for `a|u|^p u`.
#[derive(Clone, Debug)]
pub struct SolverMap<T: Real> {
    pub p: T,
    pub a: Generator<T>,
    /// `None` pairs against the identity (`b = 0`).
    pub b: Option<Generator<T>>,
    pub config: PairingConfig<T>,
}

impl<T: Real> SolverMap<T> {
    pub fn new(p: T, a: Generator<T>) -> Self {
        Self { p, a, b: None, config: PairingConfig::default() }
    }

    pub fn difference(p: T, a: Generator<T>, b: Generator<T>) -> Self {
        Self { p, a, b: Some(b), config: PairingConfig::default() }
    }

    pub fn with_config(mut self, config: PairingConfig<T>) -> Self {
        self.config = config;
        self
    }

    fn extent(&self) -> (Option<(T, T)>, T) {
        let ext = hull(effective_extent(&self.a), self.b.as_ref().and_then(effective_extent));
        let ell = self.a.length_scale().min(self.b.as_ref().map_or(T::infinity(), |b| b.length_scale()));
        (ext, ell)
    }

    pub fn plan(&self, probe: &ProbeSpec<T>) -> Result<GridPlan<T>> {
        let (ext, ell) = self.extent();
        plan_grid(probe.sigma, probe.x0, ext, ell, &self.config)
    }
}

/// `P(T₂) + (P(T₂) - P(T₁)) / ((T₂/T₁)^q - 1)` for a tail `∝ T^{-q}`.
fn tail_extrapolate<T: Real>(p1: Complex<T>, p2: Complex<T>, t1: T, t2: T, q: T) -> Complex<T> {
    let r = (t2 / t1).powf(q) - T::one();
    p2 + (p2 - p1) / r
}

fn richardson<T: Real>(coarse: Complex<T>, fine: Complex<T>) -> Complex<T> {
    (fine * T::lit(4.0) - coarse) / T::lit(3.0)
}

fn check_small<T: Real>(probe: &ProbeSpec<T>, eta: T) -> Result<()> {
    let n = probe.l2_norm_exact();
    if n >= eta {
        return Err(Error::NotSmallData { norm: n.as_f64(), eta: eta.as_f64() });
    }
    Ok(())
}

impl<T: Real> ScatteringAccess<T> for SolverMap<T> {
    fn power(&self) -> T {
        self.p
    }

    fn pairing(&self, probe: &ProbeSpec<T>) -> Result<PairingEval<T>> {
        probe.validate()?;
        check_small(probe, self.config.eta)?;
        let plan = self.plan(probe)?;
        let grid = make_grid(plan.n, plan.length)?;
        let spec_a = NonlinearitySpec::power(self.p, Arc::new(Coefficient::new(self.a.clone(), grid.clone())?))?;
        let spec_b = match &self.b {
            Some(b) => Some(NonlinearitySpec::power(self.p, Arc::new(Coefficient::new(b.clone(), grid.clone())?))?),
            None => None,
        };
        let u0 = gaussian_probe(&grid, probe)?;
        let phi = u0.spectrum();
        let i = Complex::new(T::zero(), T::one());
        let t2 = plan.horizon;
        let t1 = t2 / T::lit(2.0);
        let run = |dt: T| -> Result<(Complex<T>, Complex<T>)> {
            let mut st = PairStepper::new(&u0, spec_b.as_ref(), &spec_a, dt)?;
            st.advance_to(t1);
            let p1 = i * st.deviation_profile().inner(&phi)?;
            st.advance_to(t2);
            let p2 = i * st.deviation_profile().inner(&phi)?;
            Ok((p1, p2))
        };
        let dt = step_plan(t1, plan.dt).1;
        let (mut p1, mut p2) = run(dt)?;
        if self.config.richardson {
            let (f1, f2) = run(dt / T::lit(2.0))?;
            p1 = richardson(p1, f1);
            p2 = richardson(p2, f2);
        }
        let value = if self.config.extrapolate {
            tail_extrapolate(p1, p2, t1, t2, self.p / T::lit(2.0))
        } else {
            p2
        };
        Ok(PairingEval { value, raw: p2, horizon: t2, n: plan.n, dt })
    }
}

/// First-order model: `i⟨S_a(εφ) - S_b(εφ), εφ⟩ ≈ ε^{p+2} ∫₀^∞∫ (a - b)|e^{itΔ}φ|^{p+2}`.
#[derive(Clone, Debug)]
pub struct BornMap<T: Real> {
    pub p: T,
    /// `a - b`.
    pub coeff: Coefficient<T>,
}

impl<T: Real> BornMap<T> {
    /// Samples `a` on a grid just large enough to hold it.
    pub fn new(p: T, a: Generator<T>) -> Result<Self> {
        let (lo, hi) = effective_extent(&a).unwrap_or((-T::one(), T::one()));
        let length = T::lit(2.5) * lo.abs().max(hi.abs()).max(T::one());
        let grid = make_grid(256, length)?;
        Ok(Self { p, coeff: Coefficient::new(a, grid)? })
    }
}

impl<T: Real> ScatteringAccess<T> for BornMap<T> {
    fn power(&self) -> T {
        self.p
    }

    fn pairing(&self, probe: &ProbeSpec<T>) -> Result<PairingEval<T>> {
        let eps = probe.amplitude;
        let b = born_functional(&self.coeff, &probe.unit(), self.p)?;
        let v = Complex::new(eps.powf(self.p + T::lit(2.0)) * b, T::zero());
        Ok(PairingEval { value: v, raw: v, horizon: T::infinity(), n: 0, dt: T::zero() })
    }
}

/// `⟨S̃_a(εφ) - S̃_b(εφ), φ̂⟩` and `⟨|S̃_a|²S̃_a - |S̃_b|²S̃_b, φ̂⟩` with `φ̂` of unit amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModifiedPairing<T: Real> {
    pub difference: Complex<T>,
    pub cubic: Complex<T>,
    pub horizon: T,
    pub n: usize,
    pub dt: T,
}

/// Access to the modified maps of the perturbed cubic equation.
pub trait ModifiedAccess<T: Real>: Sync {
    fn modified_pairing(&self, probe: &ProbeSpec<T>) -> Result<ModifiedPairing<T>>;
}

/// Solver-backed pair `(S̃_a, S̃_b)` for `[1 + a]|u|²u`.
#[derive(Clone, Debug)]
pub struct ModifiedSolverPair<T: Real> {
    pub a: Generator<T>,
    pub b: Generator<T>,
    pub config: PairingConfig<T>,
    /// Small-data radius in `H^{1,1}`.
    pub eta_h11: T,
}

impl<T: Real> ModifiedSolverPair<T> {
    pub fn new(a: Generator<T>, b: Generator<T>) -> Self {
        Self { a, b, config: PairingConfig::default(), eta_h11: T::lit(0.25) }
    }

    pub fn with_config(mut self, config: PairingConfig<T>) -> Self {
        self.config = config;
        self
    }
}

/// `|B + D|²(B + D) - |B|²B` without cancellation.
fn cubic_difference<T: Real>(b: Complex<T>, d: Complex<T>) -> Complex<T> {
    let cross = T::lit(2.0) * (b.conj() * d).re + d.norm_sqr();
    d * b.norm_sqr() + (b + d) * cross
}

impl<T: Real> ModifiedAccess<T> for ModifiedSolverPair<T> {
    fn modified_pairing(&self, probe: &ProbeSpec<T>) -> Result<ModifiedPairing<T>> {
        probe.validate()?;
        let ext = hull(effective_extent(&self.a), effective_extent(&self.b));
        let ell = self.a.length_scale().min(self.b.length_scale());
        let plan = plan_grid(probe.sigma, probe.x0, ext, ell, &self.config)?;
        let grid: Arc<Grid<T>> = make_grid(plan.n, plan.length)?;
        let spec_a = NonlinearitySpec::perturbed_cubic(Arc::new(Coefficient::new(self.a.clone(), grid.clone())?));
        let spec_b = NonlinearitySpec::perturbed_cubic(Arc::new(Coefficient::new(self.b.clone(), grid.clone())?));
        let u0 = gaussian_probe(&grid, probe)?;
        let h = crate::scattering::h11_norm(&u0);
        if h >= self.eta_h11 {
            return Err(Error::NotSmallData { norm: h.as_f64(), eta: self.eta_h11.as_f64() });
        }
        let phi = gaussian_probe(&grid, &probe.unit())?.spectrum();
        let t2 = plan.horizon;
        let t1 = t2 / T::lit(2.0);
        let run = |dt: T| -> Result<[(Complex<T>, Complex<T>); 2]> {
            let mut st = PairStepper::new(&u0, Some(&spec_b), &spec_a, dt)?.track_phase();
            let mut out = [(Complex::default(), Complex::default()); 2];
            for (slot, t) in out.iter_mut().zip([t1, t2]) {
                st.advance_to(t);
                let (w_b, diff) = modified_pair_at(&st, &grid)?;
                let cubic_vals = w_b.values().iter().zip(diff.values()).map(|(b, d)| cubic_difference(*b, *d)).collect();
                let cubic = crate::spectral::Spectrum::new(grid.clone(), cubic_vals)?;
                *slot = (diff.inner(&phi)?, cubic.inner(&phi)?);
            }
            Ok(out)
        };
        let dt = step_plan(t1, plan.dt).1;
        let [mut a1, mut a2] = run(dt)?;
        if self.config.richardson {
            let [f1, f2] = run(dt / T::lit(2.0))?;
            a1 = (richardson(a1.0, f1.0), richardson(a1.1, f1.1));
            a2 = (richardson(a2.0, f2.0), richardson(a2.1, f2.1));
        }
        let (difference, cubic) = if self.config.extrapolate {
            (tail_extrapolate(a1.0, a2.0, t1, t2, T::one()), tail_extrapolate(a1.1, a2.1, t1, t2, T::one()))
        } else {
            a2
        };
        Ok(ModifiedPairing { difference, cubic, horizon: t2, n: plan.n, dt })
    }
}

/// Terms of the small-amplitude expansion of `⟨S̃_a(εφ), φ̂⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureTerms<T: Real> {
    /// `⟨S̃_a(εφ), φ̂⟩`.
    pub pairing: Complex<T>,
    /// `ε ⟨φ̂, φ̂⟩`.
    pub linear: Complex<T>,
    /// `(1/2i) log(1 + 1/(2ε)) ⟨|S̃_a|²S̃_a, φ̂⟩`.
    pub cubic: Complex<T>,
    /// `ε³ Q_ε[φ] / (2π)`.
    pub quartic: Complex<T>,
    /// `-iε³ ∫₀^∞∫ a |e^{itΔ}φ|⁴`.
    pub born: Complex<T>,
    /// `pairing - linear - cubic - quartic - born`.
    pub residual: Complex<T>,
    pub horizon: T,
}

/// Evaluates every computable term of the expansion of the modified map and
/// the residual left after subtracting them.
///
/// `Q_ε` is defined through physical-space integrals; against the unitary
/// transform used here it enters with the factor `(2π)^{-1}`.
pub fn modified_structure<T: Real>(
    a: &Generator<T>,
    probe: &ProbeSpec<T>,
    cfg: &PairingConfig<T>,
) -> Result<StructureTerms<T>> {
    probe.validate()?;
    let eps = probe.amplitude;
    let unit = probe.unit();
    let plan = plan_grid(probe.sigma, probe.x0, effective_extent(a), a.length_scale(), cfg)?;
    let grid: Arc<Grid<T>> = make_grid(plan.n, plan.length)?;
    let coeff = Coefficient::new(a.clone(), grid.clone())?;
    let spec = NonlinearitySpec::perturbed_cubic(Arc::new(coeff.clone()));
    let u0 = gaussian_probe(&grid, probe)?;
    let phi = gaussian_probe(&grid, &unit)?.spectrum();
    let t2 = plan.horizon;
    let t1 = t2 / T::lit(2.0);
    let dt = step_plan(t1, plan.dt).1;
    let mut st = PairStepper::new(&u0, None, &spec, dt)?.track_phase();
    let mut at = [(Complex::default(), Complex::default()); 2];
    for (slot, t) in at.iter_mut().zip([t1, t2]) {
        st.advance_to(t);
        let p = st.reference_profile();
        let d = st.deviation_profile();
        let (pr, dp) = st.phases().expect("phase tracking is on");
        let w: Vec<Complex<T>> = p
            .values()
            .iter()
            .zip(d.values())
            .zip(pr.iter().zip(dp))
            .map(|((x, y), (f, g))| (x + y) * Complex::new((*f + *g).cos(), (*f + *g).sin()))
            .collect();
        let cube: Vec<Complex<T>> = w.iter().map(|v| v * v.norm_sqr()).collect();
        let w = crate::spectral::Spectrum::new(grid.clone(), w)?;
        let cube = crate::spectral::Spectrum::new(grid.clone(), cube)?;
        *slot = (w.inner(&phi)?, cube.inner(&phi)?);
    }
    let (pairing, cube) = if cfg.extrapolate {
        (tail_extrapolate(at[0].0, at[1].0, t1, t2, T::one()), tail_extrapolate(at[0].1, at[1].1, t1, t2, T::one()))
    } else {
        at[1]
    };
    let two = T::lit(2.0);
    let eps3 = eps.powi(3);
    let linear = phi.inner(&phi)? * eps;
    let cubic = Complex::new(T::zero(), -T::one() / two) * (T::one() / (two * eps)).ln_1p() * cube;
    let q = crate::kernels::q_epsilon(&unit, eps)?.value;
    let quartic = q * eps3 / T::TAU();
    let b = if a.is_zero() { T::zero() } else { born_functional(&coeff, &unit, two)? };
    let born = Complex::new(T::zero(), -eps3 * b);
    let residual = pairing - linear - cubic - quartic - born;
    Ok(StructureTerms { pairing, linear, cubic, quartic, born, residual, horizon: t2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryMode {
    Holder,
    LogEndpoint,
    ModifiedDifference,
}

/// One reconstructed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate<T: Real> {
    pub x0: T,
    pub value: T,
    /// Imaginary part of the normalized pairing; a free error indicator.
    pub imag_residue: T,
    pub eps: T,
    pub horizon: T,
}

fn underflow_guard<T: Real>(norm: T) -> Result<()> {
    let floor = T::lit(1e-300).max(T::min_positive_value());
    if !(norm.abs() >= floor) {
        return Err(Error::NormalizationUnderflow(norm.as_f64()));
    }
    Ok(())
}

/// `Re i⟨S_a(εφ) - S_b(εφ), εφ⟩ / (ε^{p+2} σ³ λ(p))`, an estimate of `(a - b)(x₀)`.
///
/// `eps` defaults to `σ`.
pub fn recover_point_holder<T: Real>(
    map: &impl ScatteringAccess<T>,
    sigma: T,
    x0: T,
    eps: Option<T>,
) -> Result<PointEstimate<T>> {
    let p = map.power();
    let lambda = lambda_p(p)?;
    let eps = eps.unwrap_or(sigma);
    let norm = eps.powf(p + T::lit(2.0)) * sigma.powi(3) * lambda;
    underflow_guard(norm)?;
    let ev = map.pairing(&ProbeSpec::new(sigma, x0, eps))?;
    Ok(PointEstimate { x0, value: ev.value.re / norm, imag_residue: ev.value.im / norm, eps, horizon: ev.horizon })
}

/// `Re i⟨S_a(εφ) - S_b(εφ), εφ⟩ / (√π ε⁴ σ³ |log σ|)` for `p = 2`.
pub fn recover_point_log<T: Real>(
    map: &impl ScatteringAccess<T>,
    sigma: T,
    x0: T,
    eps: Option<T>,
) -> Result<PointEstimate<T>> {
    if map.power() != T::lit(2.0) {
        return Err(Error::InvalidParameter("the logarithmic normalization needs p = 2".into()));
    }
    if !(sigma > T::zero()) || sigma >= T::lit(0.5) {
        return Err(Error::SigmaTooLarge(sigma.as_f64()));
    }
    let eps = eps.unwrap_or(sigma);
    let norm = log_coefficient::<T>() * eps.powi(4) * sigma.powi(3) * sigma.ln().abs();
    underflow_guard(norm)?;
    let ev = map.pairing(&ProbeSpec::new(sigma, x0, eps))?;
    Ok(PointEstimate { x0, value: ev.value.re / norm, imag_residue: ev.value.im / norm, eps, horizon: ev.horizon })
}

/// `(a - b)(x₀)` from the modified maps, `ε = σ^{11/2}` by default.
///
/// Forms `D - (1/2i) log(1 + 1/(2ε)) C` with `D`, `C` the pairings of
/// [`ModifiedPairing`], divides by `-iε³√π σ³ |log σ|` and keeps the real part.
pub fn recover_difference_modified<T: Real>(
    pair: &impl ModifiedAccess<T>,
    sigma: T,
    x0: T,
    eps: Option<T>,
) -> Result<PointEstimate<T>> {
    if !(sigma > T::zero()) || sigma >= T::lit(0.5) {
        return Err(Error::SigmaTooLarge(sigma.as_f64()));
    }
    let eps = eps.unwrap_or_else(|| sigma.powf(T::lit(5.5)));
    let scale = log_coefficient::<T>() * eps.powi(3) * sigma.powi(3) * sigma.ln().abs();
    underflow_guard(scale)?;
    let ev = pair.modified_pairing(&ProbeSpec::new(sigma, x0, eps))?;
    let two = T::lit(2.0);
    let log_factor = (T::one() / (two * eps)).ln_1p();
    // 1/(2i) = -i/2
    let correction = Complex::new(T::zero(), -T::one() / two) * log_factor * ev.cubic;
    let norm = Complex::new(T::zero(), -scale);
    let q = (ev.difference - correction) / norm;
    Ok(PointEstimate { x0, value: q.re, imag_residue: q.im, eps, horizon: ev.horizon })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaRule<T: Real> {
    /// `[d/(1+B)]^{1/(2+s)}`.
    Holder { s: T },
    /// `[d/(1+B)]^{1/2}`.
    LogEndpoint,
    /// `[d/(1+B)]^{2/29}`.
    Modified,
}

impl<T: Real> SigmaRule<T> {
    /// Hölder rule with the default `s = (1 - 2/p)/2`.
    pub fn holder_for(p: T) -> Self {
        SigmaRule::Holder { s: (T::one() - T::lit(2.0) / p) / T::lit(2.0) }
    }

    pub fn exponent(&self) -> T {
        match *self {
            SigmaRule::Holder { s } => T::one() / (T::lit(2.0) + s),
            SigmaRule::LogEndpoint => T::lit(0.5),
            SigmaRule::Modified => T::lit(2.0) / T::lit(29.0),
        }
    }
}

/// Probe width prescribed by the stability argument for a measured map distance.
pub fn choose_sigma<T: Real>(distance: T, norm_budget: T, rule: SigmaRule<T>) -> Result<T> {
    if distance >= T::lit(0.5) {
        return Err(Error::DistanceNotSmall(distance.as_f64()));
    }
    if !(distance > T::zero()) {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {distance}")));
    }
    if !(norm_budget >= T::zero()) {
        return Err(Error::InvalidParameter(format!("norm budget must be non-negative, got {norm_budget}")));
    }
    Ok((distance / (T::one() + norm_budget)).powf(rule.exponent()))
}

#[derive(Clone, Debug)]
pub struct RecoveryReport<T: Real> {
    pub x0_lattice: Vec<T>,
    pub estimates: Vec<T>,
    pub imag_residues: Vec<T>,
    pub truth: Option<Vec<T>>,
    pub sigma: T,
    pub eps: T,
    pub mode: RecoveryMode,
    pub sup_error: Option<T>,
}

impl<T: Real> RecoveryReport<T> {
    fn assemble(
        points: Vec<PointEstimate<T>>,
        sigma: T,
        mode: RecoveryMode,
        truth: Option<&Generator<T>>,
    ) -> Self {
        let x0_lattice: Vec<T> = points.iter().map(|p| p.x0).collect();
        let estimates: Vec<T> = points.iter().map(|p| p.value).collect();
        let truth: Option<Vec<T>> = truth.map(|g| x0_lattice.iter().map(|&x| g.eval(x)).collect());
        let sup_error = truth
            .as_ref()
            .map(|t| t.iter().zip(&estimates).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())));
        Self {
            imag_residues: points.iter().map(|p| p.imag_residue).collect(),
            eps: points.first().map_or(T::zero(), |p| p.eps),
            x0_lattice,
            estimates,
            truth,
            sigma,
            mode,
            sup_error,
        }
    }
}

fn sweep<T: Real>(
    lattice: &[T],
    f: impl Fn(T) -> Result<PointEstimate<T>> + Sync,
) -> Result<Vec<PointEstimate<T>>> {
    lattice.par_iter().map(|&x0| f(x0)).collect()
}

/// Reconstruction over a lattice of probe centers (parallel, results in lattice order).
///
/// `truth` is the analytic `a - b` the estimates are compared against.
pub fn recover_lattice<T: Real>(
    map: &impl ScatteringAccess<T>,
    mode: RecoveryMode,
    sigma: T,
    lattice: &[T],
    eps: Option<T>,
    truth: Option<&Generator<T>>,
) -> Result<RecoveryReport<T>> {
    let points = match mode {
        RecoveryMode::Holder => sweep(lattice, |x0| recover_point_holder(map, sigma, x0, eps))?,
        RecoveryMode::LogEndpoint => sweep(lattice, |x0| recover_point_log(map, sigma, x0, eps))?,
        RecoveryMode::ModifiedDifference => {
            return Err(Error::InvalidParameter("use recover_lattice_modified for the modified maps".into()))
        }
    };
    Ok(RecoveryReport::assemble(points, sigma, mode, truth))
}

/// [`recover_lattice`] for the modified maps.
pub fn recover_lattice_modified<T: Real>(
    pair: &impl ModifiedAccess<T>,
    sigma: T,
    lattice: &[T],
    eps: Option<T>,
    truth: Option<&Generator<T>>,
) -> Result<RecoveryReport<T>> {
    let points = sweep(lattice, |x0| recover_difference_modified(pair, sigma, x0, eps))?;
    Ok(RecoveryReport::assemble(points, sigma, RecoveryMode::ModifiedDifference, truth))
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn lattice<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / T::lit(2.0)],
        _ => {
            let h = (hi - lo) / T::from_usize_lossy(n - 1);
            (0..n).map(|i| lo + h * T::from_usize_lossy(i)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> Generator<f64> {
        Generator::gaussian(1.0, 1.0, 0.0)
    }

    #[test]
    fn sigma_rules() {
        let s: f64 = choose_sigma(1e-4, 0.0, SigmaRule::LogEndpoint).unwrap();
        assert!((s - 1e-2).abs() < 1e-15);
        let m: f64 = choose_sigma(1e-4, 0.0, SigmaRule::Modified).unwrap();
        assert!((m - 1e-4f64.powf(2.0 / 29.0)).abs() < 1e-15);
        let h3 = SigmaRule::<f64>::holder_for(3.0);
        assert!((h3.exponent() - 1.0 / (2.0 + 1.0 / 6.0)).abs() < 1e-15);
        assert!(choose_sigma(1e-6, 0.0, h3).unwrap() < choose_sigma(1e-4, 0.0, h3).unwrap());
        assert!(choose_sigma(1e-4, 3.0, h3).unwrap() < choose_sigma(1e-4, 0.0, h3).unwrap());
        assert!(matches!(choose_sigma(0.5, 0.0, h3), Err(Error::DistanceNotSmall(_))));
        assert!(choose_sigma(0.0, 0.0, h3).is_err());
    }

    #[test]
    fn extent_of_gaussian() {
        let (lo, hi) = effective_extent(&Generator::gaussian(2.0, 0.5, 1.0)).unwrap();
        // exp(-x²/(2w²)) = 1e-13 at |x| = w √(26 ln 10)
        let r = 0.5 * (26.0 * 10f64.ln()).sqrt();
        assert!((hi - 1.0 - r).abs() < 0.01 && (1.0 - lo - r).abs() < 0.01);
        assert!(effective_extent::<f64>(&Generator::Zero).is_none());
    }

    #[test]
    fn plan_respects_resolution_and_aliasing() {
        let cfg = PairingConfig::default();
        let ext = effective_extent(&bump());
        let plan = plan_grid(0.1, 0.5, ext, 1.0, &cfg).unwrap();
        let reach = 0.5 - ext.unwrap().0;
        assert!((plan.horizon - 4.0 * 0.1 * reach).abs() < 1e-12);
        assert!(plan.length >= reach + 8.0 * plan.horizon / 0.1);
        assert!(plan.length / plan.n as f64 <= 0.1 / 3.0);
        assert!((plan.dt - 1e-3).abs() < 1e-15);
        let tiny = PairingConfig { max_points: 1024, ..cfg };
        assert!(plan_grid(0.1, 0.5, ext, 1.0, &tiny).is_err());
    }

    #[test]
    fn zero_coefficient_recovers_zero() {
        let map = SolverMap::new(3.0, Generator::Zero);
        let est = recover_point_holder(&map, 0.1, 0.0, None).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(matches!(recover_point_holder(&map, 0.3, 0.0, None), Err(Error::NotSmallData { .. })));
        let born = BornMap::new(3.0, Generator::Zero).unwrap();
        assert_eq!(recover_point_holder(&born, 0.3, 0.0, None).unwrap().value, 0.0);
    }

    #[test]
    fn holder_rejects_p_two() {
        let map = SolverMap::new(2.0, bump());
        assert!(matches!(recover_point_holder(&map, 0.3, 0.0, None), Err(Error::PoleAtTwo(_))));
        assert!(matches!(recover_point_log(&map, 0.5, 0.0, None), Err(Error::SigmaTooLarge(_))));
        let p3 = SolverMap::new(3.0, bump());
        assert!(recover_point_log(&p3, 0.3, 0.0, None).is_err());
    }

    #[test]
    fn underflow_is_reported() {
        let born = BornMap::new(4.0, bump()).unwrap();
        let r = recover_point_holder(&born, 0.3, 0.0, Some(1e-60));
        assert!(matches!(r, Err(Error::NormalizationUnderflow(_))));
    }

    #[test]
    fn solver_pairing_matches_born_model() {
        let p = 3.0;
        let map = SolverMap::new(p, bump());
        let born = BornMap::new(p, bump()).unwrap();
        let probe = ProbeSpec::new(0.4, 0.3, 0.02);
        let s = map.pairing(&probe).unwrap().value;
        let b = born.pairing(&probe).unwrap().value;
        // second Born term is O(ε^p) relative
        assert!((s.re - b.re).abs() < 1e-3 * b.re, "{s} vs {b}");
        assert!(s.im.abs() < 1e-2 * b.re);
    }

    #[test]
    fn difference_pairing_is_antisymmetric() {
        let a = bump();
        let b = Generator::gaussian(0.5, 0.7, 0.4);
        let cfg = PairingConfig { horizon: Some(1.0), extrapolate: false, ..PairingConfig::default() };
        let ab = SolverMap::difference(3.0, a.clone(), b.clone()).with_config(cfg);
        let ba = SolverMap::difference(3.0, b, a).with_config(cfg);
        let probe = ProbeSpec::new(0.4, 0.0, 0.05);
        let x = ab.pairing(&probe).unwrap().value;
        let y = ba.pairing(&probe).unwrap().value;
        assert!((x + y).norm() < 1e-6 * x.norm());
    }

    #[test]
    fn born_recovery_is_linear_in_a() {
        let one = BornMap::new(3.0, bump()).unwrap();
        let two = BornMap::new(3.0, bump().scaled(2.0)).unwrap();
        let e1 = recover_point_holder(&one, 0.1, 0.2, None).unwrap().value;
        let e2 = recover_point_holder(&two, 0.1, 0.2, None).unwrap().value;
        assert!((e2 - 2.0 * e1).abs() < 1e-10 * e1.abs());
    }

    #[test]
    fn born_holder_estimate_approaches_truth() {
        let born = BornMap::new(3.0, bump()).unwrap();
        let coarse = recover_point_holder(&born, 0.2, 0.0, None).unwrap().value;
        let fine = recover_point_holder(&born, 0.02, 0.0, None).unwrap().value;
        assert!((fine - 1.0).abs() < (coarse - 1.0).abs());
        assert!((fine - 1.0).abs() < 0.2);
    }

    #[test]
    fn lattice_report_is_ordered() {
        let born = BornMap::new(3.0, bump()).unwrap();
        let xs = lattice(-1.0, 1.0, 5);
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let rep = recover_lattice(&born, RecoveryMode::Holder, 0.1, &xs, None, Some(&bump())).unwrap();
        assert_eq!(rep.x0_lattice, xs);
        assert_eq!(rep.estimates.len(), 5);
        assert!(rep.sup_error.unwrap() < 0.5);
        assert!((rep.estimates[0] - rep.estimates[4]).abs() < 1e-12);
        assert!(recover_lattice(&born, RecoveryMode::ModifiedDifference, 0.1, &xs, None, None).is_err());
    }

    #[test]
    fn cubic_difference_is_exact() {
        let b = Complex::new(0.3, -0.2);
        let d = Complex::new(1e-3, 2e-3);
        let direct = (b + d) * (b + d).norm_sqr() - b * b.norm_sqr();
        assert!((cubic_difference(b, d) - direct).norm() < 1e-15);
    }

    #[test]
    fn modified_pair_equal_coefficients_vanish() {
        let pair = ModifiedSolverPair::new(bump(), bump())
            .with_config(PairingConfig { horizon: Some(0.5), ..PairingConfig::default() });
        let est = recover_difference_modified(&pair, 0.3, 0.0, None).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(matches!(recover_difference_modified(&pair, 0.5, 0.0, None), Err(Error::SigmaTooLarge(_))));
    }

    #[test]
    fn tail_extrapolation_removes_power_tail() {
        let limit = Complex::new(2.0, -1.0);
        let f = |t: f64| limit + Complex::new(3.0, 1.0) * t.powf(-1.5);
        let e = tail_extrapolate(f(4.0), f(8.0), 4.0, 8.0, 1.5);
        assert!((e - limit).norm() < 1e-14);
    }
}
