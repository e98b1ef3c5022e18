//! Strang split-step integration of
//!
//! ```text
//! i∂ₜu = -Δu + a(x)|u|^p u         (inhomogeneous power, 2 ≤ p ≤ 4)
//! i∂ₜu = -Δu + [1 + a(x)]|u|² u    (perturbed cubic)
//! ```
//!
//! The free flow is applied exactly in Fourier space and the nonlinear flow
//! exactly in physical space (it preserves `|u|` pointwise), so every step is
//! unitary.
//!
//! [`PairStepper`] integrates a *target* equation relative to a *reference*
//! one (possibly the free equation) and carries the difference
//! `δ = u_target - u_reference` as its own state. Differences between
//! scattering maps are then available to full relative precision even when
//! they are twenty orders of magnitude below the data.

use std::sync::Arc;

use num_complex::Complex;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Field, Grid, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nonlinearity<T: Real> {
    /// `a(x)|u|^p u`
    InhomogeneousPower { p: T },
    /// `[1 + a(x)]|u|² u`
    PerturbedCubic,
}

#[derive(Clone, Debug)]
pub struct NonlinearitySpec<T: Real> {
    kind: Nonlinearity<T>,
    coeff: Arc<Coefficient<T>>,
}

impl<T: Real> NonlinearitySpec<T> {
    pub fn power(p: T, coeff: Arc<Coefficient<T>>) -> Result<Self> {
        if !(p >= T::lit(2.0) && p <= T::lit(4.0)) {
            return Err(Error::OutOfRange { name: "p", value: p.as_f64(), range: "[2, 4]" });
        }
        Ok(Self { kind: Nonlinearity::InhomogeneousPower { p }, coeff })
    }

    pub fn perturbed_cubic(coeff: Arc<Coefficient<T>>) -> Self {
        Self { kind: Nonlinearity::PerturbedCubic, coeff }
    }

    pub fn kind(&self) -> Nonlinearity<T> {
        self.kind
    }

    pub fn coeff(&self) -> &Arc<Coefficient<T>> {
        &self.coeff
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.coeff.grid()
    }

    /// Homogeneity of the nonlinearity: `p`, or `2` for the perturbed cubic.
    pub fn power_p(&self) -> T {
        match self.kind {
            Nonlinearity::InhomogeneousPower { p } => p,
            Nonlinearity::PerturbedCubic => T::lit(2.0),
        }
    }

    /// True when the nonlinear flow is the identity.
    pub fn is_trivial(&self) -> bool {
        matches!(self.kind, Nonlinearity::InhomogeneousPower { .. }) && self.coeff.is_zero()
    }

    /// `V(x_j, |u|²)` such that the nonlinear term is `V u`.
    #[inline]
    pub fn potential(&self, j: usize, modulus_sq: T) -> T {
        let a = self.coeff.samples()[j];
        match self.kind {
            Nonlinearity::InhomogeneousPower { p } => {
                if modulus_sq == T::zero() {
                    T::zero()
                } else {
                    a * modulus_sq.powf(p / T::lit(2.0))
                }
            }
            Nonlinearity::PerturbedCubic => (T::one() + a) * modulus_sq,
        }
    }
}

/// `(r + s)^q - r^q` without cancellation when `|s| ≪ r`.
#[inline]
fn pow_difference<T: Real>(r: T, s: T, q: T) -> T {
    if r > T::zero() && s.abs() < r {
        r.powf(q) * (q * (s / r).ln_1p()).exp_m1()
    } else {
        let total = (r + s).max(T::zero());
        let a = if total == T::zero() { T::zero() } else { total.powf(q) };
        let b = if r == T::zero() { T::zero() } else { r.powf(q) };
        a - b
    }
}

/// `e^{-iθ} - 1` accurate for small `θ`.
#[inline]
fn expm1_phase<T: Real>(theta: T) -> Complex<T> {
    let s = (theta / T::lit(2.0)).sin();
    Complex::new(-T::lit(2.0) * s * s, -theta.sin())
}

#[inline]
fn phase<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), -theta.sin())
}

/// Exact nonlinear sub-flow: `u ↦ exp{-i dt V(x,|u|)} u`.
pub fn nonlinear_substep<T: Real>(u: &Field<T>, spec: &NonlinearitySpec<T>, dt: T) -> Result<Field<T>> {
    if !u.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut out = u.clone();
    apply_nonlinear(out.values_mut(), spec, dt);
    Ok(out)
}

fn apply_nonlinear<T: Real>(values: &mut [Complex<T>], spec: &NonlinearitySpec<T>, dt: T) {
    if spec.is_trivial() {
        return;
    }
    for (j, v) in values.iter_mut().enumerate() {
        let theta = dt * spec.potential(j, v.norm_sqr());
        *v = *v * phase(theta);
    }
}

/// Precomputed half-step free multiplier plus FFT scratch.
struct FreeHalfStep<T: Real> {
    grid: Arc<Grid<T>>,
    half: Vec<Complex<T>>,
    inv_n: T,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> FreeHalfStep<T> {
    fn new(grid: Arc<Grid<T>>, dt: T) -> Self {
        let h = dt / T::lit(2.0);
        let half = grid.ks().iter().map(|&k| phase(h * k * k)).collect();
        let inv_n = T::one() / T::from_usize_lossy(grid.n());
        Self { grid, half, inv_n, scratch: Vec::new() }
    }

    fn apply_half(&self, spec: &mut [Complex<T>]) {
        for (v, m) in spec.iter_mut().zip(&self.half) {
            *v = *v * m;
        }
    }

    /// Spectral (raw FFT scaling) to physical, into `out`.
    fn to_physical(&mut self, spec: &[Complex<T>], out: &mut Vec<Complex<T>>) {
        out.clear();
        out.extend(spec.iter().map(|v| v.scale(self.inv_n)));
        self.grid.ifft(out, &mut self.scratch);
    }

    fn to_spectral(&mut self, buf: &mut [Complex<T>]) {
        self.grid.fft(buf, &mut self.scratch);
    }
}

/// One Strang step: free `dt/2`, nonlinear `dt`, free `dt/2`.
pub fn strang_step<T: Real>(u: &Field<T>, spec: &NonlinearitySpec<T>, dt: T) -> Result<Field<T>> {
    if !u.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut prop = FreeHalfStep::new(u.grid().clone(), dt);
    let mut spec_buf = u.values().to_vec();
    prop.to_spectral(&mut spec_buf);
    let mut phys = Vec::with_capacity(spec_buf.len());
    prop.apply_half(&mut spec_buf);
    prop.to_physical(&spec_buf, &mut phys);
    apply_nonlinear(&mut phys, spec, dt);
    prop.to_spectral(&mut phys);
    prop.apply_half(&mut phys);
    prop.to_physical(&phys, &mut spec_buf);
    Field::new(u.grid().clone(), spec_buf)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T: Real> {
    pub dt: T,
    pub t_final: T,
    /// Record a snapshot every `record_stride` steps (and at `t = 0`).
    pub record_stride: Option<usize>,
    /// Small-data radius in `L²`.
    pub eta: T,
    pub max_dt: T,
    /// Relative mass drift above which `evolve` fails.
    pub mass_tolerance: T,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(dt: T, t_final: T) -> Self {
        Self {
            dt,
            t_final,
            record_stride: None,
            eta: T::lit(0.1),
            max_dt: T::lit(0.1),
            mass_tolerance: T::tol(1e-8),
        }
    }

    /// Default step `min(0.01, σ²/10)` for data of width `σ`.
    pub fn for_probe_width(sigma: T, t_final: T) -> Self {
        Self::new(default_dt(sigma), t_final)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = Some(stride);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt > self.max_dt {
            return Err(Error::InvalidParameter(format!("dt = {} exceeds the cap {}", self.dt, self.max_dt)));
        }
        if !(self.t_final >= T::zero()) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if self.record_stride == Some(0) {
            return Err(Error::InvalidParameter("record_stride must be positive".into()));
        }
        Ok(())
    }

    /// Step count and the effective step `t_final / steps` (never above `dt`).
    pub fn steps(&self) -> (usize, T) {
        step_plan(self.t_final, self.dt)
    }
}

pub fn default_dt<T: Real>(sigma: T) -> T {
    T::lit(0.01).min(sigma * sigma / T::lit(10.0))
}

pub(crate) fn step_plan<T: Real>(span: T, dt: T) -> (usize, T) {
    if span <= T::zero() {
        return (0, dt);
    }
    let n = (span / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    (n, span / T::from_usize_lossy(n))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics<T: Real> {
    pub steps: usize,
    pub dt: T,
    pub initial_norm: T,
    pub final_norm: T,
    /// `|‖u(T)‖ - ‖u₀‖| / ‖u₀‖` (zero for zero data).
    pub mass_drift: T,
    /// `‖u₀‖₂ < η`.
    pub small_data: bool,
}

#[derive(Clone, Debug)]
pub struct Evolution<T: Real> {
    pub state: Field<T>,
    pub trajectory: Vec<(T, Field<T>)>,
    pub diagnostics: Diagnostics<T>,
}

/// Integrates from `u0` to `config.t_final` with fixed steps.
pub fn evolve<T: Real>(u0: &Field<T>, spec: &NonlinearitySpec<T>, config: &SolverConfig<T>) -> Result<Evolution<T>> {
    config.validate()?;
    if !u0.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    let initial_norm = u0.l2_norm();
    let small_data = initial_norm < config.eta;
    if !small_data {
        log::warn!("initial data norm {} is not below eta = {}", initial_norm, config.eta);
    }
    let (steps, dt) = config.steps();
    let grid = u0.grid().clone();
    let mut prop = FreeHalfStep::new(grid.clone(), dt);
    let mut state = u0.values().to_vec();
    prop.to_spectral(&mut state);
    let mut phys = Vec::with_capacity(state.len());
    let mut trajectory = Vec::new();
    if config.record_stride.is_some() {
        trajectory.push((T::zero(), u0.clone()));
    }
    for step in 1..=steps {
        prop.apply_half(&mut state);
        prop.to_physical(&state, &mut phys);
        apply_nonlinear(&mut phys, spec, dt);
        prop.to_spectral(&mut phys);
        prop.apply_half(&mut phys);
        std::mem::swap(&mut state, &mut phys);
        if let Some(stride) = config.record_stride {
            if step % stride == 0 || step == steps {
                prop.to_physical(&state, &mut phys);
                let t = dt * T::from_usize_lossy(step);
                trajectory.push((t, Field::new(grid.clone(), phys.clone())?));
            }
        }
    }
    prop.to_physical(&state, &mut phys);
    let final_field = Field::new(grid, phys)?;
    let final_norm = final_field.l2_norm();
    let mass_drift = if initial_norm > T::zero() {
        (final_norm - initial_norm).abs() / initial_norm
    } else {
        T::zero()
    };
    if mass_drift > config.mass_tolerance {
        return Err(Error::MassDrift { drift: mass_drift.as_f64(), tolerance: config.mass_tolerance.as_f64() });
    }
    Ok(Evolution {
        state: final_field,
        trajectory,
        diagnostics: Diagnostics { steps, dt, initial_norm, final_norm, mass_drift, small_data },
    })
}

/// Accumulates `Φ(t, ξ) = ∫₀ᵗ |F e^{-isΔ}u(s)|²(ξ) ds/(2s+1)` by the trapezoid rule.
struct PhaseTracker<T: Real> {
    /// `dx²/(2π)`: turns raw `|FFT|²` into `|F u|²`.
    scale: T,
    reference: Vec<T>,
    delta: Vec<T>,
    last_ref: Vec<T>,
    last_delta: Vec<T>,
}

/// Smallest index range holding every sample of the power-law coefficients
/// above `1e-17` of their peak; the full grid when a cubic term is present.
fn active_range<T: Real>(reference: Option<&NonlinearitySpec<T>>, target: &NonlinearitySpec<T>) -> std::ops::Range<usize> {
    let n = target.grid().n();
    let specs = std::iter::once(target).chain(reference);
    if specs.clone().any(|s| s.kind() == Nonlinearity::PerturbedCubic) {
        return 0..n;
    }
    let peak = specs.clone().flat_map(|s| s.coeff().samples()).fold(T::zero(), |m, v| m.max(v.abs()));
    if peak == T::zero() {
        return 0..0;
    }
    let cut = peak * T::lit(1e-17);
    let live = |j: usize| specs.clone().any(|s| s.coeff().samples()[j].abs() > cut);
    let lo = (0..n).find(|&j| live(j)).unwrap_or(0);
    let hi = (0..n).rev().find(|&j| live(j)).map_or(0, |j| j + 1);
    lo..hi
}

/// Integrates a target equation alongside a reference one, carrying their
/// difference as state.
///
/// With `reference = None` the reference is the free flow, so the deviation is
/// `u(t) - e^{itΔ}u₀`.
pub struct PairStepper<'a, T: Real> {
    grid: Arc<Grid<T>>,
    reference: Option<&'a NonlinearitySpec<T>>,
    target: &'a NonlinearitySpec<T>,
    dt: T,
    t: T,
    steps: usize,
    prop: FreeHalfStep<T>,
    ref_hat: Vec<Complex<T>>,
    dev_hat: Vec<Complex<T>>,
    phase: Option<PhaseTracker<T>>,
    buf_ref: Vec<Complex<T>>,
    buf_dev: Vec<Complex<T>>,
    /// Indices outside this range see no nonlinearity.
    active: std::ops::Range<usize>,
}

impl<'a, T: Real> PairStepper<'a, T> {
    pub fn new(
        u0: &Field<T>,
        reference: Option<&'a NonlinearitySpec<T>>,
        target: &'a NonlinearitySpec<T>,
        dt: T,
    ) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let grid = u0.grid().clone();
        if !grid.same_as(target.grid()) || reference.is_some_and(|r| !grid.same_as(r.grid())) {
            return Err(Error::GridMismatch);
        }
        let mut prop = FreeHalfStep::new(grid.clone(), dt);
        let mut ref_hat = u0.values().to_vec();
        prop.to_spectral(&mut ref_hat);
        let n = grid.n();
        let active = active_range(reference, target);
        Ok(Self {
            active,
            grid,
            reference,
            target,
            dt,
            t: T::zero(),
            steps: 0,
            prop,
            ref_hat,
            dev_hat: vec![Complex::default(); n],
            phase: None,
            buf_ref: Vec::with_capacity(n),
            buf_dev: Vec::with_capacity(n),
        })
    }

    /// Starts accumulating the modified-scattering phase (call before stepping).
    pub fn track_phase(mut self) -> Self {
        let dx = self.grid.dx();
        let scale = dx * dx / T::TAU();
        let last_ref: Vec<T> = self.ref_hat.iter().map(|v| v.norm_sqr() * scale).collect();
        let n = last_ref.len();
        self.phase = Some(PhaseTracker {
            scale,
            reference: vec![T::zero(); n],
            delta: vec![T::zero(); n],
            last_ref,
            last_delta: vec![T::zero(); n],
        });
        self
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Advances by `count` steps of size `dt`.
    pub fn advance(&mut self, count: usize) {
        for _ in 0..count {
            self.step();
        }
    }

    /// Advances until `time() ≥ t - dt/2`.
    pub fn advance_to(&mut self, t: T) {
        while self.t < t - self.dt / T::lit(2.0) {
            self.step();
        }
    }

    fn step(&mut self) {
        let dt = self.dt;
        self.prop.apply_half(&mut self.ref_hat);
        self.prop.apply_half(&mut self.dev_hat);
        self.prop.to_physical(&self.ref_hat, &mut self.buf_ref);
        self.prop.to_physical(&self.dev_hat, &mut self.buf_dev);
        let target = self.target;
        let reference = self.reference;
        let same_power = match (reference.map(|r| r.kind()), target.kind()) {
            (Some(Nonlinearity::InhomogeneousPower { p: q }), Nonlinearity::InhomogeneousPower { p }) => p == q,
            _ => false,
        };
        let both_cubic = matches!(
            (reference.map(|r| r.kind()), target.kind()),
            (Some(Nonlinearity::PerturbedCubic), Nonlinearity::PerturbedCubic)
        );
        for j in self.active.clone() {
            let r = self.buf_ref[j];
            let d = self.buf_dev[j];
            let u = r + d;
            let r2 = r.norm_sqr();
            let u2 = u.norm_sqr();
            let v_target = target.potential(j, u2);
            let (v_ref, dv) = match reference {
                None => (T::zero(), v_target),
                Some(rs) => {
                    let v_ref = rs.potential(j, r2);
                    // |u|² - |r|² = 2 Re(r̄ d) + |d|²
                    let s = T::lit(2.0) * (r.conj() * d).re + d.norm_sqr();
                    let a = target.coeff().samples()[j];
                    let b = rs.coeff().samples()[j];
                    let dv = if same_power {
                        let p = target.power_p();
                        let ua = if u2 == T::zero() { T::zero() } else { u2.powf(p / T::lit(2.0)) };
                        (a - b) * ua + b * pow_difference(r2, s, p / T::lit(2.0))
                    } else if both_cubic {
                        (a - b) * u2 + (T::one() + b) * s
                    } else {
                        v_target - v_ref
                    };
                    (v_ref, dv)
                }
            };
            let e_ref = phase(dt * v_ref);
            self.buf_dev[j] = phase(dt * v_target) * d + e_ref * expm1_phase(dt * dv) * r;
            if reference.is_some() {
                self.buf_ref[j] = e_ref * r;
            }
        }
        if reference.is_some() {
            self.prop.to_spectral(&mut self.buf_ref);
            std::mem::swap(&mut self.ref_hat, &mut self.buf_ref);
        }
        self.prop.apply_half(&mut self.ref_hat);
        self.prop.to_spectral(&mut self.buf_dev);
        std::mem::swap(&mut self.dev_hat, &mut self.buf_dev);
        self.prop.apply_half(&mut self.dev_hat);
        let t_old = self.t;
        self.steps += 1;
        self.t = self.dt * T::from_usize_lossy(self.steps);
        if let Some(ph) = self.phase.as_mut() {
            let w_old = T::one() / (T::lit(2.0) * t_old + T::one());
            let w_new = T::one() / (T::lit(2.0) * self.t + T::one());
            let half_dt = dt / T::lit(2.0);
            for k in 0..self.ref_hat.len() {
                let r = self.ref_hat[k];
                let d = self.dev_hat[k];
                let g_ref = r.norm_sqr() * ph.scale;
                let g_delta = (T::lit(2.0) * (r.conj() * d).re + d.norm_sqr()) * ph.scale;
                ph.reference[k] = ph.reference[k] + half_dt * (ph.last_ref[k] * w_old + g_ref * w_new);
                ph.delta[k] = ph.delta[k] + half_dt * (ph.last_delta[k] * w_old + g_delta * w_new);
                ph.last_ref[k] = g_ref;
                ph.last_delta[k] = g_delta;
            }
        }
    }

    fn profile_of(&self, raw: &[Complex<T>]) -> Spectrum<T> {
        let t = self.t;
        let values = raw
            .iter()
            .zip(self.grid.ks())
            .enumerate()
            .map(|(k, (v, &kk))| {
                let th = -t * kk * kk;
                (*v * phase(th)).scale(self.grid.spectral_factor(k))
            })
            .collect();
        Spectrum::new(self.grid.clone(), values).expect("length matches grid")
    }

    /// `F e^{-itΔ} u_ref(t)`.
    pub fn reference_profile(&self) -> Spectrum<T> {
        self.profile_of(&self.ref_hat)
    }

    /// `F e^{-itΔ} (u_target - u_ref)(t)`.
    pub fn deviation_profile(&self) -> Spectrum<T> {
        self.profile_of(&self.dev_hat)
    }

    fn physical(&self, raw: &[Complex<T>]) -> Field<T> {
        let inv_n = T::one() / T::from_usize_lossy(self.grid.n());
        let mut buf: Vec<Complex<T>> = raw.iter().map(|v| v.scale(inv_n)).collect();
        let mut scratch = Vec::new();
        self.grid.ifft(&mut buf, &mut scratch);
        Field::new(self.grid.clone(), buf).expect("length matches grid")
    }

    pub fn reference_field(&self) -> Field<T> {
        self.physical(&self.ref_hat)
    }

    pub fn deviation_field(&self) -> Field<T> {
        self.physical(&self.dev_hat)
    }

    pub fn target_field(&self) -> Field<T> {
        let both: Vec<Complex<T>> = self.ref_hat.iter().zip(&self.dev_hat).map(|(a, b)| a + b).collect();
        self.physical(&both)
    }

    /// Accumulated phases `(Φ_ref, Φ_target - Φ_ref)`, if tracking.
    pub fn phases(&self) -> Option<(&[T], &[T])> {
        self.phase.as_ref().map(|p| (p.reference.as_slice(), p.delta.as_slice()))
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::Generator;
    use crate::spectral::{free_propagate, gaussian_probe, make_grid, ProbeSpec};

    fn setup(n: usize, l: f64, gen: Generator<f64>) -> (Arc<Grid<f64>>, Arc<Coefficient<f64>>) {
        let g = make_grid(n, l).unwrap();
        let c = Arc::new(Coefficient::new(gen, g.clone()).unwrap());
        (g, c)
    }

    #[test]
    fn substep_with_zero_coefficient_is_identity() {
        let (g, c) = setup(256, 40.0, Generator::Zero);
        let spec = NonlinearitySpec::power(3.0, c).unwrap();
        let u = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.7)).unwrap();
        let v = nonlinear_substep(&u, &spec, 0.1).unwrap();
        assert_eq!(u.values(), v.values());
    }

    #[test]
    fn substep_rotates_constant_modulus() {
        let g = make_grid(64, 10.0).unwrap();
        // a ≡ 0 except through the perturbed cubic's "1 +": V = |u|²
        let c = Arc::new(Coefficient::zero(g.clone()));
        let spec = NonlinearitySpec::perturbed_cubic(c);
        let u = Field::from_fn(g.clone(), |_| Complex::new(0.5, 0.0));
        let dt: f64 = 0.3;
        let v = nonlinear_substep(&u, &spec, dt).unwrap();
        let expect = Complex::new(0.0, -dt * 0.25).exp() * 0.5;
        for x in v.values() {
            assert!((x - expect).norm() < 1e-15);
        }
        assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-14);
    }

    #[test]
    fn substep_power_phase() {
        let g = make_grid(64, 10.0).unwrap();
        let c = Arc::new(Coefficient::new(Generator::gaussian(0.8, 0.5, 0.0), g.clone()).unwrap());
        let spec = NonlinearitySpec::power(2.5, c.clone()).unwrap();
        let u = Field::from_fn(g.clone(), |_| Complex::new(0.0, 0.6));
        let v = nonlinear_substep(&u, &spec, 0.2).unwrap();
        for (j, x) in v.values().iter().enumerate() {
            let expect = Complex::new(0.0, -0.2 * c.samples()[j] * 0.6f64.powf(2.5)).exp() * Complex::new(0.0, 0.6);
            assert!((x - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn invalid_p_is_rejected() {
        let (_, c) = setup(64, 10.0, Generator::Zero);
        assert!(NonlinearitySpec::power(1.5, c.clone()).is_err());
        assert!(NonlinearitySpec::power(4.5, c).is_err());
    }

    #[test]
    fn strang_step_without_coefficient_is_free_flow() {
        let (g, c) = setup(512, 60.0, Generator::Zero);
        let spec = NonlinearitySpec::power(2.0, c).unwrap();
        let u = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.5, 1.0)).unwrap();
        let a = strang_step(&u, &spec, 0.05).unwrap();
        let b = free_propagate(&u, 0.05);
        assert!(a.sub(&b).unwrap().linf_norm() < 1e-12);
    }

    #[test]
    fn strang_step_conserves_mass() {
        let (g, c) = setup(512, 60.0, Generator::gaussian(1.0, 1.0, 0.0));
        let spec = NonlinearitySpec::power(3.0, c).unwrap();
        let u = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.5, 1.0)).unwrap();
        let v = strang_step(&u, &spec, 0.05).unwrap();
        assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn evolve_zero_data_stays_zero() {
        let (g, c) = setup(256, 60.0, Generator::gaussian(1.0, 1.0, 0.0));
        let spec = NonlinearitySpec::power(2.0, c).unwrap();
        let u0 = Field::zeros(g);
        let ev = evolve(&u0, &spec, &SolverConfig::new(0.01, 1.0)).unwrap();
        assert_eq!(ev.state.linf_norm(), 0.0);
        assert_eq!(ev.diagnostics.mass_drift, 0.0);
    }

    #[test]
    fn evolve_records_trajectory() {
        let (g, c) = setup(256, 60.0, Generator::gaussian(1.0, 1.0, 0.0));
        let spec = NonlinearitySpec::power(2.0, c).unwrap();
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.05)).unwrap();
        let ev = evolve(&u0, &spec, &SolverConfig::new(0.01, 1.0).with_stride(25)).unwrap();
        let times: Vec<f64> = ev.trajectory.iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 5);
        assert!((times[4] - 1.0).abs() < 1e-12);
        assert!(ev.diagnostics.small_data);
        assert!(ev.trajectory[4].1.sub(&ev.state).unwrap().linf_norm() < 1e-15);
    }

    #[test]
    fn evolve_rejects_large_steps() {
        let (g, c) = setup(256, 60.0, Generator::Zero);
        let spec = NonlinearitySpec::power(2.0, c).unwrap();
        let u0 = Field::zeros(g);
        assert!(evolve(&u0, &spec, &SolverConfig::new(0.2, 1.0)).is_err());
        assert!(evolve(&u0, &spec, &SolverConfig::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn step_plan_never_exceeds_dt() {
        let (n, dt) = step_plan(1.0f64, 0.3);
        assert_eq!(n, 4);
        assert!((dt - 0.25).abs() < 1e-15);
        let (n, dt) = step_plan(1.0f64, 0.25);
        assert_eq!(n, 4);
        assert_eq!(dt, 0.25);
    }

    #[test]
    fn pow_difference_is_accurate() {
        let r: f64 = 1e-3;
        let s: f64 = 1e-19;
        let exact = 1.5 * r.powf(0.5) * s; // derivative of r^1.5
        assert!((pow_difference(r, s, 1.5) - exact).abs() < 1e-12 * exact);
        assert_eq!(pow_difference(0.0f64, 0.0, 1.5), 0.0);
        assert!((pow_difference(0.0f64, 4.0, 1.5) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn pair_stepper_matches_direct_evolution() {
        let (g, c) = setup(1024, 80.0, Generator::gaussian(0.8, 1.0, 0.0));
        let spec = NonlinearitySpec::power(3.0, c).unwrap();
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.3, 0.6)).unwrap();
        let dt = 0.01;
        let mut pair = PairStepper::new(&u0, None, &spec, dt).unwrap();
        pair.advance(200);
        let direct = evolve(&u0, &spec, &SolverConfig::new(dt, 2.0)).unwrap().state;
        let err = pair.target_field().sub(&direct).unwrap().linf_norm();
        assert!(err < 1e-12, "{err:e}");
        let free = free_propagate(&u0, 2.0);
        let dev = direct.sub(&free).unwrap();
        assert!(pair.deviation_field().sub(&dev).unwrap().linf_norm() < 1e-12);
    }

    #[test]
    fn pair_stepper_difference_of_two_coefficients() {
        let g = make_grid(1024, 80.0).unwrap();
        let a = Arc::new(Coefficient::new(Generator::gaussian(0.8, 1.0, 0.0), g.clone()).unwrap());
        let b = Arc::new(Coefficient::new(Generator::gaussian(0.5, 1.2, 0.4), g.clone()).unwrap());
        let sa = NonlinearitySpec::power(2.5, a).unwrap();
        let sb = NonlinearitySpec::power(2.5, b).unwrap();
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.9)).unwrap();
        let mut pair = PairStepper::new(&u0, Some(&sb), &sa, 0.01).unwrap();
        pair.advance(150);
        let ua = evolve(&u0, &sa, &SolverConfig::new(0.01, 1.5)).unwrap().state;
        let ub = evolve(&u0, &sb, &SolverConfig::new(0.01, 1.5)).unwrap().state;
        assert!(pair.reference_field().sub(&ub).unwrap().linf_norm() < 1e-12);
        assert!(pair.deviation_field().sub(&ua.sub(&ub).unwrap()).unwrap().linf_norm() < 1e-12);
    }

    #[test]
    fn phase_for_free_reference_is_logarithmic() {
        let g = make_grid(256, 40.0).unwrap();
        let c = Arc::new(Coefficient::zero(g.clone()));
        let spec = NonlinearitySpec::power(2.0, c).unwrap();
        let u0 = gaussian_probe(&g, &ProbeSpec::new(1.0, 0.0, 0.1)).unwrap();
        let mut pair = PairStepper::new(&u0, None, &spec, 0.01).unwrap().track_phase();
        pair.advance(300);
        let (phi, dphi) = pair.phases().unwrap();
        let s0 = u0.spectrum();
        let t: f64 = 3.0;
        for k in 0..g.n() {
            let exact = s0.values()[k].norm_sqr() * 0.5 * (1.0 + 2.0 * t).ln();
            assert!((phi[k] - exact).abs() <= 5e-5 * exact);
            assert_eq!(dphi[k], 0.0);
        }
    }
}
