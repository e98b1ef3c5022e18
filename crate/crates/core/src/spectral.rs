//! Periodic grid, Fourier transform pair, free Schrödinger flow and Gaussian probes.
//!
//! # Transform convention
//!
//! The continuous transform is the unitary one,
//! `F u(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} u(x) dx`, and the free propagator
//! `e^{itΔ}` is the Fourier multiplier `e^{-itξ²}`.
//!
//! On a grid with `x_j = -L/2 + j dx` and angular frequencies
//! `ξ_k = 2πk/L` (FFT ordering, `k` taken in `[-n/2, n/2)`), the Riemann sum
//! of the continuous transform is
//!
//! ```text
//! F u(ξ_k) ≈ (2π)^{-1/2} dx (-1)^k Σ_j u_j e^{-2πijk/n}
//! ```
//!
//! since `e^{iξ_k L/2} = (-1)^k`. [`Spectrum`] stores exactly these values, so
//! `Σ_k |F u(ξ_k)|² dξ = Σ_j |u_j|² dx` with `dξ = 2π/L` (discrete Parseval).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid on `[-L/2, L/2)` together with its FFT plans.
#[derive(Clone)]
pub struct Grid<T: Real> {
    n: usize,
    length: T,
    dx: T,
    xs: Vec<T>,
    ks: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dx", &self.dx)
            .finish()
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n: usize, length: T) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(n));
        }
        if n < 16 {
            return Err(Error::TooFewSamples(n));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::NonPositiveLength(length.as_f64()));
        }
        let nn = T::from_usize_lossy(n);
        let dx = length / nn;
        let half = length / T::lit(2.0);
        let xs = (0..n).map(|j| -half + T::from_usize_lossy(j) * dx).collect();
        let dk = T::TAU() / length;
        let ks = (0..n)
            .map(|j| {
                if j < n / 2 {
                    T::from_usize_lossy(j) * dk
                } else {
                    -(T::from_usize_lossy(n - j) * dk)
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self { n, length, dx, xs, ks, forward, inverse })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// Frequency spacing `2π/L`.
    pub fn dk(&self) -> T {
        T::TAU() / self.length
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    /// Angular frequencies in FFT order; index `n/2` is the Nyquist mode `-π/dx`.
    pub fn ks(&self) -> &[T] {
        &self.ks
    }

    /// Largest resolved angular frequency `π/dx`.
    pub fn k_max(&self) -> T {
        T::PI() / self.dx
    }

    /// Same sample count and length (bitwise).
    pub fn same_as(&self, other: &Grid<T>) -> bool {
        self.n == other.n && self.length == other.length
    }

    /// Wraps `x` into `[-L/2, L/2)`.
    pub fn wrap(&self, x: T) -> T {
        let half = self.length / T::lit(2.0);
        let y = (x + half) % self.length;
        let y = if y < T::zero() { y + self.length } else { y };
        y - half
    }

    /// Unnormalized in-place forward FFT.
    pub(crate) fn fft(&self, buf: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        scratch.resize(self.forward.get_inplace_scratch_len(), Complex::default());
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Unnormalized in-place inverse FFT (caller divides by `n`).
    pub(crate) fn ifft(&self, buf: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        scratch.resize(self.inverse.get_inplace_scratch_len(), Complex::default());
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Factor turning raw FFT output at index `k` into the continuous transform.
    pub(crate) fn spectral_factor(&self, k: usize) -> T {
        let base = self.dx / T::TAU().sqrt();
        if k % 2 == 0 {
            base
        } else {
            -base
        }
    }
}

/// Builds a shared grid; see [`Grid::new`].
pub fn make_grid<T: Real>(n: usize, length: T) -> Result<Arc<Grid<T>>> {
    Grid::new(n, length).map(Arc::new)
}

fn check_same<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Complex samples `u(x_j)` on a grid.
#[derive(Clone, Debug)]
pub struct Field<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![Complex::default(); grid.n()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.xs().iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l2_norm(&self) -> T {
        l2_norm(self)
    }

    pub fn linf_norm(&self) -> T {
        linf_norm(self)
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        let values = self.values.iter().map(|&v| v * c).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Field<T>,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// Continuous Fourier transform sampled on the frequency lattice.
    pub fn spectrum(&self) -> Spectrum<T> {
        let mut buf = self.values.clone();
        let mut scratch = Vec::new();
        self.grid.fft(&mut buf, &mut scratch);
        for (k, v) in buf.iter_mut().enumerate() {
            *v = v.scale(self.grid.spectral_factor(k));
        }
        Spectrum { grid: self.grid.clone(), values: buf }
    }

    /// Spectral derivative `∂ₓu` (the Nyquist mode is dropped).
    pub fn derivative(&self) -> Field<T> {
        let g = &self.grid;
        let mut buf = self.values.clone();
        let mut scratch = Vec::new();
        g.fft(&mut buf, &mut scratch);
        let inv_n = T::one() / T::from_usize_lossy(g.n());
        for (k, v) in buf.iter_mut().enumerate() {
            *v = if k == g.n() / 2 {
                Complex::default()
            } else {
                Complex::new(T::zero(), g.ks()[k] * inv_n) * *v
            };
        }
        g.ifft(&mut buf, &mut scratch);
        Field { grid: g.clone(), values: buf }
    }
}

/// Frequency-side samples `F u(ξ_k)` in FFT order, normalized as in the module docs.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} samples, grid has {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![Complex::default(); grid.n()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn ks(&self) -> &[T] {
        self.grid.ks()
    }

    /// Inverse of [`Field::spectrum`].
    pub fn to_field(&self) -> Field<T> {
        let g = &self.grid;
        let inv_n = T::one() / T::from_usize_lossy(g.n());
        let mut buf: Vec<Complex<T>> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v.scale(inv_n / g.spectral_factor(k)))
            .collect();
        let mut scratch = Vec::new();
        g.ifft(&mut buf, &mut scratch);
        Field { grid: g.clone(), values: buf }
    }

    /// `Σ f ḡ dξ`.
    pub fn inner(&self, other: &Spectrum<T>) -> Result<Complex<T>> {
        check_same(&self.grid, &other.grid)?;
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(Complex::default(), |acc, (a, b)| acc + a * b.conj());
        Ok(s.scale(self.grid.dk()))
    }

    pub fn l2_norm(&self) -> T {
        let s = self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr());
        (s * self.grid.dk()).sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Sup norm restricted to `|ξ| ≤ k_cut`.
    pub fn linf_norm_band(&self, k_cut: T) -> T {
        self.values
            .iter()
            .zip(self.grid.ks())
            .filter(|(_, k)| k.abs() <= k_cut)
            .fold(T::zero(), |m, (v, _)| m.max(v.norm()))
    }

    pub fn sub(&self, other: &Spectrum<T>) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// Pointwise `|f|² f`.
    pub fn cubed(&self) -> Self {
        let values = self.values.iter().map(|v| v.scale(v.norm_sqr())).collect();
        Self { grid: self.grid.clone(), values }
    }
}

/// `⟨u, v⟩ = Σ u v̄ dx`.
pub fn inner<T: Real>(u: &Field<T>, v: &Field<T>) -> Result<Complex<T>> {
    check_same(&u.grid, &v.grid)?;
    let s = u
        .values
        .iter()
        .zip(&v.values)
        .fold(Complex::default(), |acc, (a, b)| acc + a * b.conj());
    Ok(s.scale(u.grid.dx()))
}

pub fn l2_norm<T: Real>(u: &Field<T>) -> T {
    let s = u.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr());
    (s * u.grid.dx()).sqrt()
}

pub fn linf_norm<T: Real>(u: &Field<T>) -> T {
    u.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
}

/// Multiplies `buf` (raw FFT ordering) by `e^{-itξ²}`.
pub(crate) fn apply_free_symbol<T: Real>(grid: &Grid<T>, buf: &mut [Complex<T>], t: T) {
    for (v, &k) in buf.iter_mut().zip(grid.ks()) {
        let phase = -t * k * k;
        *v = *v * Complex::new(phase.cos(), phase.sin());
    }
}

/// `e^{itΔ} u`, i.e. `F⁻¹[e^{-itξ²} F u]`. Negative `t` runs the flow backwards.
pub fn free_propagate<T: Real>(u: &Field<T>, t: T) -> Field<T> {
    let g = &u.grid;
    let mut buf = u.values.clone();
    let mut scratch = Vec::new();
    g.fft(&mut buf, &mut scratch);
    apply_free_symbol(g, &mut buf, t);
    let inv_n = T::one() / T::from_usize_lossy(g.n());
    for v in buf.iter_mut() {
        *v = v.scale(inv_n);
    }
    g.ifft(&mut buf, &mut scratch);
    Field { grid: g.clone(), values: buf }
}

/// Gaussian probe `ε e^{iv(x-x₀)} exp{-(x-x₀)²/(4σ²)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSpec<T: Real> {
    pub sigma: T,
    pub x0: T,
    pub amplitude: T,
    /// Carrier frequency `v`; the packet travels with group velocity `2v`.
    pub modulation: T,
}

impl<T: Real> ProbeSpec<T> {
    pub fn new(sigma: T, x0: T, amplitude: T) -> Self {
        Self { sigma, x0, amplitude, modulation: T::zero() }
    }

    pub fn with_modulation(mut self, v: T) -> Self {
        self.modulation = v;
        self
    }

    pub fn with_amplitude(mut self, amplitude: T) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn unit(self) -> Self {
        self.with_amplitude(T::one())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("probe sigma must be positive, got {}", self.sigma)));
        }
        if !(self.amplitude >= T::zero()) || !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "probe amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if !self.x0.is_finite() || !self.modulation.is_finite() {
            return Err(Error::InvalidParameter("probe center and modulation must be finite".into()));
        }
        Ok(())
    }

    /// Exact `L²(ℝ)` norm `ε σ^{1/2} (2π)^{1/4}`.
    pub fn l2_norm_exact(&self) -> T {
        self.amplitude * self.sigma.sqrt() * T::TAU().sqrt().sqrt()
    }

    /// Spatial spread of `e^{itΔ}` applied to the probe, measured in standard
    /// deviations of `|u|²`: `σ (1 + t²/σ⁴)^{1/2}` plus the drift `2|v|t`.
    pub fn spread_at(&self, t: T) -> T {
        let s2 = self.sigma * self.sigma;
        self.sigma * (T::one() + (t * t) / (s2 * s2)).sqrt() + T::lit(2.0) * self.modulation.abs() * t
    }

    /// Domain length needed to keep the probe and its free evolution up to time
    /// `t` clear of the periodic boundary: `40 · max(σ, t/σ + 2|v|t)`.
    pub fn required_length(&self, t: T) -> T {
        let reach = t / self.sigma + T::lit(2.0) * self.modulation.abs() * t;
        T::lit(40.0) * self.sigma.max(reach)
    }
}

/// Samples a Gaussian probe on the grid, centered at `x₀` modulo the period.
pub fn gaussian_probe<T: Real>(grid: &Arc<Grid<T>>, spec: &ProbeSpec<T>) -> Result<Field<T>> {
    spec.validate()?;
    // Effective width 4σ must fit ten times into the period.
    if T::lit(4.0) * spec.sigma > grid.length() / T::lit(10.0) {
        return Err(Error::TruncationRisk { sigma: spec.sigma.as_f64(), length: grid.length().as_f64() });
    }
    let four_s2 = T::lit(4.0) * spec.sigma * spec.sigma;
    Ok(Field::from_fn(grid.clone(), |x| {
        let d = grid.wrap(x - spec.x0);
        let env = spec.amplitude * (-(d * d) / four_s2).exp();
        let ph = spec.modulation * d;
        Complex::new(env * ph.cos(), env * ph.sin())
    }))
}
