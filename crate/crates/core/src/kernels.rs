//! Quadratures behind the small-data asymptotics.
//!
//! * `λ(p) = π (p+2)^{-1/2} Γ(p/4 - 1/2) / Γ(p/4)`, the constant with
//!   `∫₀^∞∫ |e^{itΔ}φ_σ|^{p+2} dx dt = σ³ λ(p)` for `φ_σ = exp{-x²/(4σ²)}`.
//! * `K(x) = ∫₀^∞ (1+t²)^{-1} exp{-x²/(1+t²)} dt` and its transform
//!   `K̂(ξ) = 2^{-1/2} ∫₀^∞ (1+t²)^{-1/2} exp{-ξ²(1+t²)/4} dt`, which behaves
//!   like `2^{-1/2} log(1/|ξ|)` at the origin.
//! * The Born functional `∫₀^∞∫ a(x) |e^{itΔ}φ|^{p+2} dx dt`, evaluated from the
//!   exact modulus of the freely evolved Gaussian.
//! * `Q_ε`, the cubic remainder of the modified map for Gaussian data.

use num_complex::Complex;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::quadrature::{integrate, QuadResult, QuadratureConfig};
use crate::scalar::Real;
use crate::spectral::ProbeSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMethod {
    ClosedForm,
    AdaptiveQuadrature,
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEval<T: Real> {
    pub value: T,
    pub abs_error_estimate: T,
    pub method: EvalMethod,
    /// For `K̂` with `|ξ| ≤ 1`: `K̂(ξ) - 2^{-1/2} log(1/|ξ|)`.
    pub log_residual: Option<T>,
}

impl<T: Real> KernelEval<T> {
    fn quadrature(r: QuadResult<T>) -> Self {
        Self {
            value: r.value,
            abs_error_estimate: T::lit(r.error),
            method: EvalMethod::AdaptiveQuadrature,
            log_residual: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEval<T: Real> {
    pub value: Complex<T>,
    pub abs_error_estimate: T,
}

fn kernel_cfg() -> QuadratureConfig {
    QuadratureConfig::with_tolerances(1e-13, 0.0)
}

/// `λ(p)` for `p ∈ (2, 4]`.
pub fn lambda_p<T: Real>(p: T) -> Result<T> {
    if !(p > T::lit(2.0)) {
        return Err(Error::PoleAtTwo(p.as_f64()));
    }
    if p > T::lit(4.0) {
        return Err(Error::OutOfRange { name: "p", value: p.as_f64(), range: "(2, 4]" });
    }
    let q = p / T::lit(4.0);
    Ok(T::PI() / (p + T::lit(2.0)).sqrt() * gamma(q - T::lit(0.5)) / gamma(q))
}

/// `∫₀^∞∫ (1+t²)^{-(p+2)/4} exp{-(p+2)x²/(4(1+t²))} dx dt` by nested quadrature.
///
/// Independent of the Γ-function route; used to cross-check [`lambda_p`].
pub fn lambda_p_quadrature<T: Real>(p: T, cfg: &QuadratureConfig) -> Result<KernelEval<T>> {
    if !(p > T::lit(2.0)) {
        return Err(Error::PoleAtTwo(p.as_f64()));
    }
    if p > T::lit(4.0) {
        return Err(Error::OutOfRange { name: "p", value: p.as_f64(), range: "(2, 4]" });
    }
    let two = T::lit(2.0);
    let c2 = (p + two) / T::lit(4.0);
    // t = tan θ, θ = π/2 - ψ^k: the endpoint singularity cos^{(p-4)/2} θ becomes smooth.
    let k = two / (p - two);
    let psi_max = T::FRAC_PI_2().powf(T::one() / k);
    let mut inner_err = 0.0f64;
    let inner_cfg = QuadratureConfig { abs_tol: cfg.abs_tol * 1e-2, ..*cfg };
    let mut failure = None;
    let outer = integrate(
        |psi: T| {
            if psi == T::zero() {
                return T::zero();
            }
            let phi = psi.powf(k);
            let c = phi.sin(); // cos θ
            let sec2 = T::one() / (c * c);
            // ∫ exp{-(p+2) x² cos²θ / 4} dx over ℝ, numerically, in the variable y = x cos θ
            let cut = T::lit(40.0) / c2.sqrt();
            let g = match integrate(|y: T| (-c2 * y * y).exp(), T::zero(), cut, &inner_cfg) {
                Ok(r) => {
                    inner_err += r.error;
                    two * r.value / c
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            };
            let envelope = c.powf(two * c2);
            sec2 * envelope * g * k * psi.powf(k - T::one())
        },
        T::zero(),
        psi_max,
        cfg,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut eval = KernelEval::quadrature(outer);
    eval.abs_error_estimate = eval.abs_error_estimate + T::lit(inner_err / outer.evals.max(1) as f64);
    Ok(eval)
}

/// `K(x) = ∫₀^{π/2} exp{-x² cos²θ} dθ` (the `t = tan θ` form).
pub fn kernel_k<T: Real>(x: T) -> Result<KernelEval<T>> {
    kernel_k_with(x, &kernel_cfg())
}

pub fn kernel_k_with<T: Real>(x: T, cfg: &QuadratureConfig) -> Result<KernelEval<T>> {
    if x == T::zero() {
        return Ok(KernelEval {
            value: T::FRAC_PI_2(),
            abs_error_estimate: T::zero(),
            method: EvalMethod::ClosedForm,
            log_residual: None,
        });
    }
    let x2 = x * x;
    let r = integrate(
        |th: T| {
            let c = th.cos();
            (-x2 * c * c).exp()
        },
        T::zero(),
        T::FRAC_PI_2(),
        cfg,
    )?;
    Ok(KernelEval::quadrature(r))
}

/// `K̂(ξ) = 2^{-1/2} ∫₀^∞ exp{-ξ² cosh²u / 4} du` (the `t = sinh u` form).
pub fn kernel_k_hat<T: Real>(xi: T) -> Result<KernelEval<T>> {
    kernel_k_hat_with(xi, &kernel_cfg())
}

pub fn kernel_k_hat_with<T: Real>(xi: T, cfg: &QuadratureConfig) -> Result<KernelEval<T>> {
    if xi == T::zero() {
        return Err(Error::DivergentAtZero);
    }
    let a = xi * xi / T::lit(4.0);
    // Beyond u_max the integrand is below e^{-40}.
    let cut = T::lit(40.0);
    let u_max = (cut / a).sqrt().max(T::one()).acosh().max(T::one());
    let r = integrate(
        |u: T| {
            let c = u.cosh();
            (-a * c * c).exp()
        },
        T::zero(),
        u_max,
        cfg,
    )?;
    let s = T::FRAC_1_SQRT_2();
    let value = s * r.value;
    let tail = (-cut).exp();
    let log_residual = (xi.abs() <= T::one()).then(|| value - s * (T::one() / xi.abs()).ln());
    Ok(KernelEval {
        value,
        abs_error_estimate: s * (T::lit(r.error) + tail),
        method: EvalMethod::AdaptiveQuadrature,
        log_residual,
    })
}

/// Leading coefficient `c` in `∫₀^∞∫ a |e^{itΔ}φ_σ|⁴ dx dt = c σ³ |log σ| a(x₀) + O(σ³)`.
///
/// Equals `√π`, i.e. `√(2π)` times the `2^{-1/2}` that multiplies the
/// logarithm of `K̂`: the Parseval step carries the transform normalisation.
pub fn log_coefficient<T: Real>() -> T {
    T::PI().sqrt()
}

/// `∫₀^∞∫ a(x) |e^{itΔ}φ|^{p+2} dx dt` for the unit-amplitude probe.
pub fn born_functional<T: Real>(coeff: &Coefficient<T>, probe: &ProbeSpec<T>, p: T) -> Result<T> {
    Ok(born_window(coeff, probe, p, T::zero(), T::infinity())?.value)
}

/// The Born functional restricted to `t ∈ [t_lo, t_hi]` (`t_hi` may be `∞`).
///
/// Uses `t = σ² tan θ`; the x-integral is a trapezoid sum of the analytic
/// coefficient against the explicit Gaussian envelope, on a step resolving
/// both the envelope and the coefficient.
pub fn born_window<T: Real>(
    coeff: &Coefficient<T>,
    probe: &ProbeSpec<T>,
    p: T,
    t_lo: T,
    t_hi: T,
) -> Result<KernelEval<T>> {
    probe.validate()?;
    if !(p >= T::lit(2.0) && p <= T::lit(4.0)) {
        return Err(Error::OutOfRange { name: "p", value: p.as_f64(), range: "[2, 4]" });
    }
    if !(t_lo >= T::zero()) || !(t_hi >= t_lo) {
        return Err(Error::InvalidParameter(format!("bad time window [{t_lo}, {t_hi}]")));
    }
    let zero = KernelEval {
        value: T::zero(),
        abs_error_estimate: T::zero(),
        method: EvalMethod::ClosedForm,
        log_residual: None,
    };
    let Some((s_lo, s_hi)) = coeff.generator().support() else {
        return Ok(zero);
    };
    if t_lo == t_hi {
        return Ok(zero);
    }
    let gen = coeff.generator();
    let ell = gen.length_scale();
    let sigma = probe.sigma;
    let s2 = sigma * sigma;
    let two = T::lit(2.0);
    let pp2 = p + two;
    let th_lo = (t_lo / s2).atan();
    let th_hi = if t_hi.is_infinite() { T::FRAC_PI_2() } else { (t_hi / s2).atan() };
    let v = probe.modulation;
    let weight_pow = (p - two) / two;
    let integrand = |th: T| -> T {
        let c = th.cos();
        if c <= T::zero() {
            return T::zero();
        }
        let tau = th.tan();
        let center = probe.x0 + two * v * s2 * tau;
        // standard deviation of exp{-(p+2)(x-c)²/(4σ²(1+τ²))}
        let sd = sigma / c * (two / pp2).sqrt();
        let reach = T::lit(10.0) * sd;
        let lo = (center - reach).max(s_lo);
        let hi = (center + reach).min(s_hi);
        if !(hi > lo) {
            return T::zero();
        }
        let h = sd.min(ell) / T::lit(8.0);
        let n = ((hi - lo) / h).ceil().to_usize().unwrap_or(1).max(2);
        let h = (hi - lo) / T::from_usize_lossy(n);
        let inv = T::one() / (two * sd * sd);
        let mut acc = T::zero();
        for i in 0..=n {
            let x = lo + h * T::from_usize_lossy(i);
            let d = x - center;
            let w = if i == 0 || i == n { T::lit(0.5) } else { T::one() };
            acc = acc + w * gen.eval(x) * (-(d * d) * inv).exp();
        }
        s2 * c.powf(weight_pow) * acc * h
    };
    let scale = s2 * sigma * coeff.norms().linf.max(T::tolerance_floor());
    let cfg = QuadratureConfig {
        abs_tol: (scale * T::lit(1e-13)).as_f64(),
        rel_tol: 1e-10,
        max_evals: 1_000_000,
    };
    let r = integrate(integrand, th_lo, th_hi, &cfg)?;
    Ok(KernelEval::quadrature(r))
}

/// Reduced `(η, t)` integrand of `Q_ε` for `φ = exp{-(x-x₀)²/(4σ²)}`, after the
/// `z` and `s` integrations:
///
/// `(1/2it) · σ√π e^{-η²/(4σ²)} · 2σ√π [exp{-σ²η²/(4t²)} - 1]`, returned
/// without the leading `1/i` (the result is purely imaginary).
fn q_reduced<T: Real>(sigma: T, eta: T, t: T) -> T {
    let pi = T::PI();
    let four = T::lit(4.0);
    let s2 = sigma * sigma;
    let bracket = (-(s2 * eta * eta) / (four * t * t)).exp_m1();
    pi * s2 / t * (-(eta * eta) / (four * s2)).exp() * bracket
}

/// `Q_ε[φ]` for a Gaussian probe, by adaptive quadrature in `(η, t)`.
///
/// The `z`-integral (a product of four shifted Gaussians) and the `s`-integral
/// (a Gaussian against the oscillatory factor) are done in closed form; the
/// remaining integral over `t ∈ [ε, ∞)` uses `t = ε/u`. Modulation cancels in
/// the quartic product, and the amplitude enters as `A⁴`.
pub fn q_epsilon<T: Real>(probe: &ProbeSpec<T>, eps: T) -> Result<ComplexEval<T>> {
    probe.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let sigma = probe.sigma;
    let scale = sigma * sigma * sigma;
    let eta_max = T::lit(24.0) * sigma;
    let inner_cfg = QuadratureConfig { abs_tol: (scale * T::lit(1e-14)).as_f64(), rel_tol: 1e-12, max_evals: 200_000 };
    let outer_cfg = QuadratureConfig { abs_tol: (scale * T::lit(1e-11)).as_f64(), rel_tol: 1e-10, max_evals: 200_000 };
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let outer = integrate(
        |u: T| {
            if u == T::zero() {
                return T::zero();
            }
            let t = eps / u;
            match integrate(|eta: T| q_reduced(sigma, eta, t), T::zero(), eta_max, &inner_cfg) {
                Ok(r) => {
                    inner_err = inner_err.max(r.error);
                    // even in η; dt = ε du / u²
                    T::lit(2.0) * r.value * eps / (u * u)
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        },
        T::zero(),
        T::one(),
        &outer_cfg,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let a4 = probe.amplitude.powi(4);
    // the reduced integrand omitted 1/i = -i
    Ok(ComplexEval {
        value: Complex::new(T::zero(), -outer.value * a4),
        abs_error_estimate: (T::lit(outer.error) + T::lit(2.0 * inner_err) * eps) * a4,
    })
}

/// Closed form `Q_ε = -2iπ^{3/2} σ³ A⁴ [log 2 - asinh(ε/σ²) + log(ε/σ²)]`.
pub fn q_epsilon_closed_form<T: Real>(probe: &ProbeSpec<T>, eps: T) -> Complex<T> {
    let sigma = probe.sigma;
    let r0 = eps / (sigma * sigma);
    let bracket = T::LN_2() - r0.asinh() + r0.ln();
    let c = T::lit(2.0) * T::PI().powf(T::lit(1.5)) * sigma.powi(3) * probe.amplitude.powi(4);
    Complex::new(T::zero(), -c * bracket)
}
