//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Improper integrals are handled by the callers through changes of variables
//! (`t = tan θ`, `t = sinh u`, `t = e^y`), which keep every integrand used in
//! this crate smooth on a finite interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> T;
}

impl<T: Real> QuadValue<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn magnitude(&self) -> T {
        self.abs()
    }
}

impl<T: Real> QuadValue<T> for Complex<T> {
    fn zero() -> Self {
        Complex::default()
    }
    fn magnitude(&self) -> T {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 0.0, max_evals: 1_000_000 }
    }
}

impl QuadratureConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<V> {
    pub value: V,
    /// Sum of `|K15 - G7|` over the final partition.
    pub error: f64,
    pub evals: usize,
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 15-point Kronrod panel, returning `(K15, |K15 - G7|)`.
pub fn kronrod_panel<T, V, F>(f: &mut F, a: T, b: T) -> (V, T)
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let center = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).magnitude())
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`;
/// fails with [`Error::QuadratureBudgetExceeded`] when `max_evals` runs out first.
pub fn integrate<T, V, F>(mut f: F, a: T, b: T, cfg: &QuadratureConfig) -> Result<QuadResult<V>>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    if a == b {
        return Ok(QuadResult { value: V::zero(), error: 0.0, evals: 0 });
    }
    let (value, error) = kronrod_panel(&mut f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a: a.as_f64(), b: b.as_f64(), value, error: error.as_f64() });
    let mut total = value;
    let mut total_err = error.as_f64();
    // Floor below which splitting cannot help.
    let floor = T::epsilon().as_f64() * 50.0;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.magnitude().as_f64());
        if total_err <= target {
            break;
        }
        if evals + 30 > cfg.max_evals {
            return Err(Error::QuadratureBudgetExceeded { budget: cfg.max_evals, error: total_err });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() <= floor * (worst.a.abs() + worst.b.abs()).max(1e-300) {
            // Cannot refine further at this precision; accept what we have.
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod_panel(&mut f, T::lit(worst.a), T::lit(mid));
        let (rv, re) = kronrod_panel(&mut f, T::lit(mid), T::lit(worst.b));
        evals += 30;
        total = total - worst.value + lv + rv;
        total_err = total_err - worst.error + le.as_f64() + re.as_f64();
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le.as_f64() });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re.as_f64() });
        // Periodically resum to shed accumulated cancellation error.
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(V::zero(), |acc, p| acc + p.value);
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let value = heap.iter().fold(V::zero(), |acc, p| acc + p.value);
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, evals })
}

/// Composite 15-point Kronrod rule on `panels` equal subintervals.
pub fn integrate_uniform<T, V, F>(mut f: F, a: T, b: T, panels: usize) -> V
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let h = (b - a) / T::from_usize_lossy(panels);
    (0..panels).fold(V::zero(), |acc, i| {
        let lo = a + h * T::from_usize_lossy(i);
        acc + kronrod_panel(&mut f, lo, lo + h).0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        let r: QuadResult<f64> =
            integrate(|x: f64| x.powi(6) - 2.0 * x, 0.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.evals, 15);
    }

    #[test]
    fn arctan_integral() {
        let cfg = QuadratureConfig::with_tolerances(1e-13, 0.0);
        let r: QuadResult<f64> = integrate(|x: f64| 1.0 / (1.0 + x * x), 0.0, 50.0, &cfg).unwrap();
        assert!((r.value - 50f64.atan()).abs() < 1e-12);
        assert!(r.error <= 1e-13);
    }

    #[test]
    fn peaked_integrand_is_refined() {
        let cfg = QuadratureConfig::with_tolerances(1e-12, 0.0);
        let r: QuadResult<f64> =
            integrate(|x: f64| (-(x - 0.3).powi(2) / 1e-3).exp(), -1.0, 1.0, &cfg).unwrap();
        assert!((r.value - (PI * 1e-3).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        let cfg = QuadratureConfig::with_tolerances(1e-12, 0.0);
        let r: QuadResult<Complex<f64>> =
            integrate(|x: f64| Complex::new(0.0, 20.0 * x).exp(), 0.0, PI, &cfg).unwrap();
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = QuadratureConfig { abs_tol: 1e-15, rel_tol: 0.0, max_evals: 100 };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureBudgetExceeded { budget: 100, .. })));
    }

    #[test]
    fn uniform_rule_converges() {
        let a: f64 = integrate_uniform(|x: f64| x.exp(), 0.0, 1.0, 4);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn works_in_f32() {
        let cfg = QuadratureConfig::with_tolerances(1e-5, 0.0);
        let r: QuadResult<f32> = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &cfg).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}
