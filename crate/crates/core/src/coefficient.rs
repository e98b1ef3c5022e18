//! The inhomogeneity `a(x)`: an analytic generator plus samples on a grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Grid;

/// Analytic families of localized coefficients.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator<T: Real> {
    Zero,
    /// `h exp{-(x-c)²/(2w²)}`
    GaussianBump { height: T, width: T, center: T },
    /// Sum of two Gaussian bumps.
    DoubleBump { first: (T, T, T), second: (T, T, T) },
    /// `h exp{1 - 1/(1-r²)}` with `r = |x-c|/R < 1`, zero outside; peak value `h`.
    CompactBump { height: T, radius: T, center: T },
    /// `Σ cᵢ gᵢ(x)`.
    Combination(Vec<(T, Generator<T>)>),
}

fn gaussian<T: Real>(h: T, w: T, c: T, x: T) -> (T, T) {
    let d = x - c;
    let v = h * (-(d * d) / (T::lit(2.0) * w * w)).exp();
    (v, -d / (w * w) * v)
}

impl<T: Real> Generator<T> {
    pub fn gaussian(height: T, width: T, center: T) -> Self {
        Generator::GaussianBump { height, width, center }
    }

    /// `self + c·other`.
    pub fn plus(self, c: T, other: Generator<T>) -> Self {
        Generator::Combination(vec![(T::one(), self), (c, other)])
    }

    pub fn scaled(self, c: T) -> Self {
        Generator::Combination(vec![(c, self)])
    }

    /// Value and derivative at `x`.
    pub fn eval_with_derivative(&self, x: T) -> (T, T) {
        match self {
            Generator::Zero => (T::zero(), T::zero()),
            Generator::GaussianBump { height, width, center } => gaussian(*height, *width, *center, x),
            Generator::DoubleBump { first, second } => {
                let (a, da) = gaussian(first.0, first.1, first.2, x);
                let (b, db) = gaussian(second.0, second.1, second.2, x);
                (a + b, da + db)
            }
            Generator::CompactBump { height, radius, center } => {
                let r = (x - *center) / *radius;
                let r2 = r * r;
                if r2 >= T::one() {
                    return (T::zero(), T::zero());
                }
                let q = T::one() - r2;
                let v = *height * (T::one() - T::one() / q).exp();
                // d/dx exp(1 - 1/q) = exp(..) · (-2r/q²) / R
                let dv = v * (-T::lit(2.0) * r / (q * q)) / *radius;
                (v, dv)
            }
            Generator::Combination(terms) => terms.iter().fold((T::zero(), T::zero()), |(v, d), (c, g)| {
                let (gv, gd) = g.eval_with_derivative(x);
                (v + *c * gv, d + *c * gd)
            }),
        }
    }

    pub fn eval(&self, x: T) -> T {
        self.eval_with_derivative(x).0
    }

    /// Interval outside of which the coefficient is below `1e-17` of its scale,
    /// or `None` for the zero coefficient.
    pub fn support(&self) -> Option<(T, T)> {
        let nine = T::lit(9.0);
        match self {
            Generator::Zero => None,
            Generator::GaussianBump { height, width, center } => {
                (*height != T::zero()).then(|| (*center - nine * *width, *center + nine * *width))
            }
            Generator::DoubleBump { first, second } => {
                let a = Generator::gaussian(first.0, first.1, first.2).support();
                let b = Generator::gaussian(second.0, second.1, second.2).support();
                hull(a, b)
            }
            Generator::CompactBump { height, radius, center } => {
                (*height != T::zero()).then(|| (*center - *radius, *center + *radius))
            }
            Generator::Combination(terms) => terms
                .iter()
                .filter(|(c, _)| *c != T::zero())
                .fold(None, |acc, (_, g)| hull(acc, g.support())),
        }
    }

    /// Smallest length over which the coefficient changes appreciably.
    pub fn length_scale(&self) -> T {
        match self {
            Generator::Zero => T::infinity(),
            Generator::GaussianBump { width, .. } => *width,
            Generator::DoubleBump { first, second } => first.1.min(second.1),
            Generator::CompactBump { radius, .. } => *radius / T::lit(6.0),
            Generator::Combination(terms) => terms
                .iter()
                .filter(|(c, _)| *c != T::zero())
                .fold(T::infinity(), |m, (_, g)| m.min(g.length_scale())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support().is_none()
    }
}

fn hull<T: Real>(a: Option<(T, T)>, b: Option<(T, T)>) -> Option<(T, T)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some((a0, a1)), Some((b0, b1))) => Some((a0.min(b0), a1.max(b1))),
    }
}

/// Norms of `a` computed from grid samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoefficientNorms<T: Real> {
    pub l1: T,
    pub l2: T,
    pub linf: T,
    pub deriv_linf: T,
    pub h1: T,
}

/// A localized coefficient with its samples on a grid.
#[derive(Clone, Debug)]
pub struct Coefficient<T: Real> {
    generator: Generator<T>,
    grid: Arc<Grid<T>>,
    samples: Vec<T>,
    norms: CoefficientNorms<T>,
}

impl<T: Real> Coefficient<T> {
    pub fn new(generator: Generator<T>, grid: Arc<Grid<T>>) -> Result<Self> {
        let (samples, derivs): (Vec<T>, Vec<T>) =
            grid.xs().iter().map(|&x| generator.eval_with_derivative(x)).unzip();
        let peak = samples.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let edge = samples[0].abs().max(samples[samples.len() - 1].abs());
        if peak > T::zero() && edge > peak * T::lit(1e-12).max(T::tolerance_floor()) {
            return Err(Error::CoefficientNotLocalized { edge_value: edge.as_f64() });
        }
        let dx = grid.dx();
        let l1 = samples.iter().fold(T::zero(), |s, v| s + v.abs()) * dx;
        let l2sq = samples.iter().fold(T::zero(), |s, v| s + *v * *v) * dx;
        let d2sq = derivs.iter().fold(T::zero(), |s, v| s + *v * *v) * dx;
        let deriv_linf = derivs.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let norms = CoefficientNorms { l1, l2: l2sq.sqrt(), linf: peak, deriv_linf, h1: (l2sq + d2sq).sqrt() };
        Ok(Self { generator, grid, samples, norms })
    }

    pub fn zero(grid: Arc<Grid<T>>) -> Self {
        let samples = vec![T::zero(); grid.n()];
        Self { generator: Generator::Zero, grid, samples, norms: CoefficientNorms::default() }
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.generator
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn norms(&self) -> &CoefficientNorms<T> {
        &self.norms
    }

    /// Analytic value at any `x` (not restricted to the grid).
    pub fn eval(&self, x: T) -> T {
        self.generator.eval(x)
    }

    pub fn is_zero(&self) -> bool {
        self.generator.is_zero()
    }

    /// Same generator sampled on another grid.
    pub fn resampled(&self, grid: Arc<Grid<T>>) -> Result<Self> {
        Self::new(self.generator.clone(), grid)
    }

    /// `‖a‖_{L^q}` for `q ≥ 1` (`q = ∞` allowed).
    pub fn lq_norm(&self, q: T) -> T {
        if q.is_infinite() {
            return self.norms.linf;
        }
        let s = self.samples.iter().fold(T::zero(), |s, v| s + v.abs().powf(q)) * self.grid.dx();
        s.powf(T::one() / q)
    }

    /// `‖a‖_{W^{1,∞}} + ‖a‖_{L^{2/(4-p)}}`, the norm controlling the Hölder regime.
    pub fn holder_norm(&self, p: T) -> T {
        let four = T::lit(4.0);
        let q = if p >= four { T::infinity() } else { T::lit(2.0) / (four - p) };
        self.norms.linf + self.norms.deriv_linf + self.lq_norm(q)
    }

    /// `‖a‖_{L¹} + ‖a‖_{H¹}`, the norm controlling the logarithmic regime.
    pub fn log_norm(&self) -> T {
        self.norms.l1 + self.norms.h1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_norms_match_closed_forms() {
        let g = make_grid(2048, 80.0).unwrap();
        let a = Coefficient::new(Generator::gaussian(0.5, 1.5, 2.0), g).unwrap();
        let n = a.norms();
        let w = 1.5;
        assert!((n.l1 - 0.5 * w * (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((n.l2 - (0.25 * w * PI.sqrt()).sqrt()).abs() < 1e-12);
        assert!((n.linf - 0.5).abs() < 1e-3);
        // max |a'| = h/(w √e)
        assert!((n.deriv_linf - 0.5 / (w * 1f64.exp().sqrt())).abs() < 1e-3);
        // ‖a'‖² = h² √π /(2w)
        let d2 = 0.25 * PI.sqrt() / (2.0 * w);
        assert!((n.h1 - (n.l2 * n.l2 + d2).sqrt()).abs() < 1e-12);
        assert!((a.lq_norm(2.0) - n.l2).abs() < 1e-12);
    }

    #[test]
    fn compact_bump_vanishes_outside() {
        let gen = Generator::<f64>::CompactBump { height: 2.0, radius: 1.0, center: 0.5 };
        assert_eq!(gen.eval(1.5), 0.0);
        assert_eq!(gen.eval(-0.6), 0.0);
        assert!((gen.eval(0.5) - 2.0).abs() < 1e-15);
        let (_, d) = gen.eval_with_derivative(0.9);
        let fd = (gen.eval(0.9 + 1e-6) - gen.eval(0.9 - 1e-6)) / 2e-6;
        assert!((d - fd).abs() < 1e-6);
    }

    #[test]
    fn combination_is_linear() {
        let a = Generator::<f64>::gaussian(1.0, 1.0, 0.0);
        let b = Generator::DoubleBump { first: (0.3, 0.5, -1.0), second: (0.2, 0.7, 1.5) };
        let c = a.clone().plus(2.5, b.clone());
        for &x in &[-2.0, -0.3, 0.0, 1.1, 3.0] {
            assert!((c.eval(x) - (a.eval(x) + 2.5 * b.eval(x))).abs() < 1e-15);
        }
        assert_eq!(c.support(), Some((-9.0, 9.0)));
        assert_eq!(c.length_scale(), 0.5);
    }

    #[test]
    fn zero_coefficient() {
        let g = make_grid(64, 10.0).unwrap();
        let z = Coefficient::<f64>::zero(g.clone());
        assert!(z.is_zero());
        assert_eq!(z.norms().h1, 0.0);
        let scaled_zero = Coefficient::new(Generator::gaussian(1.0, 1.0, 0.0).scaled(0.0), g).unwrap();
        assert!(scaled_zero.is_zero());
    }

    #[test]
    fn unlocalized_coefficient_is_rejected() {
        let g = make_grid(128, 10.0).unwrap();
        let err = Coefficient::new(Generator::gaussian(1.0, 3.0, 0.0), g).unwrap_err();
        assert!(matches!(err, Error::CoefficientNotLocalized { .. }));
    }
}
