//! Least-squares fits of error curves.

use serde::Serialize;

use crate::error::{LabError, LabResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `log y = slope · log x + intercept`.
    PowerLaw,
    /// `y = slope / |log x| + intercept`.
    LogLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub model: FitModel,
}

fn degenerate(msg: impl Into<String>) -> LabError {
    LabError::DegenerateFit(msg.into())
}

fn check_abscissae(points: &[(f64, f64)]) -> LabResult<()> {
    if points.len() < 4 {
        return Err(degenerate(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(degenerate("non-finite sample"));
    }
    if points.iter().any(|(x, _)| *x <= 0.0) {
        return Err(degenerate("abscissae must be positive"));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    // one decade, up to rounding in the caller's schedule
    if (hi / lo).log10() < 1.0 - 1e-9 {
        return Err(degenerate(format!("x spans {:.3} decades, need at least 1", (hi / lo).log10())));
    }
    Ok(())
}

fn linear(xs: &[f64], ys: &[f64], model: FitModel) -> LabResult<FitResult> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(degenerate("transformed abscissae do not vary"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult { slope, intercept, r_squared, model })
}

/// Fits `log y` against `log x`. Needs 4+ points, positive data and a decade of `x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> LabResult<FitResult> {
    check_abscissae(points)?;
    if points.iter().any(|(_, y)| *y <= 0.0) {
        return Err(degenerate("power-law fit needs positive values"));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    linear(&xs, &ys, FitModel::PowerLaw)
}

/// Fits `y` against `1/|log x|`.
pub fn fit_log_law(points: &[(f64, f64)]) -> LabResult<FitResult> {
    check_abscissae(points)?;
    if points.iter().any(|(x, _)| *x == 1.0) {
        return Err(degenerate("log-law fit is singular at x = 1"));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| 1.0 / x.ln().abs()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    linear(&xs, &ys, FitModel::LogLaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xs() -> Vec<f64> {
        (0..8).map(|i| 0.3 * 0.5f64.powi(i)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = xs().into_iter().map(|x| (x, x.powf(0.3))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.slope - 0.3).abs() < 1e-10);
        assert!(f.intercept.abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_log_law() {
        let pts: Vec<_> = xs().into_iter().map(|x| (x, 1.0 / x.ln().abs())).collect();
        let f = fit_log_law(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-10);
        assert!(f.intercept.abs() < 1e-10);
        assert_eq!(f.model, FitModel::LogLaw);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..40)
            .map(|i| {
                let x = 10f64.powf(-3.0 + 3.0 * i as f64 / 39.0);
                (x, 2.0 * x.powf(0.7) * (1.0 + rng.gen_range(-0.05..0.05)))
            })
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.slope - 0.7).abs() < 0.05, "{f:?}");
        assert!(f.r_squared > 0.95);
    }

    #[test]
    fn degenerate_inputs() {
        let few = [(0.1, 1.0), (0.01, 2.0), (0.001, 3.0)];
        assert!(matches!(fit_power_law(&few), Err(LabError::DegenerateFit(_))));
        let narrow: Vec<_> = (0..5).map(|i| (1.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(fit_power_law(&narrow), Err(LabError::DegenerateFit(_))));
        let neg = [(0.1, 1.0), (0.01, -2.0), (0.001, 3.0), (0.0001, 1.0)];
        assert!(fit_power_law(&neg).is_err());
        assert!(fit_log_law(&neg).is_ok());
    }
}
