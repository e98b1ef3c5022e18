use std::sync::Arc;

use nls_lab::solver::default_dt;
use nls_lab::{
    choose_sigma, gaussian_probe, make_grid, operator_distance, Coefficient, Field64, Generator, NonlinearitySpec,
    NormKind, ProbeSpec64, ScatterConfig64, SigmaRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MapModel};
use crate::error::LabResult;
use crate::fit::{fit_log_law, fit_power_law};
use crate::output::RunWriter;

use super::key;
use super::recovery::sweep_one;

const TABLE: &str = "stability_curve";

fn rule_for(p: f64, s: Option<f64>) -> SigmaRule<f64> {
    if p == 2.0 {
        SigmaRule::LogEndpoint
    } else {
        s.map_or_else(|| SigmaRule::holder_for(p), |s| SigmaRule::Holder { s })
    }
}

/// `sup |g|`, sampled finely over the support.
fn sup_abs(g: &Generator<f64>) -> f64 {
    let Some((lo, hi)) = g.support() else { return 0.0 };
    let n = 20_000;
    (0..=n).map(|i| g.eval(lo + (hi - lo) * i as f64 / n as f64).abs()).fold(0.0, f64::max)
}

pub fn run(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    let s = cfg.stability();
    let a = cfg.coefficient().generator();
    let bump = s.perturbation.generator();
    let bump_sup = sup_abs(&bump);
    let lattice = s.centers.list();

    let grid = make_grid(s.distance_grid.n, s.distance_grid.length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [lo, hi] = s.probe_center_range;
    let probes: Vec<Field64> = (0..s.probe_count)
        .map(|_| {
            let x0 = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            gaussian_probe(&grid, &ProbeSpec64::new(s.probe_sigma, x0, s.probe_amplitude))
        })
        .collect::<Result<_, _>>()?;
    // one fixed horizon; the distance is a sampled lower bound, not a limit
    let scfg = ScatterConfig64 {
        dt: default_dt(s.probe_sigma),
        t0: s.distance_horizon,
        t_max: s.distance_horizon,
        tol: 1.0,
        relative: true,
        strict: false,
        ..ScatterConfig64::for_probe(s.probe_sigma)
    };
    let coeff_a = Arc::new(Coefficient::new(a.clone(), grid.clone())?);

    w.table(TABLE, &["p", "delta", "distance", "normalized_distance", "sigma", "eps", "sup_error", "norm_diff", "relative_error"])?;
    for &p in &s.powers {
        let tag = format!("p={}", key(p));
        let spec_a = NonlinearitySpec::power(p, coeff_a.clone())?;
        let distances: Vec<LabResult<f64>> = s
            .deltas
            .par_iter()
            .map(|&d| {
                let b = a.clone().plus(d, bump.clone());
                let spec_b = NonlinearitySpec::power(p, Arc::new(Coefficient::new(b, grid.clone())?))?;
                Ok(operator_distance(&spec_a, &spec_b, &probes, NormKind::L2, &scfg)?.value)
            })
            .collect();
        let distances: Vec<f64> = distances.into_iter().collect::<LabResult<_>>()?;
        let d_max = distances.iter().copied().fold(0.0, f64::max);
        if !(d_max > s.degenerate_below) || bump_sup == 0.0 {
            for (&delta, &d) in s.deltas.iter().zip(&distances) {
                let nan = f64::NAN;
                w.row(TABLE, vec![p.into(), delta.into(), d.into(), nan.into(), nan.into(), nan.into(), nan.into(), (delta * bump_sup).into(), nan.into()])?;
            }
            w.stat(format!("{tag}/max_distance"), d_max);
            w.degenerate(format!("{tag}/power"), "degenerate: measured distances vanish");
            w.degenerate(format!("{tag}/log"), "degenerate: measured distances vanish");
            w.note(format!("{tag}: degenerate, max distance {d_max:.3e}; fit skipped"));
            continue;
        }
        let rule = rule_for(p, s.holder_s);
        let e = rule.exponent();
        // calibrate C so the largest distance maps to sigma_max: σ = C d^e = rule(C^{1/e} d)
        let c = s.sigma_max * (1.0 + s.norm_budget).powf(e) / d_max.powf(e);
        let stretch = c.powf(1.0 / e);
        w.stat(format!("{tag}/sigma_scale"), c);
        let mut rel_curve = Vec::new();
        for (&delta, &d) in s.deltas.iter().zip(&distances) {
            let dn = stretch * d;
            let sigma = choose_sigma(dn, s.norm_budget, rule)?.clamp(s.sigma_min, s.sigma_max);
            let eps = s.eps.eps(sigma);
            let b = a.clone().plus(delta, bump.clone());
            let rep = sweep_one(p, MapModel::Solver, &a, &b, s.pairing.to_core(), sigma, eps, &lattice)?;
            let sup = rep.sup_error.unwrap_or(f64::NAN);
            let norm = delta * bump_sup;
            let rel = sup / norm;
            w.row(TABLE, vec![p.into(), delta.into(), d.into(), dn.into(), sigma.into(), eps.into(), sup.into(), norm.into(), rel.into()])?;
            log::info!("stability p = {p}, delta = {delta}: distance {d:.4e}, sigma {sigma:.4}, relative error {rel:.4e}");
            rel_curve.push((dn, rel));
        }
        w.stat(format!("{tag}/max_distance"), d_max);
        let power = fit_power_law(&rel_curve);
        if let Ok(f) = &power {
            w.stat(format!("{tag}/theta"), f.slope);
        }
        w.try_fit(&format!("{tag}/power"), power);
        w.try_fit(&format!("{tag}/log"), fit_log_law(&rel_curve));
    }
    w.plot(format!(
        "set logscale xy\nset xlabel 'normalized distance'\nset ylabel 'relative error'\nplot '{TABLE}.csv' using 4:9 with linespoints title 'relative sup error'"
    ));
    Ok(())
}
