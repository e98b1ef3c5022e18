use std::sync::Arc;

use nls_lab::{make_grid, scattering_map_probe, Coefficient, NonlinearitySpec, ProbeSpec64, ScatterConfig64, ScatterRecord};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ScatterCase};
use crate::error::LabResult;
use crate::output::RunWriter;

use super::{key, strictly_decreasing};

const TABLE: &str = "scatter_convergence";

fn scatter_cfg(cfg: &ExperimentConfig, case: &ScatterCase) -> ScatterConfig64 {
    let s = cfg.scatter();
    let mut sc = ScatterConfig64::for_probe(case.sigma);
    if let Some(t0) = s.t0 {
        sc.t0 = t0;
        sc.t_max = 512.0 * t0;
    }
    if let Some(tm) = s.t_max {
        sc.t_max = tm;
    }
    if let Some(dt) = s.dt {
        sc.dt = dt;
    }
    sc.tol = s.tol;
    sc.relative = s.relative;
    sc.eta = s.eta;
    sc.domain_factor = s.domain_factor;
    sc.strict = s.strict;
    sc
}

fn run_case(cfg: &ExperimentConfig, case: &ScatterCase) -> LabResult<ScatterRecord<f64>> {
    let s = cfg.scatter();
    let grid = make_grid(s.grid.n, s.grid.length)?;
    let coeff = Coefficient::new(cfg.coefficient().generator(), grid)?;
    let spec = NonlinearitySpec::power(case.p, Arc::new(coeff))?;
    let probe = ProbeSpec64::new(case.sigma, case.x0, case.amplitude);
    Ok(scattering_map_probe(&probe, &spec, &scatter_cfg(cfg, case))?)
}

pub fn run(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    let s = cfg.scatter();
    w.table(TABLE, &["case", "p", "amplitude", "sigma", "x0", "horizon", "gap", "converged"])?;
    let results: Vec<LabResult<ScatterRecord<f64>>> = s.cases.par_iter().map(|c| run_case(cfg, c)).collect();
    let mut failure = None;
    for (i, (case, res)) in s.cases.iter().zip(results).enumerate() {
        let rec = match res {
            Ok(r) => r,
            Err(e) => {
                w.note(format!("case {i} (p = {}, amplitude = {}) failed: {e}", case.p, case.amplitude));
                failure.get_or_insert(e);
                continue;
            }
        };
        for &(t, gap) in &rec.horizons {
            w.row(
                TABLE,
                vec![i.into(), case.p.into(), case.amplitude.into(), case.sigma.into(), case.x0.into(), t.into(), gap.into(), rec.converged.into()],
            )?;
        }
        let gaps: Vec<f64> = rec.horizons.iter().map(|h| h.1).collect();
        let last = gaps.last().copied().unwrap_or(f64::NAN);
        let monotone = strictly_decreasing(&gaps);
        let tag = format!("p={}/amplitude={}", key(case.p), key(case.amplitude));
        w.stat(format!("{tag}/final_gap"), last);
        w.stat(format!("{tag}/horizon"), rec.horizon);
        w.stat(format!("{tag}/horizons"), gaps.len() as f64);
        w.check(format!("{tag} converged"), rec.converged && last < s.tol, format!("final gap {last:.3e} at T = {}", rec.horizon));
        w.check(format!("{tag} monotone"), monotone, format!("{} gaps", gaps.len()));
    }
    w.plot(format!(
        "set logscale xy\nset xlabel 'horizon'\nset ylabel 'gap'\nplot for [c=0:{}] '{TABLE}.csv' using ($1==c?$6:1/0):7 with linespoints title sprintf('case %d', c)",
        s.cases.len().saturating_sub(1)
    ));
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
