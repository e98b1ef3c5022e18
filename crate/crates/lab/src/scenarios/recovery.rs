use nls_lab::kernels::{lambda_p, log_coefficient};
use nls_lab::{recover_lattice, BornMap, Generator, RecoveryMode, RecoveryReport, SolverMap};

use crate::config::{ExperimentConfig, MapModel};
use crate::error::LabResult;
use crate::fit::{fit_log_law, fit_power_law};
use crate::output::RunWriter;

use super::{fmt_list, key, strictly_decreasing};

const POINTS: &str = "recovery_sweep";
const ERRORS: &str = "recovery_sweep_errors";

pub fn mode_for(p: f64) -> RecoveryMode {
    if p == 2.0 {
        RecoveryMode::LogEndpoint
    } else {
        RecoveryMode::Holder
    }
}

/// Factor turning an estimate error into the `σ³`-normalized pairing remainder.
fn remainder_scale(p: f64, sigma: f64) -> LabResult<f64> {
    Ok(if p == 2.0 { log_coefficient::<f64>() * sigma.ln().abs() } else { lambda_p(p)? })
}

pub(crate) fn sweep_one(
    p: f64,
    model: MapModel,
    a: &Generator<f64>,
    b: &Generator<f64>,
    pairing: nls_lab::PairingConfig64,
    sigma: f64,
    eps: f64,
    lattice: &[f64],
) -> LabResult<RecoveryReport<f64>> {
    let truth = a.clone().plus(-1.0, b.clone());
    let mode = mode_for(p);
    Ok(match model {
        MapModel::Solver => {
            let map = if b.is_zero() {
                SolverMap::new(p, a.clone())
            } else {
                SolverMap::difference(p, a.clone(), b.clone())
            }
            .with_config(pairing);
            recover_lattice(&map, mode, sigma, lattice, Some(eps), Some(&truth))?
        }
        MapModel::Born => {
            let map = BornMap::new(p, truth.clone())?;
            recover_lattice(&map, mode, sigma, lattice, Some(eps), Some(&truth))?
        }
    })
}

pub fn run(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    let r = cfg.recovery();
    let a = cfg.coefficient().generator();
    let b = r.reference.generator();
    let lattice = r.centers.list();
    w.table(POINTS, &["p", "sigma", "eps", "x0", "estimate", "truth", "error", "imag_residue", "remainder"])?;
    w.table(ERRORS, &["p", "sigma", "eps", "sup_error", "sup_remainder", "mean_imag_residue"])?;
    for &p in &r.powers {
        let mut curve = Vec::new();
        for &sigma in &r.sigmas {
            let eps = r.eps.eps(sigma);
            let rep = sweep_one(p, r.model, &a, &b, r.pairing.to_core(), sigma, eps, &lattice)?;
            let scale = remainder_scale(p, sigma)?;
            let truth = rep.truth.clone().unwrap_or_default();
            let mut sup_rem = 0.0f64;
            let mut imag = 0.0;
            for i in 0..rep.estimates.len() {
                let err = rep.estimates[i] - truth[i];
                sup_rem = sup_rem.max((err * scale).abs());
                imag += rep.imag_residues[i].abs();
                w.row(
                    POINTS,
                    vec![
                        p.into(),
                        sigma.into(),
                        eps.into(),
                        rep.x0_lattice[i].into(),
                        rep.estimates[i].into(),
                        truth[i].into(),
                        err.into(),
                        rep.imag_residues[i].into(),
                        (err * scale).into(),
                    ],
                )?;
            }
            let sup = rep.sup_error.unwrap_or(f64::NAN);
            let mean_imag = imag / rep.estimates.len() as f64;
            w.row(ERRORS, vec![p.into(), sigma.into(), eps.into(), sup.into(), sup_rem.into(), mean_imag.into()])?;
            let tag = format!("p={}/sigma={}", key(p), key(sigma));
            w.stat(format!("{tag}/sup_error"), sup);
            w.stat(format!("{tag}/sup_remainder"), sup_rem);
            log::info!("recovery p = {p}, sigma = {sigma}: sup error {sup:.4e}");
            curve.push((sigma, sup));
        }
        let tag = format!("p={}", key(p));
        let errs: Vec<f64> = curve.iter().map(|c| c.1).collect();
        let monotone = strictly_decreasing(&errs);
        w.check(format!("{tag} sup error decreasing"), monotone, fmt_list(&errs));
        w.try_fit(&format!("{tag}/power"), fit_power_law(&curve));
        w.try_fit(&format!("{tag}/log"), fit_log_law(&curve));
    }
    w.plot(format!(
        "set logscale xy\nset xlabel 'sigma'\nset ylabel 'sup error'\nplot '{ERRORS}.csv' using 2:4 with linespoints title 'sup error'"
    ));
    Ok(())
}
