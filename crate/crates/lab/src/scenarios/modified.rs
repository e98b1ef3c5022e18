use nls_lab::{modified_structure, recover_lattice_modified, ModifiedSolverPair, ProbeSpec64};

use crate::config::ExperimentConfig;
use crate::error::LabResult;
use crate::fit::{fit_log_law, fit_power_law};
use crate::output::RunWriter;

use super::{fmt_list, key, strictly_decreasing};

const RECOVERY: &str = "modified_structure";
const RESIDUAL: &str = "modified_structure_residual";

pub fn run(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    let m = cfg.modified();
    let a = cfg.coefficient().generator();
    let b = m.reference.generator();
    let lattice = m.centers.list();
    let pairing = m.pairing.to_core();
    w.table(RECOVERY, &["part", "sigma", "eps", "x0", "estimate", "truth", "error", "imag_residue"])?;

    // a = b: every estimate should vanish
    let same = ModifiedSolverPair { eta_h11: m.eta_h11, ..ModifiedSolverPair::new(a.clone(), a.clone()).with_config(pairing) };
    let mut control = 0.0f64;
    for &sigma in &m.control_sigmas {
        let eps = m.eps.eps(sigma);
        let rep = recover_lattice_modified(&same, sigma, &lattice, Some(eps), None)?;
        for (x0, v) in rep.x0_lattice.iter().zip(&rep.estimates) {
            control = control.max(v.abs());
            w.row(RECOVERY, vec!["control".into(), sigma.into(), eps.into(), (*x0).into(), (*v).into(), 0.0.into(), v.abs().into(), f64::NAN.into()])?;
        }
    }
    if !m.control_sigmas.is_empty() {
        w.stat("control/max_abs_estimate", control);
        w.check("a = b control", control <= 1e-10, format!("largest |estimate| {control:.3e}"));
    }

    let pair = ModifiedSolverPair { eta_h11: m.eta_h11, ..ModifiedSolverPair::new(a.clone(), b.clone()).with_config(pairing) };
    let truth = a.clone().plus(-1.0, b.clone());
    let mut curve = Vec::new();
    for &sigma in &m.sigmas {
        let eps = m.eps.eps(sigma);
        let rep = recover_lattice_modified(&pair, sigma, &lattice, Some(eps), Some(&truth))?;
        let t = rep.truth.clone().unwrap_or_default();
        for i in 0..rep.estimates.len() {
            w.row(
                RECOVERY,
                vec![
                    "recovery".into(),
                    sigma.into(),
                    eps.into(),
                    rep.x0_lattice[i].into(),
                    rep.estimates[i].into(),
                    t[i].into(),
                    (rep.estimates[i] - t[i]).into(),
                    rep.imag_residues[i].into(),
                ],
            )?;
        }
        let sup = rep.sup_error.unwrap_or(f64::NAN);
        w.stat(format!("recovery/sigma={}/sup_error", key(sigma)), sup);
        log::info!("modified recovery sigma = {sigma}: sup error {sup:.4e}");
        curve.push((sigma, sup));
    }
    if !curve.is_empty() {
        let errs: Vec<f64> = curve.iter().map(|c| c.1).collect();
        w.check("recovery error decreasing", strictly_decreasing(&errs), fmt_list(&errs));
        w.try_fit("recovery/log", fit_log_law(&curve));
        w.try_fit("recovery/power", fit_power_law(&curve));
    }

    if m.structure {
        w.table(
            RESIDUAL,
            &["eps", "pairing_re", "pairing_im", "cubic_re", "cubic_im", "quartic_im", "born_im", "residual_re", "residual_im", "residual_abs"],
        )?;
        let mut res = Vec::new();
        for &eps in &m.structure_eps {
            let probe = ProbeSpec64::new(m.structure_sigma, 0.0, eps);
            let st = modified_structure(&a, &probe, &m.structure_pairing.to_core())?;
            let r = st.residual.norm();
            w.row(
                RESIDUAL,
                vec![
                    eps.into(),
                    st.pairing.re.into(),
                    st.pairing.im.into(),
                    st.cubic.re.into(),
                    st.cubic.im.into(),
                    st.quartic.im.into(),
                    st.born.im.into(),
                    st.residual.re.into(),
                    st.residual.im.into(),
                    r.into(),
                ],
            )?;
            w.stat(format!("residual/eps={}", key(eps)), r);
            res.push((eps, r));
        }
        let fit = fit_power_law(&res);
        if let Ok(f) = &fit {
            w.stat("residual/slope", f.slope);
        }
        w.try_fit("residual/power", fit);
    }
    w.plot(format!(
        "set logscale xy\nset xlabel 'sigma'\nplot '{RECOVERY}.csv' using ($2):(abs($7)) title 'error' with points"
    ));
    Ok(())
}
