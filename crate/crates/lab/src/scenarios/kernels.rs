use std::f64::consts::PI;

use nls_lab::kernels::{kernel_k_hat, lambda_p, lambda_p_quadrature, q_epsilon, q_epsilon_closed_form};
use nls_lab::quadrature::QuadratureConfig;
use nls_lab::ProbeSpec64;

use crate::config::ExperimentConfig;
use crate::error::LabResult;
use crate::output::RunWriter;

use super::key;

const MAIN: &str = "validate_kernels";
const KHAT: &str = "validate_kernels_khat";

pub fn run(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    let k = cfg.kernels();
    w.table(MAIN, &["quantity", "parameter", "value", "reference", "abs_diff", "rel_diff", "passed"])?;
    w.table(KHAT, &["xi", "k_hat", "log_residual"])?;

    let quad = QuadratureConfig::with_tolerances(1e-11, 1e-11);
    w.note("lambda(p): closed form vs two-dimensional quadrature");
    w.note(format!("  {:>5}  {:>22}  {:>22}  {:>10}", "p", "closed form", "quadrature", "rel diff"));
    for &p in &k.powers {
        let closed = lambda_p(p)?;
        let q = lambda_p_quadrature(p, &quad)?.value;
        let rel = ((closed - q) / q).abs();
        let ok = rel < k.lambda_rel_tol;
        w.note(format!("  {p:>5}  {closed:>22.15e}  {q:>22.15e}  {rel:>10.2e}"));
        w.row(MAIN, vec!["lambda".into(), p.into(), closed.into(), q.into(), (closed - q).abs().into(), rel.into(), ok.into()])?;
        w.stat(format!("lambda/p={}/rel_diff", key(p)), rel);
        w.check(format!("lambda p={}", key(p)), ok, format!("relative difference {rel:.3e}"));
    }

    let l4 = lambda_p(4.0)?;
    let printed = PI * PI / 6f64.sqrt();
    let diff = (l4 - printed).abs();
    let ok = diff < k.lambda4_abs_tol;
    w.row(MAIN, vec!["lambda4_closed_value".into(), 4.0.into(), l4.into(), printed.into(), diff.into(), (diff / printed).into(), ok.into()])?;
    w.stat("lambda4/abs_diff", diff);
    w.check("lambda(4) = pi^2/sqrt(6)", ok, format!("lambda(4) = {l4:.15e}, pi^2/sqrt(6) = {printed:.15e}"));

    // residual sweep on a log grid from the smallest endpoint up to 1
    let lowest = k.xi_lower.iter().copied().fold(1.0, f64::min);
    let decades = -lowest.log10();
    let n = (decades * k.points_per_decade as f64).ceil() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let xi = 10f64.powf(-decades * (1.0 - i as f64 / n as f64));
        let ev = kernel_k_hat(xi)?;
        let r = ev.log_residual.expect("xi <= 1");
        w.row(KHAT, vec![xi.into(), ev.value.into(), r.into()])?;
        samples.push((xi, r));
    }
    let mut sups = Vec::new();
    for &lo in &k.xi_lower {
        let sup = samples
            .iter()
            .filter(|(xi, _)| *xi >= lo * (1.0 - 1e-12))
            .fold(0.0f64, |m, (_, r)| m.max(r.abs()));
        w.row(MAIN, vec!["khat_residual_sup".into(), lo.into(), sup.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), sup.is_finite().into()])?;
        w.stat(format!("khat/sup/lower={}", key(lo)), sup);
        sups.push((lo, sup));
    }
    w.note("K-hat log residual: sup over [lower, 1]");
    for (lo, s) in &sups {
        w.note(format!("  lower {lo:.1e}: {s:.12e}"));
    }
    sups.sort_by(|a, b| b.0.total_cmp(&a.0));
    let finite = sups.iter().all(|(_, s)| s.is_finite());
    let growth = sups.windows(2).map(|p| p[1].1 - p[0].1).fold(f64::NEG_INFINITY, f64::max);
    let ok = finite && (sups.len() < 2 || growth <= k.monotone_tol);
    w.stat("khat/max_growth", growth);
    w.check("K-hat residual bound", ok, format!("finite: {finite}, largest increase {growth:.3e}"));

    for &eps in &k.q_eps {
        let probe = ProbeSpec64::new(k.q_sigma, 0.0, 1.0);
        let q = q_epsilon(&probe, eps)?.value;
        let c = q_epsilon_closed_form(&probe, eps);
        let rel = (q - c).norm() / c.norm();
        let ok = rel < k.q_rel_tol;
        w.row(MAIN, vec!["q_epsilon_imag".into(), eps.into(), q.im.into(), c.im.into(), (q - c).norm().into(), rel.into(), ok.into()])?;
        w.check(format!("Q_eps eps={}", key(eps)), ok, format!("quadrature vs closed form, relative {rel:.3e}"));
    }

    w.plot(format!("set logscale x\nset xlabel 'xi'\nplot '{KHAT}.csv' using 1:3 with lines title 'K-hat log residual'"));
    Ok(())
}
