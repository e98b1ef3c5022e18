//! One module per scenario. Each writes its tables through a [`RunWriter`]
//! and records fits and statistics in the run summary.

mod kernels;
mod modified;
mod recovery;
mod scatter;
mod stability;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::LabResult;
use crate::output::RunWriter;

pub fn dispatch(cfg: &ExperimentConfig, w: &mut RunWriter) -> LabResult<()> {
    match cfg.scenario {
        Scenario::ValidateKernels => kernels::run(cfg, w),
        Scenario::ScatterConvergence => scatter::run(cfg, w),
        Scenario::RecoverySweep => recovery::run(cfg, w),
        Scenario::StabilityCurve => stability::run(cfg, w),
        Scenario::ModifiedStructure => modified::run(cfg, w),
    }
}

/// `true` when every entry is strictly below its predecessor.
pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Key fragment for a real parameter, stable across runs.
pub(crate) fn key(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}
