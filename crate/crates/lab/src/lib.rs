//! Experiment harness: TOML-configured scenarios over the `nls_lab` numerics,
//! written to CSV with a manifest and a text summary.

pub mod config;
pub mod error;
pub mod fit;
pub mod output;
mod scenarios;

use std::path::Path;

pub use config::{ExperimentConfig, Scenario};
pub use error::{LabError, LabResult};
pub use fit::{fit_log_law, fit_power_law, FitModel, FitResult};
pub use output::{RunSummary, RunWriter};

/// Worker count: `NLS_LAB_THREADS`, then the config, then all cores.
pub fn thread_count(cfg: &ExperimentConfig) -> LabResult<usize> {
    if let Ok(v) = std::env::var("NLS_LAB_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(LabError::Config(format!("NLS_LAB_THREADS: expected a positive integer, got {v:?}"))),
        };
    }
    Ok(cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Validates `cfg`, runs its scenario on a dedicated pool and writes the
/// artifacts under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    cfg.validate()?;
    let threads = thread_count(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let mut w = RunWriter::create(out, cfg, threads)?;
    let outcome = pool.install(|| scenarios::dispatch(cfg, &mut w));
    w.finish(outcome)
}
