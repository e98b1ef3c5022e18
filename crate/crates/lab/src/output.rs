//! Run artifacts: `manifest.json`, per-scenario CSV tables, `summary.txt`, `plot.gp`.
//!
//! Rows are flushed as they are written so a failed run leaves its partial
//! results behind. Every CSV row carries the config hash.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::LabResult;
use crate::fit::FitResult;

/// One CSV cell. Floats are written with 17 significant digits.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) if v.is_nan() => "nan".into(),
            Cell::F(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => u8::from(*v).to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// What a run leaves in memory besides the files.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub fits: BTreeMap<String, FitResult>,
    pub stats: BTreeMap<String, f64>,
    /// Fits that were skipped, with the reason.
    pub degenerate: BTreeMap<String, String>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn stat(&self, key: &str) -> Option<f64> {
        self.stats.get(key).copied()
    }

    pub fn fit(&self, key: &str) -> Option<&FitResult> {
        self.fits.get(key)
    }

    pub fn check(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.passed)
    }
}

struct Table {
    columns: usize,
    writer: csv::Writer<File>,
}

pub struct RunWriter {
    dir: PathBuf,
    config: serde_json::Value,
    seed: u64,
    threads: usize,
    tables: BTreeMap<String, Table>,
    notes: Vec<String>,
    plot: Vec<String>,
    summary: RunSummary,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    config_hash: &'a str,
    seed: u64,
    threads: usize,
    status: &'a str,
    files: &'a [String],
    config: &'a serde_json::Value,
}

impl RunWriter {
    pub fn create(dir: &Path, cfg: &ExperimentConfig, threads: usize) -> LabResult<Self> {
        std::fs::create_dir_all(dir)?;
        let summary = RunSummary {
            scenario: cfg.scenario.name().to_string(),
            config_hash: cfg.hash(),
            ..RunSummary::default()
        };
        let w = Self {
            dir: dir.to_path_buf(),
            config: serde_json::to_value(cfg)?,
            seed: cfg.seed,
            threads,
            tables: BTreeMap::new(),
            notes: Vec::new(),
            plot: Vec::new(),
            summary,
        };
        w.write_manifest("running")?;
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_manifest(&self, status: &str) -> LabResult<()> {
        let m = Manifest {
            tool: "nls-lab",
            version: env!("CARGO_PKG_VERSION"),
            scenario: &self.summary.scenario,
            config_hash: &self.summary.config_hash,
            seed: self.seed,
            threads: self.threads,
            status,
            files: &self.summary.files,
            config: &self.config,
        };
        let text = serde_json::to_string_pretty(&m)?;
        std::fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    /// Opens `<name>.csv` with a fixed header; `config_hash` is appended.
    pub fn table(&mut self, name: &str, columns: &[&str]) -> LabResult<()> {
        let file = format!("{name}.csv");
        let mut writer = csv::Writer::from_path(self.dir.join(&file))?;
        let mut header: Vec<&str> = columns.to_vec();
        header.push("config_hash");
        writer.write_record(&header)?;
        writer.flush()?;
        self.summary.files.push(file);
        self.tables.insert(name.to_string(), Table { columns: columns.len(), writer });
        Ok(())
    }

    pub fn row(&mut self, name: &str, cells: Vec<Cell>) -> LabResult<()> {
        let hash = self.summary.config_hash.clone();
        let t = self
            .tables
            .get_mut(name)
            .unwrap_or_else(|| panic!("table {name} was not opened"));
        assert_eq!(cells.len(), t.columns, "row width for table {name}");
        let mut rec: Vec<String> = cells.iter().map(Cell::render).collect();
        rec.push(hash);
        t.writer.write_record(&rec)?;
        t.writer.flush()?;
        Ok(())
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.summary.stats.insert(key.into(), value);
    }

    pub fn fit(&mut self, key: impl Into<String>, fit: FitResult) {
        self.summary.fits.insert(key.into(), fit);
    }

    /// Records a fit, or the reason it was skipped.
    pub fn try_fit(&mut self, key: &str, fit: LabResult<FitResult>) {
        match fit {
            Ok(f) => self.fit(key, f),
            Err(e) => self.degenerate(key, e.to_string()),
        }
    }

    pub fn degenerate(&mut self, key: impl Into<String>, why: impl Into<String>) {
        self.summary.degenerate.insert(key.into(), why.into());
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.summary.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Appends a line to the gnuplot script.
    pub fn plot(&mut self, line: impl Into<String>) {
        self.plot.push(line.into());
    }

    fn summary_text(&self, status: &str) -> String {
        let s = &self.summary;
        let mut out = String::new();
        out.push_str(&format!("scenario: {}\n", s.scenario));
        out.push_str(&format!("config_hash: {}\n", s.config_hash));
        out.push_str(&format!("status: {status}\n"));
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                out.push_str(n);
                out.push('\n');
            }
        }
        if !s.checks.is_empty() {
            out.push_str("\nchecks:\n");
            for c in &s.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                out.push_str(&format!("  {tag} {}: {}\n", c.name, c.detail));
            }
        }
        if !s.fits.is_empty() {
            out.push_str("\nfits:\n");
            for (k, f) in &s.fits {
                out.push_str(&format!(
                    "  {k}: {:?} slope {:.6} intercept {:.6} r2 {:.6}\n",
                    f.model, f.slope, f.intercept, f.r_squared
                ));
            }
        }
        if !s.degenerate.is_empty() {
            out.push_str("\ndegenerate:\n");
            for (k, why) in &s.degenerate {
                out.push_str(&format!("  {k}: fit skipped ({why})\n"));
            }
        }
        if !s.stats.is_empty() {
            out.push_str("\nstatistics:\n");
            for (k, v) in &s.stats {
                out.push_str(&format!("  {k} = {v:.10e}\n"));
            }
        }
        out
    }

    /// Writes the summary, plot script and final manifest. On failure the
    /// partial tables stay on disk and the error is passed through.
    pub fn finish(mut self, outcome: LabResult<()>) -> LabResult<RunSummary> {
        for t in self.tables.values_mut() {
            t.writer.flush()?;
        }
        let status = match &outcome {
            Ok(()) => "complete".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        let mut f = File::create(self.dir.join("summary.txt"))?;
        f.write_all(self.summary_text(&status).as_bytes())?;
        self.summary.files.push("summary.txt".into());
        if !self.plot.is_empty() {
            let mut script = String::from("# gnuplot script; run from this directory\nset datafile separator ','\nset key autotitle columnhead\n");
            for l in &self.plot {
                script.push_str(l);
                script.push('\n');
            }
            std::fs::write(self.dir.join("plot.gp"), script)?;
            self.summary.files.push("plot.gp".into());
        }
        self.write_manifest(if outcome.is_ok() { "complete" } else { "failed" })?;
        outcome.map(|()| self.summary)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;
    use crate::error::LabError;

    #[test]
    fn floats_keep_17_digits() {
        let v = 0.1f64 + 0.2;
        let s = Cell::F(v).render();
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(Cell::F(f64::INFINITY).render(), "inf");
        assert_eq!(Cell::B(true).render(), "1");
    }

    #[test]
    fn partial_results_survive_failure() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default_for(Scenario::ValidateKernels);
        let mut w = RunWriter::create(dir.path(), &cfg, 1).unwrap();
        w.table("t", &["a", "b"]).unwrap();
        w.row("t", vec![1.5.into(), "x".into()]).unwrap();
        let err = w.finish(Err(LabError::Config("boom".into())));
        assert!(err.is_err());
        let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(csv.starts_with("a,b,config_hash\n1.5000000000000000e0,x,"));
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("status: failed"));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["status"], "failed");
        assert_eq!(manifest["config_hash"], cfg.hash());
    }
}
