//! Experiment configuration (TOML).
//!
//! Every table rejects unknown keys. Each scenario reads its own section
//! (`[kernels]`, `[scatter]`, `[recovery]`, `[stability]`, `[modified]`);
//! an omitted section takes that scenario's defaults, and sections belonging
//! to other scenarios are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use nls_lab::{Generator, PairingConfig64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ValidateKernels,
    ScatterConvergence,
    RecoverySweep,
    StabilityCurve,
    ModifiedStructure,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::ValidateKernels => "validate_kernels",
            Scenario::ScatterConvergence => "scatter_convergence",
            Scenario::RecoverySweep => "recovery_sweep",
            Scenario::StabilityCurve => "stability_curve",
            Scenario::ModifiedStructure => "modified_structure",
        }
    }

    fn section(self) -> &'static str {
        match self {
            Scenario::ValidateKernels => "kernels",
            Scenario::ScatterConvergence => "scatter",
            Scenario::RecoverySweep => "recovery",
            Scenario::StabilityCurve => "stability",
            Scenario::ModifiedStructure => "modified",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Analytic coefficient families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Zero,
    Gaussian { height: f64, width: f64, center: f64 },
    DoubleBump { first: [f64; 3], second: [f64; 3] },
    Compact { height: f64, radius: f64, center: f64 },
}

impl CoefficientConfig {
    pub fn gaussian(height: f64, width: f64, center: f64) -> Self {
        CoefficientConfig::Gaussian { height, width, center }
    }

    pub fn generator(&self) -> Generator<f64> {
        match *self {
            CoefficientConfig::Zero => Generator::Zero,
            CoefficientConfig::Gaussian { height, width, center } => Generator::gaussian(height, width, center),
            CoefficientConfig::DoubleBump { first, second } => Generator::DoubleBump {
                first: (first[0], first[1], first[2]),
                second: (second[0], second[1], second[2]),
            },
            CoefficientConfig::Compact { height, radius, center } => {
                Generator::CompactBump { height, radius, center }
            }
        }
    }

    fn validate(&self, field: &str) -> LabResult<()> {
        let ok = match *self {
            CoefficientConfig::Zero => true,
            CoefficientConfig::Gaussian { height, width, center } => {
                height.is_finite() && width > 0.0 && width.is_finite() && center.is_finite()
            }
            CoefficientConfig::DoubleBump { first, second } => first
                .iter()
                .chain(&second)
                .all(|v| v.is_finite())
                && first[1] > 0.0
                && second[1] > 0.0,
            CoefficientConfig::Compact { height, radius, center } => {
                height.is_finite() && radius > 0.0 && radius.is_finite() && center.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(field_err(field, "widths must be positive and all parameters finite"))
        }
    }
}

/// How the probe amplitude `ε` follows the width `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsRule {
    /// `ε = min(σ, cap)`.
    Sigma { cap: Option<f64> },
    /// `ε = min(σ^exponent, cap)`.
    Power { exponent: f64, cap: Option<f64> },
    Fixed { value: f64 },
}

impl EpsRule {
    pub fn eps(&self, sigma: f64) -> f64 {
        match *self {
            EpsRule::Sigma { cap } => cap.map_or(sigma, |c| sigma.min(c)),
            EpsRule::Power { exponent, cap } => {
                let e = sigma.powf(exponent);
                cap.map_or(e, |c| e.min(c))
            }
            EpsRule::Fixed { value } => value,
        }
    }

    fn validate(&self, field: &str) -> LabResult<()> {
        let cap_ok = |c: Option<f64>| c.map_or(true, |c| c > 0.0 && c.is_finite());
        let ok = match *self {
            EpsRule::Sigma { cap } => cap_ok(cap),
            EpsRule::Power { exponent, cap } => exponent > 0.0 && exponent.is_finite() && cap_ok(cap),
            EpsRule::Fixed { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(field_err(field, "amplitudes, caps and exponents must be positive and finite"))
        }
    }
}

/// Probe centers: `n` equispaced points on `[lo, hi]`, or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Centers {
    #[serde(default)]
    pub lo: f64,
    #[serde(default)]
    pub hi: f64,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

impl Centers {
    pub fn range(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, points: None }
    }

    pub fn list(&self) -> Vec<f64> {
        match &self.points {
            Some(p) => p.clone(),
            None => nls_lab::lattice(self.lo, self.hi, self.n),
        }
    }

    fn validate(&self, field: &str) -> LabResult<()> {
        let pts = self.list();
        if pts.is_empty() {
            return Err(field_err(field, "at least one probe center is required"));
        }
        if pts.iter().any(|x| !x.is_finite()) || self.hi < self.lo {
            return Err(field_err(field, "centers must be finite with lo <= hi"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

impl GridConfig {
    fn validate(&self, field: &str) -> LabResult<()> {
        if !self.n.is_power_of_two() || self.n < 16 {
            return Err(field_err(&format!("{field}.n"), "must be a power of two, at least 16"));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(field_err(&format!("{field}.length"), "must be positive"));
        }
        Ok(())
    }
}

/// Discretization knobs of the solver-based pairings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingKnobs {
    pub horizon_factor: f64,
    pub horizon: Option<f64>,
    pub points_per_sigma: f64,
    pub dt_factor: f64,
    pub alias_factor: f64,
    pub extrapolate: bool,
    pub richardson: bool,
    pub eta: f64,
    pub max_points: usize,
}

impl Default for PairingKnobs {
    fn default() -> Self {
        let d = PairingConfig64::default();
        Self {
            horizon_factor: d.horizon_factor,
            horizon: d.horizon,
            points_per_sigma: d.points_per_sigma,
            dt_factor: d.dt_factor,
            alias_factor: d.alias_factor,
            extrapolate: d.extrapolate,
            richardson: d.richardson,
            eta: d.eta,
            max_points: d.max_points,
        }
    }
}

impl PairingKnobs {
    pub fn to_core(&self) -> PairingConfig64 {
        PairingConfig64 {
            horizon_factor: self.horizon_factor,
            horizon: self.horizon,
            points_per_sigma: self.points_per_sigma,
            dt_factor: self.dt_factor,
            alias_factor: self.alias_factor,
            extrapolate: self.extrapolate,
            richardson: self.richardson,
            eta: self.eta,
            max_points: self.max_points,
        }
    }

    fn validate(&self, field: &str) -> LabResult<()> {
        let pos = |v: f64, name: &str| -> LabResult<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field_err(&format!("{field}.{name}"), "must be positive"))
            }
        };
        pos(self.horizon_factor, "horizon_factor")?;
        pos(self.points_per_sigma, "points_per_sigma")?;
        pos(self.dt_factor, "dt_factor")?;
        pos(self.alias_factor, "alias_factor")?;
        pos(self.eta, "eta")?;
        if let Some(h) = self.horizon {
            pos(h, "horizon")?;
        }
        if self.max_points < 16 {
            return Err(field_err(&format!("{field}.max_points"), "must be at least 16"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsSection {
    pub powers: Vec<f64>,
    /// Relative tolerance of the quadrature cross-check of `λ(p)`.
    pub lambda_rel_tol: f64,
    /// Tolerance of the `λ(4) = π²/√6` comparison.
    pub lambda4_abs_tol: f64,
    /// Lower endpoints of the `K̂` residual sweep, largest first.
    pub xi_lower: Vec<f64>,
    pub points_per_decade: usize,
    pub monotone_tol: f64,
    /// Amplitudes at which `Q_ε` quadrature is compared with its closed form.
    pub q_eps: Vec<f64>,
    pub q_sigma: f64,
    pub q_rel_tol: f64,
}

impl Default for KernelsSection {
    fn default() -> Self {
        Self {
            powers: vec![2.5, 3.0, 3.5, 4.0],
            lambda_rel_tol: 1e-6,
            lambda4_abs_tol: 1e-10,
            xi_lower: vec![1e-3, 1e-6],
            points_per_decade: 25,
            monotone_tol: 1e-3,
            q_eps: vec![0.1, 0.01],
            q_sigma: 1.0,
            q_rel_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterCase {
    pub p: f64,
    pub amplitude: f64,
    #[serde(default = "unit")]
    pub sigma: f64,
    #[serde(default)]
    pub x0: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterSection {
    pub grid: GridConfig,
    pub cases: Vec<ScatterCase>,
    pub tol: f64,
    pub relative: bool,
    /// First horizon; defaults to `8 max(1, σ²)`.
    pub t0: Option<f64>,
    /// Last horizon; defaults to `512 t0`.
    pub t_max: Option<f64>,
    /// Time step; defaults to the solver's rule for the probe width.
    pub dt: Option<f64>,
    pub eta: f64,
    pub domain_factor: f64,
    /// Fail the run when a case does not converge by `t_max`.
    pub strict: bool,
}

impl Default for ScatterSection {
    fn default() -> Self {
        let case = |p, amplitude, sigma| ScatterCase { p, amplitude, sigma, x0: 0.0 };
        Self {
            grid: GridConfig { n: 32768, length: 8192.0 },
            cases: vec![case(2.0, 0.02, 1.0), case(2.0, 0.025, 1.0), case(3.0, 0.062, 1.0), case(3.0, 0.044, 2.0)],
            tol: 1e-6,
            relative: false,
            t0: None,
            t_max: None,
            dt: None,
            eta: 0.1,
            domain_factor: 40.0,
            strict: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapModel {
    /// Pairings from the split-step solver.
    Solver,
    /// Pairings from the first Born approximation (quadrature only).
    Born,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySection {
    pub powers: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub centers: Centers,
    pub eps: EpsRule,
    pub model: MapModel,
    /// Reference coefficient `b`; the target of reconstruction is `a - b`.
    pub reference: CoefficientConfig,
    pub pairing: PairingKnobs,
}

impl Default for RecoverySection {
    fn default() -> Self {
        Self {
            powers: vec![3.0, 2.0],
            sigmas: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            centers: Centers::range(-2.0, 2.0, 11),
            eps: EpsRule::Sigma { cap: Some(0.08) },
            model: MapModel::Solver,
            reference: CoefficientConfig::Zero,
            pairing: PairingKnobs::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub powers: Vec<f64>,
    /// Perturbation sizes `δ` in `b = a + δ·perturbation`.
    pub deltas: Vec<f64>,
    pub perturbation: CoefficientConfig,
    /// Number of random probes in the distance estimate.
    pub probe_count: usize,
    pub probe_sigma: f64,
    pub probe_amplitude: f64,
    /// Probe centers are drawn uniformly from this interval.
    pub probe_center_range: [f64; 2],
    /// Fixed horizon of the distance estimate.
    pub distance_horizon: f64,
    pub distance_grid: GridConfig,
    /// Width assigned to the largest measured distance.
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Bound `B` on the coefficient norms in the σ rule.
    pub norm_budget: f64,
    /// Exponent `s` of the Hölder rule; defaults to `(1 - 2/p)/2`.
    pub holder_s: Option<f64>,
    pub centers: Centers,
    pub eps: EpsRule,
    pub pairing: PairingKnobs,
    /// Distances below this are treated as zero.
    pub degenerate_below: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            powers: vec![4.0, 2.5, 2.0],
            deltas: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
            perturbation: CoefficientConfig::gaussian(1.0, 0.7, 0.5),
            probe_count: 3,
            probe_sigma: 1.0,
            probe_amplitude: 0.05,
            probe_center_range: [-2.0, 2.0],
            distance_horizon: 16.0,
            distance_grid: GridConfig { n: 4096, length: 1024.0 },
            sigma_max: 0.4,
            sigma_min: 0.05,
            norm_budget: 0.0,
            holder_s: None,
            centers: Centers::range(-2.0, 2.0, 11),
            eps: EpsRule::Sigma { cap: Some(0.08) },
            pairing: PairingKnobs::default(),
            degenerate_below: 1e-13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModifiedSection {
    /// Reference coefficient `b`.
    pub reference: CoefficientConfig,
    pub sigmas: Vec<f64>,
    /// Widths at which the `a = b` control is run.
    pub control_sigmas: Vec<f64>,
    pub centers: Centers,
    pub eps: EpsRule,
    pub eta_h11: f64,
    pub pairing: PairingKnobs,
    pub structure: bool,
    pub structure_sigma: f64,
    pub structure_eps: Vec<f64>,
    pub structure_pairing: PairingKnobs,
}

impl Default for ModifiedSection {
    fn default() -> Self {
        Self {
            reference: CoefficientConfig::Zero,
            sigmas: vec![0.4, 0.2, 0.1, 0.04],
            control_sigmas: vec![0.4, 0.2],
            centers: Centers::range(-1.0, 1.0, 5),
            eps: EpsRule::Power { exponent: 5.5, cap: None },
            eta_h11: 0.25,
            pairing: PairingKnobs::default(),
            structure: true,
            structure_sigma: 1.0,
            structure_eps: vec![0.1, 0.05, 0.025, 0.01],
            structure_pairing: PairingKnobs { horizon: Some(64.0), dt_factor: 0.02, ..PairingKnobs::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `NLS_LAB_THREADS` overrides, default is all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// The coefficient `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<CoefficientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoverySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<ModifiedSection>,
}

fn field_err(field: &str, msg: &str) -> LabError {
    LabError::Config(format!("{field}: {msg}"))
}

/// `‖εφ‖₂` for the probe `ε exp{-(x-x₀)²/(4σ²)}`.
pub fn probe_l2(sigma: f64, eps: f64) -> f64 {
    eps * ((2.0 * std::f64::consts::PI).sqrt() * sigma).sqrt()
}

/// `‖εφ‖_{H^{1,1}}` for the same probe.
pub fn probe_h11(sigma: f64, eps: f64) -> f64 {
    let s2 = sigma * sigma;
    eps * ((2.0 * std::f64::consts::PI).sqrt() * sigma * (1.0 + 0.25 / s2 + s2)).sqrt()
}

fn positive_list(v: &[f64], field: &str) -> LabResult<()> {
    if v.is_empty() {
        return Err(field_err(field, "must not be empty"));
    }
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(field_err(field, &format!("entries must be positive, found {bad}")));
    }
    Ok(())
}

fn powers_in_range(v: &[f64], field: &str) -> LabResult<()> {
    if v.is_empty() {
        return Err(field_err(field, "must not be empty"));
    }
    if let Some(bad) = v.iter().find(|p| !(**p >= 2.0 && **p <= 4.0)) {
        return Err(field_err(field, &format!("powers must lie in [2, 4], found {bad}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Defaults for `scenario`, with its section filled in.
    pub fn default_for(scenario: Scenario) -> Self {
        let mut cfg = Self {
            scenario,
            seed: 0,
            threads: None,
            output_dir: None,
            coefficient: None,
            kernels: None,
            scatter: None,
            recovery: None,
            stability: None,
            modified: None,
        };
        cfg.fill_defaults();
        cfg
    }

    pub fn from_toml_str(text: &str) -> LabResult<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn fill_defaults(&mut self) {
        if self.coefficient.is_none() {
            self.coefficient = Some(match self.scenario {
                Scenario::ModifiedStructure => CoefficientConfig::gaussian(0.5, 1.0, 0.0),
                _ => CoefficientConfig::gaussian(1.0, 1.0, 0.0),
            });
        }
        match self.scenario {
            Scenario::ValidateKernels => {
                self.kernels.get_or_insert_with(Default::default);
            }
            Scenario::ScatterConvergence => {
                self.scatter.get_or_insert_with(Default::default);
            }
            Scenario::RecoverySweep => {
                self.recovery.get_or_insert_with(Default::default);
            }
            Scenario::StabilityCurve => {
                self.stability.get_or_insert_with(Default::default);
            }
            Scenario::ModifiedStructure => {
                self.modified.get_or_insert_with(Default::default);
            }
        }
    }

    pub fn coefficient(&self) -> &CoefficientConfig {
        self.coefficient.as_ref().expect("defaults filled")
    }

    pub fn kernels(&self) -> &KernelsSection {
        self.kernels.as_ref().expect("defaults filled")
    }

    pub fn scatter(&self) -> &ScatterSection {
        self.scatter.as_ref().expect("defaults filled")
    }

    pub fn recovery(&self) -> &RecoverySection {
        self.recovery.as_ref().expect("defaults filled")
    }

    pub fn stability(&self) -> &StabilitySection {
        self.stability.as_ref().expect("defaults filled")
    }

    pub fn modified(&self) -> &ModifiedSection {
        self.modified.as_ref().expect("defaults filled")
    }

    /// Checks everything that can be checked before launching: ranges,
    /// grid shapes and the small-data bounds of every probe.
    pub fn validate(&self) -> LabResult<()> {
        let own = self.scenario.section();
        let present = [
            ("kernels", self.kernels.is_some()),
            ("scatter", self.scatter.is_some()),
            ("recovery", self.recovery.is_some()),
            ("stability", self.stability.is_some()),
            ("modified", self.modified.is_some()),
        ];
        for (name, here) in present {
            if here && name != own {
                return Err(field_err(name, &format!("section does not apply to scenario {}", self.scenario)));
            }
        }
        if self.threads == Some(0) {
            return Err(field_err("threads", "must be at least 1"));
        }
        self.coefficient().validate("coefficient")?;
        match self.scenario {
            Scenario::ValidateKernels => self.validate_kernels(),
            Scenario::ScatterConvergence => self.validate_scatter(),
            Scenario::RecoverySweep => self.validate_recovery(),
            Scenario::StabilityCurve => self.validate_stability(),
            Scenario::ModifiedStructure => self.validate_modified(),
        }
    }

    fn validate_kernels(&self) -> LabResult<()> {
        let k = self.kernels();
        if k.powers.iter().any(|p| !(*p > 2.0 && *p <= 4.0)) {
            return Err(field_err("kernels.powers", "λ(p) needs p in (2, 4]"));
        }
        positive_list(&k.xi_lower, "kernels.xi_lower")?;
        if k.xi_lower.iter().any(|x| *x >= 1.0) {
            return Err(field_err("kernels.xi_lower", "endpoints must be below 1"));
        }
        positive_list(&k.q_eps, "kernels.q_eps")?;
        positive_list(&[k.q_sigma, k.lambda_rel_tol, k.lambda4_abs_tol, k.monotone_tol, k.q_rel_tol], "kernels")?;
        if k.points_per_decade < 2 {
            return Err(field_err("kernels.points_per_decade", "must be at least 2"));
        }
        Ok(())
    }

    fn validate_scatter(&self) -> LabResult<()> {
        let s = self.scatter();
        s.grid.validate("scatter.grid")?;
        if s.cases.is_empty() {
            return Err(field_err("scatter.cases", "must not be empty"));
        }
        positive_list(&[s.tol, s.eta, s.domain_factor], "scatter")?;
        for (i, c) in s.cases.iter().enumerate() {
            let f = format!("scatter.cases[{i}]");
            powers_in_range(&[c.p], &format!("{f}.p"))?;
            positive_list(&[c.amplitude, c.sigma], &f)?;
            let norm = probe_l2(c.sigma, c.amplitude);
            if norm >= s.eta {
                return Err(field_err(&f, &format!("probe norm {norm:.4} is outside the small-data ball {}", s.eta)));
            }
            if c.x0.abs() > s.grid.length / 4.0 {
                return Err(field_err(&format!("{f}.x0"), "probe center too close to the domain edge"));
            }
        }
        if let (Some(t0), Some(tm)) = (s.t0, s.t_max) {
            if !(t0 > 0.0 && tm >= t0) {
                return Err(field_err("scatter.t_max", "need 0 < t0 <= t_max"));
            }
        }
        Ok(())
    }

    fn validate_recovery(&self) -> LabResult<()> {
        let r = self.recovery();
        powers_in_range(&r.powers, "recovery.powers")?;
        positive_list(&r.sigmas, "recovery.sigmas")?;
        r.centers.validate("recovery.centers")?;
        r.eps.validate("recovery.eps")?;
        r.reference.validate("recovery.reference")?;
        r.pairing.validate("recovery.pairing")?;
        if r.powers.contains(&2.0) {
            if let Some(s) = r.sigmas.iter().find(|s| **s >= 0.5) {
                return Err(field_err("recovery.sigmas", &format!("p = 2 needs every σ below 0.5, found {s}")));
            }
        }
        if r.model == MapModel::Solver {
            for &s in &r.sigmas {
                let norm = probe_l2(s, r.eps.eps(s));
                if norm >= r.pairing.eta {
                    return Err(field_err(
                        "recovery.eps",
                        &format!("probe at σ = {s} has norm {norm:.4}, outside the small-data ball {}", r.pairing.eta),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_stability(&self) -> LabResult<()> {
        let s = self.stability();
        powers_in_range(&s.powers, "stability.powers")?;
        positive_list(&s.deltas, "stability.deltas")?;
        s.perturbation.validate("stability.perturbation")?;
        s.distance_grid.validate("stability.distance_grid")?;
        s.centers.validate("stability.centers")?;
        s.eps.validate("stability.eps")?;
        s.pairing.validate("stability.pairing")?;
        if s.probe_count == 0 {
            return Err(field_err("stability.probe_count", "must be at least 1"));
        }
        positive_list(&[s.probe_sigma, s.probe_amplitude, s.distance_horizon, s.sigma_min], "stability")?;
        if !(s.sigma_max >= s.sigma_min) || s.sigma_max >= 0.5 {
            return Err(field_err("stability.sigma_max", "need sigma_min <= sigma_max < 0.5"));
        }
        if !(s.norm_budget >= 0.0) {
            return Err(field_err("stability.norm_budget", "must be non-negative"));
        }
        let [lo, hi] = s.probe_center_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(field_err("stability.probe_center_range", "need a finite interval lo <= hi"));
        }
        let norm = probe_l2(s.probe_sigma, s.probe_amplitude);
        if norm >= 0.1 {
            return Err(field_err("stability.probe_amplitude", &format!("probe norm {norm:.4} is not small")));
        }
        for sigma in [s.sigma_min, s.sigma_max] {
            let norm = probe_l2(sigma, s.eps.eps(sigma));
            if norm >= s.pairing.eta {
                return Err(field_err("stability.eps", &format!("probe at σ = {sigma} has norm {norm:.4}")));
            }
        }
        Ok(())
    }

    fn validate_modified(&self) -> LabResult<()> {
        let m = self.modified();
        m.reference.validate("modified.reference")?;
        positive_list(&m.sigmas, "modified.sigmas")?;
        m.centers.validate("modified.centers")?;
        m.eps.validate("modified.eps")?;
        m.pairing.validate("modified.pairing")?;
        m.structure_pairing.validate("modified.structure_pairing")?;
        if let Some(s) = m.sigmas.iter().chain(&m.control_sigmas).find(|s| !(**s > 0.0 && **s < 0.5)) {
            return Err(field_err("modified.sigmas", &format!("widths must lie in (0, 0.5), found {s}")));
        }
        for &s in m.sigmas.iter().chain(&m.control_sigmas) {
            let h = probe_h11(s, m.eps.eps(s));
            if h >= m.eta_h11 {
                return Err(field_err("modified.eps", &format!("probe at σ = {s} has H^{{1,1}} norm {h:.4}")));
            }
        }
        if m.structure {
            positive_list(&m.structure_eps, "modified.structure_eps")?;
            positive_list(&[m.structure_sigma], "modified.structure_sigma")?;
            for &e in &m.structure_eps {
                let h = probe_h11(m.structure_sigma, e);
                if h >= m.eta_h11 {
                    return Err(field_err(
                        "modified.structure_eps",
                        &format!("amplitude {e} gives H^{{1,1}} norm {h:.4}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `threads` and `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.output_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for s in [
            Scenario::ValidateKernels,
            Scenario::ScatterConvergence,
            Scenario::RecoverySweep,
            Scenario::StabilityCurve,
            Scenario::ModifiedStructure,
        ] {
            ExperimentConfig::default_for(s).validate().unwrap();
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_toml_str("scenario = \"recovery_sweep\"\n[recovery]\nsigmass = [0.1]\n");
        assert!(matches!(e, Err(LabError::Config(m)) if m.contains("sigmass")));
        let e = ExperimentConfig::from_toml_str("scenario = \"recovery_sweep\"\nsed = 3\n");
        assert!(e.is_err());
        let e = ExperimentConfig::from_toml_str(
            "scenario = \"recovery_sweep\"\n[coefficient]\nkind = \"gaussian\"\nheight = 1.0\nwidth = 1.0\ncenter = 0.0\nwdth = 2.0\n",
        );
        assert!(e.is_err());
    }

    #[test]
    fn foreign_section_rejected() {
        let e = ExperimentConfig::from_toml_str("scenario = \"validate_kernels\"\n[stability]\n");
        assert!(matches!(e, Err(LabError::Config(m)) if m.starts_with("stability")));
    }

    #[test]
    fn small_data_checked_before_launch() {
        let e = ExperimentConfig::from_toml_str(
            "scenario = \"recovery_sweep\"\n[recovery]\nsigmas = [0.4]\neps = { rule = \"fixed\", value = 0.5 }\n",
        );
        assert!(matches!(e, Err(LabError::Config(m)) if m.contains("recovery.eps")));
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::default_for(Scenario::StabilityCurve);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        let mut other = cfg.clone();
        other.threads = Some(3);
        assert_eq!(cfg.hash(), other.hash());
        other.seed = 9;
        assert_ne!(cfg.hash(), other.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn eps_rules() {
        assert_eq!(EpsRule::Sigma { cap: Some(0.08) }.eps(0.4), 0.08);
        assert_eq!(EpsRule::Sigma { cap: None }.eps(0.4), 0.4);
        assert!((EpsRule::Power { exponent: 5.5, cap: None }.eps(0.1) - 0.1f64.powf(5.5)).abs() < 1e-20);
    }
}
