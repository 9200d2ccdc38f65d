//! Run configuration, read from TOML.
//!
//! A config names one experiment and carries the blocks it needs. Unknown
//! keys are rejected everywhere so that typos surface as errors.

use std::fmt;
use std::path::{Path, PathBuf};

use momlab_core::analysis::TestFunction;
use momlab_core::landscape::Landscape;
use momlab_core::ngos::{NoiseModel, Oracle};
use momlab_core::optim::{Schedule, StandardSchedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Invalid configuration; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Warmup,
    WeakApprox,
    SvagSweep,
    SlowSde,
    Descent,
    Convert,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Warmup => "warmup",
            ExperimentKind::WeakApprox => "weak-approx",
            ExperimentKind::SvagSweep => "svag-sweep",
            ExperimentKind::SlowSde => "slow-sde",
            ExperimentKind::Descent => "descent",
            ExperimentKind::Convert => "convert",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<Landscape>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_schedule: Option<StandardScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitConfig>,
    #[serde(default)]
    pub record: RecordConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<WarmupConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_approx: Option<WeakApproxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svag: Option<SvagConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_sde: Option<SlowSdeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descent: Option<DescentConfig>,
}

fn default_n_seeds() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default = "one")]
    pub sigma: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            noise: default_noise(),
            sigma: 1.0,
        }
    }
}

fn default_noise() -> NoiseModel {
    NoiseModel::IsotropicGaussian
}

fn one() -> f64 {
    1.0
}

/// Either constant `eta` with `beta` (or `1 − β = lambda·eta^alpha`), or
/// explicit per-step arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardScheduleConfig {
    pub gamma: Vec<f64>,
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordConfig {
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<Vec<TestFunction>>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Write per-step, per-function ensemble summaries.
    #[serde(default = "yes")]
    pub summaries: bool,
}

impl Default for RecordConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            test_functions: None,
            bootstrap_resamples: default_resamples(),
            summaries: true,
        }
    }
}

fn one_usize() -> usize {
    1
}

fn default_resamples() -> usize {
    momlab_core::analysis::DEFAULT_RESAMPLES
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Sgd,
    Sgdm,
    SgdmStandard,
    GradientFlow,
    Sde,
    UnderdampedSde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub methods: Vec<MethodName>,
    /// SDE integration steps per optimizer step.
    #[serde(default = "default_substeps")]
    pub sde_substeps: usize,
}

fn default_substeps() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmupConfig {
    pub c: Vec<f64>,
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub z0: Vec<f64>,
    pub ks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakApproxConfig {
    pub etas: Vec<f64>,
    /// Continuous horizon `T`; each run takes `round(T/η)` steps.
    pub horizon: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// `1 − β = lambda·η^alpha`
    pub lambda: f64,
    /// `σ = oracle.sigma·η^sigma_power`
    #[serde(default)]
    pub sigma_power: f64,
}

fn default_alphas() -> Vec<f64> {
    vec![0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvagConfig {
    pub ells: Vec<f64>,
    pub eta: f64,
    pub beta: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowSdeConfig {
    pub etas: Vec<f64>,
    /// Continuous time on the `k = t/η²` clock.
    pub t: f64,
    /// `1 − β = lambda·η^alpha`
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentConfig {
    pub points: Vec<Vec<f64>>,
    pub eta: f64,
    pub samples: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    /// Canonical TOML; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_seeds == 0 {
            return fail("n_seeds: must be at least 1");
        }
        if self.record.stride == 0 {
            return fail("record.stride: must be positive");
        }
        if self.record.bootstrap_resamples < 2 {
            return fail("record.bootstrap_resamples: must be at least 2");
        }
        if let Some(l) = &self.landscape {
            l.validate().map_err(|e| ConfigError(format!("landscape: {e}")))?;
            self.oracle
                .noise
                .validate(l.dim())
                .map_err(|e| ConfigError(format!("oracle.noise: {e}")))?;
            if let Some(init) = &self.init {
                if init.x0.len() != l.dim() {
                    return fail(format!("init.x0: expected {} entries, got {}", l.dim(), init.x0.len()));
                }
                if let Some(m0) = &init.m0 {
                    if m0.len() != l.dim() {
                        return fail(format!("init.m0: expected {} entries, got {}", l.dim(), m0.len()));
                    }
                }
            }
            if let Some(hs) = &self.record.test_functions {
                for h in hs {
                    h.validate(l.dim())
                        .map_err(|e| ConfigError(format!("record.test_functions: {e}")))?;
                }
            }
        }
        if !(self.oracle.sigma.is_finite() && self.oracle.sigma >= 0.0) {
            return fail("oracle.sigma: must be >= 0");
        }
        let need_landscape = !matches!(self.experiment, ExperimentKind::Warmup | ExperimentKind::Convert);
        if need_landscape && self.landscape.is_none() {
            return fail(format!("[landscape] block is required for {}", self.experiment.name()));
        }
        let need_init = matches!(
            self.experiment,
            ExperimentKind::Simulate | ExperimentKind::WeakApprox | ExperimentKind::SvagSweep | ExperimentKind::SlowSde
        );
        if need_init && self.init.is_none() {
            return fail(format!("[init] block with x0 is required for {}", self.experiment.name()));
        }
        let stat_experiment = !matches!(
            self.experiment,
            ExperimentKind::Simulate | ExperimentKind::Convert | ExperimentKind::Descent
        );
        if stat_experiment && self.n_seeds < 2 {
            return fail(format!("n_seeds: {} needs at least 2 seeds", self.experiment.name()));
        }
        match self.experiment {
            ExperimentKind::Simulate => {
                let sim = require(&self.simulate, "simulate")?;
                if sim.methods.is_empty() {
                    return fail("simulate.methods: list at least one method");
                }
                if sim.sde_substeps == 0 {
                    return fail("simulate.sde_substeps: must be positive");
                }
                self.ema_schedule()?;
                if sim.methods.contains(&MethodName::SgdmStandard) {
                    self.standard()?;
                }
            }
            ExperimentKind::Warmup => {
                let w = require(&self.warmup, "warmup")?;
                if w.c.is_empty() || w.c.len() != w.z0.len() {
                    return fail("warmup: c and z0 must be non-empty and of equal length");
                }
                if !(w.eta > 0.0) || !(0.0..1.0).contains(&w.beta) || !(w.sigma >= 0.0) {
                    return fail("warmup: need eta > 0, beta in [0, 1), sigma >= 0");
                }
                if w.ks.is_empty() {
                    return fail("warmup.ks: list at least one step");
                }
            }
            ExperimentKind::WeakApprox => {
                let w = require(&self.weak_approx, "weak_approx")?;
                if w.etas.is_empty() || w.etas.iter().any(|e| !(*e > 0.0)) {
                    return fail("weak_approx.etas: need at least one positive learning rate");
                }
                if !(w.horizon > 0.0) {
                    return fail("weak_approx.horizon: must be positive");
                }
                if w.alphas.is_empty() || w.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return fail("weak_approx.alphas: values must lie in [0, 1]");
                }
                for &a in &w.alphas {
                    for &e in &w.etas {
                        let one_minus_beta = w.lambda * e.powf(a);
                        if !(one_minus_beta > 0.0 && one_minus_beta <= 1.0) {
                            return fail(format!(
                                "weak_approx.lambda: 1 - beta = {one_minus_beta} at eta = {e}, alpha = {a} is outside (0, 1]"
                            ));
                        }
                    }
                }
            }
            ExperimentKind::SvagSweep => {
                let s = require(&self.svag, "svag")?;
                if s.ells.is_empty() || s.ells.iter().any(|l| !(*l >= 1.0)) {
                    return fail("svag.ells: values must be >= 1");
                }
                if !(s.eta > 0.0) || !(0.0..1.0).contains(&s.beta) || s.steps == 0 {
                    return fail("svag: need eta > 0, beta in [0, 1), steps > 0");
                }
            }
            ExperimentKind::SlowSde => {
                let s = require(&self.slow_sde, "slow_sde")?;
                if !matches!(self.landscape, Some(Landscape::SphereQuartic { .. })) {
                    return fail("slow-sde needs a sphere_quartic landscape");
                }
                if s.etas.is_empty() || s.etas.iter().any(|e| !(*e > 0.0)) {
                    return fail("slow_sde.etas: need positive learning rates");
                }
                if !(s.t > 0.0) || !(s.dt > 0.0) || s.dt > s.t {
                    return fail("slow_sde: need 0 < dt <= t");
                }
                for &e in &s.etas {
                    let one_minus_beta = s.lambda * e.powf(s.alpha);
                    if !(one_minus_beta > 0.0 && one_minus_beta <= 1.0) {
                        return fail(format!("slow_sde: 1 - beta = {one_minus_beta} at eta = {e} is outside (0, 1]"));
                    }
                }
            }
            ExperimentKind::Descent => {
                let d = require(&self.descent, "descent")?;
                if !matches!(self.landscape, Some(Landscape::Quadratic { .. })) {
                    return fail("descent needs a quadratic landscape");
                }
                let dim = self.landscape.as_ref().unwrap().dim();
                if d.points.is_empty() || d.points.iter().any(|p| p.len() != dim) {
                    return fail(format!("descent.points: need points of dimension {dim}"));
                }
                if d.samples < 2 || !(d.eta > 0.0) {
                    return fail("descent: need samples >= 2 and eta > 0");
                }
            }
            ExperimentKind::Convert => {
                self.standard()?;
            }
        }
        Ok(())
    }

    pub fn oracle(&self, sigma: f64) -> Result<Oracle, ConfigError> {
        let l = self
            .landscape
            .clone()
            .ok_or_else(|| ConfigError("[landscape] block is required".into()))?;
        Oracle::new(l, self.oracle.noise.clone(), sigma).map_err(|e| ConfigError(format!("oracle: {e}")))
    }

    pub fn ema_schedule(&self) -> Result<Schedule, ConfigError> {
        let s = require(&self.schedule, "schedule")?;
        let err = |e: momlab_core::Error| ConfigError(format!("schedule: {e}"));
        match (&s.eta_k, &s.beta_k) {
            (Some(eta), Some(beta)) => {
                if s.eta.is_some() || s.beta.is_some() || s.alpha.is_some() || s.lambda.is_some() {
                    return fail("schedule: give either eta_k/beta_k arrays or scalar eta/beta, not both");
                }
                let mut sch = Schedule::from_arrays(eta.clone(), beta.clone()).map_err(err)?;
                if let Some(k) = s.steps {
                    if k < sch.horizon() {
                        sch = Schedule::from_arrays(eta[..k.max(1)].to_vec(), beta[..k.max(1)].to_vec()).map_err(err)?;
                    }
                }
                Ok(sch)
            }
            (None, None) => {
                let eta = s.eta.ok_or_else(|| ConfigError("schedule.eta: missing".into()))?;
                let steps = s.steps.ok_or_else(|| ConfigError("schedule.steps: missing".into()))?;
                match (s.beta, s.alpha, s.lambda) {
                    (Some(beta), None, None) => Schedule::constant(eta, beta, steps).map_err(err),
                    (None, Some(alpha), Some(lambda)) => {
                        let sch = Schedule::scaled(eta, alpha, lambda, steps).map_err(err)?;
                        sch.check_scaling().map_err(err)?;
                        Ok(sch)
                    }
                    (None, None, None) => Schedule::constant(eta, 0.0, steps).map_err(err),
                    _ => fail("schedule: give beta, or alpha with lambda"),
                }
            }
            _ => fail("schedule: eta_k and beta_k must be given together"),
        }
    }

    pub fn steps(&self) -> Result<usize, ConfigError> {
        let s = require(&self.schedule, "schedule")?;
        match s.steps {
            Some(k) => Ok(k),
            None => Ok(self.ema_schedule()?.horizon()),
        }
    }

    pub fn standard(&self) -> Result<StandardSchedule, ConfigError> {
        let s = require(&self.standard_schedule, "standard_schedule")?;
        StandardSchedule::from_arrays(s.gamma.clone(), s.mu.clone(), s.tau.clone())
            .map_err(|e| ConfigError(format!("standard_schedule: {e}")))
    }

    pub fn test_functions(&self, dim: usize) -> Vec<TestFunction> {
        self.record
            .test_functions
            .clone()
            .unwrap_or_else(|| TestFunction::default_set(dim))
    }
}

fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    block
        .as_ref()
        .ok_or_else(|| ConfigError(format!("[{name}] block is required")))
}
