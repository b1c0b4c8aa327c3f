//! TOML run configuration. All physical quantities are in units of `J`
//! (frequencies) and `1/J` (times). Unknown keys are rejected.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dtc::{ClassifierSettings, PhaseAxes};
use crate::error::{Error, Result};
use crate::model::{critical_coupling, Branch, ModelParams};
use crate::ode::StepControl;
use crate::quantum::{Frame, DEFAULT_MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Steady,
    DynamicsFull,
    DynamicsEffective,
    TransitionSweep,
    DtcRun,
    DtcPhaseDiagram,
    QuantumRun,
    QuantumLifetimes,
    SpectrumSolve,
    SpectrumScan,
    Validate,
}

impl Task {
    pub const ALL: [Task; 11] = [
        Task::Steady,
        Task::DynamicsFull,
        Task::DynamicsEffective,
        Task::TransitionSweep,
        Task::DtcRun,
        Task::DtcPhaseDiagram,
        Task::QuantumRun,
        Task::QuantumLifetimes,
        Task::SpectrumSolve,
        Task::SpectrumScan,
        Task::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Steady => "steady",
            Task::DynamicsFull => "dynamics-full",
            Task::DynamicsEffective => "dynamics-effective",
            Task::TransitionSweep => "transition-sweep",
            Task::DtcRun => "dtc-run",
            Task::DtcPhaseDiagram => "dtc-phase-diagram",
            Task::QuantumRun => "quantum-run",
            Task::QuantumLifetimes => "quantum-lifetimes",
            Task::SpectrumSolve => "spectrum-solve",
            Task::SpectrumScan => "spectrum-scan",
            Task::Validate => "validate",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([a, b]) => Complex64::new(a, b),
        }
    }
}

impl Default for ComplexValue {
    fn default() -> Self {
        ComplexValue::Real(0.0)
    }
}

/// Explicit list or `{ start, stop, count }` (inclusive, evenly spaced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) if r.count == 1 => vec![r.start],
            Grid::Range(r) => (0..r.count)
                .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                .collect(),
        }
    }

    fn check(&self, key: &str) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            return Err(cfg(key, "grid must be nonempty"));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(cfg(key, "grid values must be finite"));
        }
        Ok(())
    }
}

fn cfg(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg(key, "must be positive"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg(key, "must be >= 0"))
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_omega_m() -> f64 {
    1e4
}

/// Model parameters. In pulse tasks `delta` and `drive` describe the
/// relaxation phase and `g_over_gc` is relative to its critical coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub delta: f64,
    pub drive: f64,
    #[serde(default)]
    pub drive_phase: f64,
    pub kappa: f64,
    pub n_phonon: f64,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default, alias = "g_over_gc2")]
    pub g_over_gc: Option<f64>,
    #[serde(default = "default_one")]
    pub g1_over_g: f64,
    #[serde(default = "default_one")]
    pub g2_over_g: f64,
    #[serde(default = "default_omega_m")]
    pub omega_m: f64,
    #[serde(default)]
    pub gamma: f64,
}

/// Resolved model with derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub params: ModelParams,
    /// Symmetric coupling before the `g1_over_g`, `g2_over_g` factors.
    pub g: f64,
    pub gc: f64,
    pub alpha: Complex64,
}

impl ModelSection {
    fn check(&self) -> Result<()> {
        match (self.g, self.g_over_gc) {
            (Some(_), Some(_)) => return Err(cfg("model.g", "set either g or g_over_gc, not both")),
            (None, None) => {}
            (Some(g), None) => non_negative("model.g", g)?,
            (None, Some(r)) => non_negative("model.g_over_gc", r)?,
        }
        positive("model.delta", self.delta)?;
        positive("model.drive", self.drive)?;
        non_negative("model.kappa", self.kappa)?;
        positive("model.n_phonon", self.n_phonon)?;
        non_negative("model.g1_over_g", self.g1_over_g)?;
        non_negative("model.g2_over_g", self.g2_over_g)?;
        positive("model.omega_m", self.omega_m)?;
        non_negative("model.gamma", self.gamma)?;
        if !self.drive_phase.is_finite() {
            return Err(cfg("model.drive_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedModel> {
        self.resolve_with_phonons(self.n_phonon)
    }

    /// As [`ModelSection::resolve`] with `n_phonon` replaced; a relative
    /// coupling follows the new critical coupling.
    pub fn resolve_with_phonons(&self, n_phonon: f64) -> Result<ResolvedModel> {
        if self.g.is_none() && self.g_over_gc.is_none() {
            return Err(cfg("model.g", "one of g or g_over_gc is required"));
        }
        self.resolve_with(n_phonon, self.g_over_gc)
    }

    /// Resolution with the relative coupling overridden (sweeps).
    pub fn resolve_with(&self, n_phonon: f64, g_over_gc: Option<f64>) -> Result<ResolvedModel> {
        self.check()?;
        let base = ModelParams::symmetric(self.delta, self.drive, self.kappa, 0.0, n_phonon)?
            .with_drive(self.delta, Complex64::from_polar(self.drive, self.drive_phase))
            .with_omega_m(self.omega_m)
            .with_gamma(self.gamma);
        let gc = critical_coupling(&base)?;
        let g = match (g_over_gc, self.g) {
            (Some(r), _) => r * gc,
            (None, Some(g)) => g,
            (None, None) => 0.0,
        };
        let params = base.with_couplings(self.g1_over_g * g, self.g2_over_g * g);
        params.validate()?;
        Ok(ResolvedModel {
            params,
            g,
            gc,
            alpha: params.alpha(),
        })
    }
}

fn default_tol() -> f64 {
    1e-10
}

fn default_sample_step() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_sample_step")]
    pub sample_step: f64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        IntegrationSection {
            rtol: default_tol(),
            atol: default_tol(),
            max_step: None,
            sample_step: default_sample_step(),
        }
    }
}

impl IntegrationSection {
    pub fn step_control(&self) -> StepControl {
        let mut s = StepControl::with_tolerances(self.rtol, self.atol);
        if let Some(h) = self.max_step {
            s = s.with_max_step(h);
        }
        s
    }

    fn check(&self) -> Result<()> {
        positive("integration.rtol", self.rtol)?;
        positive("integration.atol", self.atol)?;
        positive("integration.sample_step", self.sample_step)?;
        if let Some(h) = self.max_step {
            positive("integration.max_step", h)?;
        }
        Ok(())
    }
}

/// Initial mean-field state: either a steady state or explicit amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `"plus"` or `"minus"`: start in that broken-symmetry steady state.
    #[serde(default)]
    pub steady: Option<BranchName>,
    #[serde(default)]
    pub b1: ComplexValue,
    #[serde(default)]
    pub b2: ComplexValue,
    /// Cavity variable: the deviation `d` in the effective model, the full
    /// drive-frame amplitude in the full model.
    #[serde(default)]
    pub cav: ComplexValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    Plus,
    Minus,
}

impl From<BranchName> for Branch {
    fn from(b: BranchName) -> Branch {
        match b {
            BranchName::Plus => Branch::Plus,
            BranchName::Minus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub t_final: f64,
    /// Start of the averaging window for the reported late-time values.
    #[serde(default)]
    pub average_from: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Effective,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub g_over_gc: Grid,
    pub t_final: f64,
    #[serde(default = "default_kind")]
    pub model: ModelKind,
    /// Late-time averaging starts here; `t_final` alone when absent.
    #[serde(default)]
    pub average_from: Option<f64>,
}

fn default_kind() -> ModelKind {
    ModelKind::Effective
}

/// A fixed `t1` or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum T1Value {
    Fixed(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

fn default_horizon() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Flipping-phase detuning.
    pub delta1: f64,
    pub t1: T1Value,
    pub t2: f64,
    pub n_periods: usize,
    /// Search window for the automatic flipping time.
    #[serde(default = "default_horizon")]
    pub flip_horizon: f64,
    /// Dense trajectory spacing; stroboscopic output only when absent.
    #[serde(default)]
    pub sample_step: Option<f64>,
}

impl ScheduleSection {
    fn check(&self) -> Result<()> {
        positive("schedule.delta1", self.delta1)?;
        if let T1Value::Fixed(t1) = self.t1 {
            if !(t1 > 0.0 && t1.is_finite()) {
                return Err(cfg("schedule.t1", "t1 must be positive"));
            }
        }
        positive("schedule.t2", self.t2)?;
        positive("schedule.flip_horizon", self.flip_horizon)?;
        if self.n_periods == 0 {
            return Err(cfg("schedule.n_periods", "must be >= 1"));
        }
        if let Some(h) = self.sample_step {
            positive("schedule.sample_step", h)?;
        }
        Ok(())
    }
}

fn default_fallback() -> f64 {
    1.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramSection {
    pub axes: PhaseAxes,
    pub axis1: Grid,
    pub axis2: Grid,
    /// Relative coupling of the initial state for points without a broken
    /// state of their own.
    #[serde(default = "default_fallback")]
    pub fallback_g_over_gc2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    #[serde(default = "default_discard")]
    pub discard: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_discard() -> usize {
    ClassifierSettings::default().discard
}

fn default_window() -> usize {
    ClassifierSettings::default().window
}

fn default_threshold() -> f64 {
    ClassifierSettings::default().threshold
}

impl From<ClassifierSection> for ClassifierSettings {
    fn from(c: ClassifierSection) -> Self {
        ClassifierSettings {
            discard: c.discard,
            window: c.window,
            threshold: c.threshold,
        }
    }
}

/// One phonon number or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhononList {
    One(usize),
    Many(Vec<usize>),
}

impl PhononList {
    pub fn values(&self) -> Vec<usize> {
        match self {
            PhononList::One(n) => vec![*n],
            PhononList::Many(v) => v.clone(),
        }
    }
}

fn default_q_rtol() -> f64 {
    1e-6
}

fn default_q_atol() -> f64 {
    1e-8
}

fn default_rate_factor() -> f64 {
    2.0
}

fn default_frame() -> Frame {
    Frame::Interaction
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

fn default_positivity_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    /// Overrides `model.n_phonon`; a relative coupling follows each value.
    pub n_phonon: PhononList,
    /// Defaults to the coherent-tail rule plus headroom.
    #[serde(default)]
    pub fock_cutoff: Option<usize>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    /// Lindblad rate in units of `kappa`.
    #[serde(default = "default_rate_factor")]
    pub rate_factor: f64,
    #[serde(default = "default_frame")]
    pub frame: Frame,
    #[serde(default = "default_q_rtol")]
    pub rtol: f64,
    #[serde(default = "default_q_atol")]
    pub atol: f64,
    #[serde(default)]
    pub sample_step: Option<f64>,
    #[serde(default = "default_positivity_every")]
    pub positivity_every: usize,
}

impl QuantumSection {
    fn check(&self) -> Result<()> {
        let ns = self.n_phonon.values();
        if ns.is_empty() || ns.contains(&0) {
            return Err(cfg("quantum.n_phonon", "values must be >= 1"));
        }
        if let Some(c) = self.fock_cutoff {
            if c == 0 {
                return Err(cfg("quantum.fock_cutoff", "must be >= 1"));
            }
        }
        non_negative("quantum.rate_factor", self.rate_factor)?;
        positive("quantum.rtol", self.rtol)?;
        positive("quantum.atol", self.atol)?;
        if let Some(h) = self.sample_step {
            positive("quantum.sample_step", h)?;
        }
        if self.max_dim == 0 {
            return Err(cfg("quantum.max_dim", "must be >= 1"));
        }
        Ok(())
    }
}

fn default_half_length() -> f64 {
    1.0
}

fn default_scan_count() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_half_length")]
    pub half_length: f64,
    pub transmission: f64,
    /// Integers `(m0, m1, m2)` of the closed-form equilibrium.
    #[serde(default)]
    pub m: Option<[i64; 3]>,
    /// Explicit positions, used when `m` is absent.
    #[serde(default)]
    pub x1: Option<f64>,
    #[serde(default)]
    pub x2: Option<f64>,
    /// Root search window; defaults to `k0 +- 3/L` around the equilibrium.
    #[serde(default)]
    pub k_min: Option<f64>,
    #[serde(default)]
    pub k_max: Option<f64>,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    /// Largest displacement of the scan, in units of `L`.
    #[serde(default)]
    pub scan_max: Option<f64>,
    #[serde(default = "default_scan_count")]
    pub scan_count: usize,
}

impl SpectrumSection {
    fn check(&self) -> Result<()> {
        positive("spectrum.half_length", self.half_length)?;
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(cfg("spectrum.transmission", "must lie in (0, 1]"));
        }
        match (self.m, self.x1, self.x2) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => return Err(cfg("spectrum.m", "give either m or both x1 and x2")),
        }
        if let (Some(a), Some(b)) = (self.k_min, self.k_max) {
            if !(a > 0.0 && b > a) {
                return Err(cfg("spectrum.k_min", "need 0 < k_min < k_max"));
            }
        }
        if let Some(h) = self.grid_step {
            positive("spectrum.grid_step", h)?;
        }
        if let Some(h) = self.fd_step {
            positive("spectrum.fd_step", h)?;
        }
        if let Some(h) = self.scan_max {
            positive("spectrum.scan_max", h)?;
        }
        if self.scan_count == 0 {
            return Err(cfg("spectrum.scan_count", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub dynamics: Option<DynamicsSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub phase_diagram: Option<PhaseDiagramSection>,
    #[serde(default)]
    pub classifier: Option<ClassifierSection>,
    #[serde(default)]
    pub quantum: Option<QuantumSection>,
    #[serde(default)]
    pub spectrum: Option<SpectrumSection>,
}

fn need<'a, T>(v: &'a Option<T>, key: &str, task: Task) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| cfg(key, format!("section is required for task {}", task.name())))
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_preset(name: &str) -> Result<RunConfig> {
        let text = preset(name).ok_or_else(|| {
            Error::Config(format!("unknown preset {name:?}; available: {}", PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")))
        })?;
        RunConfig::parse(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<&ModelSection> {
        need(&self.model, "model", self.task)
    }

    pub fn schedule(&self) -> Result<&ScheduleSection> {
        need(&self.schedule, "schedule", self.task)
    }

    pub fn classifier_settings(&self) -> ClassifierSettings {
        self.classifier.map(Into::into).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(cfg("workers", "must be >= 1"));
            }
        }
        self.integration.check()?;
        if let Some(m) = &self.model {
            let r = if self.task == Task::TransitionSweep { m.resolve_with(m.n_phonon, Some(1.0)) } else { m.resolve() };
            r.map_err(|e| match e {
                Error::Config(_) => e,
                other => cfg("model", other),
            })?;
        }
        if let Some(s) = &self.schedule {
            s.check()?;
        }
        if let Some(c) = &self.classifier {
            if c.window == 0 {
                return Err(cfg("classifier.window", "must be >= 1"));
            }
            non_negative("classifier.threshold", c.threshold)?;
        }
        if let Some(q) = &self.quantum {
            q.check()?;
        }
        if let Some(s) = &self.spectrum {
            s.check()?;
        }
        let t = self.task;
        match t {
            Task::Steady => {
                self.model()?;
            }
            Task::DynamicsFull | Task::DynamicsEffective => {
                self.model()?;
                need(&self.initial, "initial", t)?;
                let d = need(&self.dynamics, "dynamics", t)?;
                positive("dynamics.t_final", d.t_final)?;
            }
            Task::TransitionSweep => {
                self.model()?;
                need(&self.initial, "initial", t)?;
                let s = need(&self.sweep, "sweep", t)?;
                s.g_over_gc.check("sweep.g_over_gc")?;
                positive("sweep.t_final", s.t_final)?;
                let m = self.model()?;
                if m.g.is_some() || m.g_over_gc.is_some() {
                    return Err(cfg("model.g", "the coupling is set by sweep.g_over_gc"));
                }
            }
            Task::DtcRun => {
                self.model()?;
                self.schedule()?;
            }
            Task::DtcPhaseDiagram => {
                self.model()?;
                self.schedule()?;
                let p = need(&self.phase_diagram, "phase_diagram", t)?;
                p.axis1.check("phase_diagram.axis1")?;
                p.axis2.check("phase_diagram.axis2")?;
                positive("phase_diagram.fallback_g_over_gc2", p.fallback_g_over_gc2)?;
            }
            Task::QuantumRun | Task::QuantumLifetimes => {
                self.model()?;
                self.schedule()?;
                let q = need(&self.quantum, "quantum", t)?;
                if t == Task::QuantumRun && q.n_phonon.values().len() != 1 {
                    return Err(cfg("quantum.n_phonon", "quantum-run takes a single value"));
                }
            }
            Task::SpectrumSolve | Task::SpectrumScan => {
                need(&self.spectrum, "spectrum", t)?;
            }
            Task::Validate => {}
        }
        Ok(())
    }
}

pub const PRESETS: [(&str, &str); 11] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6a", include_str!("../presets/fig6a.toml")),
    ("fig6b", include_str!("../presets/fig6b.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("fig9", include_str!("../presets/fig9.toml")),
    ("figA1", include_str!("../presets/figA1.toml")),
    ("figA2", include_str!("../presets/figA2.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

/// Key reference for the configuration format.
pub const SCHEMA_REFERENCE: &str = include_str!("../presets/SCHEMA.md");
