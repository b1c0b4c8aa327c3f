//! Task execution: turns a [`RunConfig`] into CSV tables, a JSON metadata
//! sidecar and a structured summary.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    InitialSection, ModelKind, ModelSection, ResolvedModel, RunConfig, ScheduleSection, SpectrumSection, T1Value, Task,
};
use crate::dtc::{
    build_schedule, classify_dtc, damped_lifetime, find_flipping_time, fourier_spectrum, phase_diagram, run_protocol,
    theta_bins, DtcVerdict, PhaseDiagramSpec, PhasePoint, PointOutcome, ProtocolOptions, PulseSchedule,
    StroboscopicRecord, T1Mode,
};
use crate::error::{Error, Result};
use crate::meanfield::{
    integrate, steady_mean_field, EffectiveModel, FullModel, IntegrationControls, MeanFieldRhs, MeanFieldState,
    Trajectory,
};
use crate::model::{critical_coupling, dicke_params, effective_frequency, steady_state, Branch, ModelParams};
use crate::quantum::{extract_lifetime, run_quantum_protocol, HilbertSpec, QuantumControls, QuantumSeries};
use crate::spectrum::{
    coupling_derivatives, equilibrium_positions, solve_k, spectrum_residual, spectrum_scan, symmetric_grid,
    CouplingDerivatives, Equilibrium, QuadraticFit, SpectrumProblem,
};
use crate::sweep::sweep;
use crate::validate::{run_validation, ValidationReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput { .. } => 2,
        _ => 3,
    }
}

/// Exit status for validation failures.
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadySummary {
    pub g: f64,
    pub gc: f64,
    pub alpha: Complex64,
    pub lambda: f64,
    pub delta_n_bar_over_n: f64,
    pub d_bar_sq: f64,
    pub effective_frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsSummary {
    pub model: ModelKind,
    pub final_delta_n_over_n: f64,
    pub final_cav_dev_sq: f64,
    pub average_from: f64,
    pub avg_delta_n_over_n: f64,
    pub avg_cav_dev_sq: f64,
    pub steady: SteadySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub g_over_gc: f64,
    pub delta_n_over_n: f64,
    pub d_sq: f64,
    pub delta_n_bar_over_n: f64,
    pub d_bar_sq: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DtcSummary {
    pub g: f64,
    pub gc2: f64,
    pub gc1: f64,
    pub t1: f64,
    pub period: f64,
    pub schedule: PulseSchedule,
    pub verdict: DtcVerdict,
    /// Leading periods with a sign change relative to the previous one.
    pub alternating_periods: usize,
    /// Mean of `|delta_n / N|` over periods `1..=n`.
    pub mean_amplitude: f64,
    pub delta_n_bar_over_n: f64,
    /// `|S(1/2)|` over the largest other bin.
    pub fourier_peak_ratio: f64,
    /// `ln(g / g_c2(0)) / gamma` when `gamma > 0`.
    pub damped_lifetime: Option<f64>,
    pub record: StroboscopicRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumRow {
    pub n_phonon: usize,
    pub dim: usize,
    pub fock_cutoff: usize,
    pub g: f64,
    pub gc2: f64,
    pub t1: f64,
    pub lifetime: Option<f64>,
    pub status: String,
    pub mean_field_strobe: Vec<f64>,
    pub series: QuantumSeries,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSolveSummary {
    pub equilibrium: Option<Equilibrium>,
    pub problem: SpectrumProblem,
    pub roots: Vec<f64>,
    pub tangential: Vec<f64>,
    pub k0: Option<f64>,
    pub residual_at_k0: Option<f64>,
    pub derivatives: Option<CouplingDerivatives>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumScanSummary {
    pub k0: f64,
    pub valid_cells: usize,
    pub total_cells: usize,
    pub fit: Option<QuadraticFit>,
    pub derivatives: CouplingDerivatives,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Steady(SteadySummary),
    Dynamics(DynamicsSummary),
    Sweep { rows: Vec<SweepRow> },
    Dtc(Box<DtcSummary>),
    PhaseDiagram { points: Vec<PhasePoint> },
    Quantum { rows: Vec<QuantumRow> },
    SpectrumSolve(SpectrumSolveSummary),
    SpectrumScan(SpectrumScanSummary),
    Validate(ValidationReport),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub task: Task,
    /// Human-readable run header (echoes derived quantities).
    pub header: Vec<String>,
    pub files: Vec<OutputFile>,
    pub summary: Summary,
    pub metadata: serde_json::Value,
    pub wall_time: f64,
}

impl RunOutcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }

    /// True unless a validation run reported failures.
    pub fn passed(&self) -> bool {
        match &self.summary {
            Summary::Validate(r) => r.all_passed(),
            _ => true,
        }
    }

    /// Writes every CSV plus `metadata.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        let meta = serde_json::to_string_pretty(&self.metadata).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("metadata.json"), meta + "\n")?;
        Ok(())
    }
}

/// Runs the configured task with `workers` threads for parallel sweeps.
pub fn execute(cfg: &RunConfig, workers: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    let workers = workers.max(1);
    let start = Instant::now();
    let mut ctx = Ctx::default();
    let summary = match cfg.task {
        Task::Steady => Summary::Steady(run_steady(cfg, &mut ctx)?),
        Task::DynamicsFull => Summary::Dynamics(run_dynamics(cfg, ModelKind::Full, &mut ctx)?),
        Task::DynamicsEffective => Summary::Dynamics(run_dynamics(cfg, ModelKind::Effective, &mut ctx)?),
        Task::TransitionSweep => Summary::Sweep {
            rows: run_transition_sweep(cfg, workers, &mut ctx)?,
        },
        Task::DtcRun => Summary::Dtc(Box::new(run_dtc(cfg, &mut ctx)?)),
        Task::DtcPhaseDiagram => Summary::PhaseDiagram {
            points: run_phase_diagram(cfg, workers, &mut ctx)?,
        },
        Task::QuantumRun | Task::QuantumLifetimes => Summary::Quantum {
            rows: run_quantum(cfg, workers, &mut ctx)?,
        },
        Task::SpectrumSolve => Summary::SpectrumSolve(run_spectrum_solve(cfg, &mut ctx)?),
        Task::SpectrumScan => Summary::SpectrumScan(run_spectrum_scan(cfg, workers, &mut ctx)?),
        Task::Validate => Summary::Validate(run_validate(workers, &mut ctx)?),
    };
    let wall_time = start.elapsed().as_secs_f64();
    let metadata = json!({
        "version": VERSION,
        "task": cfg.task.name(),
        "config": cfg,
        "derived": ctx.derived,
        "tolerances": ctx.tolerances,
        "workers": workers,
        "wall_time_s": wall_time,
        "files": ctx.files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
        "summary": summary_digest(&summary),
    });
    Ok(RunOutcome {
        task: cfg.task,
        header: ctx.header,
        files: ctx.files,
        summary,
        metadata,
        wall_time,
    })
}

#[derive(Default)]
struct Ctx {
    header: Vec<String>,
    files: Vec<OutputFile>,
    derived: serde_json::Map<String, serde_json::Value>,
    tolerances: serde_json::Map<String, serde_json::Value>,
}

impl Ctx {
    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push(OutputFile {
            name: name.into(),
            contents,
        });
    }

    fn derive(&mut self, key: &str, v: impl Serialize) {
        self.derived.insert(key.into(), json!(v));
    }

    fn model(&mut self, m: &ResolvedModel) {
        self.derive("g", m.g);
        self.derive("g_c", m.gc);
        self.derive("g_over_gc", m.g / m.gc);
        self.derive("alpha", [m.alpha.re, m.alpha.im]);
        self.derive("params", m.params);
        if let Ok(d) = dicke_params(&m.params) {
            self.derive("lambda", d.lambda);
        }
        self.header.push(format!(
            "g_c = {} (g = {}, g/g_c = {}), |alpha| = {}",
            m.gc,
            m.g,
            m.g / m.gc,
            m.alpha.norm()
        ));
    }

    fn integration(&mut self, cfg: &RunConfig) {
        self.tolerances.insert("rtol".into(), json!(cfg.integration.rtol));
        self.tolerances.insert("atol".into(), json!(cfg.integration.atol));
        self.tolerances.insert("max_step".into(), json!(cfg.integration.max_step));
    }
}

/// Compact summary for the sidecar (large series stay in the CSV files).
fn summary_digest(s: &Summary) -> serde_json::Value {
    match s {
        Summary::Dtc(d) => json!({
            "t1": d.t1,
            "period": d.period,
            "verdict": d.verdict,
            "alternating_periods": d.alternating_periods,
            "mean_amplitude": d.mean_amplitude,
            "delta_n_bar_over_n": d.delta_n_bar_over_n,
            "fourier_peak_ratio": d.fourier_peak_ratio,
            "damped_lifetime": d.damped_lifetime,
        }),
        Summary::Quantum { rows } => json!(rows
            .iter()
            .map(|r| json!({
                "n_phonon": r.n_phonon,
                "dim": r.dim,
                "fock_cutoff": r.fock_cutoff,
                "t1": r.t1,
                "lifetime": r.lifetime,
                "status": r.status,
                "max_trace_error": r.series.max_trace_error,
                "max_hermiticity_error": r.series.max_hermiticity_error,
                "min_eigenvalue": r.series.min_eigenvalue,
                "initial_tail_mass": r.series.initial_tail_mass,
                "warnings": r.series.warnings,
                "wall_time_s": r.wall_time,
            }))
            .collect::<Vec<_>>()),
        Summary::PhaseDiagram { points } => json!({
            "points": points.len(),
            "dtc": points.iter().filter(|p| p.outcome.is_dtc()).count(),
            "failed": points.iter().filter(|p| matches!(p.outcome, PointOutcome::Failed(_))).count(),
        }),
        other => json!(other),
    }
}

fn steady_summary(m: &ResolvedModel) -> Result<SteadySummary> {
    let p = &m.params;
    let ss = steady_state(p, m.g, Branch::Plus)?;
    Ok(SteadySummary {
        g: m.g,
        gc: m.gc,
        alpha: m.alpha,
        lambda: dicke_params(p).map(|d| d.lambda).unwrap_or(f64::NAN),
        delta_n_bar_over_n: ss.delta_n_bar / p.n_phonon,
        d_bar_sq: ss.d_bar.norm_sqr(),
        effective_frequency: effective_frequency(m.g, m.gc, p.j_coupling),
    })
}

fn run_steady(cfg: &RunConfig, ctx: &mut Ctx) -> Result<SteadySummary> {
    let m = cfg.model()?.resolve()?;
    ctx.model(&m);
    let mut csv = String::from("branch,b1_re,b1_im,b2_re,b2_im,d_re,d_im,delta_n,d_sq\n");
    for (name, b) in [("plus", Branch::Plus), ("minus", Branch::Minus)] {
        let s = steady_mean_field(&m.params, b)?;
        writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{}",
            s.b1.re,
            s.b1.im,
            s.b2.re,
            s.b2.im,
            s.cav.re,
            s.cav.im,
            s.delta_n(),
            s.cav.norm_sqr()
        )
        .unwrap();
    }
    ctx.file("steady.csv", csv);
    steady_summary(&m)
}

fn initial_state(init: &InitialSection, p: &ModelParams, kind: ModelKind) -> Result<MeanFieldState> {
    let offset = match kind {
        ModelKind::Full => p.alpha(),
        ModelKind::Effective => Complex64::new(0.0, 0.0),
    };
    Ok(match init.steady {
        Some(b) => {
            let mut s = steady_mean_field(p, b.into())?;
            s.cav += offset;
            s
        }
        None => MeanFieldState::new(init.b1.value(), init.b2.value(), init.cav.value()),
    })
}

fn integrate_kind(p: &ModelParams, kind: ModelKind, init: MeanFieldState, t_final: f64, c: &IntegrationControls) -> Result<Trajectory> {
    let model: Box<dyn MeanFieldRhs> = match kind {
        ModelKind::Effective => Box::new(EffectiveModel::new(p)),
        ModelKind::Full => Box::new(FullModel::new(p)?),
    };
    integrate(model.as_ref(), init, (0.0, t_final), c)
}

fn controls(cfg: &RunConfig) -> IntegrationControls {
    IntegrationControls {
        step: cfg.integration.step_control(),
        sample_step: cfg.integration.sample_step,
    }
}

fn csv_of(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn run_dynamics(cfg: &RunConfig, kind: ModelKind, ctx: &mut Ctx) -> Result<DynamicsSummary> {
    let m = cfg.model()?.resolve()?;
    ctx.model(&m);
    ctx.integration(cfg);
    let init = cfg.initial.as_ref().expect("validated");
    let dynamics = cfg.dynamics.expect("validated");
    let p = m.params;
    let traj = integrate_kind(&p, kind, initial_state(init, &p, kind)?, dynamics.t_final, &controls(cfg))?;
    let from = dynamics.average_from.unwrap_or(0.9 * dynamics.t_final);
    let last = traj.observables(traj.len() - 1);
    let n = p.n_phonon;
    ctx.file("trajectory.csv", csv_of(|w| traj.write_csv(w))?);
    Ok(DynamicsSummary {
        model: kind,
        final_delta_n_over_n: last.delta_n / n,
        final_cav_dev_sq: last.cav_dev_sq,
        average_from: from,
        avg_delta_n_over_n: traj.average_from(from, |o| o.delta_n) / n,
        avg_cav_dev_sq: traj.average_from(from, |o| o.cav_dev_sq),
        steady: steady_summary(&m)?,
    })
}

fn run_transition_sweep(cfg: &RunConfig, workers: usize, ctx: &mut Ctx) -> Result<Vec<SweepRow>> {
    let model = cfg.model()?;
    let s = cfg.sweep.as_ref().expect("validated");
    let init = *cfg.initial.as_ref().expect("validated");
    let base = model.resolve_with(model.n_phonon, Some(1.0))?;
    ctx.model(&base);
    ctx.integration(cfg);
    let c = controls(cfg);
    let grid = s.g_over_gc.values();
    let rows = sweep(&grid, workers, |&r| {
        let mut row = SweepRow {
            g_over_gc: r,
            delta_n_over_n: f64::NAN,
            d_sq: f64::NAN,
            delta_n_bar_over_n: f64::NAN,
            d_bar_sq: f64::NAN,
            status: "ok".into(),
        };
        let res = (|| -> Result<()> {
            let m = model.resolve_with(model.n_phonon, Some(r))?;
            let p = m.params;
            let ss = steady_state(&p, m.g, Branch::Plus)?;
            row.delta_n_bar_over_n = ss.delta_n_bar / p.n_phonon;
            row.d_bar_sq = ss.d_bar.norm_sqr();
            let traj = integrate_kind(&p, s.model, initial_state(&init, &p, s.model)?, s.t_final, &c)?;
            let (dn, d2) = match s.average_from {
                Some(from) => (traj.average_from(from, |o| o.delta_n), traj.average_from(from, |o| o.cav_dev_sq)),
                None => {
                    let o = traj.observables(traj.len() - 1);
                    (o.delta_n, o.cav_dev_sq)
                }
            };
            row.delta_n_over_n = dn / p.n_phonon;
            row.d_sq = d2;
            Ok(())
        })();
        if let Err(e) = res {
            row.status = csv_field(&e.to_string());
        }
        row
    })?;
    let mut csv = String::from("g_over_gc,delta_n_over_n,d_sq,delta_n_bar_over_n,d_bar_sq,status\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.g_over_gc, r.delta_n_over_n, r.d_sq, r.delta_n_bar_over_n, r.d_bar_sq, r.status
        )
        .unwrap();
    }
    ctx.file("sweep.csv", csv);
    Ok(rows)
}

/// Keeps free text safe inside one CSV field.
fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Schedule with `t1` resolved; `params` are the relaxation-phase parameters.
pub fn resolve_schedule(s: &ScheduleSection, params: &ModelParams, step: &crate::ode::StepControl) -> Result<PulseSchedule> {
    let sched = build_schedule(s.delta1, params.delta, params.drive, params.kappa, 1.0, s.t2)?;
    let t1 = match s.t1 {
        T1Value::Fixed(t1) => t1,
        T1Value::Keyword(_) => {
            find_flipping_time(params, s.delta1, sched.phase1.drive, Branch::Plus, s.flip_horizon, step)?.time
        }
    };
    sched.with_t1(t1)
}

fn run_dtc(cfg: &RunConfig, ctx: &mut Ctx) -> Result<DtcSummary> {
    let m = cfg.model()?.resolve()?;
    ctx.model(&m);
    ctx.integration(cfg);
    let p = m.params;
    let s = cfg.schedule()?;
    let step = cfg.integration.step_control();
    let sched = resolve_schedule(s, &p, &step)?;
    let gc1 = critical_coupling(&p.with_drive(sched.phase1.delta, sched.phase1.drive))?;
    ctx.derive("g_c2", m.gc);
    ctx.derive("g_c1", gc1);
    ctx.derive("t1", sched.phase1.duration);
    ctx.derive("drive1", [sched.phase1.drive.re, sched.phase1.drive.im]);
    ctx.header.push(format!(
        "g_c2 = {}, g_c1 = {}, t1 = {}, T = {}",
        m.gc,
        gc1,
        sched.phase1.duration,
        sched.period()
    ));
    let start = steady_mean_field(&p, Branch::Plus)?;
    let opts = ProtocolOptions {
        step,
        sample_step: s.sample_step,
    };
    let (traj, rec) = run_protocol(&sched, &p, s.n_periods, start, &opts)?;
    let n = s.n_periods;
    let spec = fourier_spectrum(&rec, n, &theta_bins(n))?;
    let half = n / 2;
    let peak = if n % 2 == 0 { spec[half].norm() } else { f64::NAN };
    let off = spec
        .iter()
        .enumerate()
        .filter(|(j, _)| n % 2 != 0 || *j != half)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    let mut fcsv = String::from("theta,re,im,abs\n");
    for (j, z) in spec.iter().enumerate() {
        writeln!(fcsv, "{},{},{},{}", j as f64 / n as f64, z.re, z.im, z.norm()).unwrap();
    }
    ctx.file("stroboscopic.csv", csv_of(|w| rec.write_csv(w))?);
    ctx.file("spectrum.csv", fcsv);
    if s.sample_step.is_some() {
        ctx.file("trajectory.csv", csv_of(|w| traj.write_csv(w))?);
    }
    let x: Vec<f64> = rec.normalized().collect();
    let alternating = rec.alternates.iter().skip(1).take_while(|a| **a).count();
    let ss = steady_state(&p, m.g, Branch::Plus)?;
    Ok(DtcSummary {
        g: m.g,
        gc2: m.gc,
        gc1,
        t1: sched.phase1.duration,
        period: sched.period(),
        schedule: sched,
        verdict: classify_dtc(&rec, &cfg.classifier_settings()),
        alternating_periods: alternating,
        mean_amplitude: x[1..].iter().map(|v| v.abs()).sum::<f64>() / (x.len() - 1) as f64,
        delta_n_bar_over_n: ss.delta_n_bar / p.n_phonon,
        fourier_peak_ratio: peak / off,
        damped_lifetime: if p.gamma > 0.0 { Some(damped_lifetime(p.gamma, m.g, m.gc)?) } else { None },
        record: rec,
    })
}

fn run_phase_diagram(cfg: &RunConfig, workers: usize, ctx: &mut Ctx) -> Result<Vec<PhasePoint>> {
    let m = cfg.model()?.resolve()?;
    ctx.model(&m);
    ctx.integration(cfg);
    let s = cfg.schedule()?;
    let pd = cfg.phase_diagram.as_ref().expect("validated");
    let spec = PhaseDiagramSpec {
        axes: pd.axes,
        axis1: pd.axis1.values(),
        axis2: pd.axis2.values(),
        base: m.params.with_coupling(m.g),
        delta1: s.delta1,
        t1_mode: match s.t1 {
            T1Value::Fixed(t1) => T1Mode::Fixed(t1),
            T1Value::Keyword(_) => T1Mode::Auto { horizon: s.flip_horizon },
        },
        t2: s.t2,
        n_periods: s.n_periods,
        classifier: cfg.classifier_settings(),
        step: cfg.integration.step_control(),
        fallback_g_over_gc2: pd.fallback_g_over_gc2,
    };
    ctx.header.push(format!(
        "{} x {} grid, {} periods per point, {} workers",
        spec.axis1.len(),
        spec.axis2.len(),
        spec.n_periods,
        workers
    ));
    let points = phase_diagram(&spec, workers)?;
    let mut csv = String::from("axis1,axis2,is_dtc,mean_amplitude,alternation_fraction,g_c1,g_c2,t1_used,status\n");
    for p in &points {
        let (dtc, amp, alt, status) = match &p.outcome {
            PointOutcome::Verdict(v) => (v.is_dtc as u8, v.mean_amplitude, v.alternation_fraction, "ok".to_string()),
            PointOutcome::Failed(e) => (0, f64::NAN, f64::NAN, csv_field(e)),
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            p.axis1, p.axis2, dtc, amp, alt, p.gc1, p.gc2, p.t1_used, status
        )
        .unwrap();
    }
    ctx.file("phase_diagram.csv", csv);
    Ok(points)
}

fn quantum_controls(cfg: &RunConfig) -> QuantumControls {
    let q = cfg.quantum.as_ref().expect("validated");
    QuantumControls {
        step: crate::ode::StepControl::with_tolerances(q.rtol, q.atol),
        frame: q.frame,
        rate_factor: q.rate_factor,
        sample_step: q.sample_step,
        positivity_every: q.positivity_every,
        ..QuantumControls::default()
    }
}

fn quantum_point(model: &ModelSection, cfg: &RunConfig, n: usize) -> Result<QuantumRow> {
    let start = Instant::now();
    let q = cfg.quantum.as_ref().expect("validated");
    let s = cfg.schedule()?;
    let m = model.resolve_with_phonons(n as f64)?;
    let p = m.params;
    let step = cfg.integration.step_control();
    let sched = resolve_schedule(s, &p, &step)?;
    let mf_start = steady_mean_field(&p, Branch::Plus)?;
    let (_, rec) = run_protocol(&sched, &p, s.n_periods, mf_start, &ProtocolOptions { step, sample_step: None })?;
    let spec = match q.fock_cutoff {
        Some(c) => HilbertSpec::new(n, c)?,
        None => HilbertSpec::auto(n, mf_start.cav.norm())?,
    }
    .with_max_dim(q.max_dim)?;
    let series = run_quantum_protocol(&spec, &sched, &p, s.n_periods, &quantum_controls(cfg))?;
    let (lifetime, status) = match extract_lifetime(&series.strobe, series.period) {
        Ok(t) => (Some(t), "ok".to_string()),
        Err(e) => (None, csv_field(&e.to_string())),
    };
    Ok(QuantumRow {
        n_phonon: n,
        dim: spec.dim(),
        fock_cutoff: spec.fock_cutoff,
        g: m.g,
        gc2: m.gc,
        t1: sched.phase1.duration,
        lifetime,
        status,
        mean_field_strobe: rec.normalized().collect(),
        series,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_quantum(cfg: &RunConfig, workers: usize, ctx: &mut Ctx) -> Result<Vec<QuantumRow>> {
    let model = cfg.model()?;
    let q = cfg.quantum.as_ref().expect("validated");
    let ns = q.n_phonon.values();
    ctx.integration(cfg);
    ctx.tolerances.insert("quantum_rtol".into(), json!(q.rtol));
    ctx.tolerances.insert("quantum_atol".into(), json!(q.atol));
    for &n in &ns {
        let m = model.resolve_with_phonons(n as f64)?;
        ctx.header.push(format!("N = {n}: g_c2 = {}, g = {}, |alpha| = {}", m.gc, m.g, m.alpha.norm()));
        ctx.derive(&format!("g_c2_N{n}"), m.gc);
    }
    let results = sweep(&ns, workers, |&n| quantum_point(model, cfg, n))?;
    let mut rows = Vec::with_capacity(ns.len());
    for (&n, r) in ns.iter().zip(results) {
        rows.push(match r {
            Ok(row) => row,
            Err(e @ (Error::Config(_) | Error::InvalidInput { .. })) => return Err(e),
            Err(e) => QuantumRow {
                n_phonon: n,
                dim: 0,
                fock_cutoff: 0,
                g: f64::NAN,
                gc2: f64::NAN,
                t1: f64::NAN,
                lifetime: None,
                status: csv_field(&format!("failed: {e}")),
                mean_field_strobe: Vec::new(),
                series: QuantumSeries::default(),
                wall_time: 0.0,
            },
        });
    }
    for r in &rows {
        for w in &r.series.warnings {
            ctx.header.push(format!("warning (N = {}): {w}", r.n_phonon));
        }
    }
    let mut csv = String::from("n_phonon,dim,fock_cutoff,t1,lifetime,status\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.n_phonon,
            r.dim,
            r.fock_cutoff,
            r.t1,
            r.lifetime.unwrap_or(f64::NAN),
            r.status
        )
        .unwrap();
        let mut s = String::from("k,t,jx_over_n,mean_field_delta_n_over_n\n");
        for (k, x) in r.series.strobe.iter().enumerate() {
            let mf = r.mean_field_strobe.get(k).copied().unwrap_or(f64::NAN);
            writeln!(s, "{k},{},{x},{mf}", k as f64 * r.series.period).unwrap();
        }
        let name = match cfg.task {
            Task::QuantumRun => "stroboscopic.csv".to_string(),
            _ => format!("stroboscopic_N{}.csv", r.n_phonon),
        };
        ctx.file(name, s);
        if cfg.task == Task::QuantumRun {
            ctx.file("quantum.csv", csv_of(|w| r.series.write_csv(w))?);
        }
    }
    if cfg.task == Task::QuantumLifetimes {
        ctx.file("lifetimes.csv", csv);
    }
    Ok(rows)
}

fn spectrum_problem(s: &SpectrumSection) -> Result<(SpectrumProblem, Option<Equilibrium>)> {
    match s.m {
        Some([m0, m1, m2]) => {
            let eq = equilibrium_positions(m0, m1, m2, s.transmission, s.half_length)?;
            Ok((eq.problem(s.transmission, s.half_length)?, Some(eq)))
        }
        None => {
            let p = SpectrumProblem::new(s.half_length, s.transmission, s.x1.unwrap_or(0.0), s.x2.unwrap_or(0.0))?;
            Ok((p, None))
        }
    }
}

fn k_window(s: &SpectrumSection, k0: Option<f64>) -> Result<(f64, f64)> {
    let l = s.half_length;
    match (s.k_min, s.k_max, k0) {
        (Some(a), Some(b), _) => Ok((a / l, b / l)),
        (a, b, Some(k)) => Ok((a.map_or(k - 3.0 / l, |v| v / l).max(1e-9), b.map_or(k + 3.0 / l, |v| v / l))),
        _ => Err(Error::Config("spectrum.k_min: a root window is required without m".into())),
    }
}

fn run_spectrum_solve(cfg: &RunConfig, ctx: &mut Ctx) -> Result<SpectrumSolveSummary> {
    let s = cfg.spectrum.as_ref().expect("validated");
    let (p, eq) = spectrum_problem(s)?;
    let l = s.half_length;
    let (lo, hi) = k_window(s, eq.map(|e| e.k))?;
    let roots = solve_k(&p, lo, hi, s.grid_step.map(|h| h / l))?;
    ctx.derive("phi", p.phi());
    ctx.derive("x1", p.x1);
    ctx.derive("x2", p.x2);
    ctx.header.push(format!(
        "x1/L = {}, x2/L = {}, phi = {}, {} roots in kL [{}, {}]",
        p.x1 / l,
        p.x2 / l,
        p.phi(),
        roots.roots.len(),
        lo * l,
        hi * l
    ));
    let mut csv = String::from("k_l,residual\n");
    for &k in &roots.roots {
        writeln!(csv, "{},{}", k * l, spectrum_residual(k, &p)).unwrap();
    }
    ctx.file("roots.csv", csv);
    let k0 = eq.map(|e| e.k);
    let derivatives = match k0 {
        Some(k) => Some(coupling_derivatives(&p, k, s.fd_step)?),
        None => None,
    };
    if let Some(k) = k0 {
        ctx.derive("k0_l", k * l);
    }
    let grid = symmetric_grid(s.scan_max.unwrap_or(0.01) * l, s.scan_count);
    let mut slices = String::from("membrane,dx_over_l,branch,k_l\n");
    for membrane in [1, 2] {
        for &dx in &grid {
            let shifted = if membrane == 1 { p.displaced(dx, 0.0) } else { p.displaced(0.0, dx) };
            let Ok(q) = shifted else { continue };
            let r = solve_k(&q, lo, hi, s.grid_step.map(|h| h / l))?;
            for (b, k) in r.roots.iter().enumerate() {
                writeln!(slices, "{membrane},{},{b},{}", dx / l, k * l).unwrap();
            }
        }
    }
    ctx.file("slices.csv", slices);
    Ok(SpectrumSolveSummary {
        equilibrium: eq,
        problem: p,
        roots: roots.roots,
        tangential: roots.tangential,
        k0,
        residual_at_k0: k0.map(|k| spectrum_residual(k, &p)),
        derivatives,
    })
}

fn run_spectrum_scan(cfg: &RunConfig, workers: usize, ctx: &mut Ctx) -> Result<SpectrumScanSummary> {
    let s = cfg.spectrum.as_ref().expect("validated");
    let (p, eq) = spectrum_problem(s)?;
    let l = s.half_length;
    let seed = match (eq, s.k_min, s.k_max) {
        (Some(e), _, _) => e.k,
        (None, Some(a), Some(b)) => {
            let r = solve_k(&p, a / l, b / l, s.grid_step.map(|h| h / l))?;
            let mid = 0.5 * (a + b) / l;
            r.roots
                .iter()
                .copied()
                .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
                .ok_or_else(|| Error::Spectrum("no root in the window".into()))?
        }
        _ => return Err(Error::Config("spectrum.k_min: a root window is required without m".into())),
    };
    let grid = symmetric_grid(s.scan_max.unwrap_or(0.01) * l, s.scan_count);
    let surface = spectrum_scan(&p, &grid, &grid, seed, workers)?;
    let derivatives = coupling_derivatives(&p, surface.k0, s.fd_step)?;
    ctx.derive("k0_l", surface.k0 * l);
    ctx.header.push(format!(
        "k0 L = {}, {} x {} grid up to |dx| = {} L",
        surface.k0 * l,
        grid.len(),
        grid.len(),
        s.scan_max.unwrap_or(0.01)
    ));
    ctx.file("surface.csv", csv_of(|w| surface.write_csv(w))?);
    Ok(SpectrumScanSummary {
        k0: surface.k0,
        valid_cells: surface.valid_cells(),
        total_cells: grid.len() * grid.len(),
        fit: surface.quadratic_fit().ok(),
        derivatives,
    })
}

fn run_validate(workers: usize, ctx: &mut Ctx) -> Result<ValidationReport> {
    let report = run_validation(workers)?;
    let mut csv = String::from("check,status,detail\n");
    for c in &report.checks {
        writeln!(csv, "{},{},{}", c.name, if c.passed { "pass" } else { "FAIL" }, csv_field(&c.detail)).unwrap();
    }
    ctx.file("validation.csv", csv);
    ctx.header.push(report.table());
    Ok(report)
}
