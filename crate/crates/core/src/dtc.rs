//! Period-doubling protocol: a two-phase piecewise-constant drive that flips
//! the broken-symmetry state each period, stroboscopic analysis, the DTC
//! classifier, phase diagrams and the damped-lifetime estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{advance, steady_mean_field, EffectiveModel, MeanFieldState, Trajectory};
use crate::model::{critical_coupling, Branch, ModelParams};
use crate::ode::{uniform_samples, StepControl};
use crate::sweep::sweep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePhase {
    pub delta: f64,
    pub drive: Complex64,
    pub duration: f64,
}

/// Flipping phase followed by relaxation phase; both share the same `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub phase1: PulsePhase,
    pub phase2: PulsePhase,
    pub kappa: f64,
}

impl PulseSchedule {
    pub fn period(&self) -> f64 {
        self.phase1.duration + self.phase2.duration
    }

    pub fn alphas(&self) -> (Complex64, Complex64) {
        let a = |ph: &PulsePhase| ph.drive / Complex64::new(-ph.delta, self.kappa);
        (a(&self.phase1), a(&self.phase2))
    }

    /// Same schedule with a different flipping time.
    pub fn with_t1(mut self, t1: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1.is_finite()) {
            return Err(Error::invalid("t1", "t1 must be positive"));
        }
        self.phase1.duration = t1;
        Ok(self)
    }
}

/// Builds the schedule with `drive1 = drive2 (i kappa - delta1) / (i kappa - delta2)`
/// so that the classical amplitude is the same in both phases.
pub fn build_schedule(
    delta1: f64,
    delta2: f64,
    drive2: Complex64,
    kappa: f64,
    t1: f64,
    t2: f64,
) -> Result<PulseSchedule> {
    let den1 = Complex64::new(-delta1, kappa);
    let den2 = Complex64::new(-delta2, kappa);
    if den1.norm() == 0.0 || den2.norm() == 0.0 {
        return Err(Error::invalid("delta", "delta = kappa = 0 has no classical amplitude"));
    }
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::invalid("t1", "t1 must be positive"));
    }
    if !(t2 > 0.0 && t2.is_finite()) {
        return Err(Error::invalid("t2", "t2 must be positive"));
    }
    let drive1 = if delta1 == delta2 { drive2 } else { drive2 * den1 / den2 };
    Ok(PulseSchedule {
        phase1: PulsePhase {
            delta: delta1,
            drive: drive1,
            duration: t1,
        },
        phase2: PulsePhase {
            delta: delta2,
            drive: drive2,
            duration: t2,
        },
        kappa,
    })
}

/// `(delta, drive)` in force at time `t`: phase 1 on `[kT, kT + t1)`.
pub fn params_at(schedule: &PulseSchedule, t: f64) -> (f64, Complex64) {
    let period = schedule.period();
    let tau = t - (t / period).floor() * period;
    if tau < schedule.phase1.duration {
        (schedule.phase1.delta, schedule.phase1.drive)
    } else {
        (schedule.phase2.delta, schedule.phase2.drive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flip {
    pub time: f64,
    /// Refined minimum of `branch * delta_n`.
    pub delta_n_min: f64,
}

/// Sampling step of the flip-time search.
pub const FLIP_SAMPLE_STEP: f64 = 0.01;

/// First local minimum of `branch * delta_n(t)` under the flipping-phase
/// parameters, starting from the stationary state `initial` of `params`.
/// Only minima where the imbalance has changed sign count as flips.
pub fn find_flipping_time(
    params: &ModelParams,
    delta1: f64,
    drive1: Complex64,
    initial: Branch,
    search_horizon: f64,
    step: &StepControl,
) -> Result<Flip> {
    let start = steady_mean_field(params, initial)?;
    flip_from_state(params, delta1, drive1, start, initial, search_horizon, step)
}

/// Flip search from an explicit state; `branch` sets the sign of the imbalance
/// that is being reversed.
pub fn flip_from_state(
    params: &ModelParams,
    delta1: f64,
    drive1: Complex64,
    start: MeanFieldState,
    branch: Branch,
    search_horizon: f64,
    step: &StepControl,
) -> Result<Flip> {
    if !(search_horizon > 2.0 * FLIP_SAMPLE_STEP) {
        return Err(Error::invalid("search_horizon", "too short"));
    }
    let p1 = params.with_drive(delta1, drive1);
    p1.validate()?;
    let model = EffectiveModel::new(&p1);
    let samples = uniform_samples(0.0, search_horizon, FLIP_SAMPLE_STEP);
    let mut v = Vec::with_capacity(samples.len());
    let sign = branch.sign();
    let mut state = start;
    advance(&model, &mut state, 0.0, search_horizon, step, &samples, |_, s| {
        v.push(sign * s.delta_n())
    })?;
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo <= 1e-12 * params.n_phonon {
        return Err(Error::NoFlip {
            horizon: search_horizon,
        });
    }
    // a flip has to reverse the imbalance; earlier ripples are ignored
    for i in 1..v.len() - 1 {
        if v[i] < 0.0 && v[i] < v[i - 1] && v[i] <= v[i + 1] {
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let curv = a - 2.0 * b + c;
            let h = samples[i] - samples[i - 1];
            let (dt, vmin) = if curv > 0.0 {
                (0.5 * h * (a - c) / curv, b - (a - c) * (a - c) / (8.0 * curv))
            } else {
                (0.0, b)
            };
            return Ok(Flip {
                time: samples[i] + dt,
                delta_n_min: vmin,
            });
        }
    }
    Err(Error::NoFlip {
        horizon: search_horizon,
    })
}

/// Per-period samples `delta_n(kT)` for `k = 0..=n_periods`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StroboscopicRecord {
    pub k: Vec<usize>,
    pub delta_n_k: Vec<f64>,
    /// `alternates[k]`: sign of `delta_n` differs from period `k - 1`.
    pub alternates: Vec<bool>,
    pub period: f64,
    pub n_phonon: f64,
}

impl StroboscopicRecord {
    pub fn from_samples(delta_n_k: Vec<f64>, period: f64, n_phonon: f64) -> Self {
        let alternates = (0..delta_n_k.len())
            .map(|k| k > 0 && delta_n_k[k] * delta_n_k[k - 1] < 0.0)
            .collect();
        StroboscopicRecord {
            k: (0..delta_n_k.len()).collect(),
            delta_n_k,
            alternates,
            period,
            n_phonon,
        }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn normalized(&self) -> impl Iterator<Item = f64> + '_ {
        self.delta_n_k.iter().map(move |x| x / self.n_phonon)
    }

    /// Last index `k` that still flips sign relative to `k - 1` while both
    /// samples have `|delta_n| / N >= floor`, counting only the leading run of
    /// such flips.
    pub fn last_alternation(&self, floor: f64) -> Option<usize> {
        let x: Vec<f64> = self.normalized().collect();
        let mut last = None;
        for k in 1..x.len() {
            if self.alternates[k] && x[k].abs() >= floor && x[k - 1].abs() >= floor {
                last = Some(k);
            } else {
                break;
            }
        }
        last
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,t,delta_n_k,delta_n_over_n,alternates")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.k[i],
                self.k[i] as f64 * self.period,
                self.delta_n_k[i],
                self.delta_n_k[i] / self.n_phonon,
                self.alternates[i] as u8
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub step: StepControl,
    /// Dense trajectory spacing; `None` keeps only the stroboscopic samples.
    pub sample_step: Option<f64>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            step: StepControl::default(),
            sample_step: None,
        }
    }
}

/// Runs the effective model under the pulse schedule for `n_periods` periods.
/// `params` supplies everything except `(delta, drive)`, which come from the
/// schedule; the integrator restarts at every switch.
pub fn run_protocol(
    schedule: &PulseSchedule,
    params: &ModelParams,
    n_periods: usize,
    initial: MeanFieldState,
    opts: &ProtocolOptions,
) -> Result<(Trajectory, StroboscopicRecord)> {
    let (a1, a2) = schedule.alphas();
    if (a1 - a2).norm() > 1e-12 * a2.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid("schedule", "classical amplitude differs between phases"));
    }
    if params.kappa != schedule.kappa {
        return Err(Error::invalid("schedule", "kappa differs from model kappa"));
    }
    let p1 = params.with_drive(schedule.phase1.delta, schedule.phase1.drive);
    let p2 = params.with_drive(schedule.phase2.delta, schedule.phase2.drive);
    p1.validate()?;
    p2.validate()?;
    let models = [EffectiveModel::new(&p1), EffectiveModel::new(&p2)];
    let t1 = schedule.phase1.duration;
    let period = schedule.period();

    let mut traj = Trajectory::new(Complex64::new(0.0, 0.0));
    let mut strobe = Vec::with_capacity(n_periods + 1);
    strobe.push(initial.delta_n());
    traj.push(0.0, initial);
    let mut state = initial;
    for k in 0..n_periods {
        let t0 = k as f64 * period;
        let bounds = [(t0, t0 + t1), (t0 + t1, (k + 1) as f64 * period)];
        for (model, (ta, tb)) in models.iter().zip(bounds) {
            let samples = match opts.sample_step {
                Some(dt) => grid_between(ta, tb, dt),
                None => Vec::new(),
            };
            advance(model, &mut state, ta, tb, &opts.step, &samples, |t, s| traj.push(t, s)).map_err(
                |e| match e {
                    Error::Integration { t, reason } => Error::Integration {
                        t,
                        reason: format!("period {k}: {reason}"),
                    },
                    other => other,
                },
            )?;
        }
        strobe.push(state.delta_n());
        traj.push((k + 1) as f64 * period, state);
    }
    Ok((traj, StroboscopicRecord::from_samples(strobe, period, params.n_phonon)))
}

/// Points of the global grid `i * dt` inside `[ta, tb]`.
fn grid_between(ta: f64, tb: f64, dt: f64) -> Vec<f64> {
    let i0 = (ta / dt).ceil() as i64;
    let i1 = (tb / dt).floor() as i64;
    (i0..=i1).map(|i| i as f64 * dt).filter(|t| *t >= ta && *t <= tb).collect()
}

/// `S(theta) = (1/n) sum_{k=1..n} (delta_n(k)/N) exp(i 2 pi k theta)`.
pub fn fourier_spectrum(record: &StroboscopicRecord, n: usize, theta_grid: &[f64]) -> Result<Vec<Complex64>> {
    if n == 0 || record.len() < n + 1 {
        return Err(Error::invalid("n", "record holds fewer than n periods"));
    }
    let x: Vec<f64> = record.normalized().collect();
    Ok(theta_grid
        .iter()
        .map(|&th| {
            let s: Complex64 = (1..=n)
                .map(|k| Complex64::from_polar(x[k], 2.0 * PI * k as f64 * th))
                .sum();
            s / n as f64
        })
        .collect())
}

/// Bins `j / n` for `j = 0..n`.
pub fn theta_bins(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    pub discard: usize,
    pub window: usize,
    pub threshold: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            discard: 10,
            window: 40,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtcVerdict {
    pub is_dtc: bool,
    pub mean_amplitude: f64,
    pub alternation_fraction: f64,
}

/// Alternation plus amplitude test over periods `discard ..= discard + window`.
pub fn classify_dtc(record: &StroboscopicRecord, settings: &ClassifierSettings) -> DtcVerdict {
    let x: Vec<f64> = record.normalized().collect();
    let end = (settings.discard + settings.window + 1).min(x.len());
    if end <= settings.discard + 1 {
        return DtcVerdict {
            is_dtc: false,
            mean_amplitude: 0.0,
            alternation_fraction: 0.0,
        };
    }
    let w = &x[settings.discard..end];
    let flips = w.windows(2).filter(|p| p[0] * p[1] < 0.0).count();
    let alternation_fraction = flips as f64 / (w.len() - 1) as f64;
    let mean_amplitude = w.iter().map(|v| v.abs()).sum::<f64>() / w.len() as f64;
    DtcVerdict {
        is_dtc: flips == w.len() - 1 && mean_amplitude >= settings.threshold,
        mean_amplitude,
        alternation_fraction,
    }
}

/// Flipping-time policy for phase diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T1Mode {
    Fixed(f64),
    Auto { horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAxes {
    /// `(delta1, delta2)` with fixed `g` and fixed relaxation drive.
    Detunings,
    /// `(g1 / g, g2 / g)` with fixed detunings.
    Couplings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramSpec {
    pub axes: PhaseAxes,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Relaxation-phase model (`delta = delta2`, `drive = A2`) with symmetric `g`.
    pub base: ModelParams,
    /// Flipping detuning for [`PhaseAxes::Couplings`]; ignored otherwise.
    pub delta1: f64,
    pub t1_mode: T1Mode,
    pub t2: f64,
    pub n_periods: usize,
    pub classifier: ClassifierSettings,
    pub step: StepControl,
    /// Coupling of the fallback initial state, relative to `g_c2`, used when
    /// the point itself has no broken-symmetry state.
    pub fallback_g_over_gc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointOutcome {
    Verdict(DtcVerdict),
    Failed(String),
}

impl PointOutcome {
    pub fn is_dtc(&self) -> bool {
        matches!(self, PointOutcome::Verdict(v) if v.is_dtc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub axis1: f64,
    pub axis2: f64,
    pub gc1: f64,
    pub gc2: f64,
    pub g1: f64,
    pub g2: f64,
    pub t1_used: f64,
    pub outcome: PointOutcome,
}

/// Evaluates every `(axis1, axis2)` pair (row-major in `axis1`) on `workers`
/// threads. Per-point errors become [`PointOutcome::Failed`].
pub fn phase_diagram(spec: &PhaseDiagramSpec, workers: usize) -> Result<Vec<PhasePoint>> {
    if spec.axis1.is_empty() || spec.axis2.is_empty() {
        return Err(Error::invalid("grid", "axes must be nonempty"));
    }
    spec.base.validate()?;
    let points: Vec<(f64, f64)> = spec
        .axis1
        .iter()
        .flat_map(|&a| spec.axis2.iter().map(move |&b| (a, b)))
        .collect();
    sweep(&points, workers, |&(a, b)| phase_point(spec, a, b))
}

fn phase_point(spec: &PhaseDiagramSpec, a: f64, b: f64) -> PhasePoint {
    let mut pt = PhasePoint {
        axis1: a,
        axis2: b,
        gc1: f64::NAN,
        gc2: f64::NAN,
        g1: f64::NAN,
        g2: f64::NAN,
        t1_used: f64::NAN,
        outcome: PointOutcome::Failed(String::new()),
    };
    pt.outcome = match eval_point(spec, a, b, &mut pt) {
        Ok(v) => PointOutcome::Verdict(v),
        Err(e) => PointOutcome::Failed(e.to_string()),
    };
    pt
}

fn eval_point(spec: &PhaseDiagramSpec, a: f64, b: f64, pt: &mut PhasePoint) -> Result<DtcVerdict> {
    let base = &spec.base;
    let g = base.g1;
    let (delta1, relax, g1, g2) = match spec.axes {
        PhaseAxes::Detunings => (a, base.with_drive(b, base.drive), g, g),
        PhaseAxes::Couplings => (spec.delta1, *base, a * g, b * g),
    };
    relax.validate()?;
    let sched = build_schedule(delta1, relax.delta, relax.drive, relax.kappa, 1.0, spec.t2)?;
    let symmetric = relax.with_coupling(g);
    pt.gc2 = critical_coupling(&symmetric)?;
    pt.gc1 = critical_coupling(&symmetric.with_drive(delta1, sched.phase1.drive))?;
    pt.g1 = g1;
    pt.g2 = g2;
    let init_params = if g > pt.gc2 {
        symmetric
    } else {
        symmetric.with_coupling(spec.fallback_g_over_gc2 * pt.gc2)
    };
    let start = steady_mean_field(&init_params, Branch::Plus)?;
    let point_params = relax.with_couplings(g1, g2);
    point_params.validate()?;
    let t1 = match spec.t1_mode {
        T1Mode::Fixed(t1) => t1,
        T1Mode::Auto { horizon } => {
            flip_from_state(
                &point_params,
                delta1,
                sched.phase1.drive,
                start,
                Branch::Plus,
                horizon,
                &spec.step,
            )?
            .time
        }
    };
    pt.t1_used = t1;
    let sched = sched.with_t1(t1)?;
    let opts = ProtocolOptions {
        step: spec.step,
        sample_step: None,
    };
    let (_, rec) = run_protocol(&sched, &point_params, spec.n_periods, start, &opts)?;
    Ok(classify_dtc(&rec, &spec.classifier))
}

/// `T0 = ln(g / g_c2(0)) / gamma`, zero when `g <= g_c2(0)`.
pub fn damped_lifetime(gamma: f64, g: f64, gc2_initial: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be > 0"));
    }
    if !(gc2_initial > 0.0) {
        return Err(Error::invalid("gc2_initial", "must be > 0"));
    }
    Ok(if g > gc2_initial { (g / gc2_initial).ln() / gamma } else { 0.0 })
}

/// Envelopes `(d_bar(t), delta_n_bar(t))` of the damped oscillation with
/// `N(t) = n0 exp(-2 gamma t)` and `g_c2(t) = g_c2(0) exp(gamma t)`; both vanish
/// for `t >= T0`. `params` holds the relaxation-phase detuning and drive.
pub fn damped_envelope(t: f64, params: &ModelParams, g: f64, n0: f64) -> Result<(Complex64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be >= 0"));
    }
    let p0 = params.with_phonons(n0);
    let gc0 = critical_coupling(&p0)?;
    let gct = gc0 * (params.gamma * t).exp();
    if g <= gct {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let n = n0 * (-2.0 * params.gamma * t).exp();
    let f = (1.0 - (gct / g).powi(4)).sqrt();
    let d = Complex64::new(params.delta, -params.kappa).inv() * (2.0 * g * params.alpha_abs() * n * f);
    Ok((d, 0.5 * n * f))
}
