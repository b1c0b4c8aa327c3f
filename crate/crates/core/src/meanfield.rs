//! Mean-field equations of motion for the full three-mode model and for the
//! effective (rotating-wave, linearized) model, with trajectory recording.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    critical_coupling, effective_frequency, membrane_frequencies, mode_amplitudes, steady_state, Branch,
    ModelParams,
};
use crate::ode::{uniform_samples, Dopri5, StepControl};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitudes `(b1, b2, cav)`. `cav` is the effective-model `d`, or the full
/// model's cavity amplitude in the frame rotating at the drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub b1: Complex64,
    pub b2: Complex64,
    pub cav: Complex64,
}

impl MeanFieldState {
    pub fn new(b1: Complex64, b2: Complex64, cav: Complex64) -> Self {
        MeanFieldState { b1, b2, cav }
    }

    /// Real membrane amplitudes and a given cavity amplitude.
    pub fn real(b1: f64, b2: f64, cav: Complex64) -> Self {
        MeanFieldState::new(Complex64::new(b1, 0.0), Complex64::new(b2, 0.0), cav)
    }

    /// Phonon imbalance `(|b1|^2 - |b2|^2) / 2`.
    pub fn delta_n(&self) -> f64 {
        0.5 * (self.b1.norm_sqr() - self.b2.norm_sqr())
    }

    pub fn total_phonons(&self) -> f64 {
        self.b1.norm_sqr() + self.b2.norm_sqr()
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.b1, self.b2, self.cav]
    }

    pub fn from_slice(s: &[Complex64]) -> Self {
        MeanFieldState::new(s[0], s[1], s[2])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Right-hand side of a mean-field model.
pub trait MeanFieldRhs: Sync {
    fn derivative(&self, s: &MeanFieldState) -> MeanFieldState;

    /// Reference value subtracted from `cav` when reporting the cavity
    /// displacement: `alpha` for the full model, zero for the effective one.
    fn cav_offset(&self) -> Complex64;

    /// Largest step the integrator may take.
    fn max_step(&self) -> f64 {
        f64::INFINITY
    }
}

/// Effective model in the frame rotating at `omega_m`, with optional membrane
/// damping and unequal couplings.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveModel {
    alpha_abs: f64,
    delta: f64,
    kappa: f64,
    g1: f64,
    g2: f64,
    j: f64,
    gamma: f64,
}

impl EffectiveModel {
    pub fn new(p: &ModelParams) -> Self {
        EffectiveModel {
            alpha_abs: p.alpha_abs(),
            delta: p.delta,
            kappa: p.kappa,
            g1: p.g1,
            g2: p.g2,
            j: p.j_coupling,
            gamma: p.gamma,
        }
    }
}

impl MeanFieldRhs for EffectiveModel {
    #[inline]
    fn derivative(&self, s: &MeanFieldState) -> MeanFieldState {
        let x = 2.0 * s.cav.re;
        let a = self.alpha_abs;
        let j2 = 2.0 * self.j;
        let h1 = s.b1 * (2.0 * self.g1 * a * x) - s.b2 * j2;
        let h2 = s.b2 * (-2.0 * self.g2 * a * x) - s.b1 * j2;
        let hd = s.cav * self.delta
            + 2.0 * a * (self.g1 * s.b1.norm_sqr() - self.g2 * s.b2.norm_sqr());
        MeanFieldState {
            b1: -I * h1 - s.b1 * self.gamma,
            b2: -I * h2 - s.b2 * self.gamma,
            cav: -I * hd - s.cav * self.kappa,
        }
    }

    fn cav_offset(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

/// Full model: cavity in the drive-rotating frame, membranes in the lab frame.
#[derive(Debug, Clone, Copy)]
pub struct FullModel {
    alpha: Complex64,
    drive: Complex64,
    delta: f64,
    kappa: f64,
    g1: f64,
    g2: f64,
    j: f64,
    gamma: f64,
    w1: f64,
    w2: f64,
    omega_m: f64,
}

impl FullModel {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let (w1, w2) = membrane_frequencies(p)?;
        Ok(FullModel {
            alpha: p.alpha(),
            drive: p.drive,
            delta: p.delta,
            kappa: p.kappa,
            g1: p.g1,
            g2: p.g2,
            j: p.j_coupling,
            gamma: p.gamma,
            w1,
            w2,
            omega_m: p.omega_m,
        })
    }
}

impl MeanFieldRhs for FullModel {
    #[inline]
    fn derivative(&self, s: &MeanFieldState) -> MeanFieldState {
        let q1 = 2.0 * s.b1.re;
        let q2 = 2.0 * s.b2.re;
        let a2 = s.cav.norm_sqr();
        let shift = self.g1 * q1 * q1 - self.g2 * q2 * q2;
        let ha = s.cav * (self.delta + shift) + self.drive;
        let jq = 2.0 * self.j * (q1 - q2);
        let h1 = s.b1 * self.w1 + (2.0 * self.g1 * a2 * q1 + jq);
        let h2 = s.b2 * self.w2 - (2.0 * self.g2 * a2 * q2 + jq);
        MeanFieldState {
            b1: -I * h1 - s.b1 * self.gamma,
            b2: -I * h2 - s.b2 * self.gamma,
            cav: -I * ha - s.cav * self.kappa,
        }
    }

    fn cav_offset(&self) -> Complex64 {
        self.alpha
    }

    fn max_step(&self) -> f64 {
        2.0 * PI / (50.0 * self.omega_m)
    }
}

/// `d/dt (b1, b2, d)` of the effective model.
pub fn effective_rhs(state: &MeanFieldState, params: &ModelParams) -> MeanFieldState {
    EffectiveModel::new(params).derivative(state)
}

/// `d/dt (b1, b2, a)` of the full model.
pub fn full_rhs(state: &MeanFieldState, params: &ModelParams) -> Result<MeanFieldState> {
    Ok(FullModel::new(params)?.derivative(state))
}

/// Tolerances plus the uniform output spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationControls {
    pub step: StepControl,
    pub sample_step: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        IntegrationControls {
            step: StepControl::default(),
            sample_step: 0.01,
        }
    }
}

impl IntegrationControls {
    pub fn new(rtol: f64, atol: f64, sample_step: f64) -> Self {
        IntegrationControls {
            step: StepControl::with_tolerances(rtol, atol),
            sample_step,
        }
    }
}

/// Per-sample observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub delta_n: f64,
    pub n_total: f64,
    pub cav_dev_sq: f64,
    pub cav: Complex64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub cav_offset: Complex64,
}

impl Trajectory {
    pub fn new(cav_offset: Complex64) -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            cav_offset,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, s: MeanFieldState) {
        // segment boundaries repeat the shared endpoint
        if let Some(&last) = self.times.last() {
            if t <= last {
                return;
            }
        }
        self.times.push(t);
        self.states.push(s);
    }

    pub fn observables(&self, i: usize) -> Observables {
        let s = &self.states[i];
        Observables {
            delta_n: s.delta_n(),
            n_total: s.total_phonons(),
            cav_dev_sq: (s.cav - self.cav_offset).norm_sqr(),
            cav: s.cav,
        }
    }

    pub fn last(&self) -> Option<(f64, MeanFieldState)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// Mean of an observable over samples with `t >= t_from`.
    pub fn average_from<F: Fn(&Observables) -> f64>(&self, t_from: f64, f: F) -> f64 {
        let (sum, n) = (0..self.len())
            .filter(|&i| self.times[i] >= t_from)
            .fold((0.0, 0usize), |(s, n), i| (s + f(&self.observables(i)), n + 1));
        sum / n.max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "t,b1_re,b1_im,b2_re,b2_im,cav_re,cav_im,delta_n,n_total,cav_dev_sq"
        )?;
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let o = self.observables(i);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                t, s.b1.re, s.b1.im, s.b2.re, s.b2.im, s.cav.re, s.cav.im, o.delta_n, o.n_total, o.cav_dev_sq
            )?;
        }
        Ok(())
    }
}

/// Advances `state` from `t0` to `t1`, calling `on_sample` at each sample time.
pub fn advance<R, S>(
    rhs: &R,
    state: &mut MeanFieldState,
    t0: f64,
    t1: f64,
    step: &StepControl,
    samples: &[f64],
    mut on_sample: S,
) -> Result<crate::ode::Stats>
where
    R: MeanFieldRhs + ?Sized,
    S: FnMut(f64, MeanFieldState),
{
    let mut y = state.as_array();
    let ctrl = step.with_max_step(step.max_step.min(rhs.max_step()));
    let mut ws = Dopri5::<Complex64>::new(3);
    let stats = ws.solve(
        |_, y, dy| {
            let d = rhs.derivative(&MeanFieldState::from_slice(y));
            dy[0] = d.b1;
            dy[1] = d.b2;
            dy[2] = d.cav;
        },
        t0,
        &mut y,
        t1,
        &ctrl,
        samples,
        |t, y| on_sample(t, MeanFieldState::from_slice(y)),
    )?;
    *state = MeanFieldState::from_slice(&y);
    if !state.is_finite() {
        return Err(Error::Integration {
            t: t1,
            reason: "non-finite state".into(),
        });
    }
    Ok(stats)
}

/// Integrates a mean-field model and records samples every
/// `controls.sample_step` (plus the final time).
pub fn integrate<R: MeanFieldRhs + ?Sized>(
    rhs: &R,
    initial: MeanFieldState,
    t_span: (f64, f64),
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::invalid("t_span", "must be a nonempty interval"));
    }
    if !(controls.sample_step > 0.0) {
        return Err(Error::invalid("sample_step", "must be > 0"));
    }
    let samples = uniform_samples(t0, t1, controls.sample_step);
    let mut traj = Trajectory::new(rhs.cav_offset());
    traj.times.reserve(samples.len());
    traj.states.reserve(samples.len());
    let mut state = initial;
    advance(rhs, &mut state, t0, t1, &controls.step, &samples, |t, s| {
        traj.push(t, s)
    })?;
    Ok(traj)
}

/// Mean-field energy of the effective Hamiltonian,
/// `delta |d|^2 + 2 g |alpha| (d + d*)(|b1|^2 - |b2|^2) - 2J (b1 b2* + b1* b2)`,
/// for symmetric couplings.
pub fn effective_energy(s: &MeanFieldState, p: &ModelParams) -> f64 {
    let x = 2.0 * s.cav.re;
    p.delta * s.cav.norm_sqr() + 2.0 * p.g1 * p.alpha_abs() * x * (s.b1.norm_sqr() - s.b2.norm_sqr())
        - 2.0 * p.j_coupling * 2.0 * (s.b1 * s.b2.conj()).re
}

/// Broken-symmetry (or normal) stationary state of the effective model as a
/// mean-field state at `t = 0`, with real membrane amplitudes.
pub fn steady_mean_field(p: &ModelParams, branch: Branch) -> Result<MeanFieldState> {
    let g = p.g1;
    let gc = critical_coupling(p)?;
    let ss = steady_state(p, g, branch)?;
    let w = effective_frequency(g, gc, p.j_coupling);
    let d = ss.cavity_displacement();
    let (n1, n2) = mode_amplitudes(d, w, p)?;
    // beta2 / beta1 = (4 g |alpha| Re d + omega) / 2J
    let s = 4.0 * g * p.alpha_abs() * d.re + w;
    Ok(MeanFieldState::real(n1.sqrt(), n2.sqrt().copysign(s), d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(g_over_gc: f64) -> ModelParams {
        let p = ModelParams::symmetric(20.0, 2000.0, 10.0, 0.0, 200.0).unwrap();
        let gc = critical_coupling(&p).unwrap();
        p.with_coupling(g_over_gc * gc)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symmetric_manifold_is_invariant() {
        let p = fig2(1.5);
        let s = MeanFieldState::new(c(3.0, 1.0), c(3.0, 1.0), c(0.0, 0.0));
        let d = effective_rhs(&s, &p);
        assert_eq!(d.cav, c(0.0, 0.0));
        assert_eq!(d.b1, d.b2);
        let traj = integrate(&EffectiveModel::new(&p), s, (0.0, 20.0), &IntegrationControls::default()).unwrap();
        assert!(traj.states.iter().all(|s| s.delta_n() == 0.0));
    }

    #[test]
    fn stationary_rotation_of_broken_state() {
        let p = fig2(1.2);
        let gc = critical_coupling(&p).unwrap();
        let w = effective_frequency(p.g1, gc, 1.0);
        let ss = steady_state(&p, p.g1, Branch::Plus).unwrap();
        let d = ss.cavity_displacement();
        let (n1, n2) = mode_amplitudes(d, w, &p).unwrap();
        let s = MeanFieldState::real(n1.sqrt(), n2.sqrt(), d);
        let dot = effective_rhs(&s, &p);
        // b_i -> beta_i e^{i w t}, d constant
        assert!((dot.b1 - I * w * s.b1).norm() < 1e-9);
        assert!((dot.b2 - I * w * s.b2).norm() < 1e-9);
        assert!(dot.cav.norm() < 1e-9);
    }

    #[test]
    fn broken_state_stays_put() {
        let p = fig2(1.2);
        let s0 = steady_mean_field(&p, Branch::Plus).unwrap();
        let ss = steady_state(&p, p.g1, Branch::Plus).unwrap();
        assert!((s0.delta_n() - ss.delta_n_bar).abs() < 1e-9 * ss.delta_n_bar);
        let traj = integrate(&EffectiveModel::new(&p), s0, (0.0, 20.0), &IntegrationControls::default()).unwrap();
        for s in &traj.states {
            assert!((s.cav - s0.cav).norm() < 1e-4 * s0.cav.norm());
        }
        let m = steady_mean_field(&p, Branch::Minus).unwrap();
        assert!((m.delta_n() + ss.delta_n_bar).abs() < 1e-9 * ss.delta_n_bar);
    }

    #[test]
    fn decoupled_membranes_exchange_phonons() {
        let p = fig2(1.0).with_coupling(0.0);
        let s = MeanFieldState::new(c(10.0, 0.0), c(0.0, 0.0), c(1.0, 0.5));
        let traj = integrate(&EffectiveModel::new(&p), s, (0.0, 5.0), &IntegrationControls::default()).unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            let st = traj.states[i];
            // b1 = 10 cos(2t), b2 = 10 i sin(2t)
            assert!((st.b1 - c(10.0 * (2.0 * t).cos(), 0.0)).norm() < 1e-8);
            assert!((st.b2 - c(0.0, 10.0 * (2.0 * t).sin())).norm() < 1e-8);
            assert!((st.total_phonons() - 100.0).abs() < 1e-6);
        }
        let (_, last) = traj.last().unwrap();
        assert!(last.cav.norm() < 1e-20);
    }

    #[test]
    fn z2_equivariance() {
        let p = fig2(1.3);
        let mut seed = 7u64;
        let mut r = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 20.0 - 10.0
        };
        for _ in 0..100 {
            let s = MeanFieldState::new(c(r(), r()), c(r(), r()), c(r(), r()));
            let mirrored = MeanFieldState::new(s.b2, s.b1, -s.cav);
            let a = effective_rhs(&mirrored, &p);
            let b = effective_rhs(&s, &p);
            let b = MeanFieldState::new(b.b2, b.b1, -b.cav);
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                assert!((x - y).norm() <= 1e-14 * y.norm().max(1.0));
            }
        }
    }

    #[test]
    fn full_model_cavity_relaxes_to_alpha() {
        let p = ModelParams::symmetric(20.0, 2000.0, 10.0, 0.0, 200.0).unwrap();
        let m = FullModel::new(&p.with_omega_m(50.0)).unwrap();
        let s = MeanFieldState::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let d = m.derivative(&MeanFieldState::new(c(0.0, 0.0), c(0.0, 0.0), p.alpha()));
        assert!(d.cav.norm() < 1e-12);
        let traj = integrate(&m, s, (0.0, 5.0), &IntegrationControls::default()).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!((last.cav - p.alpha()).norm() < 1e-9);
    }

    #[test]
    fn full_rhs_rejects_unphysical_frequencies() {
        let p = fig2(1.2).with_omega_m(5.0);
        let s = MeanFieldState::real(1.0, 1.0, c(0.0, 0.0));
        assert!(full_rhs(&s, &p).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let p = fig2(1.2);
        let traj = integrate(
            &EffectiveModel::new(&p),
            MeanFieldState::real(10.0, 10.0, c(0.0, 0.0)),
            (0.0, 0.05),
            &IntegrationControls::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.starts_with("t,b1_re"));
    }
}
