//! Dormand–Prince 5(4) integrator with embedded error control and the
//! fourth-order continuous extension for output at arbitrary times.
//!
//! The state is a flat slice of components (`f64` or `Complex64`); the error
//! norm is the RMS of `|err_i| / (atol + rtol max(|y_i|, |y_new_i|))`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element type of an integrated state vector.
pub trait Component:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn modulus(self) -> f64;
    fn finite(self) -> bool;
}

impl Component for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Component for Complex64 {
    fn modulus(self) -> f64 {
        self.norm_sqr().sqrt()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 500_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        StepControl {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn with_max_step(self, max_step: f64) -> Self {
        StepControl { max_step, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::invalid("tolerance", "rtol and atol must be > 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Reusable workspace for integrating states of a fixed dimension.
pub struct Dopri5<T: Component> {
    k: [Vec<T>; 7],
    ytmp: Vec<T>,
    ynew: Vec<T>,
    cont: [Vec<T>; 5],
    dense_buf: Vec<T>,
}

impl<T: Component> Dopri5<T> {
    pub fn new(dim: usize) -> Self {
        let z = || vec![T::default(); dim];
        Dopri5 {
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            cont: [z(), z(), z(), z(), z()],
            dense_buf: z(),
        }
    }

    fn dim(&self) -> usize {
        self.ytmp.len()
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t_end`, leaving the final state
    /// in `y`. `on_sample` is called for each time in `samples` (sorted, within
    /// `[t0, t_end]`) with the dense-output state; samples at `t0` and `t_end`
    /// receive the exact endpoint states.
    pub fn solve<F, S>(
        &mut self,
        mut f: F,
        t0: f64,
        y: &mut [T],
        t_end: f64,
        ctrl: &StepControl,
        samples: &[f64],
        mut on_sample: S,
    ) -> Result<Stats>
    where
        F: FnMut(f64, &[T], &mut [T]),
        S: FnMut(f64, &[T]),
    {
        ctrl.validate()?;
        assert_eq!(y.len(), self.dim(), "state dimension mismatch");
        if !(t_end >= t0) {
            return Err(Error::invalid("t_span", "t_end must be >= t0"));
        }
        let mut stats = Stats::default();
        let mut next_sample = 0usize;
        while next_sample < samples.len() && samples[next_sample] <= t0 {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        }
        if t_end == t0 {
            return Ok(stats);
        }
        if !y.iter().all(|v| v.finite()) {
            return Err(Error::Integration {
                t: t0,
                reason: "non-finite initial state".into(),
            });
        }

        let span = t_end - t0;
        let mut t = t0;
        f(t, y, &mut self.k[0]);
        stats.evaluations += 1;
        let mut h = match ctrl.initial_step {
            Some(h) => h,
            None => {
                stats.evaluations += 1;
                self.initial_step(&mut f, t, y, ctrl)
            }
        }
        .min(ctrl.max_step)
        .min(span);
        let mut facold = 1e-4f64;
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= ctrl.max_steps {
                return Err(Error::Integration {
                    t,
                    reason: format!("step budget of {} exhausted", ctrl.max_steps),
                });
            }
            let last = t + h >= t_end || (t_end - (t + h)) < 1e-12 * span;
            if last {
                h = t_end - t;
            }
            if h <= 1e-14 * t.abs().max(span) {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }

            self.stages(&mut f, t, y, h);
            stats.evaluations += 6;

            let err = self.error_norm(y, h, ctrl);
            if !err.is_finite() {
                if h < 1e-14 * span.max(1.0) {
                    return Err(Error::Integration {
                        t,
                        reason: "non-finite state".into(),
                    });
                }
                h *= 0.1;
                stats.rejected += 1;
                last_rejected = true;
                continue;
            }

            // PI step-size control
            const BETA: f64 = 0.04;
            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let mut fac = fac11 / facold.powf(BETA);
                fac = (fac / 0.9).clamp(0.1, 5.0);
                let mut h_new = (h / fac).min(ctrl.max_step);
                if last_rejected {
                    h_new = h_new.min(h);
                }
                facold = err.max(1e-4);

                let t_new = if last { t_end } else { t + h };
                // dense output for samples inside (t, t_new]
                let mut cont_ready = false;
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    if ts >= t_new {
                        on_sample(ts, &self.ynew);
                    } else {
                        if !cont_ready {
                            self.prepare_dense(y, h);
                            cont_ready = true;
                        }
                        let theta = (ts - t) / h;
                        self.dense(theta);
                        on_sample(ts, &self.dense_buf);
                    }
                    next_sample += 1;
                }

                y.copy_from_slice(&self.ynew);
                self.k.swap(0, 6);
                t = t_new;
                stats.accepted += 1;
                last_rejected = false;
                if last {
                    break;
                }
                h = h_new;
            } else {
                h /= (fac11 / 0.9).min(5.0);
                stats.rejected += 1;
                last_rejected = true;
            }
        }
        while next_sample < samples.len() && samples[next_sample] <= t_end {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        }
        Ok(stats)
    }

    fn stages<F>(&mut self, f: &mut F, t: f64, y: &[T], h: f64)
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = self.dim();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ytmp = &mut self.ytmp;
        for i in 0..n {
            ytmp[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, ytmp, k2);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, ytmp, k3);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, ytmp, k4);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, ytmp, k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, ytmp, k6);
        let ynew = &mut self.ynew;
        for i in 0..n {
            ynew[i] =
                y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        f(t + h, ynew, k7);
    }

    fn error_norm(&self, y: &[T], h: f64, ctrl: &StepControl) -> f64 {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h;
            let sc = ctrl.atol + ctrl.rtol * y[i].modulus().max(self.ynew[i].modulus());
            let r = e.modulus() / sc;
            acc += r * r;
        }
        (acc / y.len() as f64).sqrt()
    }

    fn prepare_dense(&mut self, y: &[T], h: f64) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.cont;
        for i in 0..y.len() {
            let dy = self.ynew[i] - y[i];
            let bspl = k1[i] * h - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - k7[i] * h - bspl;
            r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7)
                * h;
        }
    }

    fn dense(&mut self, theta: f64) {
        let th1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.cont;
        for i in 0..self.dense_buf.len() {
            self.dense_buf[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * th1) * theta) * th1) * theta;
        }
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[T], ctrl: &StepControl) -> f64
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len() as f64;
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..y.len() {
            let sk = ctrl.atol + ctrl.rtol * y[i].modulus();
            dnf += (self.k[0][i].modulus() / sk).powi(2);
            dny += (y[i].modulus() / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(ctrl.max_step);
        for i in 0..y.len() {
            self.ytmp[i] = y[i] + self.k[0][i] * h;
        }
        f(t + h, &self.ytmp, &mut self.k[1]);
        let mut der2 = 0.0;
        for i in 0..y.len() {
            let sk = ctrl.atol + ctrl.rtol * y[i].modulus();
            der2 += ((self.k[1][i] - self.k[0][i]).modulus() / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(ctrl.max_step)
    }
}

/// Uniform sample times `t0, t0 + dt, ...` up to and including `t_end`
/// (the last point is `t_end` itself when it is not on the grid).
pub fn uniform_samples(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    assert!(dt > 0.0, "sample step must be positive");
    let n = ((t_end - t0) / dt + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * dt).collect();
    if let Some(&last) = v.last() {
        if t_end - last > 1e-9 * dt {
            v.push(t_end);
        } else {
            *v.last_mut().unwrap() = t_end;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut ws = Dopri5::<f64>::new(1);
        let mut y = [1.0];
        let ctrl = StepControl::with_tolerances(1e-12, 1e-12);
        ws.solve(|_, y, dy| dy[0] = -y[0], 0.0, &mut y, 3.0, &ctrl, &[], |_, _| {})
            .unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let mut ws = Dopri5::<Complex64>::new(1);
        let mut y = [Complex64::new(1.0, 0.0)];
        let w = 3.7;
        let samples = uniform_samples(0.0, 10.0, 0.013);
        let mut worst: f64 = 0.0;
        let ctrl = StepControl::with_tolerances(1e-11, 1e-11);
        ws.solve(
            |_, y, dy| dy[0] = Complex64::new(0.0, w) * y[0],
            0.0,
            &mut y,
            10.0,
            &ctrl,
            &samples,
            |t, y| {
                let exact = Complex64::from_polar(1.0, w * t);
                worst = worst.max((y[0] - exact).norm());
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn samples_include_endpoints() {
        let mut ws = Dopri5::<f64>::new(1);
        let mut y = [0.0];
        let mut seen = vec![];
        let samples = uniform_samples(0.0, 1.0, 0.25);
        ws.solve(|_, _, dy| dy[0] = 1.0, 0.0, &mut y, 1.0, &StepControl::default(), &samples, |t, y| {
            seen.push((t, y[0]))
        })
        .unwrap();
        assert_eq!(seen.len(), 5);
        for (t, v) in seen {
            assert!((t - v).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_grid_shape() {
        assert_eq!(uniform_samples(0.0, 1.0, 0.5), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_samples(0.0, 1.1, 0.5), vec![0.0, 0.5, 1.0, 1.1]);
        assert_eq!(uniform_samples(2.0, 2.0, 0.5), vec![2.0]);
    }

    #[test]
    fn blow_up_reports_time() {
        let mut ws = Dopri5::<f64>::new(1);
        let mut y = [1.0];
        let err = ws
            .solve(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &mut y, 2.0, &StepControl::default(), &[], |_, _| {})
            .unwrap_err();
        match err {
            Error::Integration { t, .. } => assert!(t > 0.9 && t <= 1.0, "{t}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let mut ws = Dopri5::<f64>::new(1);
        let mut y = [1.0];
        let ctrl = StepControl::with_tolerances(0.0, 1e-8);
        assert!(ws.solve(|_, _, dy| dy[0] = 0.0, 0.0, &mut y, 1.0, &ctrl, &[], |_, _| {}).is_err());
    }
}
