//! Built-in invariant suite behind the `validate` task.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dtc::{build_schedule, run_protocol, ProtocolOptions};
use crate::error::Result;
use crate::meanfield::{integrate, steady_mean_field, EffectiveModel, FullModel, IntegrationControls, MeanFieldState};
use crate::model::{critical_coupling, Branch, ModelParams};
use crate::quantum::{run_quantum_protocol, HilbertSpec, QuantumControls};
use crate::spectrum::{equilibrium_positions, solve_k, spectrum_residual};
use crate::sweep::sweep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  status  detail", "check");
        for c in &self.checks {
            s.push_str(&format!(
                "\n{:<w$}  {:<6}  {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.detail
            ));
        }
        s
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

fn base() -> Result<ModelParams> {
    let p = ModelParams::symmetric(20.0, 2000.0, 10.0, 0.0, 200.0)?;
    let gc = critical_coupling(&p)?;
    Ok(p.with_coupling(1.2 * gc))
}

fn controls(tol: f64) -> IntegrationControls {
    IntegrationControls::new(tol, tol, 0.05)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Runs every check; `workers` is used by the determinism check.
pub fn run_validation(workers: usize) -> Result<ValidationReport> {
    let mut r = ValidationReport::default();
    let p = base()?;

    r.run("phonon_number_conservation", || {
        let s0 = MeanFieldState::new(c(10.0), Complex64::new(3.0, 4.0), Complex64::new(0.1, -0.2));
        let n0 = s0.total_phonons();
        let traj = integrate(&EffectiveModel::new(&p), s0, (0.0, 20.0), &controls(1e-10))?;
        let worst = (0..traj.len())
            .map(|i| (traj.observables(i).n_total - n0).abs() / n0)
            .fold(0.0, f64::max);
        Ok((worst < 1e-7, format!("max relative drift {worst:e}")))
    });

    r.run("z2_symmetry", || {
        let a = MeanFieldState::new(c(11.0), c(9.0), Complex64::new(0.3, 0.1));
        let b = MeanFieldState::new(a.b2, a.b1, -a.cav);
        let m = EffectiveModel::new(&p);
        let ta = integrate(&m, a, (0.0, 10.0), &controls(1e-11))?;
        let tb = integrate(&m, b, (0.0, 10.0), &controls(1e-11))?;
        let worst = (0..ta.len())
            .map(|i| (ta.observables(i).delta_n + tb.observables(i).delta_n).abs() / p.n_phonon)
            .fold(0.0, f64::max);
        Ok((worst < 1e-7, format!("max |dn(x) + dn(Zx)| / N = {worst:e}")))
    });

    r.run("steady_state_is_stationary", || {
        let mut worst = 0.0f64;
        for b in [Branch::Plus, Branch::Minus] {
            let s = steady_mean_field(&p, b)?;
            let t = integrate(&EffectiveModel::new(&p), s, (0.0, 5.0), &controls(1e-11))?;
            for i in 0..t.len() {
                let o = t.observables(i);
                worst = worst
                    .max((o.delta_n - s.delta_n()).abs() / p.n_phonon)
                    .max((o.cav - s.cav).norm());
            }
        }
        Ok((worst < 1e-7, format!("max drift of imbalance and cavity field {worst:e}")))
    });

    r.run("integrator_self_convergence", || {
        let s0 = MeanFieldState::new(c(10.0), c(10.0), p.alpha());
        let full = FullModel::new(&p.with_omega_m(2e4))?;
        let coarse = integrate(&full, s0, (0.0, 5.0), &controls(1e-8))?;
        let fine = integrate(&full, s0, (0.0, 5.0), &controls(1e-11))?;
        let worst = (0..coarse.len())
            .map(|i| (coarse.observables(i).delta_n - fine.observables(i).delta_n).abs() / p.n_phonon)
            .fold(0.0, f64::max);
        Ok((worst < 1e-5, format!("max |dn(1e-8) - dn(1e-11)| / N = {worst:e}")))
    });

    r.run("schedule_equal_amplitude", || {
        let s = build_schedule(100.0, 50.0, c(1e4), 10.0, 1.2, 100.0)?;
        let (a1, a2) = s.alphas();
        let err = (a1 - a2).norm() / a2.norm();
        Ok((err < 1e-13, format!("|alpha1 - alpha2| / |alpha2| = {err:e}")))
    });

    r.run("protocol_state_continuity", || {
        let p = ModelParams::symmetric(50.0, 1e4, 10.0, 0.0, 200.0)?;
        let p = p.with_coupling(1.2 * critical_coupling(&p)?);
        let s = build_schedule(100.0, 50.0, p.drive, 10.0, 1.196, 20.0)?;
        let start = steady_mean_field(&p, Branch::Plus)?;
        let (_, rec) = run_protocol(&s, &p, 4, start, &ProtocolOptions::default())?;
        let ok = rec.alternates.iter().skip(1).all(|a| *a);
        Ok((ok, format!("stroboscopic imbalance {:?}", rec.normalized().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>())))
    });

    r.run("density_matrix_physicality", || {
        let p = ModelParams::symmetric(5.0, 300.0, 1.2, 0.0, 4.0)?.with_omega_m(1500.0);
        let p = p.with_coupling(1.5 * critical_coupling(&p)?);
        let s = build_schedule(20.0, 5.0, p.drive, 1.2, 0.9563, 5.0)?;
        let spec = HilbertSpec::new(4, 12)?;
        let q = QuantumControls {
            positivity_every: 1,
            ..QuantumControls::default()
        };
        let out = run_quantum_protocol(&spec, &s, &p, 1, &q)?;
        let lo = out.min_eigenvalue.unwrap_or(f64::NAN);
        let ok = out.max_trace_error < 1e-6 && out.max_hermiticity_error < 1e-10 && lo > -1e-6;
        Ok((
            ok,
            format!(
                "trace error {:e}, hermiticity error {:e}, min eigenvalue {lo:e}",
                out.max_trace_error, out.max_hermiticity_error
            ),
        ))
    });

    r.run("spectrum_equilibrium_root", || {
        let eq = equilibrium_positions(7, -1, 1, 0.85, 1.0)?;
        let prob = eq.problem(0.85, 1.0)?;
        let roots = solve_k(&prob, eq.k - 0.5, eq.k + 0.5, None)?;
        let near = roots.roots.iter().map(|k| (k - eq.k).abs()).fold(f64::INFINITY, f64::min);
        let res = spectrum_residual(eq.k, &prob).abs();
        Ok((near < 1e-9 && res < 1e-9, format!("root offset {near:e}, residual {res:e}")))
    });

    r.run("sweep_determinism", || {
        let gs: Vec<f64> = (0..6).map(|i| 0.8 + 0.2 * i as f64).collect();
        let gc = critical_coupling(&p)?;
        let job = |r: &f64| -> Option<f64> {
            let q = p.with_coupling(r * gc);
            let s0 = MeanFieldState::new(c(10.0), c(10.0), c(-0.01));
            let t = integrate(&EffectiveModel::new(&q), s0, (0.0, 10.0), &controls(1e-9)).ok()?;
            Some(t.observables(t.len() - 1).delta_n)
        };
        let one = sweep(&gs, 1, job)?;
        let many = sweep(&gs, workers.max(2), job)?;
        let same = one.iter().zip(&many).all(|(a, b)| a.map(f64::to_bits) == b.map(f64::to_bits));
        Ok((same && one.iter().all(Option::is_some), format!("1 vs {} workers bitwise equal: {same}", workers.max(2))))
    });

    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let r = run_validation(2).unwrap();
        assert!(r.all_passed(), "{}", r.table());
        assert!(r.table().lines().count() == r.checks.len() + 1);
    }
}
