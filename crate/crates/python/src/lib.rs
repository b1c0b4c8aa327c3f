use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::optodtc as core;
use core::config::RunConfig;
use core::dtc::{self, ProtocolOptions};
use core::meanfield::{self, IntegrationControls, MeanFieldState};
use core::model::{self, Branch};
use core::quantum::{self, HilbertSpec, QuantumControls};
use core::spectrum;

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Config(_) | core::Error::InvalidInput { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn branch(name: &str) -> PyResult<Branch> {
    match name {
        "plus" | "+" => Ok(Branch::Plus),
        "minus" | "-" => Ok(Branch::Minus),
        _ => Err(PyValueError::new_err(format!("branch must be 'plus' or 'minus', got {name:?}"))),
    }
}

/// Model parameters in units of `J`.
#[pyclass(name = "ModelParams", frozen)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (delta, drive, kappa, n_phonon, g=None, g_over_gc=None, omega_m=1e4, gamma=0.0, g1_over_g=1.0, g2_over_g=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        delta: f64,
        drive: Complex64,
        kappa: f64,
        n_phonon: f64,
        g: Option<f64>,
        g_over_gc: Option<f64>,
        omega_m: f64,
        gamma: f64,
        g1_over_g: f64,
        g2_over_g: f64,
    ) -> PyResult<Self> {
        let base = model::ModelParams::symmetric(delta, 1.0, kappa, 0.0, n_phonon)
            .map_err(err)?
            .with_drive(delta, drive)
            .with_omega_m(omega_m)
            .with_gamma(gamma);
        let g = match (g, g_over_gc) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("give g or g_over_gc, not both")),
            (Some(g), None) => g,
            (None, Some(r)) => r * model::critical_coupling(&base).map_err(err)?,
            (None, None) => 0.0,
        };
        let inner = base.with_couplings(g1_over_g * g, g2_over_g * g);
        inner.validate().map_err(err)?;
        Ok(PyModelParams { inner })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn drive(&self) -> Complex64 {
        self.inner.drive
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn g1(&self) -> f64 {
        self.inner.g1
    }
    #[getter]
    fn g2(&self) -> f64 {
        self.inner.g2
    }
    #[getter]
    fn n_phonon(&self) -> f64 {
        self.inner.n_phonon
    }
    #[getter]
    fn omega_m(&self) -> f64 {
        self.inner.omega_m
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// Classical cavity amplitude.
    #[getter]
    fn alpha(&self) -> Complex64 {
        self.inner.alpha()
    }

    fn critical_coupling(&self) -> PyResult<f64> {
        model::critical_coupling(&self.inner).map_err(err)
    }

    fn with_coupling(&self, g: f64) -> Self {
        PyModelParams {
            inner: self.inner.with_coupling(g),
        }
    }

    fn with_phonons(&self, n_phonon: f64) -> Self {
        PyModelParams {
            inner: self.inner.with_phonons(n_phonon),
        }
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(delta={}, drive={}, kappa={}, g1={}, g2={}, n_phonon={}, omega_m={}, gamma={})",
            p.delta, p.drive, p.kappa, p.g1, p.g2, p.n_phonon, p.omega_m, p.gamma
        )
    }
}

/// Analytic broken-symmetry steady state: `(d_bar, delta_n_bar)`.
#[pyfunction]
#[pyo3(signature = (params, branch_name="plus"))]
fn steady_state(params: &PyModelParams, branch_name: &str) -> PyResult<(Complex64, f64)> {
    let p = &params.inner;
    let s = model::steady_state(p, p.g1, branch(branch_name)?).map_err(err)?;
    Ok((s.d_bar, s.delta_n_bar))
}

/// Integrates the effective (or full) mean-field model. Returns a dict of
/// lists keyed like the trajectory CSV columns.
#[pyfunction]
#[pyo3(signature = (params, b1, b2, cav, t_final, full=false, rtol=1e-10, atol=1e-10, sample_step=0.01))]
#[allow(clippy::too_many_arguments)]
fn integrate<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    b1: Complex64,
    b2: Complex64,
    cav: Complex64,
    t_final: f64,
    full: bool,
    rtol: f64,
    atol: f64,
    sample_step: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params.inner;
    let init = MeanFieldState::new(b1, b2, cav);
    let c = IntegrationControls::new(rtol, atol, sample_step);
    let traj = py
        .detach(|| {
            if full {
                meanfield::integrate(&meanfield::FullModel::new(&p)?, init, (0.0, t_final), &c)
            } else {
                meanfield::integrate(&meanfield::EffectiveModel::new(&p), init, (0.0, t_final), &c)
            }
        })
        .map_err(err)?;
    let obs: Vec<_> = (0..traj.len()).map(|i| traj.observables(i)).collect();
    let out = PyDict::new(py);
    out.set_item("t", traj.times.clone())?;
    out.set_item("b1", traj.states.iter().map(|s| s.b1).collect::<Vec<_>>())?;
    out.set_item("b2", traj.states.iter().map(|s| s.b2).collect::<Vec<_>>())?;
    out.set_item("cav", traj.states.iter().map(|s| s.cav).collect::<Vec<_>>())?;
    out.set_item("delta_n", obs.iter().map(|o| o.delta_n).collect::<Vec<_>>())?;
    out.set_item("cav_dev_sq", obs.iter().map(|o| o.cav_dev_sq).collect::<Vec<_>>())?;
    Ok(out)
}

/// First flip time of the imbalance under the flipping-phase detuning.
#[pyfunction]
#[pyo3(signature = (params, delta1, horizon=10.0))]
fn flipping_time(params: &PyModelParams, delta1: f64, horizon: f64) -> PyResult<f64> {
    let p = params.inner;
    let s = dtc::build_schedule(delta1, p.delta, p.drive, p.kappa, 1.0, 1.0).map_err(err)?;
    let step = core::ode::StepControl::default();
    dtc::find_flipping_time(&p, delta1, s.phase1.drive, Branch::Plus, horizon, &step)
        .map(|f| f.time)
        .map_err(err)
}

/// Mean-field pulse protocol from the `plus` steady state. Returns the
/// stroboscopic imbalance `delta_n(kT) / N` for `k = 0..=n_periods`.
#[pyfunction]
#[pyo3(signature = (params, delta1, t1, t2, n_periods))]
fn run_dtc(py: Python<'_>, params: &PyModelParams, delta1: f64, t1: f64, t2: f64, n_periods: usize) -> PyResult<Vec<f64>> {
    let p = params.inner;
    py.detach(|| {
        let s = dtc::build_schedule(delta1, p.delta, p.drive, p.kappa, t1, t2)?;
        let start = meanfield::steady_mean_field(&p, Branch::Plus)?;
        let (_, rec) = dtc::run_protocol(&s, &p, n_periods, start, &ProtocolOptions::default())?;
        Ok(rec.normalized().collect())
    })
    .map_err(err)
}

/// Master-equation pulse protocol. Returns `(strobe, lifetime)` where
/// `strobe` is `<J_x>/N` at `t = kT` and `lifetime` is `None` when the
/// series does not alternate long enough for a fit.
#[pyfunction]
#[pyo3(signature = (params, delta1, t1, t2, n_periods, fock_cutoff=None))]
fn run_quantum(
    py: Python<'_>,
    params: &PyModelParams,
    delta1: f64,
    t1: f64,
    t2: f64,
    n_periods: usize,
    fock_cutoff: Option<usize>,
) -> PyResult<(Vec<f64>, Option<f64>)> {
    let p = params.inner;
    if p.n_phonon.fract() != 0.0 || p.n_phonon < 1.0 {
        return Err(PyValueError::new_err("n_phonon must be a positive integer"));
    }
    let n = p.n_phonon as usize;
    py.detach(|| {
        let s = dtc::build_schedule(delta1, p.delta, p.drive, p.kappa, t1, t2)?;
        let spec = match fock_cutoff {
            Some(c) => HilbertSpec::new(n, c)?,
            None => HilbertSpec::auto(n, meanfield::steady_mean_field(&p, Branch::Plus)?.cav.norm())?,
        };
        let out = quantum::run_quantum_protocol(&spec, &s, &p, n_periods, &QuantumControls::default())?;
        let life = quantum::extract_lifetime(&out.strobe, out.period).ok();
        Ok((out.strobe, life))
    })
    .map_err(err)
}

/// Closed-form equilibrium `(k, x1, x2)` for integer labels.
#[pyfunction]
#[pyo3(signature = (m0, m1, m2, transmission, half_length=1.0))]
fn equilibrium_positions(m0: i64, m1: i64, m2: i64, transmission: f64, half_length: f64) -> PyResult<(f64, f64, f64)> {
    let e = spectrum::equilibrium_positions(m0, m1, m2, transmission, half_length).map_err(err)?;
    Ok((e.k, e.x1, e.x2))
}

/// Roots of the two-membrane cavity condition in `[k_lo, k_hi]`.
#[pyfunction]
#[pyo3(signature = (x1, x2, transmission, k_lo, k_hi, half_length=1.0))]
fn solve_k(x1: f64, x2: f64, transmission: f64, k_lo: f64, k_hi: f64, half_length: f64) -> PyResult<Vec<f64>> {
    let p = spectrum::SpectrumProblem::new(half_length, transmission, x1, x2).map_err(err)?;
    Ok(spectrum::solve_k(&p, k_lo, k_hi, None).map_err(err)?.roots)
}

/// Runs a TOML configuration. Returns `(metadata_json, files)` with `files`
/// mapping output names to CSV text. Nothing is written to disk unless
/// `output` is given.
#[pyfunction]
#[pyo3(signature = (config, workers=1, output=None))]
fn run(py: Python<'_>, config: &str, workers: usize, output: Option<std::path::PathBuf>) -> PyResult<(String, Vec<(String, String)>)> {
    let cfg = RunConfig::parse(config).map_err(err)?;
    let outcome = py.detach(|| core::runner::execute(&cfg, workers)).map_err(err)?;
    if let Some(dir) = output {
        outcome.write_to(&dir).map_err(err)?;
    }
    let meta = serde_json::to_string(&outcome.metadata).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((meta, outcome.files.into_iter().map(|f| (f.name, f.contents)).collect()))
}

/// TOML text of a shipped preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<&'static str> {
    core::config::preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
}

#[pymodule]
fn optodtc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", core::runner::VERSION)?;
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(flipping_time, m)?)?;
    m.add_function(wrap_pyfunction!(run_dtc, m)?)?;
    m.add_function(wrap_pyfunction!(run_quantum, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_positions, m)?)?;
    m.add_function(wrap_pyfunction!(solve_k, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    Ok(())
}
