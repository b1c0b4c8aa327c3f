//! Parameters of the driven two-membrane cavity and the closed-form results of
//! its mapping onto the open Dicke model.
//!
//! All quantities are in units of the membrane coupling `J`: frequencies and
//! rates in `J`, times in `1/J`. Only the symmetric case `g1 == g2` has closed
//! forms; asymmetric couplings are supported by the mean-field simulators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the optomechanical model.
///
/// Derived quantities (cavity amplitude, bare membrane frequencies, critical
/// coupling) are computed on demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cavity detuning `omega_c - omega_D`.
    pub delta: f64,
    /// Drive amplitude; complex so that a drive phase can be carried.
    pub drive: Complex64,
    /// Cavity amplitude decay rate.
    pub kappa: f64,
    /// Second-order optomechanical coupling of membrane 1.
    pub g1: f64,
    /// Second-order optomechanical coupling of membrane 2.
    pub g2: f64,
    /// Direct membrane-membrane coupling.
    pub j_coupling: f64,
    /// Matched effective mechanical frequency.
    pub omega_m: f64,
    /// Membrane amplitude decay rate.
    pub gamma: f64,
    /// Total phonon number (continuous in mean field).
    pub n_phonon: f64,
}

impl ModelParams {
    /// Symmetric-coupling parameters with `J = 1`, `omega_m = 1e4` and no
    /// membrane damping.
    pub fn symmetric(delta: f64, drive: f64, kappa: f64, g: f64, n_phonon: f64) -> Result<Self> {
        let p = ModelParams {
            delta,
            drive: Complex64::new(drive, 0.0),
            kappa,
            g1: g,
            g2: g,
            j_coupling: 1.0,
            omega_m: 1e4,
            gamma: 0.0,
            n_phonon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_coupling(self, g: f64) -> Self {
        ModelParams { g1: g, g2: g, ..self }
    }

    pub fn with_couplings(self, g1: f64, g2: f64) -> Self {
        ModelParams { g1, g2, ..self }
    }

    pub fn with_omega_m(self, omega_m: f64) -> Self {
        ModelParams { omega_m, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        ModelParams { gamma, ..self }
    }

    pub fn with_phonons(self, n_phonon: f64) -> Self {
        ModelParams { n_phonon, ..self }
    }

    /// Same cavity amplitude, different detuning/drive pair.
    pub fn with_drive(self, delta: f64, drive: Complex64) -> Self {
        ModelParams {
            delta,
            drive,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.delta,
            self.drive.re,
            self.drive.im,
            self.kappa,
            self.g1,
            self.g2,
            self.j_coupling,
            self.omega_m,
            self.gamma,
            self.n_phonon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("parameters", "all values must be finite"));
        }
        if self.kappa < 0.0 {
            return Err(Error::invalid("kappa", "must be >= 0"));
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("gamma", "must be >= 0"));
        }
        if self.j_coupling <= 0.0 {
            return Err(Error::invalid("j_coupling", "must be > 0"));
        }
        if self.n_phonon <= 0.0 {
            return Err(Error::invalid("n_phonon", "must be > 0"));
        }
        if self.omega_m <= 0.0 {
            return Err(Error::invalid("omega_m", "must be > 0"));
        }
        membrane_frequencies(self)?;
        Ok(())
    }

    /// Classical cavity amplitude `alpha`.
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(-self.delta, self.kappa).inv() * self.drive
    }

    pub fn alpha_abs(&self) -> f64 {
        self.alpha().norm()
    }

    pub fn is_symmetric(&self) -> bool {
        self.g1 == self.g2
    }

    fn symmetric_g(&self) -> Result<f64> {
        if self.is_symmetric() {
            Ok(self.g1)
        } else {
            Err(Error::invalid(
                "g1/g2",
                "closed forms require g1 == g2; use the mean-field simulator for asymmetric couplings",
            ))
        }
    }
}

/// `alpha = A / (i kappa - delta)`.
pub fn classical_amplitude(drive: Complex64, delta: f64, kappa: f64) -> Result<Complex64> {
    if delta == 0.0 && kappa == 0.0 {
        return Err(Error::invalid("delta/kappa", "denominator i*kappa - delta vanishes"));
    }
    Ok(drive / Complex64::new(-delta, kappa))
}

/// Drive amplitude `sqrt(2 P kappa / omega_c)` for a laser power `P`.
pub fn amplitude_from_power(power: f64, kappa: f64, omega_c: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::invalid("power", "must be >= 0"));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }
    if !(omega_c > 0.0) {
        return Err(Error::invalid("omega_c", "must be > 0"));
    }
    Ok((2.0 * power * kappa / omega_c).sqrt())
}

/// Bare membrane frequencies `(omega_1, omega_2)` that bring both dressed
/// frequencies to `omega_m`.
pub fn membrane_frequencies(p: &ModelParams) -> Result<(f64, f64)> {
    let a2 = p.alpha().norm_sqr();
    let base = p.omega_m - 2.0 * p.j_coupling;
    let w1 = base - 2.0 * p.g1 * a2;
    let w2 = base + 2.0 * p.g2 * a2;
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::invalid(
            "omega_m",
            format!("bare membrane frequencies ({w1}, {w2}) must be positive"),
        ));
    }
    Ok((w1, w2))
}

/// Standard-notation Dicke parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeParams {
    pub omega0: f64,
    pub omegaz: f64,
    pub lambda: f64,
    pub n_atoms: f64,
}

pub fn dicke_params(p: &ModelParams) -> Result<DickeParams> {
    let g = p.symmetric_g()?;
    Ok(DickeParams {
        omega0: p.delta,
        omegaz: 4.0 * p.j_coupling,
        lambda: 2.0 * g.abs() * p.alpha_abs() * p.n_phonon.sqrt(),
        n_atoms: p.n_phonon,
    })
}

/// Dicke critical coupling with cavity loss,
/// `sqrt((omega0^2 + kappa^2) omegaz / (4 omega0))`.
pub fn critical_coupling_dicke(d: &DickeParams, kappa: f64) -> Result<f64> {
    if !(d.omega0 > 0.0) {
        return Err(Error::invalid("omega0", "must be > 0"));
    }
    if !(d.omegaz > 0.0) {
        return Err(Error::invalid("omegaz", "must be > 0"));
    }
    Ok(((d.omega0 * d.omega0 + kappa * kappa) * d.omegaz / (4.0 * d.omega0)).sqrt())
}

/// Critical optomechanical coupling
/// `g_c = sqrt((delta^2 + kappa^2) J / (4 |alpha|^2 N delta))`.
pub fn critical_coupling(p: &ModelParams) -> Result<f64> {
    if !(p.delta > 0.0) {
        return Err(Error::invalid("delta", "critical coupling needs delta > 0"));
    }
    let a2 = p.alpha().norm_sqr();
    if a2 == 0.0 {
        return Err(Error::invalid("drive", "critical coupling needs a nonzero cavity amplitude"));
    }
    if !(p.n_phonon > 0.0) {
        return Err(Error::invalid("n_phonon", "must be > 0"));
    }
    let num = (p.delta * p.delta + p.kappa * p.kappa) * p.j_coupling;
    Ok((num / (4.0 * a2 * p.n_phonon * p.delta)).sqrt())
}

/// Which of the two symmetry-broken states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `delta_n > 0`, cavity at `alpha - d_bar`.
    Plus,
    /// `delta_n < 0`, cavity at `alpha + d_bar`.
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s < 0.0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }
}

/// Stationary order parameters of the effective model.
///
/// `d_bar` and `delta_n_bar` carry the branch sign. The branch-`+` state has
/// positive imbalance and the cavity sits at `alpha - d_bar`, so the
/// effective-model cavity variable is `d = -d_bar` (see
/// [`SteadyState::cavity_displacement`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub d_bar: Complex64,
    pub delta_n_bar: f64,
    pub branch: Branch,
}

impl SteadyState {
    /// Value of the effective-model cavity amplitude `d` in this state.
    pub fn cavity_displacement(&self) -> Complex64 {
        -self.d_bar
    }

    pub fn is_normal(&self) -> bool {
        self.delta_n_bar == 0.0
    }
}

/// `sqrt(1 - g_c^4 / g^4)` above threshold, zero otherwise.
fn order_factor(g: f64, gc: f64) -> f64 {
    if g.abs() > gc {
        let r = gc / g;
        (1.0 - r.powi(4)).sqrt()
    } else {
        0.0
    }
}

pub fn steady_state(p: &ModelParams, g: f64, branch: Branch) -> Result<SteadyState> {
    p.symmetric_g()?;
    let gc = critical_coupling(p)?;
    let f = order_factor(g, gc);
    let s = branch.sign();
    let d_bar = Complex64::new(p.delta, -p.kappa).inv()
        * (2.0 * g * p.alpha_abs() * p.n_phonon * f * s);
    Ok(SteadyState {
        d_bar,
        delta_n_bar: s * 0.5 * p.n_phonon * f,
        branch,
    })
}

/// Frequency of the stationary normal mode in the frame rotating at `omega_m`:
/// `2J` up to threshold, `2J g^2 / g_c^2` above it.
pub fn effective_frequency(g: f64, gc: f64, j_coupling: f64) -> f64 {
    if g > gc {
        2.0 * j_coupling * g * g / (gc * gc)
    } else {
        2.0 * j_coupling
    }
}

/// Squared cavity quadrature `(d + d*)^2` of the broken-symmetry state,
/// `16 g^2 |alpha|^2 delta^2 N^2 / (delta^2 + kappa^2)^2 (1 - g_c^4/g^4)`.
pub fn cavity_quadrature_squared(p: &ModelParams, g: f64) -> Result<f64> {
    let gc = critical_coupling(p)?;
    let f = order_factor(g, gc);
    let d2k2 = p.delta * p.delta + p.kappa * p.kappa;
    Ok(16.0 * g * g * p.alpha().norm_sqr() * p.delta * p.delta * p.n_phonon * p.n_phonon
        / (d2k2 * d2k2)
        * f
        * f)
}

/// Normal-mode frequency for a given cavity field,
/// `sqrt(4 g^2 |alpha|^2 (d + d*)^2 + 4 J^2)`.
pub fn mode_frequency(d: Complex64, p: &ModelParams) -> f64 {
    let x = 2.0 * p.g1 * p.alpha_abs() * 2.0 * d.re;
    (x * x + 4.0 * p.j_coupling * p.j_coupling).sqrt()
}

/// Stationary mode occupations `(|beta_1|^2, |beta_2|^2)` for cavity field `d`
/// and rotation frequency `omega`. Their sum is `N`.
pub fn mode_amplitudes(d: Complex64, omega: f64, p: &ModelParams) -> Result<(f64, f64)> {
    let j2 = 4.0 * p.j_coupling * p.j_coupling;
    let s = 2.0 * p.g1 * p.alpha_abs() * 2.0 * d.re + omega;
    let denom = j2 + s * s;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::invalid("omega", "degenerate mode-amplitude denominator"));
    }
    let b1 = j2 * p.n_phonon / denom;
    let b2 = p.n_phonon * s * s / denom;
    Ok((b1, b2))
}

/// Adiabatic potential of the cavity quadrature `x = (d + d*)/sqrt(2)` with the
/// membranes slaved to their lower normal mode.
pub fn effective_potential(x: f64, p: &ModelParams, g: f64) -> f64 {
    let d2k2 = p.delta * p.delta + p.kappa * p.kappa;
    let a2 = p.alpha().norm_sqr();
    let j = p.j_coupling;
    0.5 * d2k2 * x * x - 2.0 * p.delta * p.n_phonon * (j * j + 2.0 * a2 * g * g * x * x).sqrt()
}

/// `dV/dx` of [`effective_potential`].
pub fn effective_potential_slope(x: f64, p: &ModelParams, g: f64) -> f64 {
    let d2k2 = p.delta * p.delta + p.kappa * p.kappa;
    let a2 = p.alpha().norm_sqr();
    let j = p.j_coupling;
    let root = (j * j + 2.0 * a2 * g * g * x * x).sqrt();
    x * (d2k2 - 4.0 * p.delta * p.n_phonon * a2 * g * g / root)
}

/// `d^2V/dx^2` at the origin; negative exactly above threshold.
pub fn effective_potential_curvature_at_origin(p: &ModelParams, g: f64) -> f64 {
    let d2k2 = p.delta * p.delta + p.kappa * p.kappa;
    d2k2 - 4.0 * p.delta * p.n_phonon * p.alpha().norm_sqr() * g * g / p.j_coupling
}

/// Nonzero stationary points `±x*` of the effective potential, if any.
pub fn potential_minima(p: &ModelParams, g: f64) -> Option<f64> {
    let d2k2 = p.delta * p.delta + p.kappa * p.kappa;
    let a2 = p.alpha().norm_sqr();
    let j = p.j_coupling;
    // root = 4 delta N |alpha|^2 g^2 / (delta^2 + kappa^2)
    let root = 4.0 * p.delta * p.n_phonon * a2 * g * g / d2k2;
    let x2 = (root * root - j * j) / (2.0 * a2 * g * g);
    (x2 > 0.0).then(|| x2.sqrt())
}
