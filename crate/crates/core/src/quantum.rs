//! Master-equation treatment of the effective model at small phonon number:
//! a truncated cavity Fock space times the spin-`N/2` multiplet of the
//! Schwinger pair, with cavity decay as the only dissipator.
//!
//! Basis index `n * (N + 1) + (m + j)` for cavity level `n` and `J_z = m`.
//! Density matrices are dense row-major; operators are sparse.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dtc::PulseSchedule;
use crate::error::{Error, Result};
use crate::meanfield::steady_mean_field;
use crate::model::{Branch, ModelParams};
use crate::ode::{Dopri5, Stats, StepControl};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
#[cfg(test)]
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const DEFAULT_MAX_DIM: usize = 20_000;
/// Coherent-state tail mass allowed beyond the cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-8;
/// Extra Fock levels added to the minimal cutoff.
pub const CUTOFF_HEADROOM: usize = 10;
pub const LIFETIME_FLOOR: f64 = 1e-3;
pub const LIFETIME_MIN_PERIODS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub n_phonon: usize,
    pub fock_cutoff: usize,
    pub max_dim: usize,
}

impl HilbertSpec {
    pub fn new(n_phonon: usize, fock_cutoff: usize) -> Result<Self> {
        HilbertSpec {
            n_phonon,
            fock_cutoff,
            max_dim: DEFAULT_MAX_DIM,
        }
        .validated()
    }

    pub fn with_max_dim(self, max_dim: usize) -> Result<Self> {
        HilbertSpec { max_dim, ..self }.validated()
    }

    /// Smallest cutoff whose coherent tail for `|amp|` is below
    /// [`TAIL_TOLERANCE`], plus [`CUTOFF_HEADROOM`] levels.
    pub fn auto(n_phonon: usize, amp: f64) -> Result<Self> {
        let mut n_max = 1;
        while coherent_tail_mass(amp, n_max) >= TAIL_TOLERANCE {
            n_max += 1;
            if n_max > 10_000 {
                return Err(Error::invalid("fock_cutoff", "coherent amplitude too large"));
            }
        }
        HilbertSpec::new(n_phonon, n_max + CUTOFF_HEADROOM)
    }

    fn validated(self) -> Result<Self> {
        if self.fock_cutoff < 1 {
            return Err(Error::invalid("fock_cutoff", "must be >= 1"));
        }
        if self.dim() > self.max_dim {
            return Err(Error::invalid(
                "fock_cutoff",
                format!("dimension {} exceeds the limit {}", self.dim(), self.max_dim),
            ));
        }
        Ok(self)
    }

    pub fn spin_dim(&self) -> usize {
        self.n_phonon + 1
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_dim()
    }

    pub fn j(&self) -> f64 {
        0.5 * self.n_phonon as f64
    }

    pub fn index(&self, n: usize, m_idx: usize) -> usize {
        n * self.spin_dim() + m_idx
    }

    /// `(n, m)` of a basis index.
    pub fn levels(&self, i: usize) -> (usize, f64) {
        let s = self.spin_dim();
        (i / s, (i % s) as f64 - self.j())
    }
}

/// Probability outside `0..=n_max` for a coherent state of amplitude `amp`.
pub fn coherent_tail_mass(amp: f64, n_max: usize) -> f64 {
    let a2 = amp * amp;
    let mut p = (-a2).exp();
    let mut inside = p;
    for n in 1..=n_max {
        p *= a2 / n as f64;
        inside += p;
    }
    // tail summed directly to avoid cancellation in 1 - inside
    let mut tail = 0.0;
    let mut q = p;
    let mut n = n_max + 1;
    loop {
        q *= a2 / n as f64;
        tail += q;
        if q < 1e-18 * tail.max(1e-300) || n > n_max + 100_000 {
            break;
        }
        n += 1;
    }
    tail.max((1.0 - inside).min(0.0).abs()).min(1.0)
}

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<Complex64>,
}

impl SparseMatrix {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, mut t: Vec<(usize, usize, Complex64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col.push(c);
                val.push(v);
                last = Some((r, c));
            }
        }
        let keep: Vec<bool> = val.iter().map(|v| *v != ZERO).collect();
        let mut k = 0;
        let (mut c2, mut v2) = (Vec::new(), Vec::new());
        for i in 0..col.len() {
            if keep[i] {
                row_ptr[rows[i] + 1] += 1;
                c2.push(col[i]);
                v2.push(val[i]);
                k += 1;
            }
        }
        debug_assert_eq!(k, c2.len());
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            dim,
            row_ptr,
            col: c2,
            val: v2,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        (0..self.dim).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        SparseMatrix {
            val: self.val.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.triplets();
        t.extend(other.triplets());
        SparseMatrix::from_triplets(self.dim, t)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut t = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim, t)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        SparseMatrix::from_triplets(self.dim, t)
    }

    pub fn identity(dim: usize) -> Self {
        SparseMatrix::from_triplets(dim, (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut m = vec![ZERO; self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            m[r * self.dim + c] = v;
        }
        m
    }

    /// Largest entry of `self - other` in modulus.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
            .val
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `tr(self * rho)` for a dense row-major `rho`.
    pub fn expect(&self, rho: &[Complex64]) -> Complex64 {
        let mut s = ZERO;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                s += v * rho[c * self.dim + r];
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Operators {
    pub d: SparseMatrix,
    pub d_dag: SparseMatrix,
    pub n_cav: SparseMatrix,
    pub jx: SparseMatrix,
    pub jy: SparseMatrix,
    pub jz: SparseMatrix,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `<m+1| J_+ |m>`.
fn ladder(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn build_operators(spec: &HilbertSpec) -> Result<Operators> {
    let spec = spec.validated()?;
    let dim = spec.dim();
    let s = spec.spin_dim();
    let j = spec.j();
    let (mut d, mut n_cav, mut jx, mut jy, mut jz) = (vec![], vec![], vec![], vec![], vec![]);
    for n in 0..spec.fock_dim() {
        for mi in 0..s {
            let i = spec.index(n, mi);
            let m = mi as f64 - j;
            if n > 0 {
                d.push((spec.index(n - 1, mi), i, re((n as f64).sqrt())));
            }
            n_cav.push((i, i, re(n as f64)));
            jz.push((i, i, re(m)));
            if mi + 1 < s {
                let up = spec.index(n, mi + 1);
                let c = 0.5 * ladder(j, m);
                jx.push((up, i, re(c)));
                jx.push((i, up, re(c)));
                // J_y = (J_+ - J_-) / 2i
                jy.push((up, i, Complex64::new(0.0, -c)));
                jy.push((i, up, Complex64::new(0.0, c)));
            }
        }
    }
    let d = SparseMatrix::from_triplets(dim, d);
    Ok(Operators {
        d_dag: d.adjoint(),
        d,
        n_cav: SparseMatrix::from_triplets(dim, n_cav),
        jx: SparseMatrix::from_triplets(dim, jx),
        jy: SparseMatrix::from_triplets(dim, jy),
        jz: SparseMatrix::from_triplets(dim, jz),
    })
}

/// `H = delta d^dag d + 4J J_z + 4 g |alpha| (d + d^dag) J_x`.
pub fn build_hamiltonian(spec: &HilbertSpec, delta: f64, j_coupling: f64, g: f64, alpha_mod: f64) -> Result<SparseMatrix> {
    let ops = build_operators(spec)?;
    let x = ops.d.add(&ops.d_dag).mul(&ops.jx);
    Ok(ops
        .n_cav
        .scale(re(delta))
        .add(&ops.jz.scale(re(4.0 * j_coupling)))
        .add(&x.scale(re(4.0 * g * alpha_mod))))
}

/// Picture in which the density matrix is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    /// Interaction picture with respect to `delta d^dag d`; removes the fast
    /// cavity phase from the propagated matrix.
    Interaction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub spec: HilbertSpec,
    /// Row-major, in the picture given by `frame`.
    pub rho: Vec<Complex64>,
    pub time: f64,
    pub frame: Frame,
    /// Accumulated `int delta dt` of the interaction picture.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateChecks {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.dim();
        (0..n).map(|i| self.rho[i * n + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                e = e.max((self.rho[i * n + j] - self.rho[j * n + i].conj()).norm());
            }
        }
        e
    }

    /// Smallest eigenvalue of `rho` (dense Hermitian eigensolver).
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.rho[i * n + j]);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn checks(&self) -> StateChecks {
        StateChecks {
            trace_error: (self.trace() - re(1.0)).norm(),
            hermiticity_error: self.hermiticity_error(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// `<d>` in the lab frame.
    pub fn mean_d(&self) -> Complex64 {
        let sp = self.spec;
        let n = self.dim();
        let s = sp.spin_dim();
        let mut acc = ZERO;
        for i in 0..n - s {
            let (k, _) = sp.levels(i);
            acc += ((k + 1) as f64).sqrt() * self.rho[(i + s) * n + i];
        }
        match self.frame {
            Frame::Lab => acc,
            Frame::Interaction => acc * Complex64::from_polar(1.0, -self.phase),
        }
    }

    pub fn mean_photons(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| self.spec.levels(i).0 as f64 * self.rho[i * n + i].re).sum()
    }

    /// `<J_x>`: the phonon imbalance.
    pub fn mean_jx(&self) -> f64 {
        let sp = self.spec;
        let n = self.dim();
        let j = sp.j();
        let mut acc = 0.0;
        for i in 0..n {
            let (_, m) = sp.levels(i);
            if m < j {
                // rho[i+1, i] + rho[i, i+1] = 2 Re rho[i, i+1]
                acc += ladder(j, m) * self.rho[i * n + i + 1].re;
            }
        }
        acc
    }

    /// Same state with the density matrix in the lab frame.
    pub fn to_lab(&self) -> QuantumState {
        match self.frame {
            Frame::Lab => self.clone(),
            Frame::Interaction => {
                let n = self.dim();
                let mut rho = self.rho.clone();
                for i in 0..n {
                    let ni = self.spec.levels(i).0 as f64;
                    for j in 0..n {
                        let nj = self.spec.levels(j).0 as f64;
                        rho[i * n + j] *= Complex64::from_polar(1.0, -self.phase * (ni - nj));
                    }
                }
                QuantumState {
                    rho,
                    frame: Frame::Lab,
                    phase: 0.0,
                    ..self.clone()
                }
            }
        }
    }
}

/// Coherent amplitudes `<m|theta, phi>` of the spin coherent state pointing
/// along `(sin t cos p, sin t sin p, cos t)`.
pub fn spin_coherent(j2: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let j = 0.5 * j2 as f64;
    (0..=j2)
        .map(|mi| {
            let m = mi as f64 - j;
            let up = mi;
            let down = j2 - mi;
            let amp = ln_binomial(j2, up).mul_add(0.5, 0.0).exp() * c.powi(up as i32) * s.powi(down as i32);
            Complex64::from_polar(amp, -m * phi)
        })
        .collect()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let lf = |x: usize| (1..=x).map(|v| (v as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Fock amplitudes of the coherent state `|beta>`, truncated at `n_max`.
pub fn coherent(beta: Complex64, n_max: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(n_max + 1);
    let mut c = Complex64::from_polar((-0.5 * beta.norm_sqr()).exp(), 0.0);
    v.push(c);
    for n in 1..=n_max {
        c = c * beta / (n as f64).sqrt();
        v.push(c);
    }
    v
}

/// Spin vector `(J_x, J_y, J_z)` of membrane amplitudes under the Schwinger map.
pub fn schwinger_vector(b1: Complex64, b2: Complex64) -> [f64; 3] {
    let c = b1.conj() * b2;
    [0.5 * (b1.norm_sqr() - b2.norm_sqr()), c.im, -c.re]
}

/// Product of the cavity coherent state `|d>` and the spin coherent state
/// along the Schwinger vector of `(b1, b2)`.
pub fn initial_state(spec: &HilbertSpec, d: Complex64, b1: Complex64, b2: Complex64) -> Result<QuantumState> {
    let spec = spec.validated()?;
    let tail = coherent_tail_mass(d.norm(), spec.fock_cutoff);
    if tail >= TAIL_TOLERANCE {
        return Err(Error::invalid(
            "fock_cutoff",
            format!("coherent tail mass {tail:e} beyond n_max = {}", spec.fock_cutoff),
        ));
    }
    let [x, y, z] = schwinger_vector(b1, b2);
    let r = (x * x + y * y + z * z).sqrt();
    let (theta, phi) = if r > 0.0 { ((z / r).clamp(-1.0, 1.0).acos(), y.atan2(x)) } else { (std::f64::consts::PI, 0.0) };
    let spin = spin_coherent(spec.n_phonon, theta, phi);
    let cav = coherent(d, spec.fock_cutoff);
    let norm = cav.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<Complex64> = cav.iter().flat_map(|c| spin.iter().map(move |s| c * s / norm)).collect();
    let n = psi.len();
    let mut rho = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            rho[i * n + j] = psi[i] * psi[j].conj();
        }
    }
    Ok(QuantumState {
        spec,
        rho,
        time: 0.0,
        frame: Frame::Lab,
        phase: 0.0,
    })
}

/// Quantum counterpart of the mean-field broken-symmetry state of `params`.
pub fn initial_from_mean_field(spec: &HilbertSpec, params: &ModelParams, branch: Branch) -> Result<QuantumState> {
    let s = steady_mean_field(params, branch)?;
    initial_state(spec, s.cav, s.b1, s.b2)
}

/// Lindblad generator `-i[H, rho] + rate (d rho d^dag - {d^dag d, rho}/2)`
/// for the effective Hamiltonian.
///
/// `H` couples index `i` only to `i + o` for the four offsets
/// `o = +-S +- 1` (`S = N + 1`), so both `H rho` and `rho H` reduce to
/// shifted row operations. Only the upper triangle is computed; the lower
/// one is its mirror, which keeps the result exactly Hermitian.
pub struct Lindbladian {
    spec: HilbertSpec,
    /// Static diagonal (`4J m`, plus `delta n` in the lab frame).
    h0: Vec<f64>,
    offsets: [isize; 4],
    /// `|H[i, i + o]|` per offset; the phase is `exp(-i phase)` for the
    /// `d` offsets (`o > 0`) and its conjugate otherwise.
    band: [Vec<f64>; 4],
    /// `H[j + o, j]` for the current phase.
    cols: [Vec<Complex64>; 4],
    rate: f64,
    sqrt_up: Vec<f64>,
    n_level: Vec<f64>,
    /// The `S + 1` entries left of the diagonal, per row.
    low: Vec<Complex64>,
}

/// Length of the packed upper triangle of an `n x n` matrix.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn packed_offset(i: usize, n: usize) -> usize {
    i * n - i * i.saturating_sub(1) / 2
}

/// Upper triangle of a Hermitian row-major matrix, row by row.
pub fn pack(full: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        out.extend_from_slice(&full[i * n + i..(i + 1) * n]);
    }
    out
}

/// Inverse of [`pack`].
pub fn unpack(packed: &[Complex64], n: usize, full: &mut [Complex64]) {
    let mut k = 0;
    for i in 0..n {
        full[i * n + i..(i + 1) * n].copy_from_slice(&packed[k..k + n - i]);
        k += n - i;
    }
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (0..=bi).step_by(B) {
            for i in bi..(bi + B).min(n) {
                for j in bj..(bj + B).min(i) {
                    full[i * n + j] = full[j * n + i].conj();
                }
            }
        }
    }
}

impl Lindbladian {
    /// `delta` enters only in the lab frame; the interaction picture receives
    /// it through the phase passed to [`Lindbladian::eval`].
    pub fn new(spec: &HilbertSpec, frame: Frame, delta: f64, j_coupling: f64, coupling: f64, rate: f64) -> Result<Self> {
        let spec = spec.validated()?;
        let dim = spec.dim();
        let s = spec.spin_dim() as isize;
        let j = spec.j();
        let offsets = [s + 1, s - 1, -s + 1, -s - 1];
        let mut band: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; dim]);
        let mut h0 = vec![0.0; dim];
        for i in 0..dim {
            let (n, m) = spec.levels(i);
            h0[i] = 4.0 * j_coupling * m;
            if frame == Frame::Lab {
                h0[i] += delta * n as f64;
            }
            for (k, &o) in offsets.iter().enumerate() {
                let dm = if o == s + 1 || o == -s + 1 { 1.0 } else { -1.0 };
                let mj = m + dm;
                if mj < -j - 1e-9 || mj > j + 1e-9 {
                    continue;
                }
                let jx = 0.5 * ladder(j, m.min(mj));
                // <n|d|n+1> = sqrt(n+1), <n|d^dag|n-1> = sqrt(n)
                band[k][i] = if o > 0 {
                    if n < spec.fock_cutoff {
                        coupling * jx * ((n + 1) as f64).sqrt()
                    } else {
                        0.0
                    }
                } else if n > 0 {
                    coupling * jx * (n as f64).sqrt()
                } else {
                    0.0
                };
            }
        }
        let sqrt_up = (0..dim)
            .map(|i| {
                let n = spec.levels(i).0;
                if n < spec.fock_cutoff {
                    ((n + 1) as f64).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let n_level = (0..dim).map(|i| spec.levels(i).0 as f64).collect();
        Ok(Lindbladian {
            spec,
            h0,
            offsets,
            band,
            cols: std::array::from_fn(|_| vec![ZERO; dim]),
            rate,
            sqrt_up,
            n_level,
            low: vec![ZERO; dim * (s as usize + 1)],
        })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    /// Integrator workspace sized for the packed state.
    pub fn workspace(&self) -> Dopri5<Complex64> {
        Dopri5::new(packed_len(self.spec.dim()))
    }

    /// `drho = L(rho)` on full matrices, with the `d` couplings multiplied by
    /// `exp(-i phase)`.
    pub fn eval(&mut self, phase: f64, rho: &[Complex64], drho: &mut [Complex64]) {
        let n = self.spec.dim();
        let y = pack(rho, n);
        let mut dy = vec![ZERO; y.len()];
        self.eval_packed(phase, &y, &mut dy);
        unpack(&dy, n, drho);
    }

    /// As [`Lindbladian::eval`] on packed upper triangles.
    pub fn eval_packed(&mut self, phase: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let n = self.spec.dim();
        let s = self.spec.spin_dim();
        let w = s + 1;
        let row = |r: usize| &y[packed_offset(r, n)..][..n - r];
        // low[r * w + w - q] = rho[r, r - q] for q in 1..=w
        let low = &mut self.low;
        for r in 0..n {
            for q in 1..=w.min(r) {
                low[r * w + w - q] = y[packed_offset(r - q, n) + q].conj();
            }
        }
        let low = &self.low;
        let e = Complex64::from_polar(1.0, -phase);
        let phases = [e, e, e.conj(), e.conj()];
        for k in 0..4 {
            let c = phases[k].conj();
            for (h, b) in self.cols[k].iter_mut().zip(&self.band[k]) {
                *h = c * b;
            }
        }
        let g = self.rate;
        for i in 0..n {
            let out = &mut dy[packed_offset(i, n)..][..n - i];
            let own = row(i);
            let hi = self.h0[i];
            for ((o, &r), &hj) in out.iter_mut().zip(own).zip(&self.h0[i..]) {
                *o = r * (hi - hj);
            }
            for k in 0..4 {
                let off = self.offsets[k];
                // H rho: rho[i + off, j] scaled by H[i, i + off]
                let a = self.band[k][i];
                if a != 0.0 {
                    let c = phases[k] * a;
                    if off > 0 {
                        let off = off as usize;
                        let r = i + off;
                        let lo = &low[r * w + w - off..r * w + w];
                        let split = off.min(out.len());
                        for (o, &v) in out[..split].iter_mut().zip(lo) {
                            *o += c * v;
                        }
                        for (o, &v) in out[split..].iter_mut().zip(row(r)) {
                            *o += c * v;
                        }
                    } else {
                        let off = (-off) as usize;
                        for (o, &v) in out.iter_mut().zip(&row(i - off)[off..]) {
                            *o += c * v;
                        }
                    }
                }
                // rho H: rho[i, j + off] H[j + off, j]
                let col = &self.cols[k][i..];
                if off > 0 {
                    let off = off as usize;
                    if off < own.len() {
                        for ((o, &v), &h) in out.iter_mut().zip(&own[off..]).zip(col) {
                            *o -= v * h;
                        }
                    }
                } else {
                    let off = (-off) as usize;
                    let first = off.saturating_sub(i);
                    let split = off.min(out.len());
                    if first < split {
                        let lo = &low[i * w + w - off + first..i * w + w - off + split];
                        for ((o, &v), &h) in out[first..split].iter_mut().zip(lo).zip(&col[first..]) {
                            *o -= v * h;
                        }
                    }
                    if split < out.len() {
                        for ((o, &v), &h) in out[split..].iter_mut().zip(own).zip(&col[split..]) {
                            *o -= v * h;
                        }
                    }
                }
            }
            // -i * commutator
            for o in out.iter_mut() {
                *o = Complex64::new(o.im, -o.re);
            }
            if g != 0.0 {
                let ni = self.n_level[i];
                for ((o, &r), &nj) in out.iter_mut().zip(own).zip(&self.n_level[i..]) {
                    *o -= r * (0.5 * g * (ni + nj));
                }
                let si = self.sqrt_up[i];
                if si > 0.0 {
                    for ((o, &r), &sj) in out.iter_mut().zip(row(i + s)).zip(&self.sqrt_up[i..]) {
                        *o += r * (g * si * sj);
                    }
                }
            }
            out[0].im = 0.0;
        }
    }
}

/// Integrator settings for the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumControls {
    pub step: StepControl,
    pub frame: Frame,
    /// Lindblad rate in units of `kappa`.
    pub rate_factor: f64,
    /// Dense sample spacing; `None` keeps stroboscopic samples only.
    pub sample_step: Option<f64>,
    /// Eigenvalues are checked every this many periods and at the end; 0
    /// disables the check.
    pub positivity_every: usize,
    /// Negative eigenvalues down to `-positivity_tolerance` count as
    /// integration noise.
    pub positivity_tolerance: f64,
}

impl Default for QuantumControls {
    fn default() -> Self {
        QuantumControls {
            step: StepControl::with_tolerances(1e-6, 1e-8),
            frame: Frame::Interaction,
            rate_factor: 2.0,
            sample_step: None,
            positivity_every: 10,
            positivity_tolerance: 1e-6,
        }
    }
}

/// Evolves `state` by `duration` under constant `(delta, coupling)`.
pub fn lindblad_step(
    state: &mut QuantumState,
    ws: &mut Dopri5<Complex64>,
    l: &mut Lindbladian,
    delta: f64,
    duration: f64,
    step: &StepControl,
    samples: &[f64],
    mut on_sample: impl FnMut(&QuantumState),
) -> Result<Stats> {
    if l.spec() != &state.spec {
        return Err(Error::invalid("state", "Hilbert space mismatch"));
    }
    let t0 = state.time;
    let phase0 = state.phase;
    let frame = state.frame;
    let phase_at = |t: f64| match frame {
        Frame::Lab => 0.0,
        Frame::Interaction => phase0 + delta * (t - t0),
    };
    let n = state.dim();
    let mut y = pack(&state.rho, n);
    let mut probe = state.clone();
    let res = ws.solve(
        |t, y, dy| l.eval_packed(phase_at(t), y, dy),
        t0,
        &mut y,
        t0 + duration,
        step,
        samples,
        |t, y| {
            unpack(y, n, &mut probe.rho);
            probe.time = t;
            probe.phase = phase_at(t);
            on_sample(&probe);
        },
    );
    unpack(&y, n, &mut state.rho);
    let stats = res?;
    state.time = t0 + duration;
    state.phase = phase_at(state.time);
    Ok(stats)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QuantumSeries {
    pub times: Vec<f64>,
    pub d: Vec<Complex64>,
    pub n_cav: Vec<f64>,
    pub jx_over_n: Vec<f64>,
    pub purity: Vec<f64>,
    /// `<J_x>/N` at `t = kT`.
    pub strobe: Vec<f64>,
    pub period: f64,
    pub fock_cutoff: usize,
    pub initial_tail_mass: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest density-matrix eigenvalue over the positivity checks.
    pub min_eigenvalue: Option<f64>,
    pub warnings: Vec<String>,
}

impl QuantumSeries {
    fn record(&mut self, s: &QuantumState) {
        let n = s.spec.n_phonon as f64;
        self.times.push(s.time);
        self.d.push(s.mean_d());
        self.n_cav.push(s.mean_photons());
        self.jx_over_n.push(s.mean_jx() / n);
        self.purity.push(s.purity());
        self.max_trace_error = self.max_trace_error.max((s.trace() - re(1.0)).norm());
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,d_re,d_im,n_cav,jx_over_n,purity")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.times[i], self.d[i].re, self.d[i].im, self.n_cav[i], self.jx_over_n[i], self.purity[i]
            )?;
        }
        Ok(())
    }
}

/// Runs the pulse protocol on the master equation starting from
/// [`initial_from_mean_field`] of the relaxation-phase parameters. `params`
/// supplies `kappa`, `J`, `g` and `|alpha|`; the detuning follows the schedule.
pub fn run_quantum_protocol(
    spec: &HilbertSpec,
    schedule: &PulseSchedule,
    params: &ModelParams,
    n_periods: usize,
    controls: &QuantumControls,
) -> Result<QuantumSeries> {
    let relax = params.with_drive(schedule.phase2.delta, schedule.phase2.drive);
    relax.validate()?;
    let mut state = initial_from_mean_field(spec, &relax, Branch::Plus)?;
    state.frame = controls.frame;
    run_quantum_from(state, schedule, &relax, n_periods, controls)
}

/// As [`run_quantum_protocol`] from an explicit initial state.
pub fn run_quantum_from(
    mut state: QuantumState,
    schedule: &PulseSchedule,
    params: &ModelParams,
    n_periods: usize,
    controls: &QuantumControls,
) -> Result<QuantumSeries> {
    if !params.is_symmetric() {
        return Err(Error::invalid("g2", "the master equation uses symmetric couplings"));
    }
    if state.spec.n_phonon as f64 != params.n_phonon {
        return Err(Error::invalid("n_phonon", "Hilbert space and model disagree"));
    }
    let spec = state.spec;
    let coupling = 4.0 * params.g1 * params.alpha_abs();
    let rate = controls.rate_factor * params.kappa;
    let phases = [schedule.phase1, schedule.phase2];
    let mut ls = phases
        .iter()
        .map(|ph| Lindbladian::new(&spec, state.frame, ph.delta, params.j_coupling, coupling, rate))
        .collect::<Result<Vec<_>>>()?;
    let mut ws = ls[0].workspace();
    let period = schedule.period();
    let mut out = QuantumSeries {
        period,
        fock_cutoff: spec.fock_cutoff,
        initial_tail_mass: coherent_tail_mass(state.mean_d().norm(), spec.fock_cutoff),
        ..Default::default()
    };
    let nn = spec.n_phonon as f64;
    out.record(&state);
    out.strobe.push(state.mean_jx() / nn);
    let t_start = state.time;
    for k in 0..n_periods {
        let starts = [t_start + k as f64 * period, t_start + k as f64 * period + schedule.phase1.duration];
        let ends = [starts[1], t_start + (k + 1) as f64 * period];
        for (p, l) in ls.iter_mut().enumerate() {
            state.time = starts[p];
            let samples = match controls.sample_step {
                Some(dt) => {
                    let i0 = (starts[p] / dt).floor() as i64 + 1;
                    let i1 = (ends[p] / dt).ceil() as i64 - 1;
                    (i0..=i1).map(|i| i as f64 * dt).filter(|t| *t > starts[p] && *t < ends[p]).collect()
                }
                None => Vec::new(),
            };
            let mut buf = Vec::new();
            lindblad_step(&mut state, &mut ws, l, phases[p].delta, ends[p] - starts[p], &controls.step, &samples, |s| {
                buf.push((s.time, s.mean_d(), s.mean_photons(), s.mean_jx() / nn, s.purity(), s.trace()))
            })
            .map_err(|e| match e {
                Error::Integration { t, reason } => Error::Integration {
                    t,
                    reason: format!("period {k}: {reason}"),
                },
                other => other,
            })?;
            for (t, d, nc, jx, pu, tr) in buf {
                out.times.push(t);
                out.d.push(d);
                out.n_cav.push(nc);
                out.jx_over_n.push(jx);
                out.purity.push(pu);
                out.max_trace_error = out.max_trace_error.max((tr - re(1.0)).norm());
            }
            out.record(&state);
        }
        out.strobe.push(state.mean_jx() / nn);
        out.max_hermiticity_error = out.max_hermiticity_error.max(state.hermiticity_error());
        let every = controls.positivity_every;
        if every > 0 && ((k + 1) % every == 0 || k + 1 == n_periods) {
            let lo = state.min_eigenvalue();
            out.min_eigenvalue = Some(out.min_eigenvalue.map_or(lo, |m| m.min(lo)));
            if lo < -controls.positivity_tolerance {
                out.warnings.push(format!(
                    "smallest eigenvalue {lo:e} after period {} is below -{:e}",
                    k + 1,
                    controls.positivity_tolerance
                ));
            }
        }
    }
    Ok(out)
}

/// Exponential decay time of a stroboscopic series that alternates in sign
/// for at least [`LIFETIME_MIN_PERIODS`] periods, from a log-linear
/// least-squares fit over the leading points with amplitude above
/// [`LIFETIME_FLOOR`].
pub fn extract_lifetime(series: &[f64], period: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::invalid("period", "must be > 0"));
    }
    let mut run = usize::from(series.first().is_some_and(|x| *x != 0.0));
    while run > 0 && run < series.len() && series[run] * series[run - 1] < 0.0 {
        run += 1;
    }
    let periods = run.saturating_sub(1);
    if periods < LIFETIME_MIN_PERIODS {
        return Err(Error::Lifetime(format!(
            "sign alternates for {periods} periods; need {LIFETIME_MIN_PERIODS}"
        )));
    }
    let window = series[..run].iter().take_while(|x| x.abs() > LIFETIME_FLOOR).count();
    if window < 3 {
        return Err(Error::Lifetime(format!("only {window} points above {LIFETIME_FLOOR}")));
    }
    let pts: Vec<(f64, f64)> = (0..window).map(|k| (k as f64 * period, series[k].abs().ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Lifetime("amplitude does not decay (infinite lifetime)".into()));
    }
    Ok(-1.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtc::{build_schedule, find_flipping_time};
    use crate::model::critical_coupling;

    fn comm(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
        a.mul(b).add(&b.mul(a).scale(re(-1.0)))
    }

    #[test]
    fn angular_momentum_algebra() {
        let sp = HilbertSpec::new(5, 3).unwrap();
        let o = build_operators(&sp).unwrap();
        let lhs = comm(&o.jx, &o.jy);
        assert!(lhs.max_abs_diff(&o.jz.scale(I)) < 1e-12);
        let cas = o.jx.mul(&o.jx).add(&o.jy.mul(&o.jy)).add(&o.jz.mul(&o.jz));
        let j = sp.j();
        assert!(cas.max_abs_diff(&SparseMatrix::identity(sp.dim()).scale(re(j * (j + 1.0)))) < 1e-12);
    }

    #[test]
    fn truncated_boson_commutator() {
        let sp = HilbertSpec::new(2, 6).unwrap();
        let o = build_operators(&sp).unwrap();
        let c = comm(&o.d, &o.d_dag);
        for (r, col, v) in c.triplets() {
            let (n, _) = sp.levels(r);
            assert_eq!(r, col);
            if n < sp.fock_cutoff {
                assert!((v - re(1.0)).norm() < 1e-12);
            } else {
                assert!((v - re(-(sp.fock_cutoff as f64))).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spin_one_levels() {
        let sp = HilbertSpec::new(2, 1).unwrap();
        let o = build_operators(&sp).unwrap();
        let dense = o.jz.to_dense();
        let mut ev: Vec<f64> = (0..sp.dim()).map(|i| dense[i * sp.dim() + i].re).collect();
        ev.sort_by(f64::total_cmp);
        ev.dedup();
        assert_eq!(ev, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn dimension_limit() {
        assert!(HilbertSpec::new(100, 300).is_err());
        assert!(HilbertSpec::new(4, 4).unwrap().with_max_dim(10).is_err());
        assert!(HilbertSpec::new(4, 0).is_err());
    }

    #[test]
    fn hamiltonian_symmetries() {
        let sp = HilbertSpec::new(4, 5).unwrap();
        let o = build_operators(&sp).unwrap();
        let h = build_hamiltonian(&sp, 3.0, 1.0, 0.02, 40.0).unwrap();
        assert!(h.max_abs_diff(&h.adjoint()) < 1e-12);
        let h0 = build_hamiltonian(&sp, 3.0, 1.0, 0.0, 40.0).unwrap();
        assert!(comm(&h0, &o.jz).val.iter().all(|v| v.norm() < 1e-12));
        assert!(comm(&h0, &o.n_cav).val.iter().all(|v| v.norm() < 1e-12));
        // parity exp(i pi (n + m + j)) is diagonal with entries +-1
        let p = SparseMatrix::from_triplets(
            sp.dim(),
            (0..sp.dim())
                .map(|i| {
                    let (n, m) = sp.levels(i);
                    let k = (n as f64 + m + sp.j()).round() as i64;
                    (i, i, re(if k % 2 == 0 { 1.0 } else { -1.0 }))
                })
                .collect(),
        );
        assert!(p.mul(&h).mul(&p.adjoint()).max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn lindbladian_matches_operator_form() {
        let sp = HilbertSpec::new(3, 8).unwrap();
        let h = build_hamiltonian(&sp, 2.5, 1.0, 0.03, 20.0).unwrap();
        let o = build_operators(&sp).unwrap();
        let mut l = Lindbladian::new(&sp, Frame::Lab, 2.5, 1.0, 4.0 * 0.03 * 20.0, 0.7).unwrap();
        let st = initial_state(&sp, Complex64::new(0.4, -0.2), Complex64::new(1.0, 0.3), Complex64::new(0.8, 0.0)).unwrap();
        let n = sp.dim();
        let mut got = vec![ZERO; n * n];
        l.eval(0.0, &st.rho, &mut got);
        let dense = |m: &SparseMatrix| m.to_dense();
        let mm = |a: &[Complex64], b: &[Complex64]| {
            let mut c = vec![ZERO; n * n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        c[i * n + j] += a[i * n + k] * b[k * n + j];
                    }
                }
            }
            c
        };
        let (hd, dd, ddag, nc) = (dense(&h), dense(&o.d), dense(&o.d_dag), dense(&o.n_cav));
        let hr = mm(&hd, &st.rho);
        let rh = mm(&st.rho, &hd);
        let drd = mm(&mm(&dd, &st.rho), &ddag);
        let nr = mm(&nc, &st.rho);
        let rn = mm(&st.rho, &nc);
        for k in 0..n * n {
            let want = -I * (hr[k] - rh[k]) + 0.7 * (drd[k] - 0.5 * (nr[k] + rn[k]));
            assert!((got[k] - want).norm() < 1e-12, "{k}");
        }
    }

    #[test]
    fn spin_coherent_expectations() {
        let sp = HilbertSpec::new(10, 2).unwrap();
        let b1 = Complex64::new(2.0, 0.5);
        let b2 = Complex64::new(-1.0, 1.2);
        let scale = (10.0 / (b1.norm_sqr() + b2.norm_sqr())).sqrt();
        let (b1, b2) = (b1 * scale, b2 * scale);
        let st = initial_state(&sp, ZERO, b1, b2).unwrap();
        let o = build_operators(&sp).unwrap();
        let v = schwinger_vector(b1, b2);
        assert!((o.jx.expect(&st.rho).re - v[0]).abs() < 1e-12);
        assert!((o.jy.expect(&st.rho).re - v[1]).abs() < 1e-12);
        assert!((o.jz.expect(&st.rho).re - v[2]).abs() < 1e-12);
        assert!((st.mean_jx() - v[0]).abs() < 1e-12);
        assert!((st.purity() - 1.0).abs() < 1e-12);
        assert!((st.trace() - re(1.0)).norm() < 1e-12);

        let sym = initial_state(&sp, ZERO, Complex64::new(5f64.sqrt(), 0.0), Complex64::new(5f64.sqrt(), 0.0)).unwrap();
        assert!(sym.mean_jx().abs() < 1e-12);
    }

    #[test]
    fn tail_mass_and_cutoff() {
        assert!((coherent_tail_mass(0.0, 1)).abs() < 1e-300);
        let a: f64 = 2.0;
        let inside: f64 = (0..=3).map(|n| (-a * a).exp() * a.powi(2 * n) / (1..=n).product::<i32>().max(1) as f64).sum();
        assert!((coherent_tail_mass(a, 3) - (1.0 - inside)).abs() < 1e-14);
        let sp = HilbertSpec::auto(4, 2.0).unwrap();
        assert!(coherent_tail_mass(2.0, sp.fock_cutoff - CUTOFF_HEADROOM) < TAIL_TOLERANCE);
        assert!(coherent_tail_mass(2.0, sp.fock_cutoff - CUTOFF_HEADROOM - 1) >= TAIL_TOLERANCE);
        let small = HilbertSpec::new(4, 3).unwrap();
        assert!(initial_state(&small, Complex64::new(2.0, 0.0), re(1.0), re(1.0)).is_err());
    }

    fn run_lab(sp: &HilbertSpec, st: &mut QuantumState, delta: f64, coupling: f64, rate: f64, t: f64, samples: &[f64]) -> Vec<QuantumState> {
        let mut l = Lindbladian::new(sp, st.frame, delta, 1.0, coupling, rate).unwrap();
        let mut ws = l.workspace();
        let mut out = vec![];
        let ctrl = StepControl::with_tolerances(1e-10, 1e-12);
        lindblad_step(st, &mut ws, &mut l, delta, t, &ctrl, samples, |s| out.push(s.clone())).unwrap();
        out
    }

    #[test]
    fn free_cavity_decay() {
        // H = 0 apart from the spin term, which does not touch <d>
        let sp = HilbertSpec::new(2, 16).unwrap();
        let d0 = Complex64::new(1.2, 0.5);
        for frame in [Frame::Lab, Frame::Interaction] {
            let mut st = initial_state(&sp, d0, re(1.0), re(0.0)).unwrap();
            st.frame = frame;
            let kappa = 0.8;
            let delta = 3.0;
            let out = run_lab(&sp, &mut st, delta, 0.0, 2.0 * kappa, 2.0, &[0.5, 1.0, 2.0]);
            for s in &out {
                let want = d0 * (Complex64::new(-kappa, -delta) * s.time).exp();
                assert!((s.mean_d() - want).norm() < 1e-7, "{frame:?} t={} got {} want {}", s.time, s.mean_d(), want);
            }
        }
    }

    #[test]
    fn free_spin_precession() {
        let sp = HilbertSpec::new(6, 1).unwrap();
        let b1 = Complex64::new(2.0, 0.0);
        let b2 = Complex64::new(0.5, 0.9);
        let s = (6.0 / (b1.norm_sqr() + b2.norm_sqr())).sqrt();
        let mut st = initial_state(&sp, ZERO, b1 * s, b2 * s).unwrap();
        let v = schwinger_vector(b1 * s, b2 * s);
        let out = run_lab(&sp, &mut st, 1.0, 0.0, 0.0, 3.0, &[0.7, 1.9, 3.0]);
        for q in &out {
            let want = (4.0 * q.time).cos() * v[0] - (4.0 * q.time).sin() * v[1];
            assert!((q.mean_jx() - want).abs() < 1e-8);
        }
        let tr = (st.trace() - re(1.0)).norm();
        assert!(tr < 1e-12);
    }

    #[test]
    fn frames_agree() {
        let sp = HilbertSpec::new(2, 8).unwrap();
        let d0 = Complex64::new(0.6, -0.3);
        let mut a = initial_state(&sp, d0, re(1.0), Complex64::new(0.4, 0.2)).unwrap();
        let mut b = a.clone();
        b.frame = Frame::Interaction;
        run_lab(&sp, &mut a, 4.0, 0.9, 1.1, 2.5, &[]);
        run_lab(&sp, &mut b, 4.0, 0.9, 1.1, 2.5, &[]);
        let b = b.to_lab();
        let diff = a.rho.iter().zip(&b.rho).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        assert!(diff < 1e-8, "{diff}");
        assert_eq!(a.hermiticity_error(), 0.0);
        assert!(a.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn lifetime_of_synthetic_series() {
        let tau = 37.0;
        let period = 2.5;
        let s: Vec<f64> = (0..40).map(|k| 0.3 * if k % 2 == 0 { 1.0 } else { -1.0 } * (-(k as f64) * period / tau).exp()).collect();
        let t = extract_lifetime(&s, period).unwrap();
        assert!((t / tau - 1.0).abs() < 1e-6);
        let flat: Vec<f64> = (0..40).map(|k| if k % 2 == 0 { 0.3 } else { -0.3 }).collect();
        assert!(matches!(extract_lifetime(&flat, period), Err(Error::Lifetime(_))));
        assert!(extract_lifetime(&[0.3; 40], period).is_err());
        // fit window shorter than the alternating run
        let fast: Vec<f64> = (0..12).map(|k| 0.4 * (-0.5f64).powi(k)).collect();
        let t = extract_lifetime(&fast, 3.0).unwrap();
        assert!((t - 3.0 / 2f64.ln()).abs() < 1e-9);
        assert!(matches!(extract_lifetime(&fast[..8], 3.0), Err(Error::Lifetime(_))));
    }

    #[test]
    fn fig8_small_n_alternates() {
        let n = 4usize;
        let p = ModelParams::symmetric(5.0, 300.0, 1.2, 0.0, n as f64).unwrap();
        let g = 1.5 * critical_coupling(&p).unwrap();
        let p = p.with_coupling(g);
        let sched = build_schedule(20.0, 5.0, p.drive, 1.2, 1.0, 5.0).unwrap();
        let t1 = find_flipping_time(&p, 20.0, sched.phase1.drive, Branch::Plus, 10.0, &StepControl::default()).unwrap().time;
        let sched = sched.with_t1(t1).unwrap();
        let amp = steady_mean_field(&p, Branch::Plus).unwrap().cav.norm();
        let sp = HilbertSpec::auto(n, amp).unwrap();
        let out = run_quantum_protocol(&sp, &sched, &p, 4, &QuantumControls::default()).unwrap();
        assert!(out.strobe[0] > 0.0);
        assert!(out.strobe[1] < 0.0 && out.strobe[2] > 0.0);
        assert!(out.max_trace_error < 1e-8);
        assert_eq!(out.max_hermiticity_error, 0.0);
        assert!(out.min_eigenvalue.unwrap() > -1e-6);
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    }
}
