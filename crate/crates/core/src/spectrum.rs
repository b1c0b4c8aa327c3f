//! Optical spectrum of a symmetric cavity of half-length `L` holding two
//! identical membranes at `x1 < x2`, and the curvature of the resonance
//! wavenumber with respect to the membrane positions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::sweep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProblem {
    pub half_length: f64,
    pub transmission: f64,
    pub x1: f64,
    pub x2: f64,
}

impl SpectrumProblem {
    pub fn new(half_length: f64, transmission: f64, x1: f64, x2: f64) -> Result<Self> {
        let p = SpectrumProblem {
            half_length,
            transmission,
            x1,
            x2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return Err(Error::invalid("half_length", "must be finite and > 0"));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(Error::invalid("transmission", "must lie in (0, 1]"));
        }
        let l = self.half_length;
        if !(-l < self.x1 && self.x1 < self.x2 && self.x2 < l) {
            return Err(Error::invalid("x1, x2", "need -L < x1 < x2 < L"));
        }
        Ok(())
    }

    /// `arccos(sqrt(T))`.
    pub fn phi(&self) -> f64 {
        self.transmission.sqrt().min(1.0).acos()
    }

    pub fn displaced(&self, dx1: f64, dx2: f64) -> Result<Self> {
        SpectrumProblem::new(self.half_length, self.transmission, self.x1 + dx1, self.x2 + dx2)
    }
}

/// Left-hand side of the resonance condition; zero on the spectrum.
pub fn spectrum_residual(k: f64, p: &SpectrumProblem) -> f64 {
    let phi = p.phi();
    let l = p.half_length;
    let d = p.x1 - p.x2;
    let s = phi.sin();
    (2.0 * k * l + 2.0 * phi).sin() + (2.0 * k * l + 2.0 * k * d).sin() * s * s
        - 2.0 * s * (k * d - phi).cos() * (k * (p.x1 + p.x2)).cos()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Roots {
    /// Sign-change roots, sorted.
    pub roots: Vec<f64>,
    /// Grid points where `|residual|` has a near-zero local minimum without a
    /// sign change (possible double roots).
    pub tangential: Vec<f64>,
}

/// Default scan resolution `pi / (40 L)`.
pub fn default_grid_step(half_length: f64) -> f64 {
    PI / (40.0 * half_length)
}

/// Root of the residual inside a sign-changing bracket, refined by bisection
/// down to adjacent floating-point numbers.
pub fn refine_root(p: &SpectrumProblem, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = spectrum_residual(a, p);
    let fb = spectrum_residual(b, p);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Spectrum(format!("no sign change in [{a}, {b}]")));
    }
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = spectrum_residual(m, p);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let (ra, rb) = (spectrum_residual(a, p).abs(), spectrum_residual(b, p).abs());
    Ok(if ra <= rb { a } else { b })
}

/// All roots in `[k_lo, k_hi]` found on a grid of spacing `step`.
pub fn solve_k(p: &SpectrumProblem, k_lo: f64, k_hi: f64, step: Option<f64>) -> Result<Roots> {
    p.validate()?;
    if !(k_lo > 0.0 && k_hi > k_lo && k_hi.is_finite()) {
        return Err(Error::invalid("bracket", "need 0 < k_lo < k_hi"));
    }
    let step = step.unwrap_or_else(|| default_grid_step(p.half_length));
    if !(step > 0.0) {
        return Err(Error::invalid("step", "must be > 0"));
    }
    let n = ((k_hi - k_lo) / step).ceil().max(1.0) as usize;
    let ks: Vec<f64> = (0..=n).map(|i| k_lo + i as f64 * (k_hi - k_lo) / n as f64).collect();
    let fs: Vec<f64> = ks.iter().map(|&k| spectrum_residual(k, p)).collect();
    let mut out = Roots::default();
    for i in 0..n {
        if fs[i] == 0.0 {
            out.roots.push(ks[i]);
        } else if fs[i] * fs[i + 1] < 0.0 {
            out.roots.push(refine_root(p, ks[i], ks[i + 1])?);
        }
        if i > 0 {
            let (a, b, c) = (fs[i - 1].abs(), fs[i].abs(), fs[i + 1].abs());
            if b < a && b < c && fs[i - 1] * fs[i + 1] > 0.0 && fs[i] * fs[i - 1] > 0.0 && b < 1e-6 {
                out.tangential.push(ks[i]);
            }
        }
    }
    if fs[n] == 0.0 {
        out.roots.push(ks[n]);
    }
    out.roots.sort_by(f64::total_cmp);
    out.roots.dedup();
    Ok(out)
}

/// Root nearest to `k_prev`, rejecting moves larger than `pi / (4 L)`.
pub fn track_root(p: &SpectrumProblem, k_prev: f64) -> Result<f64> {
    let l = p.half_length;
    let step = PI / (80.0 * l);
    let jump = PI / (4.0 * l);
    let mut best: Option<f64> = None;
    for j in 0..4 {
        for (a, b) in [
            (k_prev - (j + 1) as f64 * step, k_prev - j as f64 * step),
            (k_prev + j as f64 * step, k_prev + (j + 1) as f64 * step),
        ] {
            if a <= 0.0 {
                continue;
            }
            if spectrum_residual(a, p) * spectrum_residual(b, p) <= 0.0 {
                let r = refine_root(p, a, b)?;
                if best.map_or(true, |k| (r - k_prev).abs() < (k - k_prev).abs()) {
                    best = Some(r);
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    match best {
        Some(k) if (k - k_prev).abs() <= jump => Ok(k),
        Some(k) => Err(Error::Spectrum(format!(
            "branch jump from {k_prev} to {k}; use a smaller displacement"
        ))),
        None => Err(Error::Spectrum(format!(
            "branch near k = {k_prev} lost; use a smaller displacement"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub k: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Closed-form geometry with vanishing linear coupling for the integer
/// labels `(m0, m1, m2)`.
pub fn equilibrium_positions(m0: i64, m1: i64, m2: i64, transmission: f64, half_length: f64) -> Result<Equilibrium> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::invalid("transmission", "must lie in (0, 1]"));
    }
    if !(half_length > 0.0) {
        return Err(Error::invalid("half_length", "must be > 0"));
    }
    let phi = transmission.sqrt().min(1.0).acos();
    let k = ((2 * m0 + 1) as f64 * PI / 2.0 - phi) / half_length;
    if !(k > 0.0) {
        return Err(Error::invalid("m0", "gives a non-positive wavenumber"));
    }
    let x1 = m1 as f64 * PI / k;
    let x2 = (m2 as f64 * PI + PI / 2.0 - phi) / k;
    let l = half_length;
    if !(-l < x1 && x1 < l && -l < x2 && x2 < l) {
        return Err(Error::invalid("m1, m2", "membranes fall outside the cavity"));
    }
    if x1 >= x2 {
        return Err(Error::invalid("m1, m2", "need x1 < x2"));
    }
    Ok(Equilibrium { k, x1, x2 })
}

impl Equilibrium {
    pub fn problem(&self, transmission: f64, half_length: f64) -> Result<SpectrumProblem> {
        SpectrumProblem::new(half_length, transmission, self.x1, self.x2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingDerivatives {
    pub dk_dx1: f64,
    pub dk_dx2: f64,
    pub d2k_dx1: f64,
    pub d2k_dx2: f64,
    pub d2k_dx1dx2: f64,
}

/// Default finite-difference step `1e-5 L`.
pub fn default_fd_step(half_length: f64) -> f64 {
    1e-5 * half_length
}

/// Derivatives of the branch `k(x1, x2)` through `k0`, by central
/// differences with one Richardson step (`h` and `2h`).
pub fn coupling_derivatives(p: &SpectrumProblem, k0: f64, h: Option<f64>) -> Result<CouplingDerivatives> {
    p.validate()?;
    let h = h.unwrap_or_else(|| default_fd_step(p.half_length));
    if !(h > 0.0) {
        return Err(Error::invalid("h", "must be > 0"));
    }
    let k0 = track_root(p, k0)?;
    let k = |a: f64, b: f64| -> Result<f64> {
        if a == 0.0 && b == 0.0 {
            return Ok(k0);
        }
        track_root(&p.displaced(a, b)?, k0)
    };
    let stencil = |h: f64| -> Result<[f64; 5]> {
        let (p1, m1) = (k(h, 0.0)?, k(-h, 0.0)?);
        let (p2, m2) = (k(0.0, h)?, k(0.0, -h)?);
        let mixed = (k(h, h)? - k(h, -h)? - k(-h, h)? + k(-h, -h)?) / (4.0 * h * h);
        Ok([
            (p1 - m1) / (2.0 * h),
            (p2 - m2) / (2.0 * h),
            (p1 - 2.0 * k0 + m1) / (h * h),
            (p2 - 2.0 * k0 + m2) / (h * h),
            mixed,
        ])
    };
    let a = stencil(h)?;
    let b = stencil(2.0 * h)?;
    let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (4.0 * x - y) / 3.0).collect();
    Ok(CouplingDerivatives {
        dk_dx1: r[0],
        dk_dx2: r[1],
        d2k_dx1: r[2],
        d2k_dx2: r[3],
        d2k_dx1dx2: r[4],
    })
}

/// `k - k0` on a displacement grid; `None` marks cells where the branch
/// could not be followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSurface {
    pub half_length: f64,
    pub k0: f64,
    pub dx1: Vec<f64>,
    pub dx2: Vec<f64>,
    /// Row-major over `dx1`.
    pub dk: Vec<Vec<Option<f64>>>,
}

fn nearest_zero(grid: &[f64]) -> usize {
    (0..grid.len())
        .min_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()))
        .unwrap_or(0)
}

/// Visiting order from the cell nearest zero outward.
fn outward(grid: &[f64]) -> Vec<(usize, usize)> {
    let c = nearest_zero(grid);
    let mut order = Vec::new();
    for i in (0..c).rev() {
        order.push((i, i + 1));
    }
    for i in c + 1..grid.len() {
        order.push((i, i - 1));
    }
    order
}

fn track_line(base: &SpectrumProblem, seed: f64, points: &[(f64, f64)], order: &[(usize, usize)], start: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; points.len()];
    let solve = |pt: (f64, f64), k: f64| base.displaced(pt.0, pt.1).and_then(|q| track_root(&q, k)).ok();
    out[start] = solve(points[start], seed);
    for &(i, from) in order {
        out[i] = out[from].and_then(|k| solve(points[i], k));
    }
    out
}

/// Branch-tracked surface. The `dx1` axis at the `dx2` closest to zero is
/// followed outward from the seed; each row is then followed outward along
/// `dx2` independently, so rows can run in parallel.
pub fn spectrum_scan(p: &SpectrumProblem, dx1: &[f64], dx2: &[f64], k_seed: f64, workers: usize) -> Result<SpectrumSurface> {
    p.validate()?;
    if dx1.is_empty() || dx2.is_empty() {
        return Err(Error::invalid("grid", "must be non-empty"));
    }
    let k0 = track_root(p, k_seed)?;
    let c1 = nearest_zero(dx1);
    let c2 = nearest_zero(dx2);
    let axis_pts: Vec<(f64, f64)> = dx1.iter().map(|&a| (a, dx2[c2])).collect();
    let axis = track_line(p, k0, &axis_pts, &outward(dx1), c1);
    let order2 = outward(dx2);
    let rows = sweep(&(0..dx1.len()).collect::<Vec<_>>(), workers, |&i| {
        let pts: Vec<(f64, f64)> = dx2.iter().map(|&b| (dx1[i], b)).collect();
        let row = match axis[i] {
            Some(k) => {
                let mut r = track_line(p, k, &pts, &order2, c2);
                r[c2] = Some(k);
                r
            }
            None => vec![None; dx2.len()],
        };
        row.into_iter().map(|v| v.map(|k| k - k0)).collect::<Vec<_>>()
    })?;
    Ok(SpectrumSurface {
        half_length: p.half_length,
        k0,
        dx1: dx1.to_vec(),
        dx2: dx2.to_vec(),
        dk: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub d2k_dx1: f64,
    pub d2k_dx2: f64,
    pub d2k_dx1dx2: f64,
    pub dk_dx1: f64,
    pub dk_dx2: f64,
    /// Largest absolute residual of the fit.
    pub max_residual: f64,
}

impl SpectrumSurface {
    pub fn valid_cells(&self) -> usize {
        self.dk.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// Least-squares fit of
    /// `dk = k11 a^2/2 + k22 b^2/2 + k12 a b + k1 a + k2 b` over valid cells.
    pub fn quadratic_fit(&self) -> Result<QuadraticFit> {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (i, &a) in self.dx1.iter().enumerate() {
            for (j, &b) in self.dx2.iter().enumerate() {
                if let Some(v) = self.dk[i][j] {
                    rows.extend_from_slice(&[0.5 * a * a, 0.5 * b * b, a * b, a, b]);
                    rhs.push(v);
                }
            }
        }
        let m = rhs.len();
        if m < 5 {
            return Err(Error::Spectrum("too few valid cells for a quadratic fit".into()));
        }
        let a = DMatrix::from_row_slice(m, 5, &rows);
        let y = DVector::from_vec(rhs);
        let c = a
            .clone()
            .svd(true, true)
            .solve(&y, 1e-14)
            .map_err(|e| Error::Spectrum(format!("fit failed: {e}")))?;
        let res = (&a * &c - &y).amax();
        Ok(QuadraticFit {
            d2k_dx1: c[0],
            d2k_dx2: c[1],
            d2k_dx1dx2: c[2],
            dk_dx1: c[3],
            dk_dx2: c[4],
            max_residual: res,
        })
    }

    /// Columns `dx1/L, dx2/L, L*dk`; invalid cells are written as `NaN`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let l = self.half_length;
        writeln!(w, "dx1_over_l,dx2_over_l,l_dk")?;
        for (i, &a) in self.dx1.iter().enumerate() {
            for (j, &b) in self.dx2.iter().enumerate() {
                let v = self.dk[i][j].map_or(f64::NAN, |d| d * l);
                writeln!(w, "{},{},{}", a / l, b / l, v)?;
            }
        }
        Ok(())
    }
}

/// `n` evenly spaced displacements in `[-max, max]`.
pub fn symmetric_grid(max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -max + 2.0 * max * i as f64 / (n - 1) as f64).collect()
}
