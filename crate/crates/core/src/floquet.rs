//! Truncated complex-dilated Floquet operator for the periodically driven
//! model, in a Fourier(t) x Hermite(x) basis plus Fourier(t) x C for the
//! bound-state sector, and its eigenvalues near a target.

use std::f64::consts::PI;
use std::io::Write;

use faer::prelude::*;
use faer::{c64, Mat};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{DilationParameter, FormFactor};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Upper bound on the assembled dimension.
pub const MAX_DIMENSION: usize = 12_000;

pub const MATRIX_MAGIC: &[u8; 8] = b"SKFLOQ01";

#[derive(Debug, Clone)]
pub struct FloquetProblem {
    pub phi: FormFactor,
    pub f: f64,
    pub omega: f64,
    pub theta: DilationParameter,
    /// Fourier modes run over `-n_fourier..=n_fourier`.
    pub n_fourier: usize,
    /// Hermite functions `0..=n_hermite`.
    pub n_hermite: usize,
    pub length: f64,
    /// Samples per period for the coupling coefficients; `8 * n_fourier` when `None`.
    pub time_samples: Option<usize>,
}

impl FloquetProblem {
    pub fn new(phi: FormFactor, f: f64, omega: f64, theta: DilationParameter, n_fourier: usize, n_hermite: usize) -> Self {
        Self {
            phi,
            f,
            omega,
            theta,
            n_fourier,
            n_hermite,
            length: 1.0,
            time_samples: None,
        }
    }

    pub fn dimension(&self) -> usize {
        (2 * self.n_fourier + 1) * (self.n_hermite + 2)
    }

    pub fn l2_dimension(&self) -> usize {
        (2 * self.n_fourier + 1) * (self.n_hermite + 1)
    }

    pub fn samples(&self) -> usize {
        self.time_samples.unwrap_or(8 * self.n_fourier).max(8)
    }

    /// Same problem with larger cutoffs.
    pub fn bumped(&self, dn: usize, dj: usize) -> Self {
        Self {
            n_fourier: self.n_fourier + dn,
            n_hermite: self.n_hermite + dj,
            time_samples: self.time_samples.map(|_| 8 * (self.n_fourier + dn)),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f >= 0.0 && self.f.is_finite()) {
            return Err(Error::InvalidParameter(format!("field strength {} must be >= 0", self.f)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("frequency {} must be > 0", self.omega)));
        }
        if !(self.theta.theta().im > 0.0) {
            return Err(Error::InvalidParameter("dilation needs Im theta > 0".into()));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter("basis length scale must be > 0".into()));
        }
        let dim = self.dimension();
        if dim > MAX_DIMENSION {
            return Err(Error::DimensionOverflow {
                dim,
                limit: MAX_DIMENSION,
            });
        }
        Ok(())
    }

    fn l2_index(&self, n: i64, j: usize) -> usize {
        (n + self.n_fourier as i64) as usize * (self.n_hermite + 1) + j
    }

    fn c_index(&self, n: i64) -> usize {
        self.l2_dimension() + (n + self.n_fourier as i64) as usize
    }

    /// Fourier index of a matrix row/column.
    pub fn fourier_index(&self, row: usize) -> i64 {
        let nf = self.n_fourier as i64;
        if row < self.l2_dimension() {
            (row / (self.n_hermite + 1)) as i64 - nf
        } else {
            (row - self.l2_dimension()) as i64 - nf
        }
    }
}

/// Hermite functions `h_j(x) = l^{-1/2} psi_j(x / l)` at `xs`, one row per `j`.
pub fn hermite_functions(n_max: usize, xs: &[f64], length: f64) -> Vec<Vec<f64>> {
    let norm = PI.powf(-0.25) / length.sqrt();
    let mut rows = vec![vec![0.0; xs.len()]; n_max + 1];
    for (i, &x) in xs.iter().enumerate() {
        let y = x / length;
        let mut prev = 0.0;
        let mut cur = norm * (-0.5 * y * y).exp();
        rows[0][i] = cur;
        for (j, row) in rows.iter_mut().enumerate().skip(1) {
            let next = (2.0 / j as f64).sqrt() * y * cur - ((j - 1) as f64 / j as f64).sqrt() * prev;
            prev = cur;
            cur = next;
            row[i] = cur;
        }
    }
    rows
}

/// `p^2` in the Hermite basis: `(diagonal, second off-diagonal)`.
pub fn momentum_squared(n_max: usize, length: f64) -> (Vec<f64>, Vec<f64>) {
    let l2 = length * length;
    let diag = (0..=n_max).map(|j| (j as f64 + 0.5) / l2).collect();
    let off = (0..n_max.saturating_sub(1))
        .map(|j| -(((j + 1) * (j + 2)) as f64).sqrt() / (2.0 * l2))
        .collect();
    (diag, off)
}

struct Grid {
    xs: Vec<f64>,
    dx: f64,
    hermite: Vec<Vec<f64>>,
}

impl Grid {
    fn new(problem: &FloquetProblem, samples: &[&FormFactor]) -> Self {
        let l = problem.length;
        let j = problem.n_hermite as f64;
        let k_h = (2.0 * j + 1.0).sqrt() / l;
        let mut half = l * ((2.0 * j + 1.0).sqrt() + 10.0);
        let mut k_g: f64 = 0.0;
        for g in samples {
            for t in g.terms() {
                let w = t.width;
                let center = (t.linear / w).re.abs();
                half = half.max(center + (2.0 * 50.0 / w.re).sqrt());
                k_g = k_g.max(w.im.abs() * half + t.linear.im.abs());
            }
        }
        let dx = PI / (4.0 * (k_h + k_g) + 4.0);
        let n = (half / dx).ceil() as i64;
        let xs: Vec<f64> = (-n..=n).map(|i| i as f64 * dx).collect();
        let hermite = hermite_functions(problem.n_hermite, &xs, l);
        Self { xs, dx, hermite }
    }

    /// `int h_j g dx` for every `j` by the trapezoid rule.
    fn overlaps(&self, g: &FormFactor) -> Vec<Complex64> {
        let values: Vec<Complex64> = self.xs.iter().map(|&x| g.eval_real(x)).collect();
        self.hermite
            .iter()
            .map(|h| h.iter().zip(&values).map(|(a, b)| b * *a).sum::<Complex64>() * self.dx)
            .collect()
    }
}

/// Gauge-transformed coupling `T(t, f) phi` at time `t`.
fn transported(problem: &FloquetProblem, t: f64) -> FormFactor {
    let w = problem.omega;
    let f = problem.f;
    let a = 2.0 * f / (w * w) * (w * t).sin();
    let b = -f / w * (w * t).cos();
    problem.phi.translate_modulate(a, b, 0.0)
}

/// Fourier coefficients `k = -2N..=2N` of the column overlaps
/// `<h_j, U(theta) T(t) phi>` and of the row functionals
/// `conj <h_j, U(conj theta) T(t) phi>`, indexed `[k + 2N][j]`.
#[allow(clippy::type_complexity)]
pub fn coupling_coefficients(problem: &FloquetProblem) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let nf = problem.n_fourier;
    let nk = 4 * nf + 1;
    let jn = problem.n_hermite + 1;
    let theta = problem.theta;
    let theta_bar = theta.conj();
    if problem.f == 0.0 {
        let col_g = problem.phi.dilate(theta)?;
        let row_g = problem.phi.dilate(theta_bar)?;
        let grid = Grid::new(problem, &[&col_g, &row_g]);
        let mut col = vec![vec![ZERO; jn]; nk];
        let mut row = vec![vec![ZERO; jn]; nk];
        col[2 * nf] = grid.overlaps(&col_g);
        row[2 * nf] = grid.overlaps(&row_g).into_iter().map(|v| v.conj()).collect();
        return Ok((col, row));
    }
    let m = problem.samples();
    let period = 2.0 * PI / problem.omega;
    let mut col_t = Vec::with_capacity(m);
    let mut row_t = Vec::with_capacity(m);
    for s in 0..m {
        let g = transported(problem, period * s as f64 / m as f64);
        col_t.push(g.dilate(theta)?);
        row_t.push(g.dilate(theta_bar)?);
    }
    let refs: Vec<&FormFactor> = col_t.iter().chain(row_t.iter()).collect();
    let grid = Grid::new(problem, &refs);
    let col_vals: Vec<Vec<Complex64>> = col_t.iter().map(|g| grid.overlaps(g)).collect();
    let row_vals: Vec<Vec<Complex64>> = row_t
        .iter()
        .map(|g| grid.overlaps(g).into_iter().map(|v| v.conj()).collect())
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let transform = |vals: &[Vec<Complex64>]| {
        let mut out = vec![vec![ZERO; jn]; nk];
        let mut buf = vec![ZERO; m];
        for j in 0..jn {
            for (s, v) in vals.iter().enumerate() {
                buf[s] = v[j];
            }
            fft.process(&mut buf);
            for (idx, k) in (-(2 * nf as i64)..=(2 * nf as i64)).enumerate() {
                out[idx][j] = buf[k.rem_euclid(m as i64) as usize] / m as f64;
            }
        }
        out
    };
    Ok((transform(&col_vals), transform(&row_vals)))
}

/// Dense matrix of the truncated `K(f, theta)`.
pub fn assemble(problem: &FloquetProblem) -> Result<Mat<c64>> {
    problem.validate()?;
    let dim = problem.dimension();
    let nf = problem.n_fourier as i64;
    let jn = problem.n_hermite + 1;
    let (col, row) = coupling_coefficients(problem)?;
    let (p_diag, p_off) = momentum_squared(problem.n_hermite, problem.length);
    let rot = (-problem.theta.theta() * 2.0).exp();
    let w = problem.omega;
    let shift = problem.f * problem.f / (2.0 * w * w);
    let side = problem.f * problem.f / (4.0 * w * w);
    let mut k = Mat::<c64>::zeros(dim, dim);
    for n in -nf..=nf {
        let diag = Complex64::new(n as f64 * w + shift, 0.0);
        for j in 0..jn {
            let i = problem.l2_index(n, j);
            k[(i, i)] = rot * p_diag[j] + diag;
            if j + 2 < jn {
                let i2 = problem.l2_index(n, j + 2);
                k[(i, i2)] = rot * p_off[j];
                k[(i2, i)] = rot * p_off[j];
            }
            if side != 0.0 && n + 2 <= nf {
                let i2 = problem.l2_index(n + 2, j);
                k[(i, i2)] = Complex64::new(side, 0.0);
                k[(i2, i)] = Complex64::new(side, 0.0);
            }
        }
        let ci = problem.c_index(n);
        k[(ci, ci)] = Complex64::new(1.0 + n as f64 * w, 0.0);
    }
    for m_idx in -nf..=nf {
        for n in -nf..=nf {
            let kk = (m_idx - n + 2 * nf) as usize;
            let ccol = &col[kk];
            let crow = &row[kk];
            let cn = problem.c_index(n);
            let cm = problem.c_index(m_idx);
            for j in 0..jn {
                if ccol[j] != ZERO {
                    k[(problem.l2_index(m_idx, j), cn)] = ccol[j];
                }
                if crow[j] != ZERO {
                    k[(cm, problem.l2_index(n, j))] = crow[j];
                }
            }
        }
    }
    Ok(k)
}

/// Frobenius norm of all entries coupling different Fourier indices.
pub fn off_block_norm(problem: &FloquetProblem, k: &Mat<c64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..k.nrows() {
        let ni = problem.fourier_index(i);
        for j in 0..k.ncols() {
            if problem.fourier_index(j) != ni {
                acc += k[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Writes `magic, rows (u64 LE), cols (u64 LE)` and row-major `(re, im)` f64 LE pairs.
pub fn write_matrix<W: Write>(mut out: W, k: &Mat<c64>) -> std::io::Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&(k.nrows() as u64).to_le_bytes())?;
    out.write_all(&(k.ncols() as u64).to_le_bytes())?;
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            let v = k[(i, j)];
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSettings {
    pub tol: f64,
    /// Eigenvalues farther than this from the target are not reported.
    pub disk_radius: f64,
    pub subspace: usize,
    pub max_iter: usize,
    /// Re-solve at `(N + 4, J + 16)` to estimate truncation sensitivity.
    pub sensitivity: bool,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            disk_radius: 0.1,
            subspace: 8,
            max_iter: 40,
            sensitivity: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetEigenpair {
    pub eigenvalue: Complex64,
    pub residual: f64,
    /// Fourier index carrying the largest share of the eigenvector.
    pub fourier_index: i64,
    /// Share of the eigenvector norm in the bound-state sector.
    pub bound_weight: f64,
    pub sensitivity: Option<f64>,
}

fn start_vectors(dim: usize, p: usize) -> Mat<c64> {
    Mat::from_fn(dim, p, |i, c| {
        let a = 0.618_033_988_749_894_9 * (i + 1) as f64 + 1.324_717_957_244_746 * (c + 1) as f64;
        Complex64::new((a * PI).sin(), (a * 2.0 * PI).cos() * 0.5)
    })
}

/// Modified Gram-Schmidt, run twice; returns the orthonormal columns.
fn orthonormalize(v: &mut Mat<c64>) {
    let p = v.ncols();
    let n = v.nrows();
    for _ in 0..2 {
        for c in 0..p {
            for prev in 0..c {
                let mut dot = ZERO;
                for i in 0..n {
                    dot += v[(i, prev)].conj() * v[(i, c)];
                }
                for i in 0..n {
                    let t = v[(i, prev)] * dot;
                    v[(i, c)] -= t;
                }
            }
            let norm = (0..n).map(|i| v[(i, c)].norm_sqr()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for i in 0..n {
                v[(i, c)] *= scale;
            }
        }
    }
}

fn describe(problem: &FloquetProblem, x: &[Complex64]) -> (i64, f64) {
    let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let nf = problem.n_fourier as i64;
    let mut by_mode = vec![0.0; 2 * problem.n_fourier + 1];
    let mut bound = 0.0;
    for (i, v) in x.iter().enumerate() {
        by_mode[(problem.fourier_index(i) + nf) as usize] += v.norm_sqr();
        if i >= problem.l2_dimension() {
            bound += v.norm_sqr();
        }
    }
    let best = by_mode
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i as i64 - nf)
        .unwrap_or(0);
    (best, if total > 0.0 { bound / total } else { 0.0 })
}

/// Eigenpairs of an assembled matrix closest to `target`, by block inverse
/// iteration on a dense LU of `K - target` with Rayleigh-Ritz extraction.
pub fn eigen_near_matrix(
    problem: &FloquetProblem,
    k: &Mat<c64>,
    target: Complex64,
    settings: &EigenSettings,
) -> Result<Vec<FloquetEigenpair>> {
    let dim = k.nrows();
    let p = settings.subspace.clamp(1, dim);
    let mut shift = target;
    let mut lu = None;
    for attempt in 0..3 {
        let shifted = Mat::from_fn(dim, dim, |i, j| if i == j { k[(i, j)] - shift } else { k[(i, j)] });
        let f = shifted.partial_piv_lu();
        let probe = f.solve(start_vectors(dim, 1));
        let finite = (0..dim).all(|i| probe[(i, 0)].re.is_finite() && probe[(i, 0)].im.is_finite());
        if finite {
            lu = Some(f);
            break;
        }
        shift += Complex64::new(1e-8, 1e-8) * (attempt + 1) as f64;
    }
    let lu = lu.ok_or(Error::Stagnation { residual: f64::INFINITY })?;
    let mut v = start_vectors(dim, p);
    orthonormalize(&mut v);
    let mut best_residual = f64::INFINITY;
    let mut pairs: Vec<FloquetEigenpair> = Vec::new();
    for _ in 0..settings.max_iter {
        let mut w = lu.solve(&v);
        orthonormalize(&mut w);
        v = w;
        let kv = k * &v;
        let h = v.adjoint() * &kv;
        let eig = h.eigen().map_err(|_| Error::Stagnation { residual: best_residual })?;
        let s = eig.S();
        let u = eig.U();
        pairs.clear();
        let mut all_done = true;
        for c in 0..p {
            let lam = s.column_vector()[c];
            let x: Vec<Complex64> = (0..dim)
                .map(|i| (0..p).map(|r| v[(i, r)] * u[(r, c)]).sum())
                .collect();
            let kx: Vec<Complex64> = (0..dim)
                .map(|i| (0..p).map(|r| kv[(i, r)] * u[(r, c)]).sum())
                .collect();
            let xn = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let res = x
                .iter()
                .zip(&kx)
                .map(|(a, b)| (b - a * lam).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / xn;
            if (lam - target).norm() > settings.disk_radius {
                continue;
            }
            best_residual = best_residual.min(res);
            if res >= settings.tol {
                all_done = false;
            }
            let (fourier_index, bound_weight) = describe(problem, &x);
            pairs.push(FloquetEigenpair {
                eigenvalue: lam,
                residual: res,
                fourier_index,
                bound_weight,
                sensitivity: None,
            });
        }
        // the pair closest to the shift converges first; stop once it and
        // every other in-disk pair are resolved
        if !pairs.is_empty() && all_done {
            break;
        }
    }
    pairs.retain(|e| e.residual < settings.tol);
    if pairs.is_empty() {
        return Err(Error::Stagnation { residual: best_residual });
    }
    pairs.sort_by(|a, b| {
        (a.eigenvalue - target)
            .norm()
            .total_cmp(&(b.eigenvalue - target).norm())
            .then(a.eigenvalue.re.total_cmp(&b.eigenvalue.re))
    });
    Ok(pairs)
}

/// Picks the resonance among computed pairs: the largest bound-state share.
pub fn resonance_pair(pairs: &[FloquetEigenpair]) -> Option<FloquetEigenpair> {
    pairs
        .iter()
        .copied()
        .max_by(|a, b| a.bound_weight.total_cmp(&b.bound_weight))
}

/// Assembles and solves; every returned pair gets a truncation sensitivity when enabled.
pub fn eigen_near(problem: &FloquetProblem, target: Complex64, settings: &EigenSettings) -> Result<Vec<FloquetEigenpair>> {
    let k = assemble(problem)?;
    let mut pairs = eigen_near_matrix(problem, &k, target, settings)?;
    drop(k);
    if settings.sensitivity {
        let bigger = problem.bumped(4, 16);
        let kb = assemble(&bigger)?;
        let no_sens = EigenSettings {
            sensitivity: false,
            ..*settings
        };
        let refined = eigen_near_matrix(&bigger, &kb, target, &no_sens)?;
        for pair in pairs.iter_mut() {
            let nearest = refined
                .iter()
                .map(|r| (r.eigenvalue - pair.eigenvalue).norm())
                .fold(f64::INFINITY, f64::min);
            pair.sensitivity = Some(nearest);
        }
    }
    Ok(pairs)
}
