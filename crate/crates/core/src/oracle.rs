//! Slow, transparent reference computations used to check the main paths.
//! They share no numerical kernels with the modules they check beyond the
//! black-box function being validated.

use std::f64::consts::PI;

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::FormFactor;
use crate::resolvent::{ResolventEvaluator, ResolventSettings};
use crate::rootfind::{Analytic, Window};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (t * p - p0) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `(phi, (p^2 + f x - z)^{-1} phi)` for `Im z > 0` by solving
/// `(k^2 + i f d/dk - z) u = phi^` with the integrating factor
/// `u(k) = (i/f) ∫_k^∞ exp(i(Φ(k) - Φ(q))) phi^(q) dq`, `Φ = (k^3/3 - z k)/f`,
/// and integrating `conj(phi^) u` over `[-cutoff, cutoff]`.
pub fn ode_resolvent_oracle<P>(phi_hat: P, f: f64, z: Complex64, cutoff: f64) -> Result<Complex64>
where
    P: Fn(f64) -> Complex64,
{
    if !(z.im > 0.0) {
        return Err(Error::NotUpperHalfPlane { z });
    }
    if !(f > 0.0) {
        return Err(Error::InvalidParameter("oracle needs f > 0".into()));
    }
    let (gx, gw) = gauss_legendre(12);
    let phase = |k: f64| (Complex64::new(k * k * k / 3.0, 0.0) - z * k) / f;
    // panel edges from the right end, phase advance per panel at most 3
    let mut edges = vec![cutoff];
    let mut k = cutoff;
    while k > -cutoff {
        let rate = ((k.abs() + 0.1).powi(2) + z.norm() + f) / f;
        let h = (3.0 / rate).min(0.05);
        k = (k - h).max(-cutoff);
        edges.push(k);
    }
    let mut u_right = ZERO;
    let mut total = ZERO;
    for pair in edges.windows(2) {
        let (b, a) = (pair[0], pair[1]);
        let phase_b = phase(b);
        // u at the GL nodes of [a, b]
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in gx.iter().zip(&gw) {
            let x = mid + half * xi;
            let px = phase(x);
            let sub_half = 0.5 * (b - x);
            let sub_mid = 0.5 * (b + x);
            let mut inner = ZERO;
            for (yj, wj) in gx.iter().zip(&gw) {
                let q = sub_mid + sub_half * yj;
                inner += (I * (px - phase(q))).exp() * phi_hat(q) * *wj;
            }
            let ux = (I * (px - phase_b)).exp() * u_right + I / f * inner * sub_half;
            total += phi_hat(x).conj() * ux * (*wi * half);
        }
        let pa = phase(a);
        let mut inner = ZERO;
        for (yj, wj) in gx.iter().zip(&gw) {
            let q = mid + half * yj;
            inner += (I * (pa - phase(q))).exp() * phi_hat(q) * *wj;
        }
        u_right = (I * (pa - phase_b)).exp() * u_right + I / f * inner * half;
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::NonFinite { z });
        }
    }
    Ok(total)
}

/// `F(z)` for `phi = amp * exp(-x^2/2)` with no field, from the Faddeeva
/// function: `r(z) = iπ amp^2 w(√z) / √z`, valid off `(-inf, 0]`.
pub fn erfc_closed_form(amp: f64, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 || (z.re < 0.0 && z.im == 0.0) {
        return Err(Error::BranchCut { z });
    }
    let sq = z.sqrt();
    let r = I * PI * amp * amp * sq.w() / sq;
    Ok(Complex64::new(1.0, 0.0) - z - r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorSettings {
    pub radius: f64,
    pub nodes: usize,
    /// Direct evaluation is trusted where `Im z` exceeds this.
    pub trust_im: f64,
    pub min_radius: f64,
}

impl Default for TaylorSettings {
    fn default() -> Self {
        Self {
            radius: 0.2,
            nodes: 64,
            trust_im: 0.02,
            min_radius: 1e-4,
        }
    }
}

struct Expansion {
    center: Complex64,
    radius: f64,
    coeffs: Vec<Complex64>,
}

impl Expansion {
    fn eval(&self, z: Complex64) -> Complex64 {
        let d = z - self.center;
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * d + a)
    }

    /// Root-test estimate of the convergence radius.
    fn radius_estimate(&self) -> f64 {
        let n = self.coeffs.len();
        if n < 4 {
            return f64::INFINITY;
        }
        let head = self.coeffs[0].norm().max(self.coeffs[1].norm() * self.radius);
        let tail = self.coeffs[n - 1].norm();
        if tail == 0.0 || head == 0.0 {
            return f64::INFINITY;
        }
        (head / tail).powf(1.0 / (n - 1) as f64)
    }
}

fn expand<G>(g: G, center: Complex64, radius: f64, nodes: usize) -> Result<Expansion>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut samples = Vec::with_capacity(nodes);
    let mut peak: f64 = 0.0;
    for j in 0..nodes {
        let v = g(center + Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64))?;
        peak = peak.max(v.norm());
        samples.push(v);
    }
    let mut coeffs = Vec::with_capacity(nodes / 2);
    for n in 0..nodes / 2 {
        let mut a = ZERO;
        for (j, v) in samples.iter().enumerate() {
            a += v * Complex64::from_polar(1.0, -2.0 * PI * (n * j) as f64 / nodes as f64);
        }
        let a = a / nodes as f64;
        // drop coefficients that sit on the rounding floor
        if n > 0 && a.norm() < 1e3 * f64::EPSILON * peak {
            break;
        }
        coeffs.push(a / radius.powi(n as i32));
    }
    Ok(Expansion {
        center,
        radius,
        coeffs,
    })
}

/// Continues `upper` (trusted only for `Im z > trust_im`) along the polyline
/// `path` by re-expanding Taylor series on Cauchy circles, returning the
/// value at the last vertex.
pub fn taylor_continuation_oracle<A: Analytic + ?Sized>(
    upper: &A,
    path: &[Complex64],
    settings: &TaylorSettings,
) -> Result<Complex64> {
    if path.len() < 2 {
        return Err(Error::InvalidParameter("path needs two or more vertices".into()));
    }
    let start = path[0];
    if start.im - settings.radius <= settings.trust_im {
        return Err(Error::InvalidParameter("path must start with a trusted circle".into()));
    }
    let mut chain = vec![expand(|w| upper.value(w), start, settings.radius, settings.nodes)?];
    let mut rho = settings.radius;
    for seg in path.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mut pos = a;
        loop {
            let remaining = (b - pos).norm();
            if remaining < 1e-15 {
                break;
            }
            let last = chain.last().expect("chain starts non-empty");
            rho = rho.min(0.35 * last.radius_estimate());
            if rho < settings.min_radius {
                return Err(Error::RadiusCollapse { z: pos });
            }
            let step = remaining.min(0.25 * rho);
            let next = pos + (b - pos) / remaining * step;
            let g = |w: Complex64| {
                if w.im > settings.trust_im {
                    return upper.value(w);
                }
                // the expansion whose sampling circle sits closest in relative terms
                let best = chain
                    .iter()
                    .min_by(|x, y| {
                        let rx = (w - x.center).norm() / x.radius;
                        let ry = (w - y.center).norm() / y.radius;
                        rx.total_cmp(&ry)
                    })
                    .expect("chain starts non-empty");
                Ok(best.eval(w))
            };
            let e = expand(g, next, rho, settings.nodes)?;
            chain.push(e);
            pos = next;
        }
    }
    Ok(chain.last().expect("chain starts non-empty").coeffs[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub z: Complex64,
    pub magnitude: f64,
}

/// Local minima of `|F|` below `threshold` on an `n x n` grid of cell centres.
pub fn grid_scan<A: Analytic + ?Sized>(func: &A, window: &Window, n: usize, threshold: f64) -> Result<Vec<Candidate>> {
    window.validate()?;
    if n < 3 {
        return Err(Error::InvalidParameter("grid scan needs n >= 3".into()));
    }
    let dx = window.width() / n as f64;
    let dy = window.height() / n as f64;
    let point = |i: usize, j: usize| {
        Complex64::new(window.re_min + dx * (i as f64 + 0.5), window.im_min + dy * (j as f64 + 0.5))
    };
    let mut mag = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            mag[i * n + j] = func.value(point(i, j))?.norm();
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let m = mag[i * n + j];
            if m >= threshold {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    if mag[ii as usize * n + jj as usize] < m {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push(Candidate { z: point(i, j), magnitude: m });
            }
        }
    }
    Ok(out)
}

/// Vector `(psi, c)` in the coupled space.
#[derive(Debug, Clone)]
pub struct TestVector {
    pub psi: FormFactor,
    pub c: Complex64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleReport {
    pub pole_confirmed: bool,
    pub inconclusive: bool,
    /// `(z - r) * element(z)` at the smallest approach distance, per ray.
    pub residues: Vec<Complex64>,
    /// Largest relative change of the residue between the two closest distances.
    pub spread: f64,
    pub derivative_norm: f64,
}

/// Continued element `(Ψ, (H - z)^{-1} Ψ)` of the coupled operator, assembled
/// from resolvent matrix elements through the Schur complement:
/// `(ψ,Rψ) + ((ψ,Rφ) - conj c)((φ,Rψ) - c) / F`.
pub struct CoupledElement {
    psi_psi: ResolventEvaluator,
    psi_phi: ResolventEvaluator,
    phi_psi: ResolventEvaluator,
    main: ResolventEvaluator,
    c: Complex64,
}

impl CoupledElement {
    pub fn new(phi: &FormFactor, vector: &TestVector, f: f64, settings: ResolventSettings) -> Result<Self> {
        Ok(Self {
            psi_psi: ResolventEvaluator::pair(&vector.psi, &vector.psi, f, settings)?,
            psi_phi: ResolventEvaluator::pair(&vector.psi, phi, f, settings)?,
            phi_psi: ResolventEvaluator::pair(phi, &vector.psi, f, settings)?,
            main: ResolventEvaluator::new(phi, f, settings)?,
            c: vector.c,
        })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let a = self.psi_psi.continued(z)?;
        let b = self.psi_phi.continued(z)? - self.c.conj();
        let d = self.phi_psi.continued(z)? - self.c;
        Ok(a + b * d / self.main.f_value(z)?)
    }
}

/// Checks that the coupled element has a simple pole at `r`: along three
/// approach rays `(z - r) * element(z)` settles to a common nonzero value.
pub fn full_resolvent_pole_test(
    phi: &FormFactor,
    f: f64,
    vector: &TestVector,
    r: Complex64,
    settings: ResolventSettings,
) -> Result<PoleReport> {
    let elem = CoupledElement::new(phi, vector, f, settings)?;
    let main = ResolventEvaluator::new(phi, f, settings)?;
    let derivative_norm = main.f_derivative(r)?.norm();
    if derivative_norm < 1e-8 {
        return Ok(PoleReport {
            pole_confirmed: false,
            inconclusive: true,
            residues: Vec::new(),
            spread: f64::NAN,
            derivative_norm,
        });
    }
    let rays = [0.3, 2.4, 4.4];
    let dists = [1e-3, 1e-4, 1e-5];
    let mut residues = Vec::new();
    let mut spread: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for angle in rays {
        let dir = Complex64::from_polar(1.0, angle);
        let vals = dists
            .iter()
            .map(|&d| elem.eval(r + dir * d).map(|v| v * dir * d))
            .collect::<Result<Vec<_>>>()?;
        let last = vals[2];
        spread = spread.max((vals[2] - vals[1]).norm() / last.norm().max(f64::MIN_POSITIVE));
        scale = scale.max(last.norm());
        residues.push(last);
    }
    let common = residues
        .iter()
        .all(|v| (v - residues[0]).norm() <= 1e-3 * residues[0].norm().max(f64::MIN_POSITIVE));
    let nonzero = scale > 1e-10;
    Ok(PoleReport {
        pole_confirmed: nonzero && common && spread < 1e-2,
        inconclusive: false,
        residues,
        spread,
        derivative_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootfind::FnAnalytic;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_oracle() {
        let v = ode_resolvent_oracle(|_| ZERO, 0.01, c(1.0, 0.5), 8.0).unwrap();
        assert_eq!(v, ZERO);
    }

    #[test]
    fn closed_form_pole_term_on_axis() {
        // for real even phi the residue term is twice the imaginary part on the axis
        let lam: f64 = 1.3;
        let v = erfc_closed_form(0.1, c(lam, 0.0)).unwrap();
        let pole = I * PI * (-lam).exp() / (50.0 * lam.sqrt());
        assert!((c(0.0, -2.0 * v.im) - pole).norm() < 1e-15);
    }

    #[test]
    fn golden_rule_width() {
        let r0 = c(1.019_053_988_888_707_1, -0.011_111_503_308_084_16);
        assert!(erfc_closed_form(0.1, r0).unwrap().norm() < 1e-12);
        let estimate = PI * (-r0.re).exp() / 100.0;
        assert!((estimate - r0.im.abs()).abs() / r0.im.abs() < 0.1);
    }

    #[test]
    fn taylor_continues_rational_function() {
        let pole = c(0.0, -1.5);
        let g = FnAnalytic(move |z: Complex64| (z - pole).inv());
        let target = c(1.0, -0.1);
        let path = [c(1.0, 0.5), c(1.0, 0.0), target];
        let v = taylor_continuation_oracle(&g, &path, &TaylorSettings::default()).unwrap();
        assert!((v - (target - pole).inv()).norm() < 1e-10);
    }

    #[test]
    fn grid_scan_finds_both_roots() {
        let a = c(0.3, -0.2);
        let b = c(-0.4, 0.25);
        let g = FnAnalytic(move |z: Complex64| (z - a) * (z - b));
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let found = grid_scan(&g, &w, 40, 0.1).unwrap();
        assert_eq!(found.len(), 2);
        for root in [a, b] {
            assert!(found.iter().any(|cand| (cand.z - root).norm() < 0.05));
        }
    }
}
