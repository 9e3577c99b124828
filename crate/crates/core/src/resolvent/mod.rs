//! Matrix elements `r(z) = (u, (p^2 + f x - z)^{-1} v)` and their analytic
//! continuation from the upper half-plane, plus `F(z) = 1 - z - r(z)`.
//!
//! Field-free elements are momentum integrals of `G(k) / (k^2 - z)` with
//! `G = conj(u^) v^` extended analytically. With a field the element is a
//! time integral of the constant-field propagator, whose Gaussian structure
//! gives a closed-form integrand; see [`time_integrand`].

mod methods;

use std::f64::consts::{FRAC_PI_3, FRAC_PI_8, PI};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use methods::{
    Auto, ContinuationMethod, FreeContour, FreePole, MethodRegistry, StarkPropagator,
};

use crate::error::{Error, Result};
use crate::formfactor::{FormFactor, GaussMoments};
use crate::quadrature::{integrate, integrate_breaks, QuadratureSettings};
use crate::rootfind::Analytic;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventSettings {
    pub quadrature: QuadratureSettings,
    /// Descent angle of the time ray past the saddle, inside `(0, pi/3)`.
    pub gamma: f64,
    pub derivative_radius: f64,
    pub derivative_nodes: usize,
    /// Relative angular distance from the negative axis that counts as on the cut.
    pub cut_epsilon: f64,
    /// `|Im z|` below which field-free evaluation switches to the deformed contour.
    pub axis_band: f64,
    /// Ray truncation once the integrand falls below this fraction of its peak.
    pub envelope_floor: f64,
    pub max_time: f64,
}

impl Default for ResolventSettings {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSettings::default(),
            gamma: FRAC_PI_8,
            derivative_radius: 1e-3,
            derivative_nodes: 32,
            cut_epsilon: 1e-6,
            axis_band: 1e-3,
            envelope_floor: 1e-16,
            max_time: 1e7,
        }
    }
}

impl ResolventSettings {
    pub fn validate(&self, f: f64) -> Result<()> {
        let q = &self.quadrature;
        if !(q.abs_tol > 0.0 && q.rel_tol > 0.0 && q.max_subdivisions > 0) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        if f > 0.0 && !(self.gamma > 0.0 && self.gamma < FRAC_PI_3) {
            return Err(Error::InvalidParameter(format!(
                "ray angle {} outside (0, pi/3)",
                self.gamma
            )));
        }
        if !(self.derivative_radius > 0.0) || self.derivative_nodes < 4 {
            return Err(Error::InvalidParameter("derivative circle too small".into()));
        }
        if !(self.envelope_floor > 0.0 && self.envelope_floor < 1.0) {
            return Err(Error::InvalidParameter("envelope floor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Precomputed momentum-space data shared by all continuation methods.
#[derive(Debug, Clone)]
pub struct Kernel {
    /// `k -> conj(u^(conj k))`.
    pub left: FormFactor,
    pub right: FormFactor,
    /// `left * right`, the field-free spectral density.
    pub density: FormFactor,
    pub f: f64,
    pub settings: ResolventSettings,
}

impl Kernel {
    fn new(u: &FormFactor, v: &FormFactor, f: f64, settings: ResolventSettings) -> Self {
        let left = u.fourier_transform().conj_analytic();
        let right = v.fourier_transform();
        let density = left.product(&right);
        Self {
            left,
            right,
            density,
            f,
            settings,
        }
    }

    /// Half-length beyond which every density term is negligible.
    fn momentum_cutoff(&self) -> f64 {
        self.density
            .terms()
            .iter()
            .map(|t| {
                let w = t.width.re;
                let b = t.linear.norm();
                let budget = 60.0 + 4.0 * t.degree as f64 + t.coeff.norm().max(1.0).ln();
                (b + (b * b + 2.0 * w * budget).sqrt()) / w
            })
            .fold(1.0, f64::max)
    }
}

/// `(iπ/√z)(G(√z) + G(-√z))`, the residue correction below the positive axis.
pub fn pole_term(kernel: &Kernel, z: Complex64) -> Complex64 {
    let sq = z.sqrt();
    let g = &kernel.density;
    I * PI / sq * (g.eval_guarded(sq).to_complex() + g.eval_guarded(-sq).to_complex())
}

/// `∫_R G(k) / (k^2 - z) dk` along the real line; needs `Im z != 0`.
pub fn real_line_integral(kernel: &Kernel, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "real-line integral is singular at real z = {z}"
        )));
    }
    if kernel.density.is_zero() {
        return Ok(ZERO);
    }
    let sq = z.sqrt();
    let cut = kernel.momentum_cutoff().max(2.0 * sq.re + 1.0);
    let mut breaks = vec![-cut, 0.0, cut];
    if sq.re > 1e-12 && sq.re < cut {
        breaks = vec![-cut, -sq.re, 0.0, sq.re, cut];
    }
    let g = &kernel.density;
    let r = integrate_breaks(
        |k| g.eval_real(k) / (Complex64::new(k * k, 0.0) - z),
        &breaks,
        4,
        &kernel.settings.quadrature,
    )?;
    Ok(r.value)
}

/// Field-free element on the contour `k = t - i h tanh(t/κ)`, which passes
/// below `√z` and above `-√z`; valid on both sides of the positive axis.
pub fn deformed_contour_integral(kernel: &Kernel, z: Complex64) -> Result<Complex64> {
    let sq = z.sqrt();
    if !(sq.re > 1e-8) {
        return Err(Error::BranchCut { z });
    }
    let kappa = 0.5 * sq.re;
    let depth = 0.5 * sq.re.min(1.0);
    if sq.im <= -0.9 * depth * (sq.re / kappa).tanh() {
        return Err(Error::InvalidParameter(format!(
            "z = {z} lies below the deformed momentum contour"
        )));
    }
    if kernel.density.is_zero() {
        return Ok(ZERO);
    }
    let cut = kernel.momentum_cutoff().max(2.0 * sq.re + 1.0);
    let g = &kernel.density;
    let r = integrate_breaks(
        |t| {
            let th = (t / kappa).tanh();
            let k = Complex64::new(t, -depth * th);
            let dk = Complex64::new(1.0, -depth * (1.0 - th * th) / kappa);
            g.eval(k) / (k * k - z) * dk
        },
        &[-cut, -sq.re, 0.0, sq.re, cut],
        4,
        &kernel.settings.quadrature,
    )?;
    Ok(r.value)
}

/// `(u, e^{-is(p^2 + f x)} v)` for complex time `s` with `Im s <= 0`.
pub fn propagator_element(kernel: &Kernel, s: Complex64) -> Complex64 {
    propagator_log_terms(kernel, s, ZERO).into_iter().map(|(ln, p)| ln.exp() * p).sum()
}

/// `e^{izs} (u, e^{-is(p^2 + f x)} v)`.
pub fn time_integrand(kernel: &Kernel, s: Complex64, z: Complex64) -> Complex64 {
    propagator_log_terms(kernel, s, I * z * s)
        .into_iter()
        .map(|(ln, p)| ln.exp() * p)
        .sum()
}

fn propagator_log_terms(kernel: &Kernel, s: Complex64, extra: Complex64) -> Vec<(Complex64, Complex64)> {
    let f = kernel.f;
    let fs = s * f;
    let mut out = Vec::with_capacity(kernel.left.terms().len() * kernel.right.terms().len());
    for a in kernel.left.terms().iter().filter(|t| t.coeff != ZERO) {
        for b in kernel.right.terms().iter().filter(|t| t.coeff != ZERO) {
            let quad = a.width + b.width + I * s * 2.0;
            let lin = a.linear + b.linear - b.width * fs - I * fs * s;
            let cst = -b.width * fs * fs * 0.5 + b.linear * fs - I * fs * fs * s / 3.0;
            let n1 = a.degree as usize;
            let n2 = b.degree as usize;
            let moments = GaussMoments::new(quad, lin, n1 + n2);
            let mut poly = ZERO;
            let mut binom = 1.0;
            for j in 0..=n2 {
                if j > 0 {
                    binom = binom * (n2 - j + 1) as f64 / j as f64;
                }
                poly += moments.raw_moment(n1 + j) * binom * fs.powu((n2 - j) as u32);
            }
            out.push((extra + cst + moments.log_scale + a.coeff.ln() + b.coeff.ln(), poly));
        }
    }
    out
}

fn log_envelope(kernel: &Kernel, s: Complex64, z: Complex64) -> f64 {
    propagator_log_terms(kernel, s, I * z * s)
        .into_iter()
        .map(|(ln, p)| ln.re + p.norm().max(f64::MIN_POSITIVE).ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Path of the time integral: real segment `[0, s_c]` up to the stationary
/// point `s_c = 2 Re√z / f`, then the ray `s_c + e^{-iγ} t` down its valley.
#[derive(Debug, Clone, Copy)]
pub struct TimeContour {
    pub turn: f64,
    pub direction: Complex64,
    pub ray_length: f64,
}

impl TimeContour {
    pub fn point(&self, u: f64) -> Complex64 {
        if u <= self.turn {
            Complex64::new(u, 0.0)
        } else {
            Complex64::new(self.turn, 0.0) + self.direction * (u - self.turn)
        }
    }
}

pub fn time_contour(kernel: &Kernel, z: Complex64) -> Result<TimeContour> {
    let f = kernel.f;
    let sq = z.sqrt();
    let turn = 2.0 * sq.re.max(0.0) / f;
    let direction = Complex64::from_polar(1.0, -kernel.settings.gamma);
    let mut peak = f64::NEG_INFINITY;
    let samples = 64;
    for j in 0..=samples {
        let s = Complex64::new(turn * j as f64 / samples as f64, 0.0);
        peak = peak.max(log_envelope(kernel, s, z));
    }
    let start = Complex64::new(turn, 0.0);
    let limit = peak + kernel.settings.envelope_floor.ln();
    if log_envelope(kernel, start, z) < limit && turn > 0.0 {
        // decays along the real axis already; keep a short ray for safety
        let mut t = 1.0;
        while log_envelope(kernel, start + direction * t, z) >= limit {
            t *= 2.0;
        }
        return Ok(TimeContour {
            turn,
            direction,
            ray_length: t,
        });
    }
    let mut t = (1.0 / f).sqrt().max(1.0);
    loop {
        let here = log_envelope(kernel, start + direction * t, z);
        peak = peak.max(here);
        let limit = peak + kernel.settings.envelope_floor.ln();
        if here < limit && log_envelope(kernel, start + direction * (1.5 * t), z) < limit {
            return Ok(TimeContour {
                turn,
                direction,
                ray_length: t,
            });
        }
        t *= 1.5;
        if turn + t > kernel.settings.max_time {
            return Err(Error::EnvelopeNoDecay { z, t_max: turn + t });
        }
    }
}

/// `i ∫_contour e^{izs} m(s) ds` for `f > 0`, entire in `z`.
pub fn stark_integral(kernel: &Kernel, z: Complex64) -> Result<Complex64> {
    if kernel.density.is_zero() {
        return Ok(ZERO);
    }
    let contour = time_contour(kernel, z)?;
    let q = &kernel.settings.quadrature;
    let mut total = ZERO;
    if contour.turn > 0.0 {
        let panels = (contour.turn * (z.norm() + 1.0) / 3.0).ceil() as usize + 4;
        let seg = integrate(
            |t| time_integrand(kernel, Complex64::new(t, 0.0), z),
            0.0,
            contour.turn,
            panels,
            q,
        )?;
        total += seg.value;
    }
    let start = Complex64::new(contour.turn, 0.0);
    let dir = contour.direction;
    let panels = (contour.ray_length * (kernel.f.sqrt() + 0.1)).ceil() as usize + 8;
    let ray = integrate(
        |t| time_integrand(kernel, start + dir * t, z) * dir,
        0.0,
        contour.ray_length,
        panels,
        q,
    )?;
    total += ray.value;
    let value = I * total;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::NonFinite { z });
    }
    Ok(value)
}

/// Continued matrix element and `F` for a fixed coupling and field.
#[derive(Clone)]
pub struct ResolventEvaluator {
    kernel: Kernel,
    method: Arc<dyn ContinuationMethod>,
}

impl std::fmt::Debug for ResolventEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolventEvaluator")
            .field("f", &self.kernel.f)
            .field("method", &self.method.name())
            .finish()
    }
}

impl ResolventEvaluator {
    pub fn new(phi: &FormFactor, f: f64, settings: ResolventSettings) -> Result<Self> {
        Self::pair(phi, phi, f, settings)
    }

    /// Evaluator for `(u, R_f(z) v)`.
    pub fn pair(u: &FormFactor, v: &FormFactor, f: f64, settings: ResolventSettings) -> Result<Self> {
        if !(f >= 0.0 && f.is_finite()) {
            return Err(Error::InvalidParameter(format!("field strength {f} must be >= 0")));
        }
        settings.validate(f)?;
        Ok(Self {
            kernel: Kernel::new(u, v, f, settings),
            method: Arc::new(Auto),
        })
    }

    pub fn with_method(mut self, method: Arc<dyn ContinuationMethod>) -> Result<Self> {
        if !method.supports(self.kernel.f) {
            return Err(Error::InvalidParameter(format!(
                "method '{}' does not support f = {}",
                method.name(),
                self.kernel.f
            )));
        }
        self.method = method;
        Ok(self)
    }

    pub fn method_name(&self) -> &'static str {
        self.method.name()
    }

    pub fn field(&self) -> f64 {
        self.kernel.f
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn settings(&self) -> &ResolventSettings {
        &self.kernel.settings
    }

    fn check_cut(&self, z: Complex64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { z });
        }
        if self.kernel.f == 0.0 {
            let eps = self.kernel.settings.cut_epsilon;
            if z.norm() <= 1e-12 || (z.re < 0.0 && z.im.abs() <= eps * z.norm()) {
                return Err(Error::BranchCut { z });
            }
        }
        Ok(())
    }

    /// Upper half-plane element (the resolvent proper).
    pub fn matrix_element(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::NotUpperHalfPlane { z });
        }
        self.continued(z)
    }

    /// Element continued from the upper half-plane to `z`.
    pub fn continued(&self, z: Complex64) -> Result<Complex64> {
        self.check_cut(z)?;
        self.method.evaluate(&self.kernel, z)
    }

    pub fn f_value(&self, z: Complex64) -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0) - z - self.continued(z)?)
    }

    pub fn f_derivative(&self, z: Complex64) -> Result<Complex64> {
        if self.kernel.density.is_zero() {
            self.check_cut(z)?;
            return Ok(Complex64::new(-1.0, 0.0));
        }
        let s = &self.kernel.settings;
        let mut rho = s.derivative_radius;
        if self.kernel.f == 0.0 {
            rho = rho.min(0.25 * cut_distance(z));
        }
        cauchy_derivative(|w| self.f_value(w), z, rho, s.derivative_nodes)
    }

    /// Samples of the time integrand along the contour used at `z`, as
    /// `(s, e^{izs} m(s))` pairs; empty for `f = 0`.
    pub fn integrand_samples(&self, z: Complex64, count: usize) -> Result<Vec<(Complex64, Complex64)>> {
        if self.kernel.f == 0.0 || count == 0 {
            return Ok(Vec::new());
        }
        let c = time_contour(&self.kernel, z)?;
        let total = c.turn + c.ray_length;
        Ok((0..count)
            .map(|j| {
                let s = c.point(total * j as f64 / (count.max(2) - 1) as f64);
                (s, time_integrand(&self.kernel, s, z))
            })
            .collect())
    }
}

impl Analytic for ResolventEvaluator {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        self.f_value(z)
    }

    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.f_derivative(z)
    }

    fn field(&self) -> f64 {
        self.kernel.f
    }
}

/// Distance from `z` to the cut `(-inf, 0]`.
pub fn cut_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.norm()
    } else {
        z.im.abs()
    }
}

/// `g'(z)` from `nodes` trapezoid samples of the Cauchy integral on radius `rho`.
pub fn cauchy_derivative<G>(g: G, z: Complex64, rho: f64, nodes: usize) -> Result<Complex64>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut acc = ZERO;
    for j in 0..nodes {
        let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / nodes as f64);
        acc += g(z + e * rho)? / e;
    }
    Ok(acc / (rho * nodes as f64))
}

/// Outcome of the dominance test `max |r| < min |1 - z|` on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UniquenessCertificate {
    /// Dominance holds with margin; exactly one zero inside.
    Unique,
    /// Dominance fails at a sampled point.
    Fails,
    /// Sample spacing too coarse to decide.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertificateReport {
    pub result: UniquenessCertificate,
    pub max_element: f64,
    pub min_dominant: f64,
    pub lipschitz_pad: f64,
    pub samples: usize,
}

/// Rouché test on `|z - center| = radius`: `Unique` when the sampled maximum of
/// `|r|` plus a Lipschitz pad for unsampled arcs stays below `min |1 - z|`.
pub fn certify_unique(
    eval: &ResolventEvaluator,
    center: Complex64,
    radius: f64,
    samples: usize,
) -> Result<CertificateReport> {
    if !(radius > 0.0) || samples < 8 {
        return Err(Error::InvalidParameter("certificate circle needs radius > 0 and 8+ samples".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let points: Vec<Complex64> = (0..samples)
        .map(|j| center + Complex64::from_polar(radius, 2.0 * PI * j as f64 / samples as f64))
        .collect();
    let mut values = Vec::with_capacity(samples);
    for &z in &points {
        values.push(eval.continued(z)?);
    }
    let arc = 2.0 * PI * radius / samples as f64;
    let mut max_element: f64 = 0.0;
    let mut slope: f64 = 0.0;
    let mut min_dominant = f64::INFINITY;
    for j in 0..samples {
        let next = (j + 1) % samples;
        max_element = max_element.max(values[j].norm());
        slope = slope.max((values[next] - values[j]).norm() / arc);
        min_dominant = min_dominant.min((one - points[j]).norm());
    }
    // |1 - z| on the circle is bounded below exactly by | |center - 1| - radius |
    min_dominant = min_dominant.min(((center - one).norm() - radius).abs());
    let pad = 2.0 * slope * arc;
    let result = if max_element >= min_dominant {
        UniquenessCertificate::Fails
    } else if max_element + pad < min_dominant {
        UniquenessCertificate::Unique
    } else {
        UniquenessCertificate::Indeterminate
    };
    Ok(CertificateReport {
        result,
        max_element,
        min_dominant,
        lipschitz_pad: pad,
        samples,
    })
}

#[cfg(test)]
mod tests;
