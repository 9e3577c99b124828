//! Coupling functions built from polynomial-times-Gaussian terms.
//!
//! A [`FormFactor`] is a finite sum of terms
//! `c * u^n * exp(-w u^2 / 2 + b u)` with `Re w > 0`. The family is closed
//! under the Fourier transform, translation, modulation, dilation, products,
//! and the analytic conjugation `g(u) -> conj(g(conj u))`, so every operation
//! here acts on the term list and returns exact representations.
//!
//! The same type is used for position-space couplings `phi(x)` and for their
//! transforms `phi^(k)`; which variable a value lives in is up to the caller.
//! The transform convention is `phi^(k) = (2 pi)^(-1/2) * int e^{-ikx} phi(x) dx`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Exponent above which evaluations switch to log-magnitude form.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

/// One term `coeff * u^degree * exp(-width u^2 / 2 + linear u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: Complex64,
    pub degree: u32,
    pub width: Complex64,
    pub linear: Complex64,
}

impl Term {
    pub fn new(coeff: Complex64, degree: u32, width: Complex64) -> Self {
        Self {
            coeff,
            degree,
            width,
            linear: ZERO,
        }
    }

    fn exponent(&self, u: Complex64) -> Complex64 {
        -self.width * u * u * 0.5 + self.linear * u
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        self.coeff * u.powu(self.degree) * self.exponent(u).exp()
    }

    /// `ln|value|` upper estimate used by the overflow guard.
    fn log_magnitude(&self, u: Complex64) -> f64 {
        let poly = if self.degree == 0 {
            0.0
        } else {
            self.degree as f64 * u.norm().max(f64::MIN_POSITIVE).ln()
        };
        self.coeff.norm().max(f64::MIN_POSITIVE).ln() + poly + self.exponent(u).re
    }
}

/// Serialized record of a [`Term`] as written into run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub re_coeff: f64,
    pub im_coeff: f64,
    pub degree: u32,
    pub re_width: f64,
    pub im_width: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub re_linear: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub im_linear: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl From<&Term> for TermRecord {
    fn from(t: &Term) -> Self {
        Self {
            re_coeff: t.coeff.re,
            im_coeff: t.coeff.im,
            degree: t.degree,
            re_width: t.width.re,
            im_width: t.width.im,
            re_linear: t.linear.re,
            im_linear: t.linear.im,
        }
    }
}

impl From<TermRecord> for Term {
    fn from(r: TermRecord) -> Self {
        Self {
            coeff: Complex64::new(r.re_coeff, r.im_coeff),
            degree: r.degree,
            width: Complex64::new(r.re_width, r.im_width),
            linear: Complex64::new(r.re_linear, r.im_linear),
        }
    }
}

/// Evaluation result that stays finite beyond double-precision range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumValue {
    Raw(Complex64),
    /// `exp(log_abs) * exp(i arg)`.
    Scaled { log_abs: f64, arg: f64 },
}

impl MomentumValue {
    pub fn to_complex(self) -> Complex64 {
        match self {
            MomentumValue::Raw(v) => v,
            MomentumValue::Scaled { log_abs, arg } => Complex64::from_polar(log_abs.exp(), arg),
        }
    }

    pub fn log_abs(self) -> f64 {
        match self {
            MomentumValue::Raw(v) => v.norm().ln(),
            MomentumValue::Scaled { log_abs, .. } => log_abs,
        }
    }

    pub fn is_scaled(self) -> bool {
        matches!(self, MomentumValue::Scaled { .. })
    }
}

/// Complex dilation angle for `(U(theta) psi)(x) = e^{theta/2} psi(e^theta x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationParameter {
    theta: Complex64,
}

impl DilationParameter {
    /// Rejects `|Im theta| >= cap`.
    pub fn new(theta: Complex64, cap: f64) -> Result<Self> {
        if !(theta.re.is_finite() && theta.im.is_finite()) || theta.im.abs() >= cap {
            return Err(Error::InvalidParameter(format!(
                "dilation angle {theta} outside |Im theta| < {cap}"
            )));
        }
        Ok(Self { theta })
    }

    /// Purely imaginary angle `i * im_theta`, capped below pi/2.
    pub fn imaginary(im_theta: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, im_theta), std::f64::consts::FRAC_PI_2)
    }

    pub fn theta(&self) -> Complex64 {
        self.theta
    }

    pub fn conj(&self) -> Self {
        Self {
            theta: self.theta.conj(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormFactor {
    terms: Vec<Term>,
}

impl FormFactor {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !(t.width.re > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "form-factor width must have positive real part, got {}",
                    t.width
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `amp * exp(-width x^2 / 2)`.
    pub fn gaussian(amp: f64, width: f64) -> Result<Self> {
        Self::new(vec![Term::new(
            Complex64::new(amp, 0.0),
            0,
            Complex64::new(width, 0.0),
        )])
    }

    pub fn from_records(records: &[TermRecord]) -> Result<Self> {
        Self::new(records.iter().copied().map(Term::from).collect())
    }

    pub fn records(&self) -> Vec<TermRecord> {
        self.terms.iter().map(TermRecord::from).collect()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == ZERO)
    }

    pub fn max_width(&self) -> f64 {
        self.terms.iter().map(|t| t.width.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(u)).sum()
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    /// Evaluates with the overflow guard: large exponents come back in
    /// log-magnitude form instead of overflowing.
    pub fn eval_guarded(&self, u: Complex64) -> MomentumValue {
        let trigger = u.im * u.im * self.max_width() * 0.5 > OVERFLOW_EXPONENT;
        let logs: Vec<f64> = self.terms.iter().map(|t| t.log_magnitude(u)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !trigger && peak <= OVERFLOW_EXPONENT {
            return MomentumValue::Raw(self.eval(u));
        }
        // shift every exponent by the peak before summing
        let shifted: Complex64 = self
            .terms
            .iter()
            .map(|t| {
                let ln = t.coeff.ln() + u.ln() * t.degree as f64 + t.exponent(u);
                (ln - peak).exp()
            })
            .sum();
        if shifted == ZERO {
            return MomentumValue::Raw(ZERO);
        }
        MomentumValue::Scaled {
            log_abs: peak + shifted.norm().ln(),
            arg: shifted.arg(),
        }
    }

    /// Value of the entire extension of the Fourier transform at complex `k`.
    pub fn eval_momentum(&self, k: Complex64) -> MomentumValue {
        self.fourier_transform().eval_guarded(k)
    }

    pub fn fourier_transform(&self) -> FormFactor {
        let mut out = Vec::new();
        for t in &self.terms {
            // base transform: w^{-1/2} exp(b^2/(2w)) exp(-k^2/(2w) - i b k / w)
            let inv_w = t.width.inv();
            let scale = t.coeff * t.width.sqrt().inv() * (t.linear * t.linear * inv_w * 0.5).exp();
            let new_width = inv_w;
            let new_linear = -I * t.linear * inv_w;
            // (i d/dk)^n of exp(Q) = i^n P_n(k) exp(Q), Q' = -k/w - i b/w
            let q0 = new_linear;
            let q1 = -inv_w;
            let mut poly = vec![ONE];
            for _ in 0..t.degree {
                let mut next = vec![ZERO; poly.len() + 1];
                for (j, &p) in poly.iter().enumerate() {
                    if j > 0 {
                        next[j - 1] += p * j as f64;
                    }
                    next[j] += p * q0;
                    next[j + 1] += p * q1;
                }
                poly = next;
            }
            let phase = I.powu(t.degree);
            for (j, p) in poly.into_iter().enumerate() {
                if p != ZERO {
                    out.push(Term {
                        coeff: scale * phase * p,
                        degree: j as u32,
                        width: new_width,
                        linear: new_linear,
                    });
                }
            }
        }
        FormFactor { terms: out }.simplified()
    }

    /// Position-space reflection `x -> conj(phi(-x))`; its transform is
    /// `k -> conj(phi^(conj k))`.
    pub fn conj_reflect(&self) -> FormFactor {
        FormFactor {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: if t.degree % 2 == 0 { t.coeff.conj() } else { -t.coeff.conj() },
                    degree: t.degree,
                    width: t.width.conj(),
                    linear: -t.linear.conj(),
                })
                .collect(),
        }
    }

    /// Analytic conjugate `u -> conj(g(conj u))`, i.e. conjugated parameters.
    pub fn conj_analytic(&self) -> FormFactor {
        FormFactor {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff.conj(),
                    degree: t.degree,
                    width: t.width.conj(),
                    linear: t.linear.conj(),
                })
                .collect(),
        }
    }

    pub fn product(&self, other: &FormFactor) -> FormFactor {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push(Term {
                    coeff: a.coeff * b.coeff,
                    degree: a.degree + b.degree,
                    width: a.width + b.width,
                    linear: a.linear + b.linear,
                });
            }
        }
        FormFactor { terms: out }.simplified()
    }

    pub fn scaled(&self, factor: Complex64) -> FormFactor {
        FormFactor {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn sum(&self, other: &FormFactor) -> FormFactor {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        FormFactor { terms }.simplified()
    }

    /// `x -> e^{ic} e^{ib(x+a)} phi(x+a)`, i.e. `e^{iap} e^{ibx}` applied to
    /// `phi` with an extra constant phase.
    pub fn translate_modulate(&self, a: f64, b: f64, c: f64) -> FormFactor {
        let mut out = Vec::new();
        let ib = Complex64::new(0.0, b);
        for t in &self.terms {
            let front = t.coeff
                * (Complex64::new(0.0, c) - t.width * a * a * 0.5 + t.linear * a + ib * a).exp();
            let linear = t.linear - t.width * a + ib;
            // (x + a)^n expanded binomially
            let mut binom = 1.0;
            for j in 0..=t.degree {
                if j > 0 {
                    binom = binom * (t.degree - j + 1) as f64 / j as f64;
                }
                let coeff = front * binom * a.powi((t.degree - j) as i32);
                if coeff != ZERO {
                    out.push(Term {
                        coeff,
                        degree: j,
                        width: t.width,
                        linear,
                    });
                }
            }
        }
        FormFactor { terms: out }.simplified()
    }

    /// `(U(theta) phi)(x) = e^{theta/2} phi(e^theta x)`.
    pub fn dilate(&self, theta: DilationParameter) -> Result<FormFactor> {
        let th = theta.theta();
        let e = th.exp();
        let mut out = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let width = t.width * e * e;
            if !(width.re > 0.0) {
                return Err(Error::NonIntegrableWidth { width });
            }
            out.push(Term {
                coeff: t.coeff * (th * 0.5 + th * t.degree as f64).exp(),
                degree: t.degree,
                width,
                linear: t.linear * e,
            });
        }
        Ok(FormFactor { terms: out })
    }

    /// `(self, other) = int conj(self(x)) other(x) dx` over the real line.
    pub fn inner(&self, other: &FormFactor) -> Complex64 {
        let mut total = ZERO;
        for a in &self.terms {
            for b in &other.terms {
                let w = a.width.conj() + b.width;
                let lin = a.linear.conj() + b.linear;
                let m = GaussMoments::new(w, lin, (a.degree + b.degree) as usize);
                total += a.coeff.conj() * b.coeff * m.integral(a.degree as usize + b.degree as usize);
            }
        }
        total
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).re
    }

    /// Merges terms with identical exponent data and drops zero coefficients.
    pub fn simplified(mut self) -> FormFactor {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if let Some(existing) = out
                .iter_mut()
                .find(|e| e.degree == t.degree && e.width == t.width && e.linear == t.linear)
            {
                existing.coeff += t.coeff;
            } else {
                out.push(t);
            }
        }
        out.retain(|t| t.coeff != ZERO);
        FormFactor { terms: out }
    }
}

/// Moments `int x^m exp(-w x^2/2 + b x) dx` for `Re w > 0`, kept as
/// `exp(log_scale) * raw_moment(m)` of the normal law `N(b/w, 1/w)`.
#[derive(Debug, Clone)]
pub struct GaussMoments {
    pub log_scale: Complex64,
    raw: Vec<Complex64>,
}

impl GaussMoments {
    pub fn new(w: Complex64, b: Complex64, max_order: usize) -> Self {
        let inv = w.inv();
        let mean = b * inv;
        let log_scale = Complex64::new(0.5 * (2.0 * std::f64::consts::PI).ln(), 0.0) - w.ln() * 0.5
            + b * b * inv * 0.5;
        let mut raw = Vec::with_capacity(max_order + 1);
        raw.push(ONE);
        if max_order >= 1 {
            raw.push(mean);
        }
        for m in 2..=max_order {
            let v = mean * raw[m - 1] + inv * (m - 1) as f64 * raw[m - 2];
            raw.push(v);
        }
        Self { log_scale, raw }
    }

    pub fn raw_moment(&self, m: usize) -> Complex64 {
        self.raw[m]
    }

    pub fn integral(&self, m: usize) -> Complex64 {
        self.log_scale.exp() * self.raw[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureSettings};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reference() -> FormFactor {
        FormFactor::gaussian(0.1, 1.0).unwrap()
    }

    fn tight() -> QuadratureSettings {
        QuadratureSettings {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_subdivisions: 4000,
        }
    }

    fn quad_transform(phi: &FormFactor, k: f64) -> Complex64 {
        let r = integrate(
            |x| (c(0.0, -k * x)).exp() * phi.eval_real(x),
            -40.0,
            40.0,
            64,
            &tight(),
        )
        .unwrap();
        r.value / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn gaussian_is_self_dual() {
        let ft = reference().fourier_transform();
        assert_eq!(ft.terms().len(), 1);
        let t = ft.terms()[0];
        assert!((t.coeff - c(0.1, 0.0)).norm() < 1e-15);
        assert!((t.width - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(t.degree, 0);
    }

    #[test]
    fn zero_transforms_to_zero() {
        assert!(FormFactor::zero().fourier_transform().is_zero());
    }

    #[test]
    fn first_moment_transform_matches_quadrature() {
        let phi = FormFactor::new(vec![Term::new(c(1.0, 0.0), 1, c(1.0, 0.0))]).unwrap();
        let ft = phi.fourier_transform();
        for i in 0..10 {
            let k = -3.0 + 0.7 * i as f64;
            let exact = c(0.0, -k) * (-k * k / 2.0).exp();
            assert!((ft.eval(c(k, 0.0)) - exact).norm() < 1e-14);
            assert!((quad_transform(&phi, k) - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_polynomial_transform_matches_quadrature() {
        let phi = FormFactor::new(vec![
            Term {
                coeff: c(0.3, -0.2),
                degree: 3,
                width: c(1.5, 0.4),
                linear: c(0.2, 0.5),
            },
            Term::new(c(-0.1, 0.0), 2, c(0.7, 0.0)),
        ])
        .unwrap();
        let ft = phi.fourier_transform();
        for i in 0..10 {
            let k = -2.5 + 0.55 * i as f64;
            let q = quad_transform(&phi, k);
            assert!((ft.eval(c(k, 0.0)) - q).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn momentum_values_at_complex_points() {
        let phi = reference();
        assert!((phi.eval_momentum(c(0.0, 0.0)).to_complex() - c(0.1, 0.0)).norm() < 1e-16);
        let at_i = phi.eval_momentum(c(0.0, 1.0)).to_complex();
        assert!((at_i - c(0.1 * 0.5f64.exp(), 0.0)).norm() < 1e-15);
        let k = c(1.0, 1.0);
        let direct = 0.1 * (-k * k / 2.0).exp();
        assert!((phi.eval_momentum(k).to_complex() - direct).norm() < 1e-15);
    }

    #[test]
    fn overflow_guard_switches_to_log_form() {
        let phi = reference();
        let k = c(0.0, 40.0);
        let v = phi.eval_momentum(k);
        assert!(v.is_scaled());
        assert!((v.log_abs() - (0.1f64.ln() + 800.0)).abs() < 1e-10);
        assert!(!phi.eval_momentum(c(3.0, 1.0)).is_scaled());
    }

    #[test]
    fn double_transform_is_parity() {
        let phi = FormFactor::new(vec![Term {
            coeff: c(0.5, 0.1),
            degree: 1,
            width: c(2.0, 0.0),
            linear: c(0.3, 0.0),
        }])
        .unwrap();
        let twice = phi.fourier_transform().fourier_transform();
        for x in [-1.3, -0.2, 0.4, 2.0] {
            let a = twice.eval(c(x, 0.0));
            let b = phi.eval(c(-x, 0.0));
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn conj_reflect_cases() {
        let phi = reference();
        assert_eq!(phi.conj_reflect(), phi);
        let ip = FormFactor::new(vec![Term::new(c(0.0, 1.0), 0, c(1.0, 0.0))]).unwrap();
        let r = ip.conj_reflect().fourier_transform();
        assert!((r.terms()[0].coeff - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn translation_keeps_norm() {
        let phi = reference();
        let moved = phi.translate_modulate(1.0, 0.0, 0.0);
        let x = 0.37;
        let expect = 0.1 * (-(x + 1.0) * (x + 1.0) / 2.0f64).exp();
        assert!((moved.eval_real(x) - c(expect, 0.0)).norm() < 1e-15);
        assert!((moved.norm_sq() - std::f64::consts::PI.sqrt() / 100.0).abs() < 1e-15);
        assert_eq!(phi.translate_modulate(0.0, 0.0, 0.0), phi);
    }

    #[test]
    fn norm_matches_quadrature() {
        let phi = FormFactor::new(vec![
            Term::new(c(0.2, 0.1), 2, c(1.2, 0.3)),
            Term {
                coeff: c(-0.4, 0.0),
                degree: 1,
                width: c(0.8, -0.2),
                linear: c(0.1, 0.4),
            },
        ])
        .unwrap();
        let q = integrate(|x| c(phi.eval_real(x).norm_sqr(), 0.0), -40.0, 40.0, 64, &tight())
            .unwrap()
            .value
            .re;
        assert!((phi.norm_sq() - q).abs() < 1e-12);
    }

    #[test]
    fn dilation_by_imaginary_angle() {
        let theta = DilationParameter::imaginary(0.3).unwrap();
        let d = reference().dilate(theta).unwrap();
        let t = d.terms()[0];
        assert!((t.width - c(0.0, 0.6).exp()).norm() < 1e-15);
        assert!((t.coeff - c(0.0, 0.15).exp() * 0.1).norm() < 1e-15);
        // int U(theta)phi(x)^2 dx is analytic in theta and equals its value at theta = 0
        // times e^{-theta}: int e^{theta} phi(e^theta x)^2 dx = int phi(y)^2 dy.
        let analytic = FormFactor::new(vec![Term::new(t.coeff * t.coeff, 0, t.width * 2.0)])
            .unwrap();
        let integral = integrate(|x| analytic.eval_real(x), -30.0, 30.0, 64, &tight()).unwrap().value;
        assert!((integral - c(std::f64::consts::PI.sqrt() / 100.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn dilation_rejects_non_integrable_widths() {
        let theta = DilationParameter::new(c(0.0, 0.8), 1.0).unwrap();
        assert!(matches!(
            reference().dilate(theta),
            Err(Error::NonIntegrableWidth { .. })
        ));
        assert!(DilationParameter::new(c(0.0, 0.5), 0.4).is_err());
    }

    #[test]
    fn real_dilation_is_unitary() {
        let theta = DilationParameter::new(c(0.4, 0.0), 1.0).unwrap();
        let phi = FormFactor::new(vec![Term::new(c(0.3, 0.2), 2, c(1.1, 0.0))]).unwrap();
        assert!((phi.dilate(theta).unwrap().norm_sq() - phi.norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn records_round_trip() {
        let phi = FormFactor::new(vec![Term {
            coeff: c(0.1, 0.2),
            degree: 2,
            width: c(1.0, 0.5),
            linear: c(0.0, -1.0),
        }])
        .unwrap();
        assert_eq!(FormFactor::from_records(&phi.records()).unwrap(), phi);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn term() -> impl Strategy<Value = Term> {
            (
                -1.0..1.0f64,
                -1.0..1.0f64,
                0u32..4,
                0.3..2.5f64,
                -0.5..0.5f64,
                -0.5..0.5f64,
                -0.5..0.5f64,
            )
                .prop_map(|(cr, ci, n, wr, wi, lr, li)| Term {
                    coeff: c(cr, ci),
                    degree: n,
                    width: c(wr, wi),
                    linear: c(lr, li),
                })
        }

        fn factor() -> impl Strategy<Value = FormFactor> {
            proptest::collection::vec(term(), 1..4).prop_map(|t| FormFactor::new(t).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn group_law(phi in factor(), a in -0.3..0.3f64, b in -0.3..0.3f64, p in -0.4..0.4f64, q in -0.4..0.4f64) {
                let t1 = DilationParameter::new(c(a, p * 0.5), 1.0).unwrap();
                let t2 = DilationParameter::new(c(b, q * 0.5), 1.0).unwrap();
                let t12 = DilationParameter::new(c(a + b, (p + q) * 0.5), 1.0).unwrap();
                let (Ok(l1), Ok(r)) = (phi.dilate(t1), phi.dilate(t12)) else { return Ok(()); };
                let Ok(l) = l1.dilate(t2) else { return Ok(()); };
                for (x, y) in l.terms().iter().zip(r.terms()) {
                    let scale = y.coeff.norm().max(1e-300);
                    prop_assert!((x.coeff - y.coeff).norm() <= 1e-14 * scale.max(1.0));
                    prop_assert!((x.width - y.width).norm() <= 1e-14 * y.width.norm());
                    prop_assert!((x.linear - y.linear).norm() <= 1e-14 * y.linear.norm().max(1.0));
                }
            }

            #[test]
            fn plancherel(phi in factor()) {
                let n = phi.norm_sq();
                prop_assert!((n - phi.fourier_transform().norm_sq()).abs() <= 1e-12 * n.max(1.0));
            }

            #[test]
            fn conj_reflect_identity(phi in factor(), kr in -3.0..3.0f64, ki in -2.0..2.0f64) {
                let k = c(kr, ki);
                let lhs = phi.conj_reflect().eval_momentum(k).to_complex();
                let rhs = phi.eval_momentum(k.conj()).to_complex().conj();
                prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
                prop_assert_eq!(phi.conj_reflect().conj_reflect(), phi);
            }

            #[test]
            fn translate_modulate_is_unitary(phi in factor(), a in -2.0..2.0f64, b in -2.0..2.0f64, ph in -3.0..3.0f64) {
                let n = phi.norm_sq();
                let m = phi.translate_modulate(a, b, ph).norm_sq();
                prop_assert!((n - m).abs() <= 1e-12 * n.max(1.0));
            }
        }
    }
}
