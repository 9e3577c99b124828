//! Brute-force cross-checks behind the `verify` subcommand.

use num_complex::Complex64;
use serde::Serialize;
use starkres_core::oracle::{
    erfc_closed_form, full_resolvent_pole_test, gauss_legendre, grid_scan, ode_resolvent_oracle,
    taylor_continuation_oracle, TaylorSettings, TestVector,
};
use starkres_core::resolvent::{certify_unique, UniquenessCertificate};
use starkres_core::rootfind::Analytic;
use starkres_core::{find_zeros, Error, FormFactor, ResolventEvaluator, Result, Term, Window};

use crate::config::Parameters;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub points: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the check does not apply to the configured form factor.
    pub skipped: Option<String>,
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &Context) -> Result<Outcome>;
}

pub enum Outcome {
    Measured { points: usize, deviation: f64, tolerance: f64 },
    Skipped(String),
}

pub struct Context {
    pub params: Parameters,
    pub phi: FormFactor,
}

impl Context {
    fn evaluator(&self, f: f64) -> Result<ResolventEvaluator> {
        ResolventEvaluator::new(&self.phi, f, self.params.resolvent)
    }

    fn phi_hat(&self) -> impl Fn(f64) -> Complex64 + '_ {
        let (a, w) = (self.params.phi.amp, self.params.phi.width);
        move |k| Complex64::new(a / w.sqrt() * (-k * k / (2.0 * w)).exp(), 0.0)
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct OdeOracle;

impl Check for OdeOracle {
    fn name(&self) -> &'static str {
        "ode-oracle"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let mut dev: f64 = 0.0;
        let mut n = 0;
        for f in [0.01, 0.05] {
            let e = ctx.evaluator(f)?;
            for i in 0..10 {
                let z = c(0.4 + 0.15 * i as f64, 0.05 + 0.04 * i as f64);
                let a = e.matrix_element(z)?;
                let b = ode_resolvent_oracle(ctx.phi_hat(), f, z, 9.0)?;
                dev = dev.max((a - b).norm());
                n += 1;
            }
        }
        Ok(Outcome::Measured {
            points: n,
            deviation: dev,
            tolerance: 1e-8,
        })
    }
}

struct ClosedForm;

impl Check for ClosedForm {
    fn name(&self) -> &'static str {
        "faddeeva-closed-form"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        if ctx.params.phi.width != 1.0 {
            return Ok(Outcome::Skipped("closed form needs phi.width = 1".into()));
        }
        let e = ctx.evaluator(0.0)?;
        let mut dev: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                let z = c(0.55 + 0.1 * i as f64, -0.09 + 0.02 * j as f64);
                dev = dev.max((e.f_value(z)? - erfc_closed_form(ctx.params.phi.amp, z)?).norm());
            }
        }
        Ok(Outcome::Measured {
            points: 100,
            deviation: dev,
            tolerance: 1e-10,
        })
    }
}

struct TaylorStepping;

impl Check for TaylorStepping {
    fn name(&self) -> &'static str {
        "taylor-continuation"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let e = ctx.evaluator(0.0)?;
        let path = [c(1.0, 0.3), c(1.0, -0.1)];
        let stepped = taylor_continuation_oracle(&e, &path, &TaylorSettings::default())?;
        Ok(Outcome::Measured {
            points: 1,
            deviation: (stepped - e.f_value(path[1])?).norm(),
            tolerance: 1e-8,
        })
    }
}

struct Morera;

impl Check for Morera {
    fn name(&self) -> &'static str {
        "morera"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let e = ctx.evaluator(0.01)?;
        let center = c(1.0, -0.05);
        let h = 0.1;
        let corners = [center + c(-h, -h), center + c(h, -h), center + c(h, h), center + c(-h, h)];
        let (x, wts) = gauss_legendre(24);
        let panels = 16;
        let mut total = c(0.0, 0.0);
        let mut peak: f64 = 0.0;
        for s in 0..4 {
            let (a, b) = (corners[s], corners[(s + 1) % 4]);
            for p in 0..panels {
                let pa = a + (b - a) * (p as f64 / panels as f64);
                let half = (b - a) * (0.5 / panels as f64);
                for (xi, wi) in x.iter().zip(&wts) {
                    let v = e.value(pa + half * (xi + 1.0))?;
                    peak = peak.max(v.norm());
                    total += v * half * *wi;
                }
            }
        }
        Ok(Outcome::Measured {
            points: 4 * panels * x.len(),
            deviation: total.norm() / peak,
            tolerance: 1e-7,
        })
    }
}

struct ScanAgreement;

fn secant(e: &ResolventEvaluator, start: Complex64, step: f64) -> Option<Complex64> {
    let mut a = start;
    let mut b = start + c(step, 0.3 * step);
    let mut fa = e.value(a).ok()?;
    let mut fb = e.value(b).ok()?;
    for _ in 0..60 {
        if fb == fa {
            break;
        }
        let next = b - fb * (b - a) / (fb - fa);
        a = b;
        fa = fb;
        b = next;
        fb = e.value(b).ok()?;
        if (b - a).norm() < 1e-14 * b.norm() {
            break;
        }
    }
    (fb.norm() < 1e-12).then_some(b)
}

impl Check for ScanAgreement {
    fn name(&self) -> &'static str {
        "grid-scan"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let e = ctx.evaluator(0.01)?;
        let w = Window::new(0.9, 1.1, -0.05, -1e-6)?;
        let found = find_zeros(&e, &w, &ctx.params.root)?;
        let n = 120;
        let mut polished: Vec<Complex64> = Vec::new();
        for cand in grid_scan(&e, &w, n, 0.05)? {
            if let Some(z) = secant(&e, cand.z, w.width() / n as f64) {
                if w.contains(z, 0.0) && polished.iter().all(|p| (p - z).norm() > 1e-8) {
                    polished.push(z);
                }
            }
        }
        let mut dev: f64 = if polished.len() == found.zeros.len() { 0.0 } else { f64::INFINITY };
        for r in &found.zeros {
            let d = polished.iter().map(|p| (p - r.z).norm()).fold(f64::INFINITY, f64::min);
            dev = dev.max(d);
        }
        Ok(Outcome::Measured {
            points: found.zeros.len(),
            deviation: dev,
            tolerance: 1e-8,
        })
    }
}

struct PoleTest;

impl Check for PoleTest {
    fn name(&self) -> &'static str {
        "full-resolvent-pole"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let e = ctx.evaluator(0.0)?;
        let zeros = find_zeros(&e, &ctx.params.dc.window, &ctx.params.root)?.zeros;
        let psi = FormFactor::new(vec![
            Term::new(c(0.3, 0.0), 1, c(1.5, 0.0)),
            Term::new(c(0.2, 0.0), 0, c(0.7, 0.0)),
        ])?;
        let vector = TestVector { psi, c: c(1.0, 0.0) };
        let mut dev: f64 = 0.0;
        for r in &zeros {
            let report = full_resolvent_pole_test(&ctx.phi, 0.0, &vector, r.z, ctx.params.resolvent)?;
            // a failed confirmation counts as an unbounded deviation
            dev = dev.max(if report.pole_confirmed { report.spread } else { f64::INFINITY });
        }
        if zeros.is_empty() {
            return Err(Error::InvalidParameter("no zero in the dc window".into()));
        }
        Ok(Outcome::Measured {
            points: zeros.len(),
            deviation: dev,
            tolerance: 1e-2,
        })
    }
}

struct Rouche;

impl Check for Rouche {
    fn name(&self) -> &'static str {
        "rouche-certificate"
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let e = ctx.evaluator(0.0)?;
        let report = certify_unique(&e, c(1.0, 0.0), 0.1, 256)?;
        let ok = report.result == UniquenessCertificate::Unique;
        Ok(Outcome::Measured {
            points: report.samples,
            deviation: if ok { report.max_element / report.min_dominant } else { f64::INFINITY },
            tolerance: 1.0,
        })
    }
}

pub fn standard_checks() -> Vec<Box<dyn Check>> {
    vec![
        Box::new(OdeOracle),
        Box::new(ClosedForm),
        Box::new(TaylorStepping),
        Box::new(Morera),
        Box::new(ScanAgreement),
        Box::new(PoleTest),
        Box::new(Rouche),
    ]
}

pub fn run_checks(checks: &[Box<dyn Check>], ctx: &Context) -> Vec<CheckReport> {
    checks
        .iter()
        .map(|chk| match chk.run(ctx) {
            Ok(Outcome::Measured {
                points,
                deviation,
                tolerance,
            }) => CheckReport {
                name: chk.name().into(),
                points,
                max_deviation: deviation,
                tolerance,
                passed: deviation < tolerance,
                skipped: None,
            },
            Ok(Outcome::Skipped(why)) => CheckReport {
                name: chk.name().into(),
                points: 0,
                max_deviation: 0.0,
                tolerance: 0.0,
                passed: true,
                skipped: Some(why),
            },
            Err(e) => CheckReport {
                name: chk.name().into(),
                points: 0,
                max_deviation: f64::INFINITY,
                tolerance: 0.0,
                passed: false,
                skipped: Some(format!("error: {e}")),
            },
        })
        .collect()
}
