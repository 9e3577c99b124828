//! Zeros of analytic functions in rectangles: argument-principle counting by
//! continuous phase tracking, bisection into isolating boxes, Newton polish.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resolvent::cauchy_derivative;

/// Something we can find zeros of.
pub trait Analytic: Sync {
    fn value(&self, z: Complex64) -> Result<Complex64>;

    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        cauchy_derivative(|w| self.value(w), z, 1e-4, 32)
    }

    /// Field strength recorded on located zeros.
    fn field(&self) -> f64 {
        0.0
    }
}

/// Wraps a closure returning `F(z)`.
pub struct FnAnalytic<F>(pub F);

impl<F> Analytic for FnAnalytic<F>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    fn value(&self, z: Complex64) -> Result<Complex64> {
        let v = (self.0)(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { z })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let w = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || !(self.re_min < self.re_max) || !(self.im_min < self.im_max) {
            return Err(Error::InvalidParameter(format!("degenerate window {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    /// Counter-clockwise corners starting at the lower left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Splits across the longer side at `fraction` of its length.
    pub fn split(&self, fraction: f64) -> (Window, Window) {
        if self.width() >= self.height() {
            let x = self.re_min + fraction * self.width();
            (
                Window { re_max: x, ..*self },
                Window { re_min: x, ..*self },
            )
        } else {
            let y = self.im_min + fraction * self.height();
            (
                Window { im_max: y, ..*self },
                Window { im_min: y, ..*self },
            )
        }
    }

    /// Window grown by `delta` on every side (shrunk when negative).
    pub fn inflate(&self, delta: f64) -> Window {
        Window {
            re_min: self.re_min - delta,
            re_max: self.re_max + delta,
            im_min: self.im_min - delta,
            im_max: self.im_max + delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSettings {
    /// Required `|F|` at a polished zero.
    pub tol: f64,
    pub max_newton: usize,
    /// Largest accepted phase increment between boundary samples.
    pub max_phase_step: f64,
    /// Largest accepted `|ln|F(b)/F(a)||` between boundary samples.
    pub max_log_ratio: f64,
    /// Shortest boundary segment, relative to the curve's diameter.
    pub min_segment: f64,
    /// `|F|` below this on a boundary sample counts as a zero on the contour.
    pub zero_threshold: f64,
    /// Boxes smaller than this holding several zeros are reported as clusters.
    pub min_box: f64,
    /// Boxes with one zero are bisected down to this diameter before Newton.
    pub coarse_diameter: f64,
    pub merge_radius: f64,
    pub max_depth: usize,
}

impl Default for RootSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            max_phase_step: 0.6,
            max_log_ratio: 2.0,
            min_segment: 1e-11,
            zero_threshold: 1e-14,
            min_box: 1e-7,
            coarse_diameter: 0.05,
            merge_radius: 1e-9,
            max_depth: 48,
        }
    }
}

/// Fixed split positions tried in turn when a split line hits a zero.
const SPLIT_FRACTIONS: [f64; 4] = [0.5, 0.4637, 0.5419, 0.4211];
/// Outward shifts (times the diameter) for retrying a top-level window.
const WINDOW_JITTER: [f64; 3] = [0.0, 1.37e-3, -2.19e-3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub z: Complex64,
    pub f: f64,
    pub residual: f64,
    pub winding: u32,
    pub iterations: usize,
    /// Half-diameter of the isolating box.
    pub cluster_radius: f64,
    pub axis_ambiguous: bool,
    pub trajectory: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFailure {
    pub window: Window,
    pub winding: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSearch {
    /// The window actually searched (after any jitter).
    pub window: Window,
    pub total_winding: i64,
    pub zeros: Vec<Resonance>,
    pub failures: Vec<BoxFailure>,
}

impl ZeroSearch {
    pub fn certified_count(&self) -> i64 {
        self.zeros.iter().map(|r| r.winding as i64).sum()
    }
}

fn principal_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

struct Tracker<'a, A: Analytic + ?Sized> {
    func: &'a A,
    settings: &'a RootSettings,
    min_len: f64,
}

impl<A: Analytic + ?Sized> Tracker<'_, A> {
    fn sample(&self, z: Complex64) -> Result<Complex64> {
        let v = self.func.value(z)?;
        if v.norm() < self.settings.zero_threshold {
            return Err(Error::BoundaryZero { attempts: 0 });
        }
        Ok(v)
    }

    /// Phase change of `F` along `path(t)`, `t` in `[t0, t1]`.
    fn track<P>(&self, path: &P, t0: f64, t1: f64, v0: Complex64, v1: Complex64, len: f64) -> Result<f64>
    where
        P: Fn(f64) -> Complex64,
    {
        let tm = 0.5 * (t0 + t1);
        let vm = self.sample(path(tm))?;
        let whole = principal_step(v0, v1);
        let left = principal_step(v0, vm);
        let right = principal_step(vm, v1);
        let s = self.settings;
        let smooth = left.abs() <= s.max_phase_step
            && right.abs() <= s.max_phase_step
            && (left + right - whole).abs() < 1e-6
            && (v1.norm() / v0.norm()).ln().abs() <= s.max_log_ratio;
        if smooth {
            return Ok(left + right);
        }
        if len * 0.5 < self.min_len {
            return Err(Error::BoundaryZero { attempts: 0 });
        }
        let a = self.track(path, t0, tm, v0, vm, len * 0.5)?;
        let b = self.track(path, tm, t1, vm, v1, len * 0.5)?;
        Ok(a + b)
    }

    fn polygon(&self, vertices: &[Complex64]) -> Result<f64> {
        let values = vertices
            .iter()
            .map(|&z| self.sample(z))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for j in 0..vertices.len() {
            let k = (j + 1) % vertices.len();
            let (a, b) = (vertices[j], vertices[k]);
            let path = |t: f64| a + (b - a) * t;
            total += self.track(&path, 0.0, 1.0, values[j], values[k], (b - a).norm())?;
        }
        Ok(total)
    }

    fn circle(&self, center: Complex64, radius: f64) -> Result<f64> {
        let quarter = |q: usize| {
            move |t: f64| center + Complex64::from_polar(radius, 0.5 * PI * (q as f64 + t))
        };
        let mut total = 0.0;
        for q in 0..4 {
            let path = quarter(q);
            let v0 = self.sample(path(0.0))?;
            let v1 = self.sample(path(1.0))?;
            total += self.track(&path, 0.0, 1.0, v0, v1, 0.5 * PI * radius)?;
        }
        Ok(total)
    }
}

fn to_winding(total: f64) -> Result<i64> {
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.05 {
        return Err(Error::BoundaryZero { attempts: 0 });
    }
    Ok(n as i64)
}

fn raw_winding<A: Analytic + ?Sized>(func: &A, w: &Window, settings: &RootSettings) -> Result<i64> {
    let tracker = Tracker {
        func,
        settings,
        min_len: settings.min_segment * w.diameter(),
    };
    to_winding(tracker.polygon(&w.corners())?)
}

/// Number of zeros inside `w`, retried on deterministically jittered windows
/// if a zero seems to sit on the boundary. Returns the window actually used.
pub fn winding_number_jittered<A: Analytic + ?Sized>(
    func: &A,
    w: &Window,
    settings: &RootSettings,
) -> Result<(i64, Window)> {
    w.validate()?;
    for (attempt, jitter) in WINDOW_JITTER.iter().enumerate() {
        let trial = w.inflate(jitter * w.diameter());
        match raw_winding(func, &trial, settings) {
            Ok(n) => return Ok((n, trial)),
            Err(Error::BoundaryZero { .. }) if attempt + 1 < WINDOW_JITTER.len() => continue,
            Err(Error::BoundaryZero { .. }) => {
                return Err(Error::BoundaryZero {
                    attempts: WINDOW_JITTER.len(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("jitter loop always returns")
}

pub fn winding_number<A: Analytic + ?Sized>(func: &A, w: &Window, settings: &RootSettings) -> Result<i64> {
    winding_number_jittered(func, w, settings).map(|(n, _)| n)
}

/// Winding of `F` on the circle `|z - z0| = rho`.
pub fn multiplicity_estimate<A: Analytic + ?Sized>(
    func: &A,
    z0: Complex64,
    rho: f64,
    settings: &RootSettings,
) -> Result<i64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter("circle radius must be positive".into()));
    }
    let tracker = Tracker {
        func,
        settings,
        min_len: settings.min_segment * 2.0 * rho,
    };
    to_winding(tracker.circle(z0, rho)?)
}

/// Newton iteration from `start`; returns `(z, residual, iterations)`.
pub fn newton<A: Analytic + ?Sized>(
    func: &A,
    start: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, f64, usize)> {
    let mut z = start;
    let mut v = func.value(z)?;
    let mut best = (z, v.norm());
    for it in 0..max_iter {
        if v.norm() < tol {
            // one extra step settles the last digits
            let d = func.derivative(z)?;
            let z2 = z - v / d;
            let v2 = func.value(z2)?;
            if v2.norm() <= v.norm() {
                return Ok((z2, v2.norm(), it + 1));
            }
            return Ok((z, v.norm(), it));
        }
        let d = func.derivative(z)?;
        if d.norm() == 0.0 || !(d.re.is_finite() && d.im.is_finite()) {
            break;
        }
        let step = v / d;
        z -= step;
        v = func.value(z)?;
        if v.norm() < best.1 {
            best = (z, v.norm());
        }
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    if best.1 < tol {
        Ok((best.0, best.1, max_iter))
    } else {
        Err(Error::Stagnation { residual: best.1 })
    }
}

struct Search<'a, A: Analytic + ?Sized> {
    func: &'a A,
    settings: &'a RootSettings,
}

#[derive(Default)]
struct Found {
    zeros: Vec<Resonance>,
    failures: Vec<BoxFailure>,
}

impl Found {
    fn merge(mut self, other: Found) -> Found {
        self.zeros.extend(other.zeros);
        self.failures.extend(other.failures);
        self
    }
}

impl<A: Analytic + ?Sized> Search<'_, A> {
    fn resonance(&self, z: Complex64, residual: f64, winding: u32, iterations: usize, w: &Window) -> Resonance {
        Resonance {
            z,
            f: self.func.field(),
            residual,
            winding,
            iterations,
            cluster_radius: 0.5 * w.diameter(),
            axis_ambiguous: z.im.abs() < 10.0 * self.settings.tol,
            trajectory: None,
        }
    }

    fn fail(&self, w: &Window, winding: i64, reason: String) -> Found {
        Found {
            zeros: Vec::new(),
            failures: vec![BoxFailure {
                window: *w,
                winding,
                reason,
            }],
        }
    }

    fn run(&self, w: Window, winding: i64, depth: usize) -> Found {
        let s = self.settings;
        if winding <= 0 {
            if winding < 0 {
                return self.fail(&w, winding, "negative winding".into());
            }
            return Found::default();
        }
        let small = w.diameter() < s.min_box;
        if winding == 1 && (w.diameter() <= s.coarse_diameter || small || depth >= s.max_depth) {
            match newton(self.func, w.center(), s.tol, s.max_newton) {
                Ok((z, res, it)) if w.contains(z, 1e-12) => {
                    return Found {
                        zeros: vec![self.resonance(z, res, 1, it, &w)],
                        failures: Vec::new(),
                    };
                }
                Ok((z, _, _)) if small || depth >= s.max_depth => {
                    return self.fail(&w, 1, Error::NewtonEscape { center: z }.to_string());
                }
                Err(e) if small || depth >= s.max_depth => return self.fail(&w, 1, e.to_string()),
                _ => {}
            }
        }
        if winding > 1 && !small && depth >= s.max_depth {
            return self.fail(&w, winding, format!("depth limit {} reached with winding {winding}", s.max_depth));
        }
        if winding > 1 && small {
            let (z, res, it) = match newton(self.func, w.center(), s.tol, s.max_newton) {
                Ok((z, res, it)) if w.contains(z, 1e-12) => (z, res, it),
                _ => (w.center(), self.func.value(w.center()).map(|v| v.norm()).unwrap_or(f64::NAN), 0),
            };
            return Found {
                zeros: vec![self.resonance(z, res, winding as u32, it, &w)],
                failures: Vec::new(),
            };
        }
        if depth >= s.max_depth {
            return self.fail(&w, winding, "maximum subdivision depth".into());
        }
        let mut last = String::new();
        for frac in SPLIT_FRACTIONS {
            let (a, b) = w.split(frac);
            let (wa, wb) = rayon::join(
                || raw_winding(self.func, &a, s),
                || raw_winding(self.func, &b, s),
            );
            match (wa, wb) {
                (Ok(na), Ok(nb)) if na + nb == winding && na >= 0 && nb >= 0 => {
                    let (fa, fb) = rayon::join(|| self.run(a, na, depth + 1), || self.run(b, nb, depth + 1));
                    return fa.merge(fb);
                }
                (Ok(na), Ok(nb)) => {
                    last = format!("child windings {na} + {nb} != parent {winding}");
                }
                (Err(e), _) | (_, Err(e)) => {
                    if !matches!(e, Error::BoundaryZero { .. }) {
                        return self.fail(&w, winding, e.to_string());
                    }
                    last = e.to_string();
                }
            }
        }
        self.fail(&w, winding, last)
    }
}

/// All zeros of `func` in `window`, each certified by an isolating box.
pub fn find_zeros<A: Analytic + ?Sized>(func: &A, window: &Window, settings: &RootSettings) -> Result<ZeroSearch> {
    let (total, used) = winding_number_jittered(func, window, settings)?;
    let search = Search { func, settings };
    let found = search.run(used, total, 0);
    let mut zeros = found.zeros;
    zeros.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    let mut merged: Vec<Resonance> = Vec::with_capacity(zeros.len());
    for r in zeros {
        match merged.last_mut() {
            Some(prev) if (prev.z - r.z).norm() < settings.merge_radius => {
                if r.residual < prev.residual {
                    let winding = prev.winding + r.winding;
                    *prev = Resonance { winding, ..r };
                } else {
                    prev.winding += r.winding;
                }
            }
            _ => merged.push(r),
        }
    }
    let mut failures = found.failures;
    failures.sort_by(|a, b| {
        a.window
            .re_min
            .total_cmp(&b.window.re_min)
            .then(a.window.im_min.total_cmp(&b.window.im_min))
    });
    Ok(ZeroSearch {
        window: used,
        total_winding: total,
        zeros: merged,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn poly(roots: Vec<Complex64>) -> FnAnalytic<impl Fn(Complex64) -> Complex64 + Sync> {
        FnAnalytic(move |z: Complex64| roots.iter().fold(c(1.0, 0.0), |acc, r| acc * (z - r)))
    }

    #[test]
    fn linear_function_windings() {
        let f = FnAnalytic(|z: Complex64| c(1.0, 0.0) - z);
        let s = RootSettings::default();
        let around = Window::new(0.9, 1.1, -0.1, 0.1).unwrap();
        let away = Window::new(1.2, 1.4, -0.1, -0.01).unwrap();
        assert_eq!(winding_number(&f, &around, &s).unwrap(), 1);
        assert_eq!(winding_number(&f, &away, &s).unwrap(), 0);
    }

    #[test]
    fn double_root_multiplicity() {
        let f = poly(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let s = RootSettings::default();
        assert_eq!(multiplicity_estimate(&f, c(1.0, 0.0), 0.1, &s).unwrap(), 2);
        let g = FnAnalytic(|z: Complex64| c(1.0, 0.0) - z);
        assert_eq!(multiplicity_estimate(&g, c(1.0, 0.0), 0.1, &s).unwrap(), 1);
    }

    #[test]
    fn cubic_roots_recovered() {
        let roots = vec![c(0.3, -0.2), c(-0.4, 0.1), c(0.05, 0.45)];
        let f = poly(roots.clone());
        let s = RootSettings {
            tol: 1e-13,
            ..RootSettings::default()
        };
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let out = find_zeros(&f, &w, &s).unwrap();
        assert_eq!(out.total_winding, 3);
        assert_eq!(out.zeros.len(), 3);
        for r in &roots {
            let best = out.zeros.iter().map(|z| (z.z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12);
        }
    }

    #[test]
    fn empty_window_returns_nothing() {
        let f = FnAnalytic(|z: Complex64| c(1.0, 0.0) - z);
        let w = Window::new(0.9, 1.1, -0.05, -1e-4).unwrap();
        let out = find_zeros(&f, &w, &RootSettings::default()).unwrap();
        assert!(out.zeros.is_empty());
        assert!(out.failures.is_empty());
    }

    #[test]
    fn boundary_zero_triggers_jitter() {
        // root exactly on the lower edge
        let f = poly(vec![c(0.0, -0.5)]);
        let w = Window::new(-0.5, 0.5, -0.5, 0.5).unwrap();
        let (n, used) = winding_number_jittered(&f, &w, &RootSettings::default()).unwrap();
        assert_ne!(used, w);
        assert_eq!(n, 1);
    }

    #[test]
    fn close_pair_is_separated() {
        let f = poly(vec![c(0.1, 0.1), c(0.1 + 1e-5, 0.1)]);
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let out = find_zeros(&f, &w, &RootSettings { tol: 1e-14, ..RootSettings::default() }).unwrap();
        assert_eq!(out.certified_count(), 2);
        assert_eq!(out.zeros.len(), 2);
    }

    #[test]
    fn rapidly_rotating_phase() {
        // many zeros of sin on the real line
        let f = FnAnalytic(|z: Complex64| (z * 30.0).sin());
        let w = Window::new(0.01, 1.0, -0.1, 0.1).unwrap();
        let out = find_zeros(&f, &w, &RootSettings::default()).unwrap();
        assert_eq!(out.total_winding, 9);
        assert_eq!(out.zeros.len(), 9);
        for (j, r) in out.zeros.iter().enumerate() {
            assert!((r.z.re - (j + 1) as f64 * PI / 30.0).abs() < 1e-10);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(50))]

            #[test]
            fn winding_is_additive(
                r in proptest::collection::vec((-0.9..0.9f64, -0.9..0.9f64), 1..4),
                frac in 0.2..0.8f64,
            ) {
                let roots: Vec<Complex64> = r.iter().map(|&(a, b)| c(a, b)).collect();
                let f = poly(roots);
                let s = RootSettings::default();
                let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
                let (a, b) = w.split(frac);
                let (Ok(whole), Ok(na), Ok(nb)) = (
                    raw_winding(&f, &w, &s),
                    raw_winding(&f, &a, &s),
                    raw_winding(&f, &b, &s),
                ) else {
                    // a root on the split line; additivity is vacuous
                    return Ok(());
                };
                prop_assert_eq!(whole, na + nb);
                prop_assert_eq!(whole, r.len() as i64);
            }

            #[test]
            fn search_is_deterministic(r in proptest::collection::vec((-0.9..0.9f64, -0.9..0.9f64), 1..4)) {
                let roots: Vec<Complex64> = r.iter().map(|&(a, b)| c(a, b)).collect();
                let f = poly(roots);
                let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
                let s = RootSettings::default();
                let a = find_zeros(&f, &w, &s);
                let b = find_zeros(&f, &w, &s);
                prop_assert_eq!(a, b);
            }
        }
    }
}
