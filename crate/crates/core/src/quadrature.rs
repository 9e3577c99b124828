//! Adaptive Gauss–Kronrod (10/21) quadrature for complex-valued integrands
//! on real intervals and on straight segments of the complex plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    /// Integral of |f|, used by callers as a cancellation scale.
    pub abs_value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs_value: f64,
}

fn kronrod<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut kron = fc * WGK[10];
    let mut abs_k = fc.norm() * WGK[10];
    let mut values = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *slot = (f1, f2);
        kron += (f1 + f2) * WGK[j];
        abs_k += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    if !(kron.re.is_finite() && kron.im.is_finite()) {
        return Err(Error::NonFinite {
            z: Complex64::new(center, 0.0),
        });
    }
    let mean = kron * 0.5;
    let mut asc = (fc - mean).norm() * WGK[10];
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += ((f1 - mean).norm() + (f2 - mean).norm()) * WGK[j];
    }
    let width = half.abs();
    let value = kron * half;
    let abs_value = abs_k * width;
    let resasc = asc * width;
    let mut error = ((kron - gauss) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    Ok(Panel {
        a,
        b,
        value,
        error,
        abs_value,
    })
}

/// Integrates `f` over `[a, b]`, starting from `initial_panels` equal panels and
/// bisecting the worst panel until the global error target is met.
pub fn integrate<F>(
    f: F,
    a: f64,
    b: f64,
    initial_panels: usize,
    settings: &QuadratureSettings,
) -> Result<Integral>
where
    F: Fn(f64) -> Complex64,
{
    integrate_breaks(f, &[a, b], initial_panels, settings)
}

/// Like [`integrate`] but with mandatory breakpoints; `breaks` must be sorted.
pub fn integrate_breaks<F>(
    f: F,
    breaks: &[f64],
    panels_per_interval: usize,
    settings: &QuadratureSettings,
) -> Result<Integral>
where
    F: Fn(f64) -> Complex64,
{
    let per = panels_per_interval.max(1);
    let mut panels = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let step = (hi - lo) / per as f64;
        for k in 0..per {
            let pa = lo + step * k as f64;
            let pb = if k + 1 == per { hi } else { lo + step * (k + 1) as f64 };
            panels.push(kronrod(&f, pa, pb)?);
        }
    }
    let mut evaluations = panels.len() * 21;
    let mut subdivisions = 0;
    loop {
        let total: Complex64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let abs_value: f64 = panels.iter().map(|p| p.abs_value).sum();
        // never chase an error below the roundoff floor of the summed panels
        let target = settings
            .abs_tol
            .max(settings.rel_tol * total.norm())
            .max(200.0 * f64::EPSILON * abs_value);
        if error <= target || panels.is_empty() {
            return Ok(Integral {
                value: total,
                error,
                abs_value,
                evaluations,
            });
        }
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                achieved: error,
                subdivisions,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature {
                achieved: error,
                subdivisions,
            });
        }
        panels.push(kronrod(&f, p.a, mid)?);
        panels.push(kronrod(&f, mid, p.b)?);
        evaluations += 42;
        subdivisions += 1;
    }
}

/// Integrates `g` along the straight segment from `p0` to `p1`.
pub fn integrate_segment<G>(
    g: G,
    p0: Complex64,
    p1: Complex64,
    initial_panels: usize,
    settings: &QuadratureSettings,
) -> Result<Integral>
where
    G: Fn(Complex64) -> Complex64,
{
    let d = p1 - p0;
    integrate(|t| g(p0 + d * t) * d, 0.0, 1.0, initial_panels, settings)
}

/// Integrates over `[a, inf)` using the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F>(
    f: F,
    a: f64,
    scale: f64,
    initial_panels: usize,
    settings: &QuadratureSettings,
) -> Result<Integral>
where
    F: Fn(f64) -> Complex64,
{
    integrate(
        |u| {
            let w = 1.0 - u;
            let v = f(a + scale * u / w);
            if v == Complex64::new(0.0, 0.0) {
                v
            } else {
                v * (scale / (w * w))
            }
        },
        0.0,
        1.0,
        initial_panels,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> QuadratureSettings {
        QuadratureSettings {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_subdivisions: 2000,
        }
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Complex64::new(x.powi(5), 3.0 * x * x), 0.0, 2.0, 1, &tight()).unwrap();
        assert!((r.value - Complex64::new(64.0 / 6.0, 8.0)).norm() < 1e-13);
    }

    #[test]
    fn oscillatory_exponential() {
        let w = 40.0;
        let r = integrate(|x| Complex64::new(0.0, w * x).exp(), 0.0, 3.0, 4, &tight()).unwrap();
        let exact = (Complex64::new(0.0, 3.0 * w).exp() - 1.0) / Complex64::new(0.0, w);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn gaussian_on_half_line() {
        let r = integrate_to_infinity(|x| Complex64::new((-x * x).exp(), 0.0), 0.0, 1.0, 4, &tight()).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn segment_integral_of_entire_function_is_path_independent() {
        let g = |z: Complex64| (z * z).sin();
        let a = Complex64::new(0.0, 0.0);
        let b = Complex64::new(1.0, 1.0);
        let mid = Complex64::new(1.0, 0.0);
        let direct = integrate_segment(g, a, b, 2, &tight()).unwrap().value;
        let bent = integrate_segment(g, a, mid, 2, &tight()).unwrap().value
            + integrate_segment(g, mid, b, 2, &tight()).unwrap().value;
        assert!((direct - bent).norm() < 1e-12);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let s = QuadratureSettings {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_subdivisions: 3,
        };
        let r = integrate(|x| Complex64::new(1.0 / (x.abs() + 1e-8), 0.0), -1.0, 1.0, 1, &s);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
