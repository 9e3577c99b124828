use super::*;
use crate::formfactor::Term;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn reference() -> FormFactor {
    FormFactor::gaussian(0.1, 1.0).unwrap()
}

fn free() -> ResolventEvaluator {
    ResolventEvaluator::new(&reference(), 0.0, ResolventSettings::default()).unwrap()
}

fn stark(f: f64) -> ResolventEvaluator {
    ResolventEvaluator::new(&reference(), f, ResolventSettings::default()).unwrap()
}

const R0: Complex64 = Complex64::new(1.019_053_988_888_707_1, -0.011_111_503_308_084_16);

#[test]
fn zero_coupling_gives_zero_element() {
    let phi = FormFactor::zero();
    for f in [0.0, 0.01] {
        let e = ResolventEvaluator::new(&phi, f, ResolventSettings::default()).unwrap();
        for z in [c(1.0, -0.02), c(0.5, 0.3), c(1.0, 1e-7)] {
            assert_eq!(e.continued(z).unwrap(), c(0.0, 0.0));
            assert_eq!(e.f_value(z).unwrap(), c(1.0, 0.0) - z);
        }
    }
    let e = ResolventEvaluator::new(&phi, 0.0, ResolventSettings::default()).unwrap();
    assert!((e.f_derivative(c(1.0, -0.02)).unwrap() + 1.0).norm() < 1e-14);
}

#[test]
fn reference_zero_is_reproduced() {
    let v = free().f_value(R0).unwrap();
    assert!(v.norm() < 1e-10, "F(r0) = {v}");
}

#[test]
fn large_spectral_parameter_limit() {
    // z r(z) -> -||phi||^2 along the imaginary axis, with a 1/z correction
    let e = free();
    let v3 = c(0.0, 1e3) * e.matrix_element(c(0.0, 1e3)).unwrap();
    let v4 = c(0.0, 1e4) * e.matrix_element(c(0.0, 1e4)).unwrap();
    let extrap = (v4 * 10.0 - v3) / 9.0;
    let target = -std::f64::consts::PI.sqrt() / 100.0;
    assert!((extrap - c(target, 0.0)).norm() < 1e-6, "{extrap}");
}

#[test]
fn continuation_is_continuous_across_positive_axis() {
    let e = free();
    let up = e.continued(c(1.0, 1e-8)).unwrap();
    let down = e.continued(c(1.0, -1e-8)).unwrap();
    assert!((up - down).norm() < 1e-7);
}

#[test]
fn methods_agree_where_both_apply() {
    let e = free();
    let k = e.kernel();
    for z in [c(1.0, 0.01), c(0.8, -0.01), c(1.2, -0.03), c(0.95, 0.002)] {
        let a = FreePole.evaluate(k, z).unwrap();
        let b = FreeContour.evaluate(k, z).unwrap();
        assert!((a - b).norm() < 1e-11, "z={z}: {a} vs {b}");
    }
}

#[test]
fn pole_term_near_one() {
    let e = free();
    let z = c(1.0, -0.01);
    let expect = I * PI * (-z).exp() / (50.0 * z.sqrt());
    assert!((pole_term(e.kernel(), z) - expect).norm() < 1e-15);
}

#[test]
fn schwarz_reflection_below_axis() {
    let e = free();
    for j in 0..20 {
        let z = c(0.6 + 0.04 * j as f64, -0.005 - 0.002 * j as f64);
        let below = e.continued(z).unwrap() - pole_term(e.kernel(), z);
        let above = e.continued(z.conj()).unwrap().conj();
        assert!((below - above).norm() < 1e-11);
    }
}

#[test]
fn jump_across_axis_matches_pole_term() {
    let e = free();
    let k = e.kernel();
    for lam in [0.5, 1.0, 1.7] {
        let eps = 1e-6;
        let above = real_line_integral(k, c(lam, eps)).unwrap();
        let below = real_line_integral(k, c(lam, -eps)).unwrap();
        let jump = above - below;
        let expect = pole_term(k, c(lam, 0.0));
        assert!((jump - expect).norm() < 1e-5, "lam={lam}: {jump} vs {expect}");
    }
}

#[test]
fn cut_is_rejected() {
    let e = free();
    assert!(matches!(e.continued(c(-1.0, 0.0)), Err(Error::BranchCut { .. })));
    assert!(matches!(e.continued(c(0.0, 0.0)), Err(Error::BranchCut { .. })));
    assert!(matches!(e.matrix_element(c(1.0, -0.1)), Err(Error::NotUpperHalfPlane { .. })));
}

#[test]
fn propagator_at_time_zero_is_norm() {
    let e = stark(0.01);
    let m = propagator_element(e.kernel(), c(0.0, 0.0));
    assert!((m - c(std::f64::consts::PI.sqrt() / 100.0, 0.0)).norm() < 1e-15);
}

#[test]
fn propagator_matches_closed_form() {
    let f = 0.05;
    let e = stark(f);
    for j in 0..10 {
        let s = c(3.0 * j as f64, -0.2 * (j % 3) as f64);
        let m = propagator_element(e.kernel(), s);
        let expect = (PI / (c(1.0, 0.0) + I * s)).sqrt()
            * (-(s * s) * f * f / 4.0 - I * s * s * s * f * f / 12.0).exp()
            / 100.0;
        assert!((m - expect).norm() < 1e-15 * (1.0 + expect.norm() * 1e2));
    }
}

#[test]
fn propagator_is_bounded_on_real_times() {
    let e = stark(0.02);
    let bound = std::f64::consts::PI.sqrt() / 100.0;
    for j in 0..50 {
        let m = propagator_element(e.kernel(), c(j as f64 * 7.3, 0.0));
        assert!(m.norm() <= bound * (1.0 + 1e-14));
    }
}

#[test]
fn free_propagator_matches_quadrature() {
    use crate::quadrature::integrate;
    let e = ResolventEvaluator::new(&reference(), 0.0, ResolventSettings::default()).unwrap();
    for j in 0..10 {
        let s = 0.4 * j as f64;
        let q = integrate(
            |k| c(0.0, -s * k * k).exp() * (-k * k).exp() / 100.0,
            -12.0,
            12.0,
            32,
            &QuadratureSettings {
                abs_tol: 1e-16,
                rel_tol: 1e-13,
                max_subdivisions: 2000,
            },
        )
        .unwrap()
        .value;
        let m = propagator_element(e.kernel(), c(s, 0.0));
        assert!((m - q).norm() < 1e-13);
    }
}

#[test]
fn stark_contour_independence() {
    let z = c(1.0, -0.01);
    let mut vals = Vec::new();
    for g in [PI / 12.0, PI / 8.0, PI / 6.0] {
        let s = ResolventSettings {
            gamma: g,
            ..ResolventSettings::default()
        };
        let e = ResolventEvaluator::new(&reference(), 0.01, s).unwrap();
        vals.push(e.f_value(z).unwrap());
    }
    let expect = c(0.003_838_029_735_642_1, -0.085_442_801_341_233_48);
    for v in &vals {
        assert!((v - vals[0]).norm() < 1e-8);
        assert!((v - expect).norm() < 1e-8, "{v}");
    }
}

#[test]
fn stark_settings_validated() {
    let s = ResolventSettings {
        gamma: 1.2,
        ..ResolventSettings::default()
    };
    assert!(ResolventEvaluator::new(&reference(), 0.01, s).is_err());
    assert!(ResolventEvaluator::new(&reference(), 0.0, s).is_ok());
    assert!(ResolventEvaluator::new(&reference(), -1.0, ResolventSettings::default()).is_err());
}

#[test]
fn registry_lookup() {
    let r = MethodRegistry::standard();
    assert_eq!(r.names(), vec!["auto", "free-pole", "free-contour", "stark-propagator"]);
    assert!(r.get("nope").is_err());
    let m = r.get("free-contour").unwrap();
    assert!(free().with_method(m.clone()).is_ok());
    assert!(stark(0.01).with_method(m).is_err());
}

#[test]
fn derivative_matches_finite_differences() {
    let e = free();
    for j in 0..20 {
        let z = c(0.91 + 0.009 * j as f64, -0.002 - 0.0023 * j as f64);
        let h = 1e-4;
        let fd = (e.f_value(z + h).unwrap() - e.f_value(z - h).unwrap()) / (2.0 * h);
        let d = e.f_derivative(z).unwrap();
        assert!((d - fd).norm() < 1e-6, "z={z}");
    }
}

#[test]
fn uniqueness_certificate() {
    let e = free();
    let cert = certify_unique(&e, c(1.0, 0.0), 0.1, 256).unwrap();
    assert_eq!(cert.result, UniquenessCertificate::Unique);
    let zero = ResolventEvaluator::new(&FormFactor::zero(), 0.0, ResolventSettings::default()).unwrap();
    assert_eq!(
        certify_unique(&zero, c(1.0, 0.0), 0.1, 64).unwrap().result,
        UniquenessCertificate::Unique
    );
}

#[test]
fn strong_coupling_does_not_certify() {
    let phi = FormFactor::gaussian(1.0, 1.0).unwrap();
    let e = ResolventEvaluator::new(&phi, 0.0, ResolventSettings::default()).unwrap();
    let cert = certify_unique(&e, c(1.0, 0.0), 0.1, 256).unwrap();
    assert_ne!(cert.result, UniquenessCertificate::Unique);
}

#[test]
fn pair_element_with_polynomial_factor() {
    use crate::quadrature::integrate;
    let u = FormFactor::new(vec![Term::new(c(0.2, 0.1), 1, c(1.3, 0.0))]).unwrap();
    let v = reference();
    let e = ResolventEvaluator::pair(&u, &v, 0.0, ResolventSettings::default()).unwrap();
    let uh = u.fourier_transform();
    let vh = v.fourier_transform();
    let z = c(0.7, 0.2);
    let q = integrate(
        |k| uh.eval_real(k).conj() * vh.eval_real(k) / (c(k * k, 0.0) - z),
        -20.0,
        20.0,
        64,
        &QuadratureSettings {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_subdivisions: 4000,
        },
    )
    .unwrap()
    .value;
    assert!((e.matrix_element(z).unwrap() - q).norm() < 1e-12);
}

#[test]
fn integrand_samples_follow_contour() {
    let e = stark(0.02);
    let pts = e.integrand_samples(c(1.0, -0.01), 50).unwrap();
    assert_eq!(pts.len(), 50);
    assert_eq!(pts[0].0, c(0.0, 0.0));
    assert!(pts.last().unwrap().0.im < 0.0);
    assert!(free().integrand_samples(c(1.0, -0.01), 10).unwrap().is_empty());
}

#[test]
fn evaluation_is_deterministic() {
    let e = stark(0.01);
    let z = c(1.01, -0.004);
    assert_eq!(e.f_value(z).unwrap().re.to_bits(), e.f_value(z).unwrap().re.to_bits());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn continued_equals_direct_above_axis(re in 0.2..2.0f64, im in 0.002..1.0f64) {
            let e = free();
            let z = c(re, im);
            let a = e.continued(z).unwrap();
            let b = real_line_integral(e.kernel(), z).unwrap();
            prop_assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
        }
    }
}
