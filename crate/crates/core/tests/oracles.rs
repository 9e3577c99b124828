use num_complex::Complex64;
use starkres_core::oracle::{erfc_closed_form, ode_resolvent_oracle, taylor_continuation_oracle, TaylorSettings};
use starkres_core::{FormFactor, ResolventEvaluator, ResolventSettings};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn default_phi() -> FormFactor {
    FormFactor::gaussian(0.1, 1.0).unwrap()
}

fn phi_hat(k: f64) -> Complex64 {
    c(0.1 * (-k * k / 2.0).exp(), 0.0)
}

fn upper_points() -> Vec<Complex64> {
    (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            c(0.3 + 1.7 * t, 0.02 + 0.5 * (3.1 * t).sin().abs() + 0.03 * (i % 3) as f64)
        })
        .collect()
}

#[test]
fn field_element_matches_ode_solve() {
    let phi = default_phi();
    for f in [0.01, 0.05] {
        let e = ResolventEvaluator::new(&phi, f, ResolventSettings::default()).unwrap();
        for z in upper_points() {
            let a = e.matrix_element(z).unwrap();
            let b = ode_resolvent_oracle(phi_hat, f, z, 9.0).unwrap();
            assert!((a - b).norm() < 1e-8, "f={f} z={z}: {a} vs {b}");
        }
    }
}

#[test]
fn free_element_is_the_weak_field_limit() {
    // the field correction is even in f, so Richardson in f^2 removes it
    let z = c(0.0, 2.0);
    let e = ResolventEvaluator::new(&default_phi(), 0.0, ResolventSettings::default()).unwrap();
    let free = e.matrix_element(z).unwrap();
    let m1 = ode_resolvent_oracle(phi_hat, 2e-3, z, 9.0).unwrap();
    let m2 = ode_resolvent_oracle(phi_hat, 1e-3, z, 9.0).unwrap();
    let limit = (m2 * 4.0 - m1) / 3.0;
    assert!((free - limit).norm() < 1e-8, "{free} vs {limit}");
}

#[test]
fn free_function_matches_faddeeva_form() {
    let e = ResolventEvaluator::new(&default_phi(), 0.0, ResolventSettings::default()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let z = c(0.55 + 0.1 * i as f64, -0.09 + 0.02 * j as f64);
            let a = e.f_value(z).unwrap();
            let b = erfc_closed_form(0.1, z).unwrap();
            worst = worst.max((a - b).norm());
        }
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn free_continuation_matches_taylor_stepping() {
    let e = ResolventEvaluator::new(&default_phi(), 0.0, ResolventSettings::default()).unwrap();
    let path = [c(1.0, 0.3), c(1.0, -0.1)];
    let stepped = taylor_continuation_oracle(&e, &path, &TaylorSettings::default()).unwrap();
    let direct = e.f_value(path[1]).unwrap();
    assert!((stepped - direct).norm() < 1e-8, "{stepped} vs {direct}");
}
