use bohrsom::actions::{action_series, loop_integral_dt, stokes_check, SignCalibration};
use bohrsom::orbit::find_orbit;
use bohrsom::symbol::{Monomial, Polynomial, SymbolModel};
use proptest::prelude::*;

fn families() -> Vec<(SymbolModel, f64)> {
    vec![
        (SymbolModel::harmonic(), 1.0),
        (SymbolModel::quartic_well(), 1.0),
        (SymbolModel::morse(1.0, 1.0), 0.5),
        (SymbolModel::poschl_teller(1.0, 1.0), -0.5),
    ]
}

fn form_poly(max_degree: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(
        (-1.0..1.0f64, 0..=max_degree, 0..=max_degree)
            .prop_filter("degree", move |(_, a, b)| a + b <= max_degree)
            .prop_map(|(c, a, b)| Monomial::new(c, a, b)),
        1..5,
    )
    .prop_map(Polynomial)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn stokes_identity_on_random_forms(f in form_poly(3), g in form_poly(3)) {
        for (model, e) in families() {
            let r = stokes_check(&model, e, &f, &g).unwrap();
            prop_assert!(r <= 1e-6, "{:?} at E={e}: {r}", model.family());
        }
    }

    #[test]
    fn exact_forms_integrate_to_zero(big_f in form_poly(4)) {
        for (model, e) in families() {
            let orbit = find_orbit(&model, e).unwrap();
            let v = loop_integral_dt(&orbit, |x, xi| {
                let [dx, dxi] = model.hamilton_field(x, xi);
                big_f.partial(1, 0, x, xi) * dx + big_f.partial(0, 1, x, xi) * dxi
            })
            .0;
            let speed = loop_integral_dt(&orbit, |x, xi| {
                let [dx, dxi] = model.hamilton_field(x, xi);
                dx.hypot(dxi)
            })
            .0;
            let grad = orbit
                .samples
                .iter()
                .map(|p| big_f.partial(1, 0, p.x, p.xi).hypot(big_f.partial(0, 1, p.x, p.xi)))
                .fold(0.0, f64::max);
            prop_assert!(v.abs() <= 1e-8 * speed * grad.max(1e-300), "{v}");
        }
    }
}

#[test]
fn subprincipal_dxi_form_is_minus_p1_dt() {
    let p1 = vec![Monomial::new(0.3, 0, 0), Monomial::new(1.0, 1, 0), Monomial::new(-0.5, 1, 1)];
    for (model, e) in families() {
        let model = model.with_p1(p1.clone()).unwrap();
        let orbit = find_orbit(&model, e).unwrap();
        for p in &orbit.samples {
            let px = model.p0_x(p.x, p.xi);
            if px.abs() < 1e-3 {
                continue;
            }
            let xi_dot = model.hamilton_field(p.x, p.xi)[1];
            let lhs = model.eval(1, p.x, p.xi) / px * xi_dot;
            assert!((lhs + model.eval(1, p.x, p.xi)).abs() <= 1e-10);
        }
    }
}

#[test]
fn second_order_action_vanishes_for_pure_harmonic() {
    let m = SymbolModel::harmonic();
    let cal = SignCalibration::default();
    for e in [0.3, 0.7, 1.0, 1.9, 3.2] {
        let s = action_series(&m, e, &cal).unwrap();
        assert!(s.s1.abs() <= 1e-6);
        assert!(s.s2.abs() <= 1e-6);
        assert!(s.d2_gamma.value.abs() / 48.0 <= 1e-6);
        assert!(s.d_p1sq.value.abs() <= 1e-6);
        assert!(s.integrals.i_p2.abs() <= 1e-6);
    }
}

#[test]
fn closed_form_stokes_case_reproduces_period() {
    // f = ξ, g = 0: d/dE ∮ξ dx equals the period.
    let m = SymbolModel::harmonic();
    let f = Polynomial(vec![Monomial::new(1.0, 0, 1)]);
    let g = Polynomial(vec![]);
    assert!(stokes_check(&m, 1.0, &f, &g).unwrap() <= 1e-9);
    assert_eq!(stokes_check(&m, 1.0, &g, &g).unwrap(), 0.0);
}
