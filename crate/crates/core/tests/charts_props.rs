use bohrsom::charts::{
    d1_direct, d1_fourier, default_xi_interval, eikonal_fourier_on, t1_density, Branch,
};
use bohrsom::orbit::find_orbit;
use bohrsom::symbol::{Monomial, SymbolModel};
use proptest::prelude::*;

fn family(k: usize, t: f64) -> (SymbolModel, f64) {
    match k {
        0 => (SymbolModel::harmonic(), 0.2 + 2.8 * t),
        1 => (SymbolModel::quartic_well(), 0.2 + 2.8 * t),
        2 => (SymbolModel::morse(1.0, 1.0), 0.1 + 0.7 * t),
        _ => (SymbolModel::poschl_teller(1.0, 1.0), -0.9 + 0.8 * t),
    }
}

/// T1 for ξ² + x⁴ with p1 = c + x, p2 = d, from the explicit root
/// X = (E - ξ²)^{1/4} and hand-differentiated chart quantities.
fn quartic_t1(e: f64, xi: f64, c: f64, d: f64) -> f64 {
    let x = (e - xi * xi).powf(0.25);
    let x1 = -xi / (2.0 * x.powi(3));
    let alpha = 4.0 * x.powi(3);
    let alpha1 = 12.0 * x * x * x1;
    let s2 = -x1;
    let (pxx, pxxx, pxxxx) = (12.0 * x * x, 24.0 * x, 24.0);
    let q = c + x;
    (d + s2 * s2 / 24.0 * pxxxx) / alpha
        + alpha1 * alpha1 / (8.0 * alpha.powi(3)) * pxx
        + s2 * alpha1 / (6.0 * alpha * alpha) * pxxx
        - q / (alpha * alpha) * (1.0 - q / (2.0 * alpha) * pxx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn t1_matches_closed_form_substitution(e in 0.3..3.0f64, c in -1.0..1.0f64, d in -2.0..2.0f64, seed in 0u64..1000) {
        let m = SymbolModel::quartic_well()
            .with_p1(vec![Monomial::new(c, 0, 0), Monomial::new(1.0, 1, 0)])
            .unwrap()
            .with_p2(vec![Monomial::new(d, 0, 0)])
            .unwrap();
        let orbit = find_orbit(&m, e).unwrap();
        let iv = default_xi_interval(&orbit, Branch::Right, 0.9);
        let chart = eikonal_fourier_on(&m, &orbit, iv, Branch::Right, 81).unwrap();
        // 50 chart points per case, spread by a simple low-discrepancy sequence.
        for k in 0..50 {
            let u = ((seed as f64 + k as f64) * 0.618_033_988_749_894_9).fract();
            let xi = iv.0 + u * (iv.1 - iv.0);
            let got = t1_density(&chart, &m, xi).unwrap();
            let want = quartic_t1(e, xi, c, d);
            prop_assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "ξ={xi}: {got} vs {want}");
        }
    }

    #[test]
    fn re_d1_vanishes_without_subprincipal(k in 0usize..4, t in 0.0..1.0f64, p2 in -2.0..2.0f64) {
        let (m, e) = family(k, t);
        let m = m.with_p2(vec![Monomial::new(p2, 0, 0), Monomial::new(0.5, 1, 1)]).unwrap();
        let orbit = find_orbit(&m, e).unwrap();
        for branch in [Branch::Right, Branch::Left] {
            let iv = default_xi_interval(&orbit, branch, 0.85);
            let chart = eikonal_fourier_on(&m, &orbit, iv, branch, 61).unwrap();
            for &xi in &chart.xi_grid {
                prop_assert!(d1_fourier(&chart, &m, xi).unwrap().re.abs() <= 1e-10);
                prop_assert!(d1_direct(&chart, &m, xi).unwrap().re.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn eikonal_root_matches_orbit(k in 0usize..4, t in 0.0..1.0f64) {
        let (m, e) = family(k, t);
        let orbit = find_orbit(&m, e).unwrap();
        let (xc, _, _) = m.well_minimum().unwrap();
        for branch in [Branch::Right, Branch::Left] {
            let iv = default_xi_interval(&orbit, branch, 0.9);
            let chart = eikonal_fourier_on(&m, &orbit, iv, branch, 61).unwrap();
            let mut checked = 0;
            for p in orbit.samples.iter().step_by(7) {
                let on_branch = (p.x - xc) * branch.sign() > 0.0;
                if !on_branch || !chart.contains(p.xi) {
                    continue;
                }
                let x = chart.point(&m, p.xi).unwrap().x;
                prop_assert!((x - p.x).abs() <= 1e-9, "ξ={}: {x} vs {}", p.xi, p.x);
                checked += 1;
            }
            prop_assert!(checked > 5);
        }
    }
}

#[test]
fn d1_reduction_on_three_families() {
    let p1 = vec![Monomial::new(1.0, 1, 0), Monomial::new(0.2, 0, 1)];
    let p2 = vec![Monomial::new(1.0, 0, 0)];
    let nonseparable = SymbolModel::polynomial(vec![
        Monomial::new(1.0, 0, 2),
        Monomial::new(1.0, 2, 0),
        Monomial::new(0.3, 2, 2),
        Monomial::new(0.2, 1, 1),
    ])
    .unwrap();
    for (m, e) in [
        (SymbolModel::quartic_well(), 1.0),
        (SymbolModel::morse(1.0, 1.0), 0.5),
        (nonseparable, 0.8),
    ] {
        let m = m.with_p1(p1.clone()).unwrap().with_p2(p2.clone()).unwrap();
        let orbit = find_orbit(&m, e).unwrap();
        for branch in [Branch::Right, Branch::Left] {
            let iv = default_xi_interval(&orbit, branch, 0.9);
            let chart = eikonal_fourier_on(&m, &orbit, iv, branch, 121).unwrap();
            for &xi in chart.xi_grid.iter().step_by(6) {
                let a = d1_fourier(&chart, &m, xi).unwrap();
                let b = d1_direct(&chart, &m, xi).unwrap();
                assert!((a - b).norm() <= 1e-7, "{branch:?} ξ={xi}: {a} vs {b}");
            }
        }
    }
}
