use bohrsom::oracle::{oracle_spectrum, OracleOptions};
use bohrsom::symbol::{Monomial, SymbolModel};

fn cases() -> Vec<(&'static str, SymbolModel, f64, usize)> {
    let h = SymbolModel::harmonic;
    vec![
        ("harmonic", h(), 0.1, 11),
        ("p1 = 1", h().with_p1(vec![Monomial::new(1.0, 0, 0)]).unwrap(), 0.05, 6),
        ("p1 = x", h().with_p1(vec![Monomial::new(1.0, 1, 0)]).unwrap(), 0.1, 6),
        ("p2 = -2", h().with_p2(vec![Monomial::new(-2.0, 0, 0)]).unwrap(), 0.1, 6),
        ("quartic", SymbolModel::quartic_well(), 0.05, 12),
    ]
}

#[test]
fn eigenvalues_stable_under_domain_and_grid_changes() {
    for (name, model, h, count) in cases() {
        let base = oracle_spectrum(&model, h, count, &OracleOptions::default()).unwrap();
        let (lo, hi) = base.domain;
        let pad = 0.125 * (hi - lo);
        let wider = OracleOptions {
            domain: Some((lo - pad, hi + pad)),
            grid_size: Some((1.25 * base.grid_size as f64).ceil() as usize),
            ..OracleOptions::default()
        };
        let finer = OracleOptions {
            domain: Some(base.domain),
            grid_size: Some(2 * base.grid_size),
            ..OracleOptions::default()
        };
        for opts in [wider, finer] {
            let other = oracle_spectrum(&model, h, count, &opts).unwrap();
            for (n, (a, b)) in base.eigenvalues.iter().zip(&other.eigenvalues).enumerate() {
                assert!((a - b).abs() <= 1e-8, "{name} n={n}: {a} vs {b} ({opts:?})");
            }
        }
    }
}

#[test]
fn closed_form_spectra() {
    for (name, model, h, count) in cases().into_iter().take(4) {
        let spec = oracle_spectrum(&model, h, count, &OracleOptions::default()).unwrap();
        for (n, e) in spec.eigenvalues.iter().enumerate() {
            let base = h * (2 * n + 1) as f64;
            let want = match name {
                "harmonic" => base,
                "p1 = 1" => base + h,
                "p1 = x" => base - h * h / 4.0,
                _ => base - 2.0 * h * h,
            };
            assert!((e - want).abs() <= 1e-9, "{name} n={n}: {e} vs {want}");
        }
    }
}
