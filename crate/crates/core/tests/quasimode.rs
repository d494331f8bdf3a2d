use bohrsom::actions::SignCalibration;
use bohrsom::numeric::loglog_slope;
use bohrsom::oracle::{auto_domain, eigenpairs, Scheme};
use bohrsom::orbit::find_orbit;
use bohrsom::quantization::quantize;
use bohrsom::quasimode::{build_wkb_on, inner_half, Quasimode, QuasimodeOptions};
use bohrsom::symbol::{Monomial, SymbolModel};
use num_complex::Complex64;

fn sinc_interpolate(nodes: &[f64], values: &[Complex64], x: f64) -> Complex64 {
    let dx = nodes[1] - nodes[0];
    values
        .iter()
        .zip(nodes)
        .map(|(v, &xj)| {
            let t = std::f64::consts::PI * (x - xj) / dx;
            let s = if t == 0.0 { 1.0 } else { t.sin() / t };
            v * s
        })
        .sum()
}

/// Relative distance from `q.combined` to the best complex multiple of the
/// oracle eigenvector, both sampled on the quasimode grid.
fn eigenvector_mismatch(model: &SymbolModel, h: f64, n: usize, q: &Quasimode) -> f64 {
    let domain = auto_domain(model, h, n + 1).unwrap();
    let grid = ((domain.1 - domain.0) / (0.25 * h)).ceil() as usize;
    let (nodes, _, vecs) = eigenpairs(model, h, domain, grid, n + 1, Scheme::Sinc).unwrap();
    let psi: Vec<Complex64> = q.x_grid.iter().map(|&x| sinc_interpolate(&nodes, &vecs[n], x)).collect();
    let dot: Complex64 = psi.iter().zip(&q.combined).map(|(a, b)| a.conj() * b).sum();
    let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let c = dot / norm2;
    let resid: f64 = psi.iter().zip(&q.combined).map(|(a, b)| (b - c * a).norm_sqr()).sum();
    let total: f64 = q.combined.iter().map(|b| b.norm_sqr()).sum();
    (resid / total).sqrt()
}

fn mismatch_at(model: &SymbolModel, h: f64, target_energy: f64) -> f64 {
    let cal = SignCalibration::default();
    let n0 = quantize(model, h, 0, 0, &cal).unwrap();
    // Level nearest the target energy.
    let mut n = 0;
    let mut e = n0.energy;
    while e < target_energy {
        n += 1;
        e = quantize(model, h, n, 2, &cal).unwrap().energy;
    }
    let orbit = find_orbit(model, e).unwrap();
    let q = build_wkb_on(model, &orbit, h, inner_half(&orbit), &QuasimodeOptions::default()).unwrap();
    eigenvector_mismatch(model, h, n, &q)
}

/// The quasimode carries no first-order amplitude correction, so its shape
/// agrees with the true eigenfunction to O(h).
#[test]
fn quasimode_matches_oracle_eigenvector() {
    let p1x = SymbolModel::harmonic().with_p1(vec![Monomial::new(1.0, 1, 0)]).unwrap();
    for (name, model, e) in [
        ("harmonic", SymbolModel::harmonic(), 1.0),
        ("quartic", SymbolModel::quartic_well(), 1.0),
        ("morse", SymbolModel::morse(1.0, 1.0), 0.5),
        ("harmonic p1=x", p1x, 1.0),
    ] {
        let hs = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs.iter().map(|&h| mismatch_at(&model, h, e)).collect();
        for (h, err) in hs.iter().zip(&errs) {
            assert!(*err <= 0.5 * h, "{name} h={h}: {err}");
        }
        let slope = loglog_slope(&hs, &errs);
        assert!(slope >= 0.7, "{name}: slope {slope} from {errs:?}");
    }
}
