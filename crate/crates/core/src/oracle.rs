//! Reference spectra by dense diagonalization of `Op^w(p0 + h p1 + h² p2)` on a
//! truncated grid with Dirichlet ends.
//!
//! A symbol of ξ-degree at most two is written `a(x) ξ² + b(x) ξ + c(x)`; its
//! Weyl quantization is
//! `½(a (hD)² + (hD)² a) + (h²/4) a'' + ½(b hD + hD b) + c`, `hD = -i h d/dx`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbit::{find_orbit, start_point, OrbitError};
use crate::actions::action_s0;
use crate::symbol::{SymbolError, SymbolModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("grid size {0} is below the minimum of 64")]
    GridTooSmall(usize),
    #[error("domain [{lo}, {hi}] is too small: turning points at [{left}, {right}] sit within 20% of the boundary")]
    DomainTooSmall { lo: f64, hi: f64, left: f64, right: f64 },
    #[error("eigenvalue {index} did not settle under grid refinement: change {estimate:e} exceeds {bound:e}")]
    NotConverged { index: usize, estimate: f64, bound: f64 },
    #[error("eigenvector {index} has boundary mass {mass:e}; enlarge the domain")]
    BoundaryMass { index: usize, mass: f64 },
    #[error("only {available} states requested {requested}")]
    TooFewStates { available: usize, requested: usize },
    #[error("cannot size the domain: {0}")]
    Sizing(#[from] OrbitError),
}

/// Spatial discretization of `d/dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Sinc (Colbert–Miller) collocation; spectrally accurate.
    #[default]
    Sinc,
    /// Fourth-order central differences.
    Fd4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub scheme: Scheme,
    /// Explicit grid size; chosen from the wavelength when `None`.
    pub grid_size: Option<usize>,
    pub domain: Option<(f64, f64)>,
    /// Relative refinement tolerance, scaled by `max(1, |E|)`.
    pub tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            scheme: Scheme::Sinc,
            grid_size: None,
            domain: None,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub h: f64,
    pub domain: (f64, f64),
    pub grid_size: usize,
    pub eigenvalues: Vec<f64>,
    /// `|E(2N) - E(N)|` per eigenvalue.
    pub error_estimates: Vec<f64>,
    pub boundary_mass: Vec<f64>,
    pub scheme: Scheme,
}

/// Uniform interior nodes of `[lo, hi]` (the end points carry the Dirichlet condition).
pub fn grid(domain: (f64, f64), n: usize) -> (Vec<f64>, f64) {
    let dx = (domain.1 - domain.0) / (n + 1) as f64;
    ((1..=n).map(|i| domain.0 + i as f64 * dx).collect(), dx)
}

/// Matrix of `d/dx` (antisymmetric).
fn first_derivative(scheme: Scheme, n: usize, dx: f64) -> DMatrix<f64> {
    match scheme {
        Scheme::Sinc => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                let k = i as f64 - j as f64;
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign / (k * dx)
            }
        }),
        Scheme::Fd4 => DMatrix::from_fn(n, n, |i, j| {
            let c = match i as i64 - j as i64 {
                -1 => 8.0,
                1 => -8.0,
                -2 => -1.0,
                2 => 1.0,
                _ => 0.0,
            };
            c / (12.0 * dx)
        }),
    }
}

/// Matrix of `-d²/dx²` (symmetric, positive).
fn minus_second_derivative(scheme: Scheme, n: usize, dx: f64) -> DMatrix<f64> {
    let dx2 = dx * dx;
    match scheme {
        Scheme::Sinc => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                std::f64::consts::PI.powi(2) / (3.0 * dx2)
            } else {
                let k = i as f64 - j as f64;
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                2.0 * sign / (k * k * dx2)
            }
        }),
        Scheme::Fd4 => DMatrix::from_fn(n, n, |i, j| {
            let c = match (i as i64 - j as i64).abs() {
                0 => 30.0,
                1 => -16.0,
                2 => 1.0,
                _ => 0.0,
            };
            c / (12.0 * dx2)
        }),
    }
}

/// Coefficients `(a, a'', b, c)` of the full symbol at `x`.
pub(crate) fn coefficients(model: &SymbolModel, h: f64, x: f64) -> (f64, f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0, 0.0);
    let mut w = 1.0;
    for level in 0..3 {
        if level == 0 || model.has_level(level) {
            out.0 += w * 0.5 * model.d(level, 0, 2, x, 0.0);
            out.1 += w * 0.5 * model.d(level, 2, 2, x, 0.0);
            out.2 += w * model.d(level, 0, 1, x, 0.0);
            out.3 += w * model.d(level, 0, 0, x, 0.0);
        }
        w *= h;
    }
    out
}

/// The Hermitian operator matrix as `(S, A)` with `H = S + iA`.
pub fn discretize_complex(
    model: &SymbolModel,
    h: f64,
    domain: (f64, f64),
    n: usize,
    scheme: Scheme,
) -> Result<(DMatrix<f64>, DMatrix<f64>), OracleError> {
    model.require_quantizable()?;
    if n < 64 {
        return Err(OracleError::GridTooSmall(n));
    }
    let (xs, dx) = grid(domain, n);
    let coef: Vec<_> = xs.iter().map(|&x| coefficients(model, h, x)).collect();
    let t = minus_second_derivative(scheme, n, dx);
    let h2 = h * h;
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * h2 * (coef[i].0 + coef[j].0) * t[(i, j)];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        s[(i, i)] += 0.25 * h2 * coef[i].1 + coef[i].3;
    }
    let mut a = DMatrix::zeros(n, n);
    if coef.iter().any(|c| c.2 != 0.0) {
        // ½(b hD + hD b) = -(ih/2)(b D + D b)
        let d = first_derivative(scheme, n, dx);
        for i in 0..n {
            for j in i + 1..n {
                let v = -0.5 * h * (coef[i].2 + coef[j].2) * d[(i, j)];
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
    }
    Ok((s, a))
}

/// Real symmetric matrix of the operator. When first-order Weyl terms make it
/// complex, returns the `2N × 2N` real embedding `[[S, -A], [A, S]]`, whose
/// spectrum is that of `S + iA` with every eigenvalue doubled.
pub fn discretize(
    model: &SymbolModel,
    h: f64,
    domain: (f64, f64),
    n: usize,
) -> Result<DMatrix<f64>, OracleError> {
    discretize_with(model, h, domain, n, Scheme::default())
}

pub fn discretize_with(
    model: &SymbolModel,
    h: f64,
    domain: (f64, f64),
    n: usize,
    scheme: Scheme,
) -> Result<DMatrix<f64>, OracleError> {
    let (s, a) = discretize_complex(model, h, domain, n, scheme)?;
    if a.iter().all(|&v| v == 0.0) {
        return Ok(s);
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&s);
    m.view_mut((n, n), (n, n)).copy_from(&s);
    m.view_mut((0, n), (n, n)).copy_from(&(-&a));
    m.view_mut((n, 0), (n, n)).copy_from(&a);
    Ok(m)
}

struct Solved {
    values: Vec<f64>,
    boundary_mass: Vec<f64>,
}

fn solve(
    model: &SymbolModel,
    h: f64,
    domain: (f64, f64),
    n: usize,
    count: usize,
    scheme: Scheme,
) -> Result<Solved, OracleError> {
    let m = discretize_with(model, h, domain, n, scheme)?;
    let doubled = m.nrows() == 2 * n;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let stride = if doubled { 2 } else { 1 };
    let picked: Vec<usize> = order.iter().step_by(stride).copied().take(count).collect();
    if picked.len() < count {
        return Err(OracleError::TooFewStates {
            available: picked.len(),
            requested: count,
        });
    }
    let edge = (n / 20).max(2);
    let boundary_mass = picked
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            let w = |i: usize| {
                let mut s = v[i] * v[i];
                if doubled {
                    s += v[i + n] * v[i + n];
                }
                s
            };
            let total: f64 = (0..n).map(w).sum();
            let outer: f64 = (0..edge).chain(n - edge..n).map(w).sum();
            outer / total
        })
        .collect();
    Ok(Solved {
        values: picked.iter().map(|&k| eig.eigenvalues[k]).collect(),
        boundary_mass,
    })
}

/// Lowest `count` eigenvalues, computed at `N` and `2N`; the finer values are
/// returned with `|E(2N) - E(N)|` as their error estimate.
pub fn oracle_spectrum(
    model: &SymbolModel,
    h: f64,
    count: usize,
    opts: &OracleOptions,
) -> Result<OracleSpectrum, OracleError> {
    model.require_quantizable()?;
    let domain = match opts.domain {
        Some(d) => d,
        None => auto_domain(model, h, count)?,
    };
    check_domain(model, h, count, domain)?;
    let n = match opts.grid_size {
        Some(n) => n,
        None => auto_grid_size(model, h, domain, opts.scheme),
    };
    if n < 64 {
        return Err(OracleError::GridTooSmall(n));
    }
    let coarse = solve(model, h, domain, n, count, opts.scheme)?;
    let fine = solve(model, h, domain, 2 * n, count, opts.scheme)?;
    let mut errors = Vec::with_capacity(count);
    for (k, (a, b)) in coarse.values.iter().zip(&fine.values).enumerate() {
        let est = (a - b).abs();
        let bound = opts.tolerance * b.abs().max(1.0);
        if est > bound {
            return Err(OracleError::NotConverged {
                index: k,
                estimate: est,
                bound,
            });
        }
        errors.push(est);
    }
    for (k, &mass) in fine.boundary_mass.iter().enumerate() {
        if mass > 1e-8 {
            return Err(OracleError::BoundaryMass { index: k, mass });
        }
    }
    Ok(OracleSpectrum {
        h,
        domain,
        grid_size: 2 * n,
        eigenvalues: fine.values,
        error_estimates: errors,
        boundary_mass: fine.boundary_mass,
        scheme: opts.scheme,
    })
}

/// Grid nodes, eigenvalues and eigenvectors.
pub type Eigenpairs = (Vec<f64>, Vec<f64>, Vec<Vec<Complex64>>);

/// Lowest `count` eigenpairs on an explicit grid: grid nodes, eigenvalues and
/// eigenvectors (unit discrete norm; complex when first-order terms are present).
pub fn eigenpairs(
    model: &SymbolModel,
    h: f64,
    domain: (f64, f64),
    n: usize,
    count: usize,
    scheme: Scheme,
) -> Result<Eigenpairs, OracleError> {
    let m = discretize_with(model, h, domain, n, scheme)?;
    let doubled = m.nrows() == 2 * n;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let stride = if doubled { 2 } else { 1 };
    let picked: Vec<usize> = order.iter().step_by(stride).copied().take(count).collect();
    if picked.len() < count {
        return Err(OracleError::TooFewStates {
            available: picked.len(),
            requested: count,
        });
    }
    let vectors = picked
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            (0..n)
                .map(|i| Complex64::new(v[i], if doubled { v[i + n] } else { 0.0 }))
                .collect()
        })
        .collect();
    let values = picked.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok((grid(domain, n).0, values, vectors))
}

/// Energy whose leading-order action is `2πh(count + ½)`, a safe upper bound
/// for the lowest `count` levels. Levels beyond the well are capped at the
/// highest closed orbit.
fn top_energy(model: &SymbolModel, h: f64, count: usize) -> Result<f64, OracleError> {
    let (_, _, vmin) = model.well_minimum().ok_or(OrbitError::NoWell)?;
    let target = 2.0 * std::f64::consts::PI * h * (count as f64 + 0.5);
    let s0 = |e: f64| find_orbit(model, e).ok().map(|o| action_s0(&o, model));
    let mut lo = vmin;
    let mut hi = vmin + 1.0;
    let mut closed = None;
    for _ in 0..60 {
        match s0(hi) {
            Some(s) if s < target => {
                lo = hi;
                closed = Some(hi);
                hi = vmin + 2.0 * (hi - vmin);
            }
            _ => break,
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        match s0(mid) {
            Some(s) if s < target => {
                lo = mid;
                closed = Some(mid);
            }
            Some(_) => hi = mid,
            None => hi = mid,
        }
    }
    match s0(hi) {
        Some(_) => Ok(hi),
        None => closed.ok_or(OracleError::Sizing(OrbitError::Degenerate {
            energy: hi,
            minimum: vmin,
        })),
    }
}

fn turning_points(model: &SymbolModel, energy: f64) -> Result<(f64, f64), OracleError> {
    let (xr, xi) = start_point(model, energy)?;
    // Left turning point by mirror-image scan.
    let mirrored = |x: f64| model.p0(x, xi) - energy;
    let (xc, _, _) = model.well_minimum().ok_or(OrbitError::NoWell)?;
    let mut reach = 1.0;
    let bracket = loop {
        if let Some(b) = crate::numeric::roots::scan_for_sign_change(mirrored, xc, xc - reach, 400) {
            break b;
        }
        reach *= 2.0;
        if reach > 1e4 {
            return Err(OrbitError::Unbounded(energy).into());
        }
    };
    let xl = crate::numeric::roots::brent::<_, OrbitError>(
        |x| Ok(mirrored(x)),
        bracket.0,
        bracket.1,
        1e-14,
        200,
    )?;
    Ok((xl, xr))
}

/// Interval with a classically forbidden margin of `5 √h · max(1, half-width)`
/// beyond each turning point at the top energy.
pub fn auto_domain(model: &SymbolModel, h: f64, count: usize) -> Result<(f64, f64), OracleError> {
    let top = top_energy(model, h, count)?;
    let (xl, xr) = turning_points(model, top)?;
    let half = 0.5 * (xr - xl);
    let margin = (5.0 * h.sqrt() * half.max(1.0)).max(0.5 * half);
    Ok((xl - margin, xr + margin))
}

fn check_domain(
    model: &SymbolModel,
    h: f64,
    count: usize,
    domain: (f64, f64),
) -> Result<(), OracleError> {
    let top = top_energy(model, h, count)?;
    let (left, right) = turning_points(model, top)?;
    let slack = 0.2 * (domain.1 - domain.0);
    if left - domain.0 < slack.min(0.2 * (right - left)) || domain.1 - right < slack.min(0.2 * (right - left)) {
        return Err(OracleError::DomainTooSmall {
            lo: domain.0,
            hi: domain.1,
            left,
            right,
        });
    }
    Ok(())
}

/// Grid size resolving the largest local wavenumber `ξ/h` reachable below the
/// potential at the domain edges.
pub fn auto_grid_size(model: &SymbolModel, h: f64, domain: (f64, f64), scheme: Scheme) -> usize {
    let (_, _, vmin) = model.well_minimum().unwrap_or((0.0, 0.0, 0.0));
    let (xs, _) = grid(domain, 400);
    let a = xs
        .iter()
        .map(|&x| 0.5 * model.d(0, 0, 2, x, 0.0))
        .fold(f64::INFINITY, f64::min)
        .max(1e-12);
    let edge = model.p0(domain.0, 0.0).min(model.p0(domain.1, 0.0));
    let kmax = ((edge - vmin).max(1e-12) / a).sqrt() / h;
    let points_per_wave = match scheme {
        Scheme::Sinc => 1.5,
        Scheme::Fd4 => 12.0,
    };
    let dx = std::f64::consts::PI / (kmax * points_per_wave);
    let n = ((domain.1 - domain.0) / dx).ceil() as usize;
    n.clamp(64, 2048)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Monomial;

    #[test]
    fn harmonic_spectrum() {
        let m = SymbolModel::harmonic();
        let s = oracle_spectrum(&m, 0.1, 3, &OracleOptions::default()).unwrap();
        for (k, e) in s.eigenvalues.iter().enumerate() {
            assert!((e - 0.1 * (2 * k + 1) as f64).abs() < 1e-8, "{k}: {e}");
        }
    }

    #[test]
    fn shifted_harmonics() {
        let opts = OracleOptions::default();
        let m = SymbolModel::harmonic()
            .with_p1(vec![Monomial::new(1.0, 1, 0)])
            .unwrap();
        let s = oracle_spectrum(&m, 0.1, 1, &opts).unwrap();
        assert!((s.eigenvalues[0] - 0.0975).abs() < 1e-8);
        let m = SymbolModel::harmonic()
            .with_p2(vec![Monomial::new(1.0, 0, 0)])
            .unwrap();
        let s = oracle_spectrum(&m, 0.1, 1, &opts).unwrap();
        assert!((s.eigenvalues[0] - 0.11).abs() < 1e-8);
    }

    #[test]
    fn matrix_is_symmetric() {
        let m = SymbolModel::quartic_well()
            .with_p1(vec![Monomial::new(1.0, 1, 1)])
            .unwrap();
        for scheme in [Scheme::Sinc, Scheme::Fd4] {
            let a = discretize_with(&m, 0.1, (-2.0, 2.0), 80, scheme).unwrap();
            assert_eq!(a.nrows(), 160);
            assert_eq!((&a - a.transpose()).amax(), 0.0);
        }
    }

    #[test]
    fn multiplication_term_is_diagonal() {
        let base = SymbolModel::harmonic();
        let with = SymbolModel::harmonic()
            .with_p1(vec![Monomial::new(1.0, 1, 0)])
            .unwrap();
        let h = 0.1;
        let a = discretize(&base, h, (-3.0, 3.0), 64).unwrap();
        let b = discretize(&with, h, (-3.0, 3.0), 64).unwrap();
        let (xs, _) = grid((-3.0, 3.0), 64);
        let diff = b - a;
        for i in 0..64 {
            for j in 0..64 {
                let want = if i == j { h * xs[i] } else { 0.0 };
                assert!((diff[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_particle_above_constant() {
        let c = 0.7;
        let m = SymbolModel::polynomial(vec![
            Monomial::new(1.0, 0, 2),
            Monomial::new(c, 0, 0),
        ])
        .unwrap();
        let a = discretize(&m, 0.1, (-5.0, 5.0), 128).unwrap();
        let e = SymmetricEigen::new(a).eigenvalues.min();
        assert!(e > c && e < c + 1e-3);
    }

    #[test]
    fn first_order_term_matches_gauge_shift() {
        // ξ² + 2kξ + x² is unitarily equivalent to ξ² + x² - k².
        let k = 0.3;
        let m = SymbolModel::polynomial(vec![
            Monomial::new(1.0, 0, 2),
            Monomial::new(2.0 * k, 0, 1),
            Monomial::new(1.0, 2, 0),
        ])
        .unwrap();
        let opts = OracleOptions {
            domain: Some((-4.0, 4.0)),
            ..OracleOptions::default()
        };
        let s = oracle_spectrum(&m, 0.1, 2, &opts).unwrap();
        assert!((s.eigenvalues[0] - (0.1 - k * k)).abs() < 1e-8);
        assert!((s.eigenvalues[1] - (0.3 - k * k)).abs() < 1e-8);
    }

    #[test]
    fn variable_kinetic_coefficient() {
        // (1 + x²/4) ξ² + x²: compare the two schemes.
        let m = SymbolModel::polynomial(vec![
            Monomial::new(1.0, 0, 2),
            Monomial::new(0.25, 2, 2),
            Monomial::new(1.0, 2, 0),
        ])
        .unwrap();
        let domain = Some((-4.0, 4.0));
        let sinc = oracle_spectrum(&m, 0.1, 3, &OracleOptions { domain, ..Default::default() }).unwrap();
        let fd = oracle_spectrum(
            &m,
            0.1,
            3,
            &OracleOptions {
                domain,
                scheme: Scheme::Fd4,
                grid_size: Some(400),
                tolerance: 1e-5,
            },
        )
        .unwrap();
        for (a, b) in sinc.eigenvalues.iter().zip(&fd.eigenvalues) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = SymbolModel::harmonic();
        assert!(matches!(
            discretize(&m, 0.1, (-3.0, 3.0), 10),
            Err(OracleError::GridTooSmall(10))
        ));
        let cubic = SymbolModel::polynomial(vec![Monomial::new(1.0, 0, 4), Monomial::new(1.0, 2, 0)]).unwrap();
        assert!(matches!(
            discretize(&cubic, 0.1, (-3.0, 3.0), 64),
            Err(OracleError::Symbol(SymbolError::XiDegree(4)))
        ));
        let opts = OracleOptions {
            domain: Some((-0.4, 0.4)),
            ..Default::default()
        };
        assert!(matches!(
            oracle_spectrum(&m, 0.1, 3, &opts),
            Err(OracleError::DomainTooSmall { .. })
        ));
    }
}
