//! Spatial WKB quasimodes near the right focal point and their residual
//! `‖(P − E)u‖ / ‖u‖` under a finite-difference realization of `P`.

use num_complex::Complex64;
use thiserror::Error;

use crate::charts::{spatial_im_from_focal, substituted_integral, ChartError};
pub use crate::charts::branch_xi;
use crate::oracle::coefficients;
use crate::orbit::{find_orbit, Orbit, OrbitError};
use crate::symbol::{SymbolError, SymbolModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuasimodeError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("region [{lo}, {hi}] must stay {margin} away from the focal points {focal:?}")]
    RegionTooClose {
        lo: f64,
        hi: f64,
        margin: f64,
        focal: (f64, f64),
    },
    #[error("grid too coarse: k·dx = {0:.3} exceeds {1:.3}")]
    GridTooCoarse(f64, f64),
    #[error("need at least 5 uniformly spaced samples, got {0}")]
    TooFewSamples(usize),
    #[error("alternative amplitude correction is singular at x = {0} (∂x p0 = 0)")]
    AlternativeSingular(f64),
}

/// Which subprincipal amplitude correction multiplies `2∂ξp0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeCorrection {
    /// `exp[h ∂x(p1/∂ξp0)]`
    #[default]
    Verbatim,
    /// `exp[h ∂ξ(p1/∂xp0)]` on the branch.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasimodeOptions {
    pub amplitude: AmplitudeCorrection,
    /// Grid spacing is at most `h / points_per_h`.
    pub points_per_h: f64,
    /// Include the `h²` phase term.
    pub second_order_phase: bool,
}

impl Default for QuasimodeOptions {
    fn default() -> Self {
        QuasimodeOptions {
            amplitude: AmplitudeCorrection::Verbatim,
            points_per_h: 20.0,
            second_order_phase: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Quasimode {
    pub energy: f64,
    pub h: f64,
    pub region: (f64, f64),
    /// Right focal point `(x_E, ξ_E)` the phases are anchored at.
    pub anchor: (f64, f64),
    pub x_grid: Vec<f64>,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    pub phase_plus: Vec<f64>,
    pub phase_minus: Vec<f64>,
    pub branch_plus: Vec<Complex64>,
    pub branch_minus: Vec<Complex64>,
    pub combined: Vec<Complex64>,
}

/// Middle half of the classically allowed interval.
pub fn inner_half(orbit: &Orbit) -> (f64, f64) {
    let (lo, hi) = focal_xs(orbit);
    let q = 0.25 * (hi - lo);
    (lo + q, hi - q)
}

fn focal_xs(orbit: &Orbit) -> (f64, f64) {
    let [a, b] = [orbit.focal_points[0].x, orbit.focal_points[1].x];
    (a.min(b), a.max(b))
}

fn right_focal(orbit: &Orbit) -> (f64, f64) {
    let f = &orbit.focal_points;
    let p = if f[0].x > f[1].x { f[0] } else { f[1] };
    (p.x, p.xi)
}

/// `S±(x) = x_E ξ_E + ∫ξ± − h∫p1/∂ξp0 + h² (√2 Im D̃1)` from the focal point `anchor`.
pub fn phase_s(
    model: &SymbolModel,
    energy: f64,
    h: f64,
    sign: f64,
    xs: &[f64],
    anchor: (f64, f64),
) -> Result<Vec<f64>, QuasimodeError> {
    phase_terms(model, energy, h, sign, xs, anchor, true)
}

fn phase_terms(
    model: &SymbolModel,
    energy: f64,
    h: f64,
    sign: f64,
    xs: &[f64],
    anchor: (f64, f64),
    second_order: bool,
) -> Result<Vec<f64>, QuasimodeError> {
    let (xe, xie) = anchor;
    let last = std::cell::Cell::new(None);
    let xi_at = |y: f64| -> Result<f64, ChartError> {
        let v = branch_xi(model, energy, y, sign, last.get())?;
        last.set(Some(v));
        Ok(v)
    };
    let i0 = substituted_integral(xs, xe, &xi_at)?;
    let i1 = if model.has_level(1) {
        substituted_integral(xs, xe, |y| {
            let xi = xi_at(y)?;
            Ok(model.eval(1, y, xi) / model.p0_xi(y, xi))
        })?
    } else {
        vec![0.0; xs.len()]
    };
    let i2 = if second_order && (model.has_level(1) || model.has_level(2)) {
        spatial_im_from_focal(model, energy, sign, xe, xs, 1.0)?
    } else {
        vec![0.0; xs.len()]
    };
    Ok((0..xs.len())
        .map(|k| xe * xie + i0[k] - h * i1[k] + h * h * i2[k])
        .collect())
}

fn amplitude_correction(
    model: &SymbolModel,
    kind: AmplitudeCorrection,
    x: f64,
    xi: f64,
) -> Result<f64, QuasimodeError> {
    if !model.has_level(1) {
        return Ok(0.0);
    }
    let p1 = model.eval(1, x, xi);
    let pxxi = model.d(0, 1, 1, x, xi);
    Ok(match kind {
        AmplitudeCorrection::Verbatim => {
            let b0 = model.p0_xi(x, xi);
            (model.d(1, 1, 0, x, xi) * b0 - p1 * pxxi) / (b0 * b0)
        }
        AmplitudeCorrection::Alternative => {
            let a = model.p0_x(x, xi);
            let num = model.d(1, 0, 1, x, xi) * a - p1 * pxxi;
            if num == 0.0 {
                0.0
            } else if a == 0.0 {
                return Err(QuasimodeError::AlternativeSingular(x));
            } else {
                num / (a * a)
            }
        }
    })
}

/// WKB quasimode on `region` at energy `E`.
pub fn build_wkb(
    model: &SymbolModel,
    energy: f64,
    h: f64,
    region: (f64, f64),
    opts: &QuasimodeOptions,
) -> Result<Quasimode, QuasimodeError> {
    let orbit = find_orbit(model, energy)?;
    build_wkb_on(model, &orbit, h, region, opts)
}

pub fn build_wkb_on(
    model: &SymbolModel,
    orbit: &Orbit,
    h: f64,
    region: (f64, f64),
    opts: &QuasimodeOptions,
) -> Result<Quasimode, QuasimodeError> {
    let energy = orbit.energy;
    let focal = focal_xs(orbit);
    let margin = 0.2 * (focal.1 - focal.0);
    let (lo, hi) = region;
    if !(lo < hi && lo >= focal.0 + margin && hi <= focal.1 - margin) {
        return Err(QuasimodeError::RegionTooClose {
            lo,
            hi,
            margin,
            focal,
        });
    }
    let dx_max = h / opts.points_per_h;
    let n = (((hi - lo) / dx_max).ceil() as usize + 1).max(16);
    let x_grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let anchor = right_focal(orbit);

    let mut branches = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let mut xi = Vec::with_capacity(n);
        let mut guess = None;
        for &x in &x_grid {
            let v = branch_xi(model, energy, x, sign, guess)?;
            guess = Some(v);
            xi.push(v);
        }
        let phase = phase_terms(model, energy, h, sign, &x_grid, anchor, opts.second_order_phase)?;
        let mut u = Vec::with_capacity(n);
        for k in 0..n {
            let (x, p) = (x_grid[k], xi[k]);
            let corr = amplitude_correction(model, opts.amplitude, x, p)?;
            let amp = (2.0 * model.p0_xi(x, p).abs() * (h * corr).exp()).powf(-0.5);
            u.push(amp * Complex64::from_polar(1.0, phase[k] / h));
        }
        branches.push((xi, phase, u));
    }
    let (xi_minus, phase_minus, branch_minus) = branches.pop().expect("two branches");
    let (xi_plus, phase_plus, branch_plus) = branches.pop().expect("two branches");
    let w = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let combined = branch_plus
        .iter()
        .zip(&branch_minus)
        .map(|(p, m)| w * p + w.conj() * m)
        .collect();
    Ok(Quasimode {
        energy,
        h,
        region,
        anchor,
        x_grid,
        xi_plus,
        xi_minus,
        phase_plus,
        phase_minus,
        branch_plus,
        branch_minus,
        combined,
    })
}

fn d1(u: &[Complex64], i: usize, dx: f64) -> Complex64 {
    (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * dx)
}

fn d2(u: &[Complex64], i: usize, dx: f64) -> Complex64 {
    (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) / (12.0 * dx * dx)
}

/// `P u` at the interior nodes `xs[2..n-2]` for `P = Op^w(p0 + h p1 + h² p2)`
/// with `ξ`-degree at most 2, using fourth-order central differences.
pub fn apply_operator(
    model: &SymbolModel,
    h: f64,
    xs: &[f64],
    u: &[Complex64],
) -> Result<Vec<Complex64>, QuasimodeError> {
    model.require_quantizable()?;
    let n = xs.len();
    if n < 5 || u.len() != n {
        return Err(QuasimodeError::TooFewSamples(n.min(u.len())));
    }
    let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let coef: Vec<_> = xs.iter().map(|&x| coefficients(model, h, x)).collect();
    let au: Vec<Complex64> = coef.iter().zip(u).map(|(c, v)| c.0 * v).collect();
    let bu: Vec<Complex64> = coef.iter().zip(u).map(|(c, v)| c.2 * v).collect();
    let i = Complex64::i();
    let h2 = h * h;
    Ok((2..n - 2)
        .map(|k| {
            let (a, app, b, c) = coef[k];
            // (hD)² = -h² ∂², hD = -ih ∂
            let kinetic = -0.5 * h2 * (a * d2(u, k, dx) + d2(&au, k, dx)) + 0.25 * h2 * app * u[k];
            let drift = -0.5 * i * h * (b * d1(u, k, dx) + d1(&bu, k, dx));
            kinetic + drift + c * u[k]
        })
        .collect())
}

/// Largest `|ξ| dx / h` over the quasimode's branches.
pub fn resolution(q: &Quasimode) -> f64 {
    let n = q.x_grid.len();
    let dx = (q.x_grid[n - 1] - q.x_grid[0]) / (n - 1) as f64;
    let kmax = q
        .xi_plus
        .iter()
        .chain(&q.xi_minus)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    kmax * dx / q.h
}

/// Largest acceptable `k·dx`: ten samples per local wavelength.
pub const MAX_RESOLUTION: f64 = std::f64::consts::PI / 5.0;

/// Discrete `‖(P − E)u‖₂ / ‖u‖₂` over the interior nodes.
pub fn residual_of(
    model: &SymbolModel,
    h: f64,
    energy: f64,
    xs: &[f64],
    u: &[Complex64],
) -> Result<f64, QuasimodeError> {
    let pu = apply_operator(model, h, xs, u)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, v) in pu.iter().enumerate() {
        let uk = u[k + 2];
        num += (v - energy * uk).norm_sqr();
        den += uk.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Residual of a built quasimode.
pub fn residual_norm(model: &SymbolModel, q: &Quasimode) -> Result<f64, QuasimodeError> {
    let r = resolution(q);
    if r > MAX_RESOLUTION {
        return Err(QuasimodeError::GridTooCoarse(r, MAX_RESOLUTION));
    }
    residual_of(model, q.h, q.energy, &q.x_grid, &q.combined)
}

/// Builds the quasimode on the inner half of the allowed region and returns its residual.
pub fn inner_residual(
    model: &SymbolModel,
    energy: f64,
    h: f64,
    opts: &QuasimodeOptions,
) -> Result<f64, QuasimodeError> {
    let orbit = find_orbit(model, energy)?;
    let q = build_wkb_on(model, &orbit, h, inner_half(&orbit), opts)?;
    residual_norm(model, &q)
}
