//! WKB data on Fourier charts (arcs of `γ_E` parameterized by `ξ`) and on
//! spatial charts (arcs parameterized by `x`).
//!
//! On a Fourier chart the arc is `x = X(ξ)` with `p0(X(ξ), ξ) = E` and the
//! generating phase satisfies `ψ' = -X`. Derivatives of `X` come from
//! differentiating the level-set relation, never from differencing samples.

use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::quad::{cumulative, GaussLegendre};
use crate::numeric::roots::{brent, RootError};
use crate::orbit::{find_orbit, Orbit, OrbitError};
use crate::symbol::SymbolModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("chart boundary reached at {at}: level set has no simple root on this branch")]
    NoRoot { at: f64 },
    #[error("chart degenerates at {at}: |{what}| = {value:e} below {bound:e}")]
    Boundary {
        at: f64,
        what: &'static str,
        value: f64,
        bound: f64,
    },
    #[error("anchor {anchor} lies outside the chart interval [{lo}, {hi}]")]
    AnchorOutside { anchor: f64, lo: f64, hi: f64 },
    #[error("charts do not overlap")]
    EmptyOverlap,
    #[error("∂ξp1 · p1 = {0:e} at the focal point; the spatial correction is not integrable there")]
    SingularAtFocal(f64),
    #[error("interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),
}

/// Which `x`-root of `p0(·, ξ) = E` a Fourier chart follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Root to the right of the well (`∂x p0 > 0`).
    Right,
    /// Root to the left of the well (`∂x p0 < 0`).
    Left,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Right => 1.0,
            Branch::Left => -1.0,
        }
    }
}

/// Default normalization `C0 = 1/√2`.
pub const C0: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Newton iteration on `g` with derivative `dg`, accepted only if it converges
/// to a point where `dg` has the sign `dir`.
fn newton<G>(g: G, mut t: f64, dir: f64) -> Option<f64>
where
    G: Fn(f64) -> (f64, f64),
{
    for _ in 0..40 {
        let (v, d) = g(t);
        if !v.is_finite() || !d.is_finite() || d == 0.0 {
            return None;
        }
        let step = v / d;
        t -= step;
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            let (v, d) = g(t);
            let scale = 1.0 + v.abs();
            return (d * dir > 0.0 && v.abs() < 1e-10 * scale).then_some(t);
        }
    }
    None
}

/// Root of `g(t) = 0` reached by walking from `t0()` in direction `dir`, where
/// `g(t0) < 0`. `g` returns the value and its derivative. A Newton solve from
/// `guess` is tried first and accepted if it lands where `g' · dir > 0`.
fn outward_root<G, T>(g: G, t0: T, dir: f64, guess: Option<f64>) -> Result<f64, ChartError>
where
    G: Fn(f64) -> (f64, f64),
    T: FnOnce() -> Result<f64, ChartError>,
{
    if let Some(t) = guess.and_then(|t| newton(&g, t, dir)) {
        return Ok(t);
    }
    let t0 = t0()?;
    if g(t0).0 >= 0.0 {
        return Err(ChartError::NoRoot { at: t0 });
    }
    let mut step = 0.01;
    let mut a = t0;
    let b = loop {
        let b = a + dir * step;
        if g(b).0 > 0.0 {
            break b;
        }
        a = b;
        step *= 1.5;
        if step > 1e6 {
            return Err(ChartError::NoRoot { at: t0 });
        }
    };
    let t = brent::<_, ChartError>(|t| Ok(g(t).0), a, b, 1e-15, 200)?;
    Ok(newton(&g, t, dir).unwrap_or(t))
}

/// Minimizer of `t ↦ f(t)` near `t0` by Newton on the derivative; falls back to `t0`.
fn local_min<F: Fn(f64) -> (f64, f64)>(df: F, t0: f64) -> f64 {
    let mut t = t0;
    for _ in 0..30 {
        let (d1, d2) = df(t);
        if d2 <= 0.0 || !d2.is_finite() {
            return t0;
        }
        let step = d1 / d2;
        t -= step;
        if step.abs() < 1e-14 * (1.0 + t.abs()) {
            return t;
        }
    }
    if t.is_finite() {
        t
    } else {
        t0
    }
}

/// `X(ξ)`: the root of `p0(·, ξ) = E` on `branch`.
pub fn x_root(
    model: &SymbolModel,
    energy: f64,
    xi: f64,
    branch: Branch,
    guess: Option<f64>,
) -> Result<f64, ChartError> {
    let x0 = || -> Result<f64, ChartError> {
        let (xc, _, _) = model.well_minimum().ok_or(OrbitError::NoWell)?;
        Ok(local_min(|x| (model.d(0, 1, 0, x, xi), model.d(0, 2, 0, x, xi)), xc))
    };
    outward_root(
        |x| (model.p0(x, xi) - energy, model.p0_x(x, xi)),
        x0,
        branch.sign(),
        guess,
    )
}

/// `ξ±(x)`: the root of `p0(x, ·) = E` with `±∂ξp0 > 0`, Newton-polished.
pub fn branch_xi(
    model: &SymbolModel,
    energy: f64,
    x: f64,
    sign: f64,
    guess: Option<f64>,
) -> Result<f64, ChartError> {
    let t0 = || -> Result<f64, ChartError> {
        let (_, xic, _) = model.well_minimum().ok_or(OrbitError::NoWell)?;
        Ok(local_min(|xi| (model.d(0, 0, 1, x, xi), model.d(0, 0, 2, x, xi)), xic))
    };
    outward_root(
        |xi| (model.p0(x, xi) - energy, model.p0_xi(x, xi)),
        t0,
        sign.signum(),
        guess,
    )
}

/// Local differential data of a Fourier chart at one `ξ`.
#[derive(Debug, Clone, Copy)]
pub struct FourierPoint {
    pub xi: f64,
    /// `X = -ψ'`
    pub x: f64,
    /// `X', X'', X'''`
    pub dx: [f64; 3],
    /// `α, α', α''`
    pub alpha: [f64; 3],
    /// `∂x^i ∂ξ^j p0` at `(X, ξ)` for `i + j ≤ 4`.
    pub p0: [[f64; 5]; 5],
    /// `∂x^i ∂ξ^j p1` for `i + j ≤ 2`.
    pub p1: [[f64; 3]; 3],
    pub p2: f64,
}

impl FourierPoint {
    pub fn at(model: &SymbolModel, xi: f64, x: f64) -> Self {
        let mut p0 = [[0.0; 5]; 5];
        for (i, row) in p0.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().take(5 - i) {
                *v = model.d(0, i, j, x, xi);
            }
        }
        let mut p1 = [[0.0; 3]; 3];
        if model.has_level(1) {
            for (i, row) in p1.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate().take(3 - i) {
                    *v = model.d(1, i, j, x, xi);
                }
            }
        }
        let p2 = model.eval(2, x, xi);
        let px = p0[1][0];
        let x1 = -p0[0][1] / px;
        let x2 = -(p0[2][0] * x1 * x1 + 2.0 * p0[1][1] * x1 + p0[0][2]) / px;
        let x3 = -(p0[3][0] * x1.powi(3)
            + 3.0 * p0[2][1] * x1 * x1
            + 3.0 * p0[1][2] * x1
            + p0[0][3]
            + 3.0 * p0[2][0] * x1 * x2
            + 3.0 * p0[1][1] * x2)
            / px;
        let a1 = p0[2][0] * x1 + p0[1][1];
        let a2 = p0[3][0] * x1 * x1 + 2.0 * p0[2][1] * x1 + p0[1][2] + p0[2][0] * x2;
        FourierPoint {
            xi,
            x,
            dx: [x1, x2, x3],
            alpha: [px, a1, a2],
            p0,
            p1,
            p2,
        }
    }

    /// `ψ'' = -X'`
    pub fn psi2(&self) -> f64 {
        -self.dx[0]
    }

    /// `ψ', ψ'', ψ''', ψ''''`
    pub fn psi_derivs(&self) -> [f64; 4] {
        [-self.x, -self.dx[0], -self.dx[1], -self.dx[2]]
    }

    /// Density `T1` of `Im Ω1` in the Fourier chart.
    pub fn t1(&self) -> f64 {
        let p = &self.p0;
        let [a, a1, _] = self.alpha;
        let s2 = self.psi2();
        let q1 = self.p1[0][0];
        let q1x = self.p1[1][0];
        (self.p2 - p[2][2] / 8.0 + s2 / 12.0 * p[3][1] + s2 * s2 / 24.0 * p[4][0]) / a
            + a1 * a1 / (8.0 * a.powi(3)) * p[2][0]
            + s2 * a1 / (6.0 * a * a) * p[3][0]
            - q1 / (a * a) * (q1x - q1 / (2.0 * a) * p[2][0])
    }

    /// `∂x(p1 / ∂x p0)` at `(X, ξ)`.
    pub fn re_bracket(&self) -> f64 {
        let px = self.p0[1][0];
        (self.p1[1][0] * px - self.p1[0][0] * self.p0[2][0]) / (px * px)
    }

    /// `ψ''/(6α) ∂x³p0 + α'/(4α²) ∂x²p0`
    pub fn im_bracket(&self) -> f64 {
        let [a, a1, _] = self.alpha;
        self.psi2() / (6.0 * a) * self.p0[3][0] + a1 / (4.0 * a * a) * self.p0[2][0]
    }

    /// Integrand of the defining integral of `D1` divided by `C0`, with the
    /// removable singularity of `∂ξλ0` at `x + ψ' = 0` resolved by Taylor
    /// expansion in `x`.
    pub fn d1_direct_integrand(&self) -> Complex64 {
        let i = Complex64::i();
        let p = &self.p0;
        let q = &self.p1;
        let [x1, x2, _] = self.dx;
        let [a, a1, a2] = self.alpha;
        let q1 = q[0][0];
        let q1d = q[1][0] * x1 + q[0][1];
        let beta = Complex64::new(-a1 / (2.0 * a), q1 / a);
        let beta_d = Complex64::new(
            -a2 / (2.0 * a) + a1 * a1 / (2.0 * a * a),
            q1d / a - q1 * a1 / (a * a),
        );
        let n1 = q[1][0] + i * 0.5 * beta * p[2][0] + i * (x1 * p[3][0] / 6.0);
        let n1_d = Complex64::from(q[2][0] * x1 + q[1][1])
            + i * 0.5 * (beta_d * p[2][0] + beta * (p[3][0] * x1 + p[2][1]))
            + i * ((x2 * p[3][0] + x1 * (p[4][0] * x1 + p[3][1])) / 6.0);
        let n2 = Complex64::from(q[2][0] / 2.0) - i * (p[3][1] / 12.0)
            + i * beta * (p[3][0] / 6.0)
            + i * (x1 * p[4][0] / 24.0);
        let p2t = Complex64::new(self.p2 - p[2][2] / 8.0, -q[1][1] / 2.0);
        (i * p2t - beta * n1 - n1_d + x1 * n2) / a
    }
}

/// Arc of `γ_E` in the Fourier representation, with WKB data on a `ξ` grid.
#[derive(Debug, Clone)]
pub struct ChartData {
    pub energy: f64,
    pub branch: Branch,
    pub c0: f64,
    pub xi_grid: Vec<f64>,
    /// Index of `ξ_E` in `xi_grid`.
    pub anchor: usize,
    pub xi_anchor: f64,
    pub psi: Vec<f64>,
    pub psi_derivs: Vec<[f64; 4]>,
    pub alpha: Vec<f64>,
    pub b0: Vec<Complex64>,
    pub t1: Vec<f64>,
    /// `D1` by the reduced (integrated-by-parts) formulas.
    pub d1: Vec<Complex64>,
    pub points: Vec<FourierPoint>,
    /// `|α|` below which the chart is considered degenerate.
    pub alpha_floor: f64,
}

/// Focal point of `orbit` on `branch` (largest or smallest `x`).
fn focal_on(orbit: &Orbit, branch: Branch) -> (f64, f64) {
    let f = &orbit.focal_points;
    let p = if (f[0].x - f[1].x) * branch.sign() > 0.0 {
        f[0]
    } else {
        f[1]
    };
    (p.x, p.xi)
}

fn alpha_floor(orbit: &Orbit, model: &SymbolModel) -> f64 {
    1e-3 * orbit
        .samples
        .iter()
        .map(|p| model.p0_x(p.x, p.xi).abs())
        .fold(0.0, f64::max)
}

fn beta_floor(orbit: &Orbit, model: &SymbolModel) -> f64 {
    1e-3 * orbit
        .samples
        .iter()
        .map(|p| model.p0_xi(p.x, p.xi).abs())
        .fold(0.0, f64::max)
}

/// Polishes the focal point: `∂ξp0(X(ξ), ξ) = 0` by Newton along the branch.
fn refine_focal(
    model: &SymbolModel,
    energy: f64,
    branch: Branch,
    x: f64,
    xi: f64,
) -> Result<(f64, f64), ChartError> {
    let (mut x, mut xi) = (x, xi);
    for _ in 0..8 {
        x = x_root(model, energy, xi, branch, Some(x))?;
        let p = FourierPoint::at(model, xi, x);
        let g = p.p0[0][1];
        let dg = p.p0[1][1] * p.dx[0] + p.p0[0][2];
        if g == 0.0 || dg == 0.0 {
            break;
        }
        let step = g / dg;
        xi -= step;
        if step.abs() < 1e-15 * (1.0 + xi.abs()) {
            break;
        }
    }
    Ok((x_root(model, energy, xi, branch, Some(x))?, xi))
}

/// Grid of `n` points over `[lo, hi]` that contains `anchor` as a node.
fn anchored_grid(lo: f64, hi: f64, anchor: f64, n: usize) -> (Vec<f64>, usize) {
    let n = n.max(3);
    let left = (((anchor - lo) / (hi - lo)) * (n - 1) as f64).round() as usize;
    let left = left.min(n - 1);
    let right = n - 1 - left;
    let mut g = Vec::with_capacity(n);
    for k in 0..left {
        g.push(lo + (anchor - lo) * k as f64 / left as f64);
    }
    g.push(anchor);
    for k in 1..=right {
        g.push(anchor + (hi - anchor) * k as f64 / right as f64);
    }
    (g, left)
}

/// `ξ`-interval of the chart around the focal point on `branch`, covering a
/// fraction `frac` of the way to the ends of the orbit's `ξ` range.
pub fn default_xi_interval(orbit: &Orbit, branch: Branch, frac: f64) -> (f64, f64) {
    let (_, xie) = focal_on(orbit, branch);
    let (lo, hi) = orbit.xi_range();
    (xie - frac * (xie - lo), xie + frac * (hi - xie))
}

/// Builds the Fourier chart on `branch` over `xi_interval` with `n` grid points.
pub fn eikonal_fourier(
    model: &SymbolModel,
    energy: f64,
    xi_interval: (f64, f64),
    branch: Branch,
    n: usize,
) -> Result<ChartData, ChartError> {
    let orbit = find_orbit(model, energy)?;
    eikonal_fourier_on(model, &orbit, xi_interval, branch, n)
}

pub fn eikonal_fourier_on(
    model: &SymbolModel,
    orbit: &Orbit,
    xi_interval: (f64, f64),
    branch: Branch,
    n: usize,
) -> Result<ChartData, ChartError> {
    let energy = orbit.energy;
    let (lo, hi) = xi_interval;
    if hi <= lo {
        return Err(ChartError::EmptyInterval(lo, hi));
    }
    let (xe, xie) = focal_on(orbit, branch);
    let (xe, xie) = refine_focal(model, energy, branch, xe, xie)?;
    if !(lo..=hi).contains(&xie) {
        return Err(ChartError::AnchorOutside { anchor: xie, lo, hi });
    }
    let floor = alpha_floor(orbit, model);
    let (xi_grid, anchor) = anchored_grid(lo, hi, xie, n);
    let mut points = Vec::with_capacity(xi_grid.len());
    // Walk outward from the anchor so every root solve has a nearby guess.
    let mut xs = vec![0.0; xi_grid.len()];
    xs[anchor] = x_root(model, energy, xie, branch, Some(xe))?;
    for k in anchor + 1..xi_grid.len() {
        xs[k] = x_root(model, energy, xi_grid[k], branch, Some(xs[k - 1]))?;
    }
    for k in (0..anchor).rev() {
        xs[k] = x_root(model, energy, xi_grid[k], branch, Some(xs[k + 1]))?;
    }
    for (&xi, &x) in xi_grid.iter().zip(&xs) {
        let pt = FourierPoint::at(model, xi, x);
        if pt.alpha[0].abs() < floor {
            return Err(ChartError::Boundary {
                at: xi,
                what: "α",
                value: pt.alpha[0].abs(),
                bound: floor,
            });
        }
        points.push(pt);
    }
    let mut chart = ChartData {
        energy,
        branch,
        c0: C0,
        xi_anchor: xie,
        anchor,
        psi: Vec::new(),
        psi_derivs: points.iter().map(|p| p.psi_derivs()).collect(),
        alpha: points.iter().map(|p| p.alpha[0]).collect(),
        b0: Vec::new(),
        t1: points.iter().map(|p| p.t1()).collect(),
        d1: Vec::new(),
        xi_grid,
        points,
        alpha_floor: floor,
    };
    let psi = {
        let mut sol = chart.solver(model);
        cumulative(&chart.xi_grid, anchor, |xi| sol.point(xi).map(|p| -p.x))?
    };
    chart.psi = psi;
    chart.b0 = transport_b0(&chart, model, chart.c0)?;
    let int_t1 = {
        let mut sol = chart.solver(model);
        cumulative(&chart.xi_grid, anchor, |xi| sol.point(xi).map(|p| p.t1()))?
    };
    let (re0, im0) = {
        let a = &chart.points[anchor];
        (a.re_bracket(), a.im_bracket())
    };
    chart.d1 = chart
        .points
        .iter()
        .zip(&int_t1)
        .map(|(p, it)| {
            let re = -0.5 * (p.re_bracket() - re0);
            let im = it + p.im_bracket() - im0;
            chart.c0 * Complex64::new(re, im)
        })
        .collect();
    Ok(chart)
}

/// Point evaluator that reuses the previous root as a Newton guess.
pub struct ChartSolver<'a> {
    model: &'a SymbolModel,
    energy: f64,
    branch: Branch,
    last: Option<f64>,
    fallback: (Vec<f64>, Vec<f64>),
}

impl ChartSolver<'_> {
    fn guess(&self, xi: f64) -> f64 {
        let (g, x) = &self.fallback;
        let k = g.partition_point(|&v| v < xi).clamp(1, g.len() - 1);
        let t = (xi - g[k - 1]) / (g[k] - g[k - 1]);
        x[k - 1] + t * (x[k] - x[k - 1])
    }

    pub fn point(&mut self, xi: f64) -> Result<FourierPoint, ChartError> {
        let guess = self.guess(xi);
        let x = x_root(self.model, self.energy, xi, self.branch, Some(guess))?;
        self.last = Some(x);
        Ok(FourierPoint::at(self.model, xi, x))
    }
}

impl ChartData {
    pub fn solver<'a>(&self, model: &'a SymbolModel) -> ChartSolver<'a> {
        ChartSolver {
            model,
            energy: self.energy,
            branch: self.branch,
            last: None,
            fallback: (self.xi_grid.clone(), self.points.iter().map(|p| p.x).collect()),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.xi_grid[0], *self.xi_grid.last().expect("non-empty grid"))
    }

    pub fn contains(&self, xi: f64) -> bool {
        let (lo, hi) = self.interval();
        (lo..=hi).contains(&xi)
    }

    /// Chart data at an arbitrary `ξ` inside the chart.
    pub fn point(&self, model: &SymbolModel, xi: f64) -> Result<FourierPoint, ChartError> {
        if !self.contains(xi) {
            let (lo, hi) = self.interval();
            return Err(ChartError::AnchorOutside { anchor: xi, lo, hi });
        }
        self.solver(model).point(xi)
    }

    /// `∫_a^b f(point) dξ` by Gauss–Legendre on panels no wider than the grid spacing.
    pub fn integrate<F>(&self, model: &SymbolModel, a: f64, b: f64, mut f: F) -> Result<f64, ChartError>
    where
        F: FnMut(&FourierPoint) -> f64,
    {
        if a == b {
            return Ok(0.0);
        }
        let spacing = (self.interval().1 - self.interval().0) / (self.xi_grid.len() - 1) as f64;
        let panels = ((b - a).abs() / spacing).ceil().max(1.0) as usize;
        let rule = GaussLegendre::standard();
        let mut sol = self.solver(model);
        let mut acc = 0.0;
        for k in 0..panels {
            let lo = a + (b - a) * k as f64 / panels as f64;
            let hi = a + (b - a) * (k + 1) as f64 / panels as f64;
            acc += rule.try_integrate(lo, hi, |xi| sol.point(xi).map(|p| f(&p)))?;
        }
        Ok(acc)
    }
}

/// `b0(ξ) = C0 |α|^{-1/2} exp(i ∫_{ξ_E}^ξ p1/α)` on the chart grid.
pub fn transport_b0(
    chart: &ChartData,
    model: &SymbolModel,
    c0: f64,
) -> Result<Vec<Complex64>, ChartError> {
    let phase = if model.has_level(1) {
        let mut sol = chart.solver(model);
        cumulative(&chart.xi_grid, chart.anchor, |xi| {
            sol.point(xi).map(|p| p.p1[0][0] / p.alpha[0])
        })?
    } else {
        vec![0.0; chart.xi_grid.len()]
    };
    Ok(chart
        .alpha
        .iter()
        .zip(phase)
        .map(|(a, th)| c0 * a.abs().powf(-0.5) * Complex64::from_polar(1.0, th))
        .collect())
}

/// `T1` at an arbitrary `ξ` in the chart.
pub fn t1_density(chart: &ChartData, model: &SymbolModel, xi: f64) -> Result<f64, ChartError> {
    Ok(chart.point(model, xi)?.t1())
}

/// `D1(ξ)` by the reduced formulas:
/// `√2 Re D1 = -½[∂x(p1/∂xp0)]`, `√2 Im D1 = ∫T1 + [ψ''/(6α) ∂x³p0 + α'/(4α²) ∂x²p0]`,
/// brackets and integral running from `ξ_E` to `ξ` (here `√2 = 1/C0`).
pub fn d1_fourier(chart: &ChartData, model: &SymbolModel, xi: f64) -> Result<Complex64, ChartError> {
    let p = chart.point(model, xi)?;
    let a = &chart.points[chart.anchor];
    let int_t1 = chart.integrate(model, chart.xi_anchor, xi, |q| q.t1())?;
    let re = -0.5 * (p.re_bracket() - a.re_bracket());
    let im = int_t1 + p.im_bracket() - a.im_bracket();
    Ok(chart.c0 * Complex64::new(re, im))
}

/// `D1(ξ)` by direct quadrature of its defining integral.
pub fn d1_direct(chart: &ChartData, model: &SymbolModel, xi: f64) -> Result<Complex64, ChartError> {
    chart.point(model, xi)?;
    let re = chart.integrate(model, chart.xi_anchor, xi, |q| q.d1_direct_integrand().re)?;
    let im = chart.integrate(model, chart.xi_anchor, xi, |q| q.d1_direct_integrand().im)?;
    Ok(chart.c0 * Complex64::new(re, im))
}

/// Arc of `γ_E` in the spatial representation on the `ξ±` branch.
#[derive(Debug, Clone)]
pub struct SpatialChartData {
    pub energy: f64,
    /// `+1` or `-1`: the branch with `±∂ξp0 > 0`.
    pub sign: f64,
    pub c0: f64,
    pub x_grid: Vec<f64>,
    pub xi: Vec<f64>,
    /// `φ(x) = ∫_{x_a}^x ξ±(y) dy`, anchored at the first node.
    pub phi: Vec<f64>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub d1_tilde: Vec<Complex64>,
}

/// `β1 p1 / β0² - p2 / β0` at `(x, ξ)`: density of `Im D̃1 / C0`.
pub fn spatial_im_density(model: &SymbolModel, x: f64, xi: f64) -> f64 {
    let b0 = model.p0_xi(x, xi);
    let b1 = model.d(1, 0, 1, x, xi);
    b1 * model.eval(1, x, xi) / (b0 * b0) - model.eval(2, x, xi) / b0
}

/// Spatial chart over `[lo, hi]` strictly between the focal points, anchored at `lo`.
pub fn spatial_chart(
    model: &SymbolModel,
    energy: f64,
    sign: f64,
    interval: (f64, f64),
    n: usize,
) -> Result<SpatialChartData, ChartError> {
    let orbit = find_orbit(model, energy)?;
    spatial_chart_on(model, &orbit, sign, interval, n)
}

pub fn spatial_chart_on(
    model: &SymbolModel,
    orbit: &Orbit,
    sign: f64,
    interval: (f64, f64),
    n: usize,
) -> Result<SpatialChartData, ChartError> {
    let energy = orbit.energy;
    let (lo, hi) = interval;
    if hi <= lo || n < 2 {
        return Err(ChartError::EmptyInterval(lo, hi));
    }
    let floor = beta_floor(orbit, model);
    let x_grid: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let mut xi = Vec::with_capacity(n);
    let mut guess = None;
    for &x in &x_grid {
        let v = branch_xi(model, energy, x, sign, guess)?;
        guess = Some(v);
        xi.push(v);
    }
    let beta0: Vec<f64> = x_grid.iter().zip(&xi).map(|(&x, &p)| model.p0_xi(x, p)).collect();
    for (&x, b) in x_grid.iter().zip(&beta0) {
        if b.abs() < floor {
            return Err(ChartError::Boundary {
                at: x,
                what: "β0",
                value: b.abs(),
                bound: floor,
            });
        }
    }
    let beta1: Vec<f64> = x_grid.iter().zip(&xi).map(|(&x, &p)| model.d(1, 0, 1, x, p)).collect();
    let solve = |x: f64| {
        let k = x_grid.partition_point(|&g| g < x).min(n - 1);
        branch_xi(model, energy, x, sign, Some(xi[k]))
    };
    let phi = cumulative(&x_grid, 0, solve)?;
    let im = cumulative(&x_grid, 0, |x| solve(x).map(|p| spatial_im_density(model, x, p)))?;
    let c0 = C0;
    let re0 = beta1[0] / beta0[0];
    let d1_tilde = beta0
        .iter()
        .zip(&beta1)
        .zip(&im)
        .map(|((b0, b1), im)| Complex64::new(-0.5 * c0 * (b1 / b0 - re0), c0 * im))
        .collect();
    Ok(SpatialChartData {
        energy,
        sign,
        c0,
        x_grid,
        xi,
        phi,
        beta0,
        beta1,
        d1_tilde,
    })
}

/// `D̃1(x)` at a grid node of the spatial chart.
pub fn d1_spatial(schart: &SpatialChartData, x: f64) -> Option<Complex64> {
    schart
        .x_grid
        .iter()
        .position(|&g| g == x)
        .map(|k| schart.d1_tilde[k])
}

/// `C0 ∫_{x_E}^{x} (β1 p1/β0² - p2/β0) dy` from the focal point `x_E`, with the
/// `√(x_E - y)` endpoint behaviour removed by `y = x_E + s w²`.
pub fn spatial_im_from_focal(
    model: &SymbolModel,
    energy: f64,
    sign: f64,
    focal_x: f64,
    xs: &[f64],
    c0: f64,
) -> Result<Vec<f64>, ChartError> {
    let (_, xi_f, _) = model.well_minimum().ok_or(OrbitError::NoWell)?;
    let xi_e = local_min(|xi| (model.d(0, 0, 1, focal_x, xi), model.d(0, 0, 2, focal_x, xi)), xi_f);
    let tail = model.d(1, 0, 1, focal_x, xi_e) * model.eval(1, focal_x, xi_e);
    if tail.abs() > 1e-12 {
        return Err(ChartError::SingularAtFocal(tail));
    }
    let last = std::cell::Cell::new(None);
    let out = substituted_integral(xs, focal_x, |y| {
        let xi = branch_xi(model, energy, y, sign, last.get())?;
        last.set(Some(xi));
        Ok(spatial_im_density(model, y, xi))
    })?;
    Ok(out.into_iter().map(|v| c0 * v).collect())
}

/// `∫_{x_E}^{x} f(y) dy` at each `x` in `xs` (sorted, all on one side of `x_E`),
/// in the variable `w = √|y - x_E|`.
pub fn substituted_integral<F>(xs: &[f64], focal_x: f64, mut f: F) -> Result<Vec<f64>, ChartError>
where
    F: FnMut(f64) -> Result<f64, ChartError>,
{
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let s = if xs[0] < focal_x { -1.0 } else { 1.0 };
    // w-grid: 0 = focal point, then each target.
    let mut ws: Vec<(f64, usize)> = xs
        .iter()
        .enumerate()
        .map(|(k, &x)| (((x - focal_x) * s).max(0.0).sqrt(), k))
        .collect();
    ws.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes = vec![0.0];
    nodes.extend(ws.iter().map(|w| w.0));
    let rule = GaussLegendre::standard();
    let mut g = |w: f64| -> Result<f64, ChartError> { Ok(f(focal_x + s * w * w)? * 2.0 * w * s) };
    let mut acc = 0.0;
    let mut out = vec![0.0; xs.len()];
    // Subdivide the first (longest) stretch so the quadrature stays accurate.
    for (k, pair) in nodes.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if b == a {
            out[ws[k].1] = acc;
            continue;
        }
        let pieces = if a == 0.0 { 16 } else { 1 };
        for j in 0..pieces {
            let lo = a + (b - a) * j as f64 / pieces as f64;
            let hi = a + (b - a) * (j + 1) as f64 / pieces as f64;
            acc += rule.try_integrate(lo, hi, &mut g)?;
        }
        out[ws[k].1] = acc;
    }
    Ok(out)
}

/// Overlap deviations between a Fourier and a spatial chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    /// `max |Im D̃1(x) - Im D1(ξ(x)) - κ|`
    pub im_deviation: f64,
    /// `max |Re D̃1(x) - Re D1(ξ(x)) - (C0/2) ∂x(p1/∂xp0) - κ'|`
    pub re_deviation: f64,
    pub samples: usize,
    pub kappa: f64,
}

/// Compares `Im D̃1(x)` with `Im D1(ξ(x))` on the common arc, modulo a constant.
pub fn chart_overlap_check(
    chart: &ChartData,
    schart: &SpatialChartData,
    model: &SymbolModel,
) -> Result<OverlapReport, ChartError> {
    let mut im_diff = Vec::new();
    let mut re_diff = Vec::new();
    for (k, (&x, &xi)) in schart.x_grid.iter().zip(&schart.xi).enumerate() {
        if !chart.contains(xi) {
            continue;
        }
        let p = chart.point(model, xi)?;
        // Same branch of the level set in both charts.
        if (p.x - x).abs() > 1e-9 * (1.0 + x.abs()) {
            continue;
        }
        let d1 = d1_fourier(chart, model, xi)?;
        let dt = schart.d1_tilde[k];
        im_diff.push(dt.im - d1.im);
        re_diff.push(dt.re - (d1.re + 0.5 * chart.c0 * p.re_bracket()));
    }
    if im_diff.is_empty() {
        return Err(ChartError::EmptyOverlap);
    }
    let spread = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max), mean)
    };
    let (im_deviation, kappa) = spread(&im_diff);
    let (re_deviation, _) = spread(&re_diff);
    Ok(OverlapReport {
        im_deviation,
        re_deviation,
        samples: im_diff.len(),
        kappa,
    })
}

/// Result of traversing a closed cycle of Fourier sub-charts.
#[derive(Debug, Clone, PartialEq)]
pub struct TelescopeReport {
    /// Sum of the bracket increments `-½ C0 [∂x(p1/∂xp0)]` over the cycle.
    pub bracket_sum: f64,
    /// Sum of `Re` increments of the directly integrated `D1` over the cycle.
    pub direct_sum: f64,
    /// Largest per-chart disagreement between the two increments.
    pub max_mismatch: f64,
    pub increments: Vec<(f64, f64)>,
}

/// Walks `ξ_0 → ξ_1 → … → ξ_m → ξ_0` through independently built charts around
/// the focal point on `branch`; each leg uses its own grid and root solves.
pub fn re_telescoping(
    model: &SymbolModel,
    orbit: &Orbit,
    branch: Branch,
    stops: &[f64],
    n: usize,
) -> Result<TelescopeReport, ChartError> {
    let (_, lo_hi) = (0, (
        stops.iter().copied().fold(f64::INFINITY, f64::min),
        stops.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    let full = eikonal_fourier_on(model, orbit, lo_hi, branch, n)?;
    let mut increments = Vec::new();
    let mut legs: Vec<(f64, f64)> = stops.windows(2).map(|w| (w[0], w[1])).collect();
    legs.push((*stops.last().expect("stops"), stops[0]));
    for (a, b) in legs {
        // Fresh solver per leg: endpoints are re-solved, not shared.
        let pa = full.solver(model).point(a)?;
        let pb = full.solver(model).point(b)?;
        let bracket = -0.5 * full.c0 * (pb.re_bracket() - pa.re_bracket());
        let direct = full.c0 * full.integrate(model, a, b, |q| q.d1_direct_integrand().re)?;
        increments.push((bracket, direct));
    }
    let bracket_sum = increments.iter().map(|i| i.0).sum();
    let direct_sum = increments.iter().map(|i| i.1).sum();
    let max_mismatch = increments
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(TelescopeReport {
        bracket_sum,
        direct_sum,
        max_mismatch,
        increments,
    })
}
