//! Closed energy curves of the principal symbol under the Hamiltonian flow
//! `ẋ = ∂ξ p0`, `ξ̇ = -∂x p0`.

use thiserror::Error;

use crate::numeric::ode::{Dopri5, OdeError, Tolerances};
use crate::numeric::quad::periodic_trapezoid;
use crate::numeric::roots::{brent, scan_for_sign_change, RootError};
use crate::symbol::SymbolModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("energy {energy} is not above the well minimum {minimum}")]
    Degenerate { energy: f64, minimum: f64 },
    #[error("principal symbol has no isolated well minimum")]
    NoWell,
    #[error("no turning point to the right of the well at energy {0}; level set is not closed")]
    Unbounded(f64),
    #[error("no Poincaré return within t = {0}")]
    NoReturn(f64),
    #[error("expected 2 zeros of {what} along the orbit, found {found}")]
    Topology { what: &'static str, found: usize },
    #[error(transparent)]
    Flow(#[from] OdeError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// A time-stamped phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    /// Initial number of equispaced samples per period (doubled until the
    /// action quadrature settles).
    pub samples: usize,
    pub max_samples: usize,
    pub tolerances: Tolerances,
    /// Upper bound on the search for the first return.
    pub max_duration: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            samples: 1024,
            max_samples: 16384,
            tolerances: Tolerances::default(),
            max_duration: 1e6,
        }
    }
}

/// One period of the flow on `{p0 = E}` with its chart-singular points.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub energy: f64,
    /// Equispaced in `t` over `[0, period)`, flow-oriented.
    pub samples: Vec<PhasePoint>,
    pub period: f64,
    /// Zeros of `∂ξ p0` (turning points of the `x` projection), in flow order.
    pub focal_points: Vec<PhasePoint>,
    /// Zeros of `∂x p0`, where the Fourier chart degenerates.
    pub fourier_singular_points: Vec<PhasePoint>,
    pub energy_drift: f64,
    /// Distance between the start point and the state after one period.
    pub closure_error: f64,
    pub diameter: f64,
    /// Estimated quadrature error of `∮ ξ dx` at this sampling.
    pub quadrature_error: f64,
}

impl Orbit {
    pub fn start(&self) -> PhasePoint {
        self.samples[0]
    }

    pub fn x_range(&self) -> (f64, f64) {
        range(self.samples.iter().map(|p| p.x))
    }

    pub fn xi_range(&self) -> (f64, f64) {
        range(self.samples.iter().map(|p| p.xi))
    }

    pub fn sample_spacing(&self) -> f64 {
        self.period / self.samples.len() as f64
    }
}

fn range(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn integrator(model: &SymbolModel, tol: Tolerances) -> Dopri5<impl Fn(&[f64; 2]) -> [f64; 2] + '_, 2> {
    Dopri5::new(move |y: &[f64; 2]| model.hamilton_field(y[0], y[1]), tol)
}

/// Flows `start` for `duration` (negative runs backwards) and returns the end point.
pub fn flow(
    model: &SymbolModel,
    start: (f64, f64),
    duration: f64,
    tol: Tolerances,
) -> Result<(f64, f64), OdeError> {
    let y = integrator(model, tol).integrate([start.0, start.1], duration)?;
    Ok((y[0], y[1]))
}

/// Adaptive integration of the Hamiltonian flow; returns the accepted step
/// end points, starting with `start` at `t = 0`.
pub fn integrate_flow(
    model: &SymbolModel,
    start: (f64, f64),
    duration: f64,
    tol: f64,
) -> Result<Vec<PhasePoint>, OrbitError> {
    let tolerances = Tolerances {
        rtol: tol,
        atol: tol * 1e-2,
        ..Tolerances::default()
    };
    let mut out = vec![PhasePoint {
        t: 0.0,
        x: start.0,
        xi: start.1,
    }];
    integrator(model, tolerances).integrate_with([start.0, start.1], duration, None, |s| {
        out.push(PhasePoint {
            t: s.t1,
            x: s.y1[0],
            xi: s.y1[1],
        });
        true
    })?;
    Ok(out)
}

/// Right turning point `(x_right, ξ_c)` of the well at energy `energy`.
pub fn start_point(model: &SymbolModel, energy: f64) -> Result<(f64, f64), OrbitError> {
    let (xc, xic, vmin) = model.well_minimum().ok_or(OrbitError::NoWell)?;
    let scale = 1e-12 * vmin.abs().max(1.0);
    if energy <= vmin + scale {
        return Err(OrbitError::Degenerate {
            energy,
            minimum: vmin,
        });
    }
    let g = |x: f64| model.p0(x, xic) - energy;
    let mut reach = 1.0;
    let bracket = loop {
        if let Some(b) = scan_for_sign_change(g, xc, xc + reach, 400) {
            break b;
        }
        reach *= 2.0;
        if reach > 1e4 {
            return Err(OrbitError::Unbounded(energy));
        }
    };
    let mut x = brent::<_, OrbitError>(|x| Ok(g(x)), bracket.0, bracket.1, 1e-15, 200)?;
    // Brent stops within its x tolerance; finish on the level set itself.
    for _ in 0..3 {
        let slope = model.p0_x(x, xic);
        if slope == 0.0 {
            break;
        }
        let next = x - g(x) / slope;
        if (next - x).abs() > 1e-12 * (1.0 + x.abs()) {
            break;
        }
        x = next;
    }
    Ok((x, xic))
}

/// Locates the closed orbit at `energy` with default options.
pub fn find_orbit(model: &SymbolModel, energy: f64) -> Result<Orbit, OrbitError> {
    find_orbit_with(model, energy, &OrbitOptions::default())
}

pub fn find_orbit_with(
    model: &SymbolModel,
    energy: f64,
    opts: &OrbitOptions,
) -> Result<Orbit, OrbitError> {
    let start = start_point(model, energy)?;
    let (mut period, h_min) = return_time(model, start, opts)?;
    let mut n = opts.samples.max(512);
    loop {
        let mut steps = substeps(period / n as f64, h_min);
        let (mut orbit, end) =
            sample_orbit(model, energy, start, period, n, &mut steps, opts.tolerances)?;
        // The adaptive return time depends on the step sequence, which jumps
        // with the energy. One Newton step against the fixed-step map, applied
        // to the samples to first order, keeps the orbit smooth in `energy`.
        let dt = (end[1] - start.1) / model.p0_x(end[0], end[1]);
        if dt.is_finite() && dt.abs() < 1e-6 * period {
            period += dt;
            orbit.period = period;
            for p in orbit.samples.iter_mut() {
                let shift = dt * p.t / (period - dt);
                let v = model.hamilton_field(p.x, p.xi);
                p.t += shift;
                p.x += shift * v[0];
                p.xi += shift * v[1];
            }
            let v = model.hamilton_field(end[0], end[1]);
            orbit.closure_error =
                (end[0] + dt * v[0] - start.0).hypot(end[1] + dt * v[1] - start.1);
        }
        let action: Vec<f64> = orbit
            .samples
            .iter()
            .map(|p| p.xi * model.p0_xi(p.x, p.xi))
            .collect();
        let (s0, err) = periodic_trapezoid(&action, period);
        orbit.quadrature_error = err;
        if err <= 1e-13 * s0.abs().max(1e-300) || 2 * n > opts.max_samples {
            let (focal, singular) = focal_points(&orbit, model)?;
            orbit.focal_points = focal;
            orbit.fourier_singular_points = singular;
            return Ok(orbit);
        }
        n *= 2;
    }
}

/// Fixed substeps per sample interval, a power of two so the count only
/// changes on coarse energy steps.
fn substeps(dt: f64, h_min: f64) -> usize {
    ((dt / h_min).ceil().max(1.0) as usize).next_power_of_two()
}

/// First return time to the start section and the smallest step the adaptive
/// integrator needed on the way.
fn return_time(
    model: &SymbolModel,
    start: (f64, f64),
    opts: &OrbitOptions,
) -> Result<(f64, f64), OrbitError> {
    let ode = integrator(model, opts.tolerances);
    let section = start.1;
    let mut hit = None;
    let mut h_min = f64::INFINITY;
    let mut accepted = 0usize;
    ode.integrate_with([start.0, start.1], opts.max_duration, None, |s| {
        // The first steps are still ramping up from the initial guess; the
        // start region is crossed again at the end of the period.
        accepted += 1;
        if accepted > 3 {
            h_min = h_min.min(s.t1 - s.t0);
        }
        let (g0, g1) = (s.y0[1] - section, s.y1[1] - section);
        if s.t0 > 0.0 && g0 > 0.0 && g1 <= 0.0 {
            hit = Some(s.clone());
            return false;
        }
        true
    })?;
    let step = hit.ok_or(OrbitError::NoReturn(opts.max_duration))?;
    let t = brent::<_, OrbitError>(
        |t| Ok(step.interpolate(t)[1] - section),
        step.t0,
        step.t1,
        1e-15,
        100,
    )?;
    Ok((t, h_min))
}

fn sample_orbit(
    model: &SymbolModel,
    energy: f64,
    start: (f64, f64),
    period: f64,
    n: usize,
    steps: &mut usize,
    tol: Tolerances,
) -> Result<(Orbit, [f64; 2]), OrbitError> {
    let ode = integrator(model, tol);
    let dt = period / n as f64;
    let (samples, y) = loop {
        let mut samples = Vec::with_capacity(n);
        let mut y = [start.0, start.1];
        let mut comp = [0.0; 2];
        let mut worst = 0.0f64;
        for k in 0..n {
            samples.push(PhasePoint {
                t: k as f64 * dt,
                x: y[0],
                xi: y[1],
            });
            let err = ode.fixed_steps_compensated(&mut y, &mut comp, dt, *steps)?;
            worst = worst.max(err);
        }
        if worst <= 1.0 || *steps >= 1 << 16 {
            break (samples, y);
        }
        *steps *= 2;
    };
    let closure_error = ((y[0] - start.0).powi(2) + (y[1] - start.1).powi(2)).sqrt();
    let energy_drift = samples
        .iter()
        .map(|p| (model.p0(p.x, p.xi) - energy).abs())
        .fold(0.0, f64::max);
    let (xlo, xhi) = range(samples.iter().map(|p| p.x));
    let (plo, phi) = range(samples.iter().map(|p| p.xi));
    let orbit = Orbit {
        energy,
        samples,
        period,
        focal_points: Vec::new(),
        fourier_singular_points: Vec::new(),
        energy_drift,
        closure_error,
        diameter: (xhi - xlo).hypot(phi - plo),
        quadrature_error: f64::NAN,
    };
    Ok((orbit, y))
}

/// Zeros of `∂ξ p0` (focal points) and of `∂x p0` (Fourier-chart singularities)
/// along the orbit, each polished in `t` against the flow.
pub fn focal_points(
    orbit: &Orbit,
    model: &SymbolModel,
) -> Result<(Vec<PhasePoint>, Vec<PhasePoint>), OrbitError> {
    let focal = orbit_zeros(orbit, model, |x, xi| model.p0_xi(x, xi), "∂ξ p0")?;
    let singular = orbit_zeros(orbit, model, |x, xi| model.p0_x(x, xi), "∂x p0")?;
    Ok((focal, singular))
}

fn orbit_zeros<G>(
    orbit: &Orbit,
    model: &SymbolModel,
    g: G,
    what: &'static str,
) -> Result<Vec<PhasePoint>, OrbitError>
where
    G: Fn(f64, f64) -> f64,
{
    let n = orbit.samples.len();
    let dt = orbit.sample_spacing();
    let values: Vec<f64> = orbit.samples.iter().map(|p| g(p.x, p.xi)).collect();
    let tol = Tolerances::default();
    let mut zeros = Vec::new();
    for k in 0..n {
        let (a, b) = (values[k], values[(k + 1) % n]);
        // Half-open sign rule so a zero sitting exactly on a sample counts once.
        let crosses = (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0);
        if !crosses {
            continue;
        }
        let p = orbit.samples[k];
        let tau = if b == 0.0 {
            dt
        } else {
            // The re-integrated flow can disagree in sign with a sample sitting
            // within roundoff of the zero; widen the bracket if so.
            let f = |tau: f64| -> Result<f64, OrbitError> {
                let (x, xi) = flow(model, (p.x, p.xi), tau, tol)?;
                Ok(g(x, xi))
            };
            let mut found = None;
            for widen in [0.0, 0.25, 0.5] {
                match brent(f, -widen * dt, (1.0 + widen) * dt, 1e-15, 400) {
                    Ok(tau) => {
                        found = Some(tau);
                        break;
                    }
                    Err(OrbitError::Root(RootError::NotBracketed { .. })) => continue,
                    Err(e) => return Err(e),
                }
            }
            match found {
                Some(tau) => tau,
                None => brent(f, 0.0, dt, 1e-15, 400)?,
            }
        };
        let (x, xi) = flow(model, (p.x, p.xi), tau, tol)?;
        let t = (p.t + tau).rem_euclid(orbit.period);
        zeros.push(PhasePoint { t, x, xi });
    }
    if zeros.len() != 2 {
        return Err(OrbitError::Topology {
            what,
            found: zeros.len(),
        });
    }
    zeros.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(zeros)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_flow_closed_form() {
        let m = SymbolModel::harmonic();
        let tol = Tolerances::default();
        let (x, xi) = flow(&m, (1.0, 0.0), PI, tol).unwrap();
        assert!((x - 1.0).abs() < 1e-9 && xi.abs() < 1e-9);
        let (x, xi) = flow(&m, (1.0, 0.0), PI / 4.0, tol).unwrap();
        assert!(x.abs() < 1e-9 && (xi + 1.0).abs() < 1e-9);
        let traj = integrate_flow(&m, (0.4, 0.2), 0.0, 1e-12).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!((traj[0].x, traj[0].xi), (0.4, 0.2));
    }

    #[test]
    fn integrate_flow_bounds_energy_drift() {
        let m = SymbolModel::quartic_well();
        let traj = integrate_flow(&m, (1.0, 0.0), 10.0, 1e-12).unwrap();
        let drift = traj
            .iter()
            .map(|p| (m.p0(p.x, p.xi) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn harmonic_orbit_period_and_points() {
        let m = SymbolModel::harmonic();
        for e in [1.0, 4.0] {
            let o = find_orbit(&m, e).unwrap();
            assert!((o.period - PI).abs() < 1e-11, "{}", o.period);
            assert!(o.samples.len() >= 512);
            assert!(o.energy_drift <= 1e-9 * e.max(1.0));
            assert!(o.closure_error <= 1e-8 * o.diameter);
        }
        let o = find_orbit(&m, 1.0).unwrap();
        let mut f: Vec<_> = o.focal_points.iter().map(|p| (p.x, p.xi)).collect();
        f.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((f[0].0 + 1.0).abs() < 1e-10 && f[0].1.abs() < 1e-10);
        assert!((f[1].0 - 1.0).abs() < 1e-10 && f[1].1.abs() < 1e-10);
        let mut s: Vec<_> = o.fourier_singular_points.iter().map(|p| (p.x, p.xi)).collect();
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert!(s[0].0.abs() < 1e-10 && (s[0].1 + 1.0).abs() < 1e-10);
        assert!(s[1].0.abs() < 1e-10 && (s[1].1 - 1.0).abs() < 1e-10);
        for p in &o.focal_points {
            assert!(m.p0_xi(p.x, p.xi).abs() <= 1e-10);
        }
    }

    #[test]
    fn quartic_turning_points() {
        let m = SymbolModel::quartic_well();
        let o = find_orbit(&m, 1.0).unwrap();
        let mut xs: Vec<f64> = o.focal_points.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 1e-10 && (xs[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reversal_symmetry_for_even_symbols() {
        // (x, ξ, t) -> (x, -ξ, -t): sample k mirrors sample N - k.
        let m = SymbolModel::morse(1.0, 1.0);
        let o = find_orbit(&m, 0.5).unwrap();
        let n = o.samples.len();
        for k in 1..n {
            let (a, b) = (o.samples[k], o.samples[n - k]);
            assert!((a.x - b.x).abs() < 1e-9 && (a.xi + b.xi).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_errors() {
        let m = SymbolModel::harmonic();
        assert!(matches!(find_orbit(&m, -1.0), Err(OrbitError::Degenerate { .. })));
        let morse = SymbolModel::morse(1.0, 1.0);
        assert!(matches!(find_orbit(&morse, 1.5), Err(OrbitError::Unbounded(_))));
    }
}
