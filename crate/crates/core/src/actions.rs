//! Loop integrals over `γ_E` and the action series `S0 + h S1 + h² S2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::quad::periodic_trapezoid;
use crate::orbit::{find_orbit, Orbit, OrbitError};
use crate::symbol::{Polynomial, SymbolModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("orbit at E = {energy}: {source}")]
    Orbit {
        energy: f64,
        #[source]
        source: OrbitError,
    },
    #[error("E-derivative stencil at {energy} leaves the well (minimum {minimum})")]
    StencilBelowWell { energy: f64, minimum: f64 },
}

/// Raw loop integrals in flow orientation, all time-parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopIntegrals {
    /// `∮ ξ dx`
    pub s0: f64,
    /// `∮ p1 dt`
    pub i_p1: f64,
    /// `∮ p2 dt`
    pub i_p2: f64,
    /// `∮ p1² dt`
    pub i_p1sq: f64,
    /// `∮ Γ dt`
    pub i_gamma: f64,
    pub period: f64,
    /// Largest trapezoid full-vs-half discrepancy among the integrals.
    pub quadrature_error: f64,
}

/// Signs applied to the three terms of `S2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCalibration {
    pub sigma_gamma: f64,
    pub sigma_p1sq: f64,
    pub sigma_p2: f64,
    pub provenance: Provenance,
}

/// Which benchmark fixed each sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gamma: String,
    pub p1sq: String,
    pub p2: String,
}

impl Default for SignCalibration {
    fn default() -> Self {
        SignCalibration {
            sigma_gamma: -1.0,
            sigma_p1sq: 1.0,
            sigma_p2: -1.0,
            provenance: Provenance {
                gamma: "frozen: quartic well xi^2+x^4, h=0.05, oracle comparison".into(),
                p1sq: "frozen: harmonic + p1=x, E0 = h - h^2/4".into(),
                p2: "frozen: harmonic + p2=c, E0 = h + c h^2".into(),
            },
        }
    }
}

impl SignCalibration {
    pub fn signs(&self) -> (f64, f64, f64) {
        (self.sigma_gamma, self.sigma_p1sq, self.sigma_p2)
    }
}

/// A first or second E-derivative with its un-extrapolated companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    /// Richardson-extrapolated value.
    pub value: f64,
    /// Plain central difference at step `step / 2`.
    pub raw: f64,
    pub step: f64,
    /// Worst-case effect on `value` of one ulp of error in each stencil value.
    pub roundoff: f64,
}

impl Derivative {
    /// `|value - raw| + roundoff`
    pub fn error_estimate(&self) -> f64 {
        (self.value - self.raw).abs() + self.roundoff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSeries {
    pub energy: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub d_step: f64,
    pub integrals: LoopIntegrals,
    pub d2_gamma: Derivative,
    pub d_p1sq: Derivative,
    pub calibration: SignCalibration,
}

impl ActionSeries {
    /// `S0 + h S1 [order ≥ 1] + h² S2 [order ≥ 2]`
    pub fn total(&self, h: f64, order: u8) -> f64 {
        let mut s = self.s0;
        if order >= 1 {
            s += h * self.s1;
        }
        if order >= 2 {
            s += h * h * self.s2;
        }
        s
    }
}

/// Periodic trapezoid rule for `∮ f(x, ξ) dt`; returns the value and an error estimate.
pub fn loop_integral_dt<F: Fn(f64, f64) -> f64>(orbit: &Orbit, f: F) -> (f64, f64) {
    let values: Vec<f64> = orbit.samples.iter().map(|p| f(p.x, p.xi)).collect();
    periodic_trapezoid(&values, orbit.period)
}

/// `∮ ξ dx = ∮ ξ ∂ξp0 dt`
pub fn action_s0(orbit: &Orbit, model: &SymbolModel) -> f64 {
    loop_integral_dt(orbit, |x, xi| xi * model.p0_xi(x, xi)).0
}

/// `Γ = p0_xx p0_ξ² - 2 p0_xξ p0_x p0_ξ + p0_ξξ p0_x²`
pub fn gamma_density(model: &SymbolModel, x: f64, xi: f64) -> f64 {
    let px = model.d(0, 1, 0, x, xi);
    let pxi = model.d(0, 0, 1, x, xi);
    let pxx = model.d(0, 2, 0, x, xi);
    let pxxi = model.d(0, 1, 1, x, xi);
    let pxixi = model.d(0, 0, 2, x, xi);
    pxx * pxi * pxi - 2.0 * pxxi * px * pxi + pxixi * px * px
}

pub fn loop_integrals(orbit: &Orbit, model: &SymbolModel) -> LoopIntegrals {
    let (s0, e0) = loop_integral_dt(orbit, |x, xi| xi * model.p0_xi(x, xi));
    let (i_p1, e1) = loop_integral_dt(orbit, |x, xi| model.eval(1, x, xi));
    let (i_p2, e2) = loop_integral_dt(orbit, |x, xi| model.eval(2, x, xi));
    let (i_p1sq, e3) = loop_integral_dt(orbit, |x, xi| model.eval(1, x, xi).powi(2));
    let (i_gamma, e4) = loop_integral_dt(orbit, |x, xi| gamma_density(model, x, xi));
    LoopIntegrals {
        s0,
        i_p1,
        i_p2,
        i_p1sq,
        i_gamma,
        period: orbit.period,
        quadrature_error: [e0, e1, e2, e3, e4].into_iter().fold(0.0, f64::max),
    }
}

/// Default E-differentiation step `max(1e-3, 1e-2 |E|)`.
pub fn default_step(energy: f64) -> f64 {
    (1e-2 * energy.abs()).max(1e-3)
}

/// Stencil offsets used by [`dE_derivative`], as multiples of the step.
pub const STENCIL: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// Central-difference E-derivative of order 1 or 2 with one Richardson level.
#[allow(non_snake_case)]
pub fn dE_derivative<F, E>(mut f: F, energy: f64, order: u8, step: f64) -> Result<Derivative, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut v = [0.0; 5];
    for (slot, off) in v.iter_mut().zip(STENCIL) {
        if order == 1 && off == 0.0 {
            continue;
        }
        *slot = f(energy + off * step)?;
    }
    Ok(from_stencil(&v, order, step))
}

/// Derivative from values on [`STENCIL`] (scaled by `step`).
pub fn from_stencil(v: &[f64; 5], order: u8, step: f64) -> Derivative {
    let d = step;
    let half = 0.5 * step;
    let (coarse, fine) = match order {
        1 => ((v[4] - v[0]) / (2.0 * d), (v[3] - v[1]) / (2.0 * half)),
        2 => (
            (v[4] - 2.0 * v[2] + v[0]) / (d * d),
            (v[3] - 2.0 * v[2] + v[1]) / (half * half),
        ),
        _ => panic!("E-derivative order must be 1 or 2"),
    };
    // Sum of |weights| of the extrapolated combination, in units of 1/step^order.
    let weight = match order {
        1 => 3.0,
        _ => 64.0 / 3.0,
    };
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Derivative {
        value: (4.0 * fine - coarse) / 3.0,
        raw: fine,
        step,
        roundoff: weight * f64::EPSILON * scale / step.powi(order as i32),
    }
}

/// Step actually used at `energy`: the default, shrunk so the stencil stays
/// above the bottom of the well.
pub fn stencil_step(model: &SymbolModel, energy: f64) -> Result<f64, ActionError> {
    let step = default_step(energy);
    let minimum = model.well_minimum().map(|m| m.2).unwrap_or(f64::NEG_INFINITY);
    let gap = energy - minimum;
    if gap <= 0.0 {
        return Err(ActionError::StencilBelowWell { energy, minimum });
    }
    Ok(step.min(0.5 * gap))
}

fn orbit_at(model: &SymbolModel, energy: f64) -> Result<Orbit, ActionError> {
    find_orbit(model, energy).map_err(|source| ActionError::Orbit { energy, source })
}

/// Loop integrals on the five stencil orbits around `energy`.
pub fn stencil_integrals(
    model: &SymbolModel,
    energy: f64,
    step: f64,
) -> Result<[LoopIntegrals; 5], ActionError> {
    let mut out = [None; 5];
    for (slot, off) in out.iter_mut().zip(STENCIL) {
        let orbit = orbit_at(model, energy + off * step)?;
        *slot = Some(loop_integrals(&orbit, model));
    }
    Ok(out.map(|v| v.expect("filled")))
}

/// Assembles `S0`, `S1 = -∮p1 dt` and
/// `S2 = σΓ/48 (d/dE)² ∮Γ dt + σ₁/2 (d/dE) ∮p1² dt + σ₂ ∮p2 dt`.
pub fn action_series(
    model: &SymbolModel,
    energy: f64,
    cal: &SignCalibration,
) -> Result<ActionSeries, ActionError> {
    let step = stencil_step(model, energy)?;
    let ints = stencil_integrals(model, energy, step)?;
    Ok(assemble(energy, step, &ints, cal))
}

pub fn assemble(
    energy: f64,
    step: f64,
    ints: &[LoopIntegrals; 5],
    cal: &SignCalibration,
) -> ActionSeries {
    let centre = ints[2];
    let gamma = ints.map(|i| i.i_gamma);
    let p1sq = ints.map(|i| i.i_p1sq);
    let d2_gamma = from_stencil(&gamma, 2, step);
    let d_p1sq = from_stencil(&p1sq, 1, step);
    let s2 = cal.sigma_gamma * d2_gamma.value / 48.0
        + cal.sigma_p1sq * 0.5 * d_p1sq.value
        + cal.sigma_p2 * centre.i_p2;
    ActionSeries {
        energy,
        s0: centre.s0,
        s1: -centre.i_p1,
        s2,
        d_step: step,
        integrals: centre,
        d2_gamma,
        d_p1sq,
        calibration: cal.clone(),
    }
}

/// `|d/dE ∮(f ẋ + g ξ̇) dt + ∮(∂x g - ∂ξ f) dt|` on the orbit at `energy`.
pub fn stokes_check(
    model: &SymbolModel,
    energy: f64,
    f: &Polynomial,
    g: &Polynomial,
) -> Result<f64, ActionError> {
    let form = |orbit: &Orbit| {
        loop_integral_dt(orbit, |x, xi| {
            let [dx, dxi] = model.hamilton_field(x, xi);
            f.eval(x, xi) * dx + g.eval(x, xi) * dxi
        })
        .0
    };
    let step = stencil_step(model, energy)?;
    let lhs = dE_derivative(|e| orbit_at(model, e).map(|o| form(&o)), energy, 1, step)?;
    let orbit = orbit_at(model, energy)?;
    let (curl, _) = loop_integral_dt(&orbit, |x, xi| g.partial(1, 0, x, xi) - f.partial(0, 1, x, xi));
    Ok((lhs.value + curl).abs())
}
