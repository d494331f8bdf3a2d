//! Bohr–Sommerfeld condition `S(E, h) = 2πh(n + ½)` and sign calibration.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{action_s0, action_series, ActionError, ActionSeries, Provenance, SignCalibration};
use crate::numeric::roots::{brent, RootError};
use crate::oracle::{oracle_spectrum, OracleError, OracleOptions};
use crate::orbit::{find_orbit, OrbitError};
use crate::symbol::SymbolModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizationError {
    #[error("h must be positive, got {0}")]
    BadH(f64),
    #[error("order must be 0, 1 or 2, got {0}")]
    BadOrder(u8),
    #[error("level {n} lies outside the well at h = {h}")]
    NoBracket { n: usize, h: f64 },
    #[error("level {n}: BS residual {residual:e} exceeds {bound:e} after polishing")]
    Unpolished { n: usize, residual: f64, bound: f64 },
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("calibration indeterminate: no benchmark is sensitive to {0}")]
    Indeterminate(&'static str),
    #[error("calibration failed for {term}: best error {error:e} on {case} exceeds {bound:e}")]
    CalibrationMiss {
        term: &'static str,
        case: String,
        error: f64,
        bound: f64,
    },
    #[error("calibration conflict: benchmarks disagree on {0}")]
    Conflict(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub energy: f64,
    /// `|S(E_n, h) - 2πh(n + ½)|`
    pub bs_residual: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub h: f64,
    pub order: u8,
    pub entries: Vec<Level>,
    /// Levels that could not be computed, with the reason.
    pub failures: Vec<(usize, String)>,
    pub calibration: SignCalibration,
}

fn check(h: f64, order: u8) -> Result<(), QuantizationError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(QuantizationError::BadH(h));
    }
    if order > 2 {
        return Err(QuantizationError::BadOrder(order));
    }
    Ok(())
}

/// `S0` alone, from a single orbit.
pub fn principal_action(model: &SymbolModel, energy: f64) -> Result<f64, OrbitError> {
    let orbit = find_orbit(model, energy)?;
    Ok(action_s0(&orbit, model))
}

/// `S(E, h)` truncated at `order`.
pub fn bs_function(
    model: &SymbolModel,
    h: f64,
    order: u8,
    cal: &SignCalibration,
    energy: f64,
) -> Result<f64, QuantizationError> {
    check(h, order)?;
    match order {
        0 => Ok(principal_action(model, energy)?),
        1 => {
            let orbit = find_orbit(model, energy)?;
            let ints = crate::actions::loop_integrals(&orbit, model);
            Ok(ints.s0 - h * ints.i_p1)
        }
        _ => Ok(action_series(model, energy, cal)?.total(h, order)),
    }
}

/// Full series at `energy` (all orders).
pub fn series(
    model: &SymbolModel,
    energy: f64,
    cal: &SignCalibration,
) -> Result<ActionSeries, QuantizationError> {
    Ok(action_series(model, energy, cal)?)
}

/// Quantization target `2πh(n + ½)`.
pub fn target(h: f64, n: usize) -> f64 {
    2.0 * PI * h * (n as f64 + 0.5)
}

fn well_bottom(model: &SymbolModel) -> Result<f64, QuantizationError> {
    Ok(model.well_minimum().ok_or(OrbitError::NoWell)?.2)
}

/// Root of `S0(E) = 2πh(n + ½)`; also returns a bracket.
fn leading_order(
    model: &SymbolModel,
    h: f64,
    n: usize,
    vmin: f64,
) -> Result<(f64, (f64, f64)), QuantizationError> {
    let goal = target(h, n);
    let floor = 1e-10 * vmin.abs().max(1.0);
    let g = |e: f64| -> Result<f64, QuantizationError> {
        if e <= vmin + floor {
            return Ok(-goal);
        }
        match principal_action(model, e) {
            Ok(s) => Ok(s - goal),
            Err(OrbitError::Unbounded(_)) => Err(QuantizationError::NoBracket { n, h }),
            Err(e) => Err(e.into()),
        }
    };
    let mut gap = vmin.abs().max(1.0) * 0.1;
    let hi = loop {
        if g(vmin + gap)? > 0.0 {
            break vmin + gap;
        }
        gap *= 2.0;
        if gap > 1e8 {
            return Err(QuantizationError::NoBracket { n, h });
        }
    };
    let lo = if gap > vmin.abs().max(1.0) * 0.1 { vmin + 0.5 * gap } else { vmin };
    let e = brent(g, lo, hi, 1e-14 * hi.abs().max(1.0), 200)?;
    Ok((e, (lo, hi)))
}

/// Energy of level `n` at the requested order.
pub fn quantize(
    model: &SymbolModel,
    h: f64,
    n: usize,
    order: u8,
    cal: &SignCalibration,
) -> Result<Level, QuantizationError> {
    check(h, order)?;
    let vmin = well_bottom(model)?;
    let goal = target(h, n);
    let (e0, bracket0) = leading_order(model, h, n, vmin)?;
    let (energy, bracket) = if order == 0 {
        (e0, bracket0)
    } else {
        let g = |e: f64| -> Result<f64, QuantizationError> {
            match bs_function(model, h, order, cal, e) {
                Ok(s) => Ok(s - goal),
                Err(QuantizationError::Orbit(OrbitError::Unbounded(_))) => {
                    Err(QuantizationError::NoBracket { n, h })
                }
                Err(e) => Err(e),
            }
        };
        let g0 = g(e0)?;
        if g0 == 0.0 {
            (e0, (e0, e0))
        } else {
            // Walk away from the leading-order root on the side where the correction points.
            let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
            let room = e0 - vmin;
            let mut w = 0.05 * room;
            let mut other = None;
            for _ in 0..40 {
                let mut e = e0 + dir * w;
                if dir < 0.0 {
                    e = e.max(vmin + 1e-3 * room);
                }
                let ge = g(e)?;
                if ge.signum() != g0.signum() {
                    other = Some(e);
                    break;
                }
                if dir < 0.0 && e <= vmin + 1e-3 * room {
                    break;
                }
                w *= 2.0;
            }
            let other = other.ok_or(QuantizationError::NoBracket { n, h })?;
            let (lo, hi) = if other < e0 { (other, e0) } else { (e0, other) };
            let e = brent(g, lo, hi, 1e-14 * e0.abs().max(1.0), 200)?;
            (e, (lo, hi))
        }
    };
    let residual = (bs_function(model, h, order, cal, energy)? - goal).abs();
    let bound = 1e-10 * 2.0 * PI * h;
    if residual > bound {
        return Err(QuantizationError::Unpolished { n, residual, bound });
    }
    Ok(Level {
        n,
        energy,
        bs_residual: residual,
        bracket,
    })
}

/// `-cos²(S(E, h) / 2h)`, zero exactly when the BS condition holds.
pub fn gram_determinant(
    model: &SymbolModel,
    h: f64,
    energy: f64,
    order: u8,
    cal: &SignCalibration,
) -> Result<f64, QuantizationError> {
    let s = bs_function(model, h, order, cal, energy)?;
    Ok(gram_from_action(s, h))
}

pub fn gram_from_action(s: f64, h: f64) -> f64 {
    -(s / (2.0 * h)).cos().powi(2)
}

/// Levels `ns` in parallel; failures are collected per level.
/// Levels whose leading-order energy lies in `band`, padded by one level on
/// each side so that higher-order shifts cannot push a level out unseen.
pub fn levels_in_band(
    model: &SymbolModel,
    h: f64,
    band: (f64, f64),
) -> Result<std::ops::RangeInclusive<usize>, QuantizationError> {
    check(h, 0)?;
    let vmin = well_bottom(model)?;
    let mut first = None;
    let mut n = 0;
    loop {
        let (e, _) = leading_order(model, h, n, vmin)?;
        if first.is_none() && e >= band.0 {
            first = Some(n.saturating_sub(1));
        }
        if e > band.1 {
            return Ok(first.unwrap_or(n)..=n);
        }
        n += 1;
    }
}

pub fn spectrum(
    model: &SymbolModel,
    h: f64,
    ns: std::ops::RangeInclusive<usize>,
    order: u8,
    cal: &SignCalibration,
) -> Result<SpectrumResult, QuantizationError> {
    check(h, order)?;
    let results: Vec<(usize, Result<Level, QuantizationError>)> = ns
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| (n, quantize(model, h, n, order, cal)))
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (n, r) in results {
        match r {
            Ok(level) => entries.push(level),
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    Ok(SpectrumResult {
        h,
        order,
        entries,
        failures,
        calibration: cal.clone(),
    })
}

/// Reference eigenvalues for a calibration case.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Exact `E_n` for `n = 0, 1, ...`.
    ClosedForm(Vec<f64>),
    /// Diagonalize the quantized operator.
    Oracle,
}

/// One benchmark used to fix the signs of `S2`.
#[derive(Debug, Clone)]
pub struct CalibrationCase {
    pub name: String,
    pub model: SymbolModel,
    pub h: f64,
    pub levels: Vec<usize>,
    pub reference: Reference,
    /// Absolute error bound the chosen signs must meet; `None` means "ten
    /// times better than order 0".
    pub tolerance: Option<f64>,
}

/// Shifted-harmonic, constant-`p2` and quartic benchmarks.
pub fn default_suite(h: f64, quartic_h: f64) -> Vec<CalibrationCase> {
    use crate::symbol::Monomial;
    let levels = vec![0, 1, 2];
    let harmonic = |shift: f64| levels.iter().map(|&n| h * (2 * n + 1) as f64 + shift).collect();
    let quartic = SymbolModel::quartic_well();
    let window: Vec<usize> = (0..200)
        .filter(|&n| {
            let e0 = leading_order(&quartic, quartic_h, n, 0.0).map(|r| r.0);
            matches!(e0, Ok(e) if (0.5..=2.0).contains(&e))
        })
        .collect();
    vec![
        CalibrationCase {
            name: "harmonic + p1 = x".into(),
            model: SymbolModel::harmonic()
                .with_p1(vec![Monomial::new(1.0, 1, 0)])
                .expect("finite"),
            h,
            levels: levels.clone(),
            reference: Reference::ClosedForm(harmonic(-h * h / 4.0)),
            tolerance: Some(1e-7),
        },
        CalibrationCase {
            name: "harmonic + p2 = 1".into(),
            model: SymbolModel::harmonic()
                .with_p2(vec![Monomial::new(1.0, 0, 0)])
                .expect("finite"),
            h,
            levels: levels.clone(),
            reference: Reference::ClosedForm(harmonic(h * h)),
            tolerance: Some(1e-7),
        },
        CalibrationCase {
            name: "quartic well".into(),
            model: quartic,
            h: quartic_h,
            levels: window,
            reference: Reference::Oracle,
            tolerance: None,
        },
    ]
}

const TERMS: [&str; 3] = ["sigma_gamma", "sigma_p1sq", "sigma_p2"];

fn with_signs(s: [f64; 3]) -> SignCalibration {
    SignCalibration {
        sigma_gamma: s[0],
        sigma_p1sq: s[1],
        sigma_p2: s[2],
        ..SignCalibration::default()
    }
}

/// Picks each sign of `S2` from the benchmarks that are sensitive to it.
///
/// A benchmark is sensitive to a sign when flipping it moves a predicted level
/// by more than `1e-10`. For each benchmark all combinations of its relevant
/// signs are tried and the one with the smallest worst-case error kept.
pub fn calibrate_signs(suite: &[CalibrationCase]) -> Result<SignCalibration, QuantizationError> {
    let base = SignCalibration::default();
    let mut chosen: [Option<(f64, String)>; 3] = [None, None, None];
    for case in suite {
        let refs: Vec<f64> = match &case.reference {
            Reference::ClosedForm(v) => case.levels.iter().map(|&n| v[n]).collect(),
            Reference::Oracle => {
                let count = case.levels.iter().max().map_or(0, |m| m + 1);
                let spec = oracle_spectrum(&case.model, case.h, count, &OracleOptions::default())?;
                case.levels.iter().map(|&n| spec.eigenvalues[n]).collect()
            }
        };
        // Sensitivity from the size of each S2 term at the leading-order energies.
        let mut relevant = [false; 3];
        for &n in &case.levels {
            let vmin = well_bottom(&case.model)?;
            let (e0, _) = leading_order(&case.model, case.h, n, vmin)?;
            let s = action_series(&case.model, e0, &base)?;
            let terms = [
                s.d2_gamma.value / 48.0,
                0.5 * s.d_p1sq.value,
                s.integrals.i_p2,
            ];
            for (r, t) in relevant.iter_mut().zip(terms) {
                // dE ≈ h² |term| / T
                if case.h * case.h * t.abs() / s.integrals.period > 1e-10 {
                    *r = true;
                }
            }
        }
        let active: Vec<usize> = (0..3).filter(|&k| relevant[k]).collect();
        if active.is_empty() {
            continue;
        }
        let mut best: Option<([f64; 3], f64)> = None;
        for mask in 0..(1u32 << active.len()) {
            let mut signs = [base.sigma_gamma, base.sigma_p1sq, base.sigma_p2];
            for (bit, &k) in active.iter().enumerate() {
                signs[k] = if mask & (1 << bit) != 0 { -1.0 } else { 1.0 };
            }
            let cal = with_signs(signs);
            let mut worst: f64 = 0.0;
            for (&n, r) in case.levels.iter().zip(&refs) {
                let e = quantize(&case.model, case.h, n, 2, &cal)?.energy;
                worst = worst.max((e - r).abs());
            }
            if best.is_none_or(|b| worst < b.1) {
                best = Some((signs, worst));
            }
        }
        let (signs, error) = best.expect("at least one combination");
        let bound = match case.tolerance {
            Some(t) => t,
            None => {
                let mut worst0: f64 = 0.0;
                for (&n, r) in case.levels.iter().zip(&refs) {
                    let e = quantize(&case.model, case.h, n, 0, &base)?.energy;
                    worst0 = worst0.max((e - r).abs());
                }
                0.1 * worst0
            }
        };
        if error > bound {
            return Err(QuantizationError::CalibrationMiss {
                term: TERMS[active[0]],
                case: case.name.clone(),
                error,
                bound,
            });
        }
        for &k in &active {
            let note = format!("{} (h = {}, max error {:.3e})", case.name, case.h, error);
            match &chosen[k] {
                Some((s, _)) if *s != signs[k] => return Err(QuantizationError::Conflict(TERMS[k])),
                Some(_) => {}
                None => chosen[k] = Some((signs[k], note)),
            }
        }
    }
    let take = |k: usize| chosen[k].clone().ok_or(QuantizationError::Indeterminate(TERMS[k]));
    let (g, p1, p2) = (take(0)?, take(1)?, take(2)?);
    Ok(SignCalibration {
        sigma_gamma: g.0,
        sigma_p1sq: p1.0,
        sigma_p2: p2.0,
        provenance: Provenance {
            gamma: g.1,
            p1sq: p1.1,
            p2: p2.1,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Monomial;

    #[test]
    fn harmonic_levels() {
        let m = SymbolModel::harmonic();
        let cal = SignCalibration::default();
        for (n, want) in [(0, 0.1), (2, 0.5)] {
            let l = quantize(&m, 0.1, n, 2, &cal).unwrap();
            assert!((l.energy - want).abs() < 1e-10, "{n}: {}", l.energy);
            assert!(l.bs_residual <= 1e-10 * 2.0 * PI * 0.1);
        }
    }

    #[test]
    fn subprincipal_shifts() {
        let cal = SignCalibration::default();
        let m = SymbolModel::harmonic().with_p1(vec![Monomial::new(1.0, 0, 0)]).unwrap();
        let l = quantize(&m, 0.1, 0, 1, &cal).unwrap();
        assert!((l.energy - 0.2).abs() < 1e-10);
        let m = SymbolModel::harmonic().with_p1(vec![Monomial::new(1.0, 1, 0)]).unwrap();
        let l = quantize(&m, 0.1, 0, 2, &cal).unwrap();
        assert!((l.energy - 0.0975).abs() < 1e-9, "{}", l.energy);
        let s = bs_function(&m, 0.1, 2, &cal, 1.0).unwrap();
        assert!((s - (PI + 0.01 * PI / 4.0)).abs() < 1e-9);
    }

    #[test]
    fn gram_values() {
        let m = SymbolModel::harmonic();
        let cal = SignCalibration::default();
        let g = gram_determinant(&m, 0.1, 0.2, 0, &cal).unwrap();
        assert!((g + 1.0).abs() < 1e-9);
        let l = quantize(&m, 0.1, 1, 2, &cal).unwrap();
        assert!(gram_determinant(&m, 0.1, l.energy, 2, &cal).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spectrum_orders_agree_for_harmonic() {
        let m = SymbolModel::harmonic();
        let cal = SignCalibration::default();
        let a = spectrum(&m, 0.1, 0..=4, 0, &cal).unwrap();
        let b = spectrum(&m, 0.1, 0..=4, 2, &cal).unwrap();
        for (k, (x, y)) in a.entries.iter().zip(&b.entries).enumerate() {
            assert!((x.energy - 0.1 * (2 * k + 1) as f64).abs() < 1e-10);
            assert!((x.energy - y.energy).abs() < 1e-10);
        }
    }

    #[test]
    fn levels_outside_well() {
        let m = SymbolModel::poschl_teller(1.0, 1.0);
        let cal = SignCalibration::default();
        assert!(matches!(
            quantize(&m, 0.1, 50, 0, &cal),
            Err(QuantizationError::NoBracket { .. })
        ));
        assert!(matches!(quantize(&m, -0.1, 0, 0, &cal), Err(QuantizationError::BadH(_))));
    }

    #[test]
    fn harmonic_only_suite_is_indeterminate() {
        let suite = vec![CalibrationCase {
            name: "harmonic".into(),
            model: SymbolModel::harmonic(),
            h: 0.1,
            levels: vec![0, 1],
            reference: Reference::ClosedForm(vec![0.1, 0.3]),
            tolerance: Some(1e-7),
        }];
        assert!(matches!(
            calibrate_signs(&suite),
            Err(QuantizationError::Indeterminate(_))
        ));
    }
}
