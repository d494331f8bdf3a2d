//! Semiclassical symbols `p(x, ξ; h) = p0 + h p1 + h² p2`.
//!
//! Every level is a finite sum of monomials `c x^m ξ^k`. The principal level
//! may additionally carry one closed-form potential in `x` (Morse or
//! Pöschl–Teller), so the builtin families all have exact derivatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest derivative order served per variable.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("malformed symbol config: {0}")]
    Malformed(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("negative or non-integer power {0} in monomial")]
    BadPower(f64),
    #[error("non-finite coefficient in monomial")]
    NonFinite,
    #[error("derivative order ({dx}, {dxi}) out of range")]
    OrderOutOfRange { dx: usize, dxi: usize },
    #[error("symbol level {0} does not exist (expected 0, 1 or 2)")]
    BadLevel(usize),
    #[error("family `{0}` is builtin; p0 may not be overridden")]
    BuiltinOverride(String),
    #[error("family `{family}` requires parameter block `{block}`")]
    MissingParams { family: String, block: String },
    #[error("ξ-degree {0} exceeds 2; operator quantization unsupported")]
    XiDegree(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Polynomial,
    Harmonic,
    QuarticWell,
    Morse,
    PoschlTeller,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Polynomial => "polynomial",
            Family::Harmonic => "harmonic",
            Family::QuarticWell => "quartic-well",
            Family::Morse => "morse",
            Family::PoschlTeller => "poschl-teller",
            Family::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, SymbolError> {
        Ok(match name {
            "polynomial" => Family::Polynomial,
            "harmonic" => Family::Harmonic,
            "quartic-well" | "quartic" => Family::QuarticWell,
            "morse" => Family::Morse,
            "poschl-teller" => Family::PoschlTeller,
            "custom" => Family::Custom,
            other => return Err(SymbolError::UnknownFamily(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// `coeff · x^x_power · ξ^xi_power`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub x_power: u32,
    pub xi_power: u32,
}

impl Monomial {
    pub const fn new(coeff: f64, x_power: u32, xi_power: u32) -> Self {
        Monomial {
            coeff,
            x_power,
            xi_power,
        }
    }

    fn partial(&self, dx: usize, dxi: usize, x: f64, xi: f64) -> f64 {
        let (m, k) = (self.x_power as usize, self.xi_power as usize);
        if dx > m || dxi > k {
            return 0.0;
        }
        self.coeff
            * falling(m, dx)
            * falling(k, dxi)
            * x.powi((m - dx) as i32)
            * xi.powi((k - dxi) as i32)
    }
}

fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).fold(1.0, |acc, j| acc * j as f64)
}

/// Closed-form potentials in `x`, added to `p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    /// `A (1 - e^{-a x})²`, wells for `0 < E < A`.
    Morse { depth: f64, width: f64 },
    /// `-A sech²(a x)`, wells for `-A < E < 0`.
    PoschlTeller { depth: f64, width: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        match *self {
            Potential::Morse { depth, width } => {
                let e1 = (-width * x).exp();
                if order == 0 {
                    return depth * (1.0 - e1).powi(2);
                }
                let k = order as i32;
                depth * (-2.0 * (-width).powi(k) * e1 + (-2.0 * width).powi(k) * e1 * e1)
            }
            Potential::PoschlTeller { depth, width } => {
                // sech² = 1 - tanh², and d/du tanh = 1 - tanh²; carry a polynomial in t.
                let t = (width * x).tanh();
                let mut poly = vec![1.0, 0.0, -1.0];
                for _ in 0..order {
                    poly = tanh_poly_derivative(&poly);
                }
                let value = poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
                -depth * width.powi(order as i32) * value
            }
        }
    }
}

fn tanh_poly_derivative(poly: &[f64]) -> Vec<f64> {
    // q(t) -> q'(t) (1 - t²)
    let mut out = vec![0.0; poly.len() + 1];
    for (j, &c) in poly.iter().enumerate().skip(1) {
        let d = c * j as f64;
        out[j - 1] += d;
        out[j + 1] -= d;
    }
    out
}

/// A real polynomial in `(x, ξ)`, used for test forms and integrands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polynomial(pub Vec<Monomial>);

impl Polynomial {
    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        self.partial(0, 0, x, xi)
    }

    pub fn partial(&self, dx: usize, dxi: usize, x: f64, xi: f64) -> f64 {
        self.0.iter().map(|m| m.partial(dx, dxi, x, xi)).sum()
    }
}

/// The triple `(p0, p1, p2)`; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolModel {
    family: Family,
    levels: [Vec<Monomial>; 3],
    potential: Option<Potential>,
    derivative_mode: DerivativeMode,
}

impl SymbolModel {
    /// Polynomial principal symbol with `p1 = p2 = 0`.
    pub fn polynomial(p0: Vec<Monomial>) -> Result<Self, SymbolError> {
        check_terms(&p0)?;
        Ok(SymbolModel {
            family: Family::Polynomial,
            levels: [p0, Vec::new(), Vec::new()],
            potential: None,
            derivative_mode: DerivativeMode::Analytic,
        })
    }

    /// `ξ² + x²`
    pub fn harmonic() -> Self {
        Self::builtin(
            Family::Harmonic,
            vec![Monomial::new(1.0, 0, 2), Monomial::new(1.0, 2, 0)],
            None,
        )
    }

    /// `ξ² + x⁴`
    pub fn quartic_well() -> Self {
        Self::builtin(
            Family::QuarticWell,
            vec![Monomial::new(1.0, 0, 2), Monomial::new(1.0, 4, 0)],
            None,
        )
    }

    /// `ξ² + A (1 - e^{-a x})²`
    pub fn morse(depth: f64, width: f64) -> Self {
        Self::builtin(
            Family::Morse,
            vec![Monomial::new(1.0, 0, 2)],
            Some(Potential::Morse { depth, width }),
        )
    }

    /// `ξ² - A sech²(a x)`
    pub fn poschl_teller(depth: f64, width: f64) -> Self {
        Self::builtin(
            Family::PoschlTeller,
            vec![Monomial::new(1.0, 0, 2)],
            Some(Potential::PoschlTeller { depth, width }),
        )
    }

    fn builtin(family: Family, p0: Vec<Monomial>, potential: Option<Potential>) -> Self {
        SymbolModel {
            family,
            levels: [p0, Vec::new(), Vec::new()],
            potential,
            derivative_mode: DerivativeMode::Analytic,
        }
    }

    pub fn with_p1(mut self, terms: Vec<Monomial>) -> Result<Self, SymbolError> {
        check_terms(&terms)?;
        self.levels[1] = terms;
        Ok(self)
    }

    pub fn with_p2(mut self, terms: Vec<Monomial>) -> Result<Self, SymbolError> {
        check_terms(&terms)?;
        self.levels[2] = terms;
        Ok(self)
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative_mode
    }

    pub fn potential(&self) -> Option<Potential> {
        self.potential
    }

    pub fn terms(&self, level: usize) -> &[Monomial] {
        &self.levels[level]
    }

    pub fn has_level(&self, level: usize) -> bool {
        level < 3 && !self.levels[level].is_empty()
    }

    /// Largest ξ-power across all three levels.
    pub fn xi_degree(&self) -> u32 {
        self.levels
            .iter()
            .flatten()
            .filter(|m| m.coeff != 0.0)
            .map(|m| m.xi_power)
            .max()
            .unwrap_or(0)
    }

    /// Fails unless the symbol is a differential operator of order at most two.
    pub fn require_quantizable(&self) -> Result<(), SymbolError> {
        match self.xi_degree() {
            d if d <= 2 => Ok(()),
            d => Err(SymbolError::XiDegree(d)),
        }
    }

    pub fn eval(&self, level: usize, x: f64, xi: f64) -> f64 {
        self.exact_partial(level, 0, 0, x, xi)
    }

    /// Checked partial derivative `∂x^dx ∂ξ^dxi p_level`, honouring the derivative mode.
    pub fn eval_partial(
        &self,
        level: usize,
        dx: usize,
        dxi: usize,
        x: f64,
        xi: f64,
    ) -> Result<f64, SymbolError> {
        if level > 2 {
            return Err(SymbolError::BadLevel(level));
        }
        if dx > MAX_ORDER || dxi > MAX_ORDER {
            return Err(SymbolError::OrderOutOfRange { dx, dxi });
        }
        Ok(self.d(level, dx, dxi, x, xi))
    }

    /// Unchecked partial used on hot paths; orders must be at most [`MAX_ORDER`].
    #[inline]
    pub fn d(&self, level: usize, dx: usize, dxi: usize, x: f64, xi: f64) -> f64 {
        match self.derivative_mode {
            DerivativeMode::Analytic => self.exact_partial(level, dx, dxi, x, xi),
            DerivativeMode::FiniteDifference => {
                finite_difference_partial(|a, b| self.eval(level, a, b), dx, dxi, x, xi)
            }
        }
    }

    fn exact_partial(&self, level: usize, dx: usize, dxi: usize, x: f64, xi: f64) -> f64 {
        let mut sum: f64 = self.levels[level]
            .iter()
            .map(|m| m.partial(dx, dxi, x, xi))
            .sum();
        if level == 0 && dxi == 0 {
            if let Some(pot) = &self.potential {
                sum += pot.derivative(dx, x);
            }
        }
        sum
    }

    // Shorthands for the principal symbol.
    #[inline]
    pub fn p0(&self, x: f64, xi: f64) -> f64 {
        self.d(0, 0, 0, x, xi)
    }
    #[inline]
    pub fn p0_x(&self, x: f64, xi: f64) -> f64 {
        self.d(0, 1, 0, x, xi)
    }
    #[inline]
    pub fn p0_xi(&self, x: f64, xi: f64) -> f64 {
        self.d(0, 0, 1, x, xi)
    }

    /// Hamilton vector field `(∂ξ p0, -∂x p0)`.
    #[inline]
    pub fn hamilton_field(&self, x: f64, xi: f64) -> [f64; 2] {
        [self.p0_xi(x, xi), -self.p0_x(x, xi)]
    }

    /// Location and value of the minimum of `p0`, by Newton's method on the gradient
    /// started from the best point of a coarse scan.
    pub fn well_minimum(&self) -> Option<(f64, f64, f64)> {
        let mut best = (0.0, 0.0, f64::INFINITY);
        let n = 81;
        let span = 4.0;
        for i in 0..n {
            for j in 0..n {
                let x = -span + 2.0 * span * i as f64 / (n - 1) as f64;
                let xi = -span + 2.0 * span * j as f64 / (n - 1) as f64;
                let v = self.p0(x, xi);
                if v < best.2 {
                    best = (x, xi, v);
                }
            }
        }
        let (mut x, mut xi) = (best.0, best.1);
        for _ in 0..60 {
            let gx = self.d(0, 1, 0, x, xi);
            let gxi = self.d(0, 0, 1, x, xi);
            let hxx = self.d(0, 2, 0, x, xi);
            let hxy = self.d(0, 1, 1, x, xi);
            let hyy = self.d(0, 0, 2, x, xi);
            if gx == 0.0 && gxi == 0.0 {
                break;
            }
            let det = hxx * hyy - hxy * hxy;
            if det <= 0.0 || !det.is_finite() {
                // Flat (e.g. quartic) bottom: accept if the gradient is negligible.
                if gx.abs() + gxi.abs() < 1e-12 {
                    break;
                }
                return None;
            }
            let sx = (hyy * gx - hxy * gxi) / det;
            let sy = (hxx * gxi - hxy * gx) / det;
            x -= sx;
            xi -= sy;
            if sx.abs() + sy.abs() < 1e-15 * (1.0 + x.abs() + xi.abs()) {
                break;
            }
        }
        let v = self.p0(x, xi);
        v.is_finite().then_some((x, xi, v))
    }

    pub fn to_config(&self) -> SymbolConfig {
        let triples = |level: usize| -> Option<Vec<(f64, f64, f64)>> {
            let t = &self.levels[level];
            (!t.is_empty()).then(|| {
                t.iter()
                    .map(|m| (m.coeff, m.x_power as f64, m.xi_power as f64))
                    .collect()
            })
        };
        let builtin_p0 = matches!(
            self.family,
            Family::Harmonic | Family::QuarticWell | Family::Morse | Family::PoschlTeller
        );
        let params = |p: &Potential| match *p {
            Potential::Morse { depth, width } | Potential::PoschlTeller { depth, width } => {
                NamedParams { depth, width }
            }
        };
        SymbolConfig {
            family: self.family.name().to_string(),
            p0: if builtin_p0 { None } else { triples(0) },
            p1: triples(1),
            p2: triples(2),
            morse: self
                .potential
                .as_ref()
                .filter(|p| matches!(p, Potential::Morse { .. }))
                .map(params),
            poschl_teller: self
                .potential
                .as_ref()
                .filter(|p| matches!(p, Potential::PoschlTeller { .. }))
                .map(params),
            derivative_mode: (self.derivative_mode == DerivativeMode::FiniteDifference)
                .then_some(DerivativeMode::FiniteDifference),
        }
    }
}

fn check_terms(terms: &[Monomial]) -> Result<(), SymbolError> {
    if terms.iter().any(|m| !m.coeff.is_finite()) {
        return Err(SymbolError::NonFinite);
    }
    Ok(())
}

/// Central-difference partial derivative with one Richardson level.
///
/// The step for a derivative of order `k` is `ε^(1/(k+4)) (1 + |x|)`, the
/// balance point for a fourth-order-accurate (extrapolated) stencil.
pub fn finite_difference_partial<F>(f: F, dx: usize, dxi: usize, x: f64, xi: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    if dx == 0 && dxi == 0 {
        return f(x, xi);
    }
    if dxi == 0 {
        return richardson_central(|a| f(a, xi), dx, x);
    }
    if dx == 0 {
        return richardson_central(|b| f(x, b), dxi, xi);
    }
    richardson_central(|a| richardson_central(|b| f(a, b), dxi, xi), dx, x)
}

fn richardson_central<F: Fn(f64) -> f64>(f: F, order: usize, at: f64) -> f64 {
    let step = f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * (1.0 + at.abs());
    let coarse = central_stencil(&f, order, at, step);
    let fine = central_stencil(&f, order, at, 0.5 * step);
    (4.0 * fine - coarse) / 3.0
}

fn central_stencil<F: Fn(f64) -> f64>(f: &F, order: usize, at: f64, step: f64) -> f64 {
    // Σ_j (-1)^j C(k, j) f(at + (k/2 - j) s) / s^k, second-order accurate.
    let k = order as f64;
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 0..=order {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(at + (0.5 * k - j as f64) * step);
        binom = binom * (order - j) as f64 / (j + 1) as f64;
    }
    acc / step.powi(order as i32)
}

/// On-disk form of a symbol (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<(f64, f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<Vec<(f64, f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<Vec<(f64, f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morse: Option<NamedParams>,
    #[serde(
        default,
        rename = "poschl-teller",
        skip_serializing_if = "Option::is_none"
    )]
    pub poschl_teller: Option<NamedParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_mode: Option<DerivativeMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedParams {
    #[serde(rename = "A")]
    pub depth: f64,
    #[serde(rename = "a")]
    pub width: f64,
}

fn monomials(triples: &[(f64, f64, f64)]) -> Result<Vec<Monomial>, SymbolError> {
    triples
        .iter()
        .map(|&(c, m, k)| {
            for p in [m, k] {
                if p < 0.0 || p.fract() != 0.0 || !p.is_finite() {
                    return Err(SymbolError::BadPower(p));
                }
            }
            if !c.is_finite() {
                return Err(SymbolError::NonFinite);
            }
            Ok(Monomial::new(c, m as u32, k as u32))
        })
        .collect()
}

/// Parses a TOML symbol description.
///
/// ```toml
/// family = "quartic-well"
/// p1 = [[1.0, 1, 0]]      # p1 = x
/// p2 = [[-2.0, 0, 0]]     # p2 = -2
/// ```
pub fn parse_symbol_config(text: &str) -> Result<SymbolModel, SymbolError> {
    let cfg: SymbolConfig =
        toml::from_str(text).map_err(|e| SymbolError::Malformed(e.message().to_string()))?;
    SymbolModel::try_from(cfg)
}

impl TryFrom<SymbolConfig> for SymbolModel {
    type Error = SymbolError;

    fn try_from(cfg: SymbolConfig) -> Result<Self, SymbolError> {
        let family = Family::from_name(&cfg.family)?;
        let require = |block: Option<NamedParams>, name: &str| {
            block.ok_or_else(|| SymbolError::MissingParams {
                family: cfg.family.clone(),
                block: name.to_string(),
            })
        };
        let builtin = |model: SymbolModel| -> Result<SymbolModel, SymbolError> {
            if cfg.p0.is_some() {
                return Err(SymbolError::BuiltinOverride(cfg.family.clone()));
            }
            Ok(model)
        };
        let mut model = match family {
            Family::Harmonic => builtin(SymbolModel::harmonic())?,
            Family::QuarticWell => builtin(SymbolModel::quartic_well())?,
            Family::Morse => {
                let p = require(cfg.morse, "morse")?;
                builtin(SymbolModel::morse(p.depth, p.width))?
            }
            Family::PoschlTeller => {
                let p = require(cfg.poschl_teller, "poschl-teller")?;
                builtin(SymbolModel::poschl_teller(p.depth, p.width))?
            }
            Family::Polynomial | Family::Custom => {
                let p0 = cfg.p0.as_deref().ok_or_else(|| {
                    SymbolError::Malformed(format!("family `{}` requires p0", cfg.family))
                })?;
                let mut m = SymbolModel::polynomial(monomials(p0)?)?.with_family(family);
                if family == Family::Custom {
                    m = m.with_derivative_mode(DerivativeMode::FiniteDifference);
                }
                m
            }
        };
        if let Some(p1) = &cfg.p1 {
            model = model.with_p1(monomials(p1)?)?;
        }
        if let Some(p2) = &cfg.p2 {
            model = model.with_p2(monomials(p2)?)?;
        }
        if let Some(mode) = cfg.derivative_mode {
            model = model.with_derivative_mode(mode);
        }
        Ok(model)
    }
}
