//! Dormand–Prince 5(4) integrator with dense output for autonomous systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}); flow is singular")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    cont: [[f64; D]; 5],
}

impl<const D: usize> Step<D> {
    /// Fourth-order dense output at `t ∈ [t0, t1]`.
    pub fn interpolate(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / (self.t1 - self.t0);
        let theta1 = 1.0 - theta;
        let c = &self.cont;
        std::array::from_fn(|i| {
            c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])))
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-13,
            atol: 1e-15,
            max_steps: 2_000_000,
        }
    }
}

pub struct Dopri5<F, const D: usize> {
    rhs: F,
    tol: Tolerances,
}

impl<F, const D: usize> Dopri5<F, D>
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    pub fn new(rhs: F, tol: Tolerances) -> Self {
        Dopri5 { rhs, tol }
    }

    pub fn rhs(&self, y: &[f64; D]) -> [f64; D] {
        (self.rhs)(y)
    }

    /// Integrates from `y0` at time 0 to `t_end` (either sign), returning the final state.
    pub fn integrate(&self, y0: [f64; D], t_end: f64) -> Result<[f64; D], OdeError> {
        let mut last = y0;
        self.integrate_with(y0, t_end, None, |step| {
            last = step.y1;
            true
        })?;
        Ok(last)
    }

    /// Integrates while `on_step` returns `true`. Returns the step size
    /// suggested for continuing.
    pub fn integrate_with<C>(
        &self,
        y0: [f64; D],
        t_end: f64,
        h_init: Option<f64>,
        mut on_step: C,
    ) -> Result<f64, OdeError>
    where
        C: FnMut(&Step<D>) -> bool,
    {
        if t_end == 0.0 {
            return Ok(0.0);
        }
        let dir = t_end.signum();
        let mut t = 0.0;
        let mut y = y0;
        let mut k1 = self.rhs(&y);
        let mut h = h_init
            .map(|h| h.abs())
            .unwrap_or_else(|| self.initial_step(&y, &k1, t_end.abs()))
            .min(t_end.abs());
        let mut steps = 0usize;
        loop {
            if steps >= self.tol.max_steps {
                return Err(OdeError::TooManySteps(steps));
            }
            steps += 1;
            let remaining = (t_end - t) * dir;
            let last = h >= remaining * (1.0 - 1e-14);
            if last {
                h = remaining;
            }
            let hs = h * dir;
            let (y1, k7, err, cont, _) = self.attempt(&y, &k1, hs);
            if !err.is_finite() {
                return Err(OdeError::NonFinite(t));
            }
            if err <= 1.0 {
                let t1 = if last { t_end } else { t + hs };
                let step = Step {
                    t0: t,
                    t1,
                    y0: y,
                    y1,
                    cont,
                };
                t = t1;
                y = y1;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let next = h * fac;
                if !on_step(&step) || last {
                    return Ok(next);
                }
                h = next;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(OdeError::StepUnderflow { t, h });
                }
            }
        }
    }

    /// `steps` equal steps to `t_end` without step control. Returns the end state
    /// and the largest scaled local error estimate seen (`<= 1` means every step
    /// would have been accepted by the adaptive driver).
    pub fn fixed_steps(
        &self,
        y0: [f64; D],
        t_end: f64,
        steps: usize,
    ) -> Result<([f64; D], f64), OdeError> {
        let mut y = y0;
        let mut comp = [0.0; D];
        let err = self.fixed_steps_compensated(&mut y, &mut comp, t_end, steps)?;
        Ok((y, err))
    }

    /// As [`Self::fixed_steps`], updating `y` in place with its running
    /// compensation term `comp`, so that consecutive calls chain without
    /// rounding the state at every boundary.
    pub fn fixed_steps_compensated(
        &self,
        y: &mut [f64; D],
        comp: &mut [f64; D],
        t_end: f64,
        steps: usize,
    ) -> Result<f64, OdeError> {
        let h = t_end / steps.max(1) as f64;
        let mut k1 = self.rhs(y);
        let mut worst = 0.0f64;
        for k in 0..steps.max(1) {
            let (_, k7, err, _, inc) = self.attempt(y, &k1, h);
            if !err.is_finite() {
                return Err(OdeError::NonFinite(k as f64 * h));
            }
            worst = worst.max(err);
            for i in 0..D {
                let z = inc[i] - comp[i];
                let s = y[i] + z;
                comp[i] = (s - y[i]) - z;
                y[i] = s;
            }
            k1 = k7;
        }
        Ok(worst)
    }

    fn initial_step(&self, y: &[f64; D], f0: &[f64; D], span: f64) -> f64 {
        let sc: Vec<f64> = y
            .iter()
            .map(|v| self.tol.atol + self.tol.rtol * v.abs())
            .collect();
        let d0 = norm(y, &sc);
        let d1 = norm(f0, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0.min(span).max(1e-10 * span)
    }

    #[allow(clippy::type_complexity)]
    fn attempt(
        &self,
        y: &[f64; D],
        k1: &[f64; D],
        h: f64,
    ) -> ([f64; D], [f64; D], f64, [[f64; D]; 5], [f64; D]) {
        let stage = |coef: &[(f64, &[f64; D])]| -> [f64; D] {
            std::array::from_fn(|i| y[i] + h * coef.iter().map(|(a, k)| a * k[i]).sum::<f64>())
        };
        let k2 = self.rhs(&stage(&[(A21, k1)]));
        let k3 = self.rhs(&stage(&[(A31, k1), (A32, &k2)]));
        let k4 = self.rhs(&stage(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = self.rhs(&stage(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = self.rhs(&stage(&[
            (A61, k1),
            (A62, &k2),
            (A63, &k3),
            (A64, &k4),
            (A65, &k5),
        ]));
        let inc: [f64; D] = std::array::from_fn(|i| {
            h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
        });
        let y1: [f64; D] = std::array::from_fn(|i| y[i] + inc[i]);
        let k7 = self.rhs(&y1);
        let mut acc = 0.0;
        for i in 0..D {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y1[i].abs());
            acc += (e / sc).powi(2);
        }
        let err = (acc / D as f64).sqrt();
        let ydiff: [f64; D] = std::array::from_fn(|i| y1[i] - y[i]);
        let bspl: [f64; D] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
        let cont = [
            *y,
            ydiff,
            bspl,
            std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
            std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            }),
        ];
        (y1, k7, err, cont, inc)
    }
}

fn norm(v: &[f64], sc: &[f64]) -> f64 {
    (v.iter().zip(sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_closed_form() {
        let ode = Dopri5::new(|y: &[f64; 2]| [y[1], -y[0]], Tolerances::default());
        let y = ode.integrate([1.0, 0.0], 2.0).unwrap();
        assert!((y[0] - 2f64.cos()).abs() < 1e-12);
        assert!((y[1] + 2f64.sin()).abs() < 1e-12);
        let back = ode.integrate(y, -2.0).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12 && back[1].abs() < 1e-12);
    }

    #[test]
    fn dense_output_is_accurate() {
        let ode = Dopri5::new(|y: &[f64; 1]| [y[0]], Tolerances::default());
        let mut worst: f64 = 0.0;
        ode.integrate_with([1.0], 1.0, None, |s| {
            let tm = 0.5 * (s.t0 + s.t1);
            worst = worst.max((s.interpolate(tm)[0] - tm.exp()).abs());
            true
        })
        .unwrap();
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn fixed_steps_match_adaptive() {
        let ode = Dopri5::new(|y: &[f64; 2]| [y[1], -y[0]], Tolerances::default());
        let (y, err) = ode.fixed_steps([1.0, 0.0], 3.0, 4000).unwrap();
        assert!(err <= 1.0);
        assert!((y[0] - 3.0f64.cos()).abs() < 1e-13);
        assert!((y[1] + 3.0f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn zero_duration_is_identity() {
        let ode = Dopri5::new(|y: &[f64; 2]| [y[1], -y[0]], Tolerances::default());
        assert_eq!(ode.integrate([0.3, 0.7], 0.0).unwrap(), [0.3, 0.7]);
    }
}
