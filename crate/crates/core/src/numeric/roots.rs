//! Bracketed scalar root finding.

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("root not bracketed: f({a}) = {fa}, f({b}) = {fb}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("no convergence after {0} iterations")]
    Stagnated(usize),
    #[error("function returned a non-finite value at {0}")]
    NonFinite(f64),
}

/// Brent's method (inverse quadratic interpolation / secant guarded by bisection).
///
/// `f` may fail; its error is converted into `E` and returned unchanged.
pub fn brent<F, E>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<RootError>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a).into());
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b).into());
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb }.into());
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
        if !fb.is_finite() {
            return Err(RootError::NonFinite(b).into());
        }
    }
    Err(RootError::Stagnated(max_iter).into())
}

/// Walks `x0, x0 + step, ...` up to `x_max` and returns the first interval on
/// which `f` changes sign.
pub fn scan_for_sign_change<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    x_max: f64,
    steps: usize,
) -> Option<(f64, f64)> {
    let dx = (x_max - x0) / steps as f64;
    let mut prev = (x0, f(x0));
    for i in 1..=steps {
        let x = x0 + dx * i as f64;
        let v = f(x);
        if prev.1.signum() != v.signum() || v == 0.0 {
            return Some((prev.0, x));
        }
        prev = (x, v);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r: Result<f64, RootError> = brent(|x| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-15, 100);
        assert!((r.unwrap() - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        let r: Result<f64, RootError> = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 50);
        assert!(matches!(r, Err(RootError::NotBracketed { .. })));
    }

    #[test]
    fn scan_finds_first_change() {
        let (a, b) = scan_for_sign_change(|x| x.sin(), 0.5, 10.0, 100).unwrap();
        assert!(a < std::f64::consts::PI && b >= std::f64::consts::PI);
    }
}
