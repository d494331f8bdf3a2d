//! Gauss–Legendre and periodic trapezoid quadrature.

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mid + half * z))
            .sum::<f64>()
            * half
    }

    /// Fallible variant; stops at the first error.
    pub fn try_integrate<F, E>(&self, a: f64, b: f64, mut f: F) -> Result<f64, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * z)?;
        }
        Ok(acc * half)
    }
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Cumulative integrals `∫_{grid[anchor]}^{grid[i]} f` for every node, panel by panel.
pub fn cumulative<F, E>(grid: &[f64], anchor: usize, mut f: F) -> Result<Vec<f64>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let rule = GaussLegendre::standard();
    let mut out = vec![0.0; grid.len()];
    for i in anchor + 1..grid.len() {
        out[i] = out[i - 1] + rule.try_integrate(grid[i - 1], grid[i], &mut f)?;
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1] - rule.try_integrate(grid[i], grid[i + 1], &mut f)?;
    }
    Ok(out)
}

/// Periodic trapezoid sum over one period of equispaced samples, with the
/// half-resolution difference as an error estimate.
pub fn periodic_trapezoid(values: &[f64], period: f64) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2);
    let full = compensated_sum(values.iter().copied()) * period / n as f64;
    if !n.is_multiple_of(2) {
        return (full, f64::NAN);
    }
    let half = compensated_sum(values.iter().copied().step_by(2)) * period / (n / 2) as f64;
    (full, (full - half).abs())
}

/// Neumaier summation. Plain sums of ~10³ near-equal terms carry ~10⁻¹⁴
/// relative noise, which E-differences of loop integrals amplify.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(10);
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(19) - 3.0 * x.powi(4));
        let exact = (2f64.powi(20) - 1.0) / 20.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-9 * exact.abs());
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(compensated_sum(v), 2e-16);
    }

    #[test]
    fn cumulative_from_interior_anchor() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let c = cumulative::<_, ()>(&grid, 4, |x| Ok(x.cos())).unwrap();
        for (x, v) in grid.iter().zip(&c) {
            assert!((v - (x.sin() - grid[4].sin())).abs() < 1e-14);
        }
    }

    #[test]
    fn trapezoid_spectral_on_periodic() {
        let n = 64;
        let p = 2.0 * std::f64::consts::PI;
        let vals: Vec<f64> = (0..n)
            .map(|k| (p * k as f64 / n as f64).cos().exp())
            .collect();
        let (v, err) = periodic_trapezoid(&vals, p);
        // 2π I0(1)
        assert!((v - 7.954926521012844).abs() < 1e-13);
        assert!(err < 1e-12);
    }
}
