//! Globally adaptive Gauss–Legendre quadrature for complex-valued integrands.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::sync::OnceLock;

const ORDER: usize = 20;
const MAX_INTERVALS: usize = 4000;

/// Gauss–Legendre nodes and weights on [-1, 1], computed once by Newton's
/// method on the Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn fixed<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| f(mid + half * x) * *w)
        .sum::<Complex64>()
        * half
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn panel<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let whole = fixed(f, a, b);
    let m = 0.5 * (a + b);
    let halves = fixed(f, a, m) + fixed(f, m, b);
    Panel {
        a,
        b,
        value: halves,
        error: (whole - halves).norm(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: Complex64,
    pub error_estimate: f64,
    /// Integral of |f|, used to judge cancellation.
    pub magnitude: f64,
}

/// Integrates `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |I|)`. `breaks` are extra interior break points
/// (e.g. a geometric grading toward a singular endpoint).
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral> {
    let mut points: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|x| *x > a && *x < b))
        .chain(std::iter::once(b))
        .collect();
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup();
    let mut panels: Vec<Panel> = points.windows(2).map(|w| panel(&f, w[0], w[1])).collect();
    loop {
        let value: Complex64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !error.is_finite() || !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::QuadratureNonConvergence { estimate: error });
        }
        if error <= abs_tol.max(rel_tol * value.norm()) {
            let abs_f = |t: f64| Complex64::new(f(t).norm(), 0.0);
            let magnitude = panels.iter().map(|p| fixed(&abs_f, p.a, p.b).re).sum();
            return Ok(Integral {
                value,
                error_estimate: error,
                magnitude,
            });
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence { estimate: error });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .unwrap();
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::QuadratureNonConvergence { estimate: error });
        }
        panels.push(panel(&f, p.a, m));
        panels.push(panel(&f, m, p.b));
    }
}

/// Integrates to `rel_tol` or to the rounding floor `4 eps * int |f|`,
/// whichever is looser; the mass of `|f|` comes from a coarse first pass.
pub fn integrate_to_rounding<F: Fn(f64) -> Complex64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<Integral> {
    let rough = integrate(f, a, b, breaks, 1e-6, 0.0)?;
    integrate(f, a, b, breaks, rel_tol, 4.0 * f64::EPSILON * rough.magnitude)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        let (x, w) = gauss_legendre(ORDER);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((x38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_exponential() {
        let z = Complex64::new(-3.0, 17.0);
        let r = integrate(|t| (z * t).exp(), 0.0, 1.0, &[], 1e-14, 0.0).unwrap();
        let exact = (z.exp() - 1.0) / z;
        assert!((r.value - exact).norm() < 1e-14 * exact.norm().max(1.0));
    }

    #[test]
    fn integrable_endpoint_singularity_with_grading() {
        let breaks: Vec<f64> = (1..50).map(|k| 0.5f64.powi(k)).collect();
        let r = integrate(
            |t| Complex64::new(t.powf(-0.5), 0.0),
            0.0,
            1.0,
            &breaks,
            1e-12,
            0.0,
        )
        .unwrap();
        assert!((r.value.re - 2.0).abs() < 1e-9);
    }
}
