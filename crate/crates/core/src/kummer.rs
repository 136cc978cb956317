//! Kummer's confluent hypergeometric function `Phi(a, b, z)` for real
//! parameters and complex argument.
//!
//! The power series is the primary evaluator. It accumulates in double-double
//! arithmetic so that the cancellation between the growing and decaying parts
//! of the series does not eat the result for moderate negative `Re(z)`. The
//! Euler integral is a second, independent evaluator used for cross-checks.

use crate::combinatorics::{factorial, gamma, ln_gamma};
use crate::dd::DdComplex;
use crate::error::{Error, Result};
use crate::quadrature;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default relative stopping tolerance of the series.
pub const DEFAULT_REL_TOL: f64 = 1e-15;

const MAX_TERMS: usize = 100_000;
const MAX_ABS_Z: f64 = 200.0;

/// Real parameters `(a, b)`; `b` must not be zero or a negative integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KummerParams {
    pub a: f64,
    pub b: f64,
}

impl KummerParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = KummerParams { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidArgument("Kummer parameters must be finite".into()));
        }
        if self.b <= 1e-12 && (self.b - self.b.round()).abs() <= 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "b = {} is zero or a negative integer",
                self.b
            )));
        }
        Ok(())
    }

    /// Parameters `(b - a, b)` of the reflected function.
    pub fn reflected(&self) -> Self {
        KummerParams {
            a: self.b - self.a,
            b: self.b,
        }
    }

    fn shifted(&self, k: f64) -> Self {
        KummerParams {
            a: self.a + k,
            b: self.b + k,
        }
    }
}

/// Series value together with bookkeeping useful for judging its accuracy.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Sum of the magnitudes of all terms.
    pub magnitude: f64,
    /// Largest single term magnitude.
    pub max_term: f64,
    pub terms: usize,
}

/// Evaluates the defining power series with bookkeeping.
pub fn phi_series_detailed(p: &KummerParams, z: Complex64, rel_tol: f64) -> Result<SeriesValue> {
    p.validate()?;
    if !(rel_tol >= DEFAULT_REL_TOL) {
        return Err(Error::InvalidArgument(format!(
            "rel_tol must be at least {DEFAULT_REL_TOL:e}"
        )));
    }
    let abs_z = z.norm();
    if !(abs_z <= MAX_ABS_Z) {
        return Err(Error::Precondition(format!("|z| = {abs_z} exceeds {MAX_ABS_Z}")));
    }
    let mut term = DdComplex::new(Complex64::new(1.0, 0.0));
    let mut sum = term;
    let mut magnitude = 1.0;
    let mut max_term: f64 = 1.0;
    let mut small_run = 0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let numer = p.a + kf;
        if numer == 0.0 {
            break;
        }
        term = term
            .mul_complex(z)
            .scale(numer)
            .div_real((p.b + kf) * (kf + 1.0));
        k += 1;
        let t = term.norm();
        sum = sum.add(term);
        magnitude += t;
        max_term = max_term.max(t);
        let s = sum.norm();
        if t == 0.0 || (k as f64 > abs_z && t <= rel_tol * s) {
            small_run += 1;
            if small_run >= 3 || t == 0.0 {
                break;
            }
        } else {
            small_run = 0;
        }
        if k >= MAX_TERMS {
            return Err(Error::SeriesNonConvergence { terms: k });
        }
    }
    let value = sum.to_complex();
    let rounding = max_term * (k as f64 + 1.0) * 2f64.powi(-104);
    if rounding > 1e-12 * value.norm().max(1.0) {
        return Err(Error::PrecisionLoss {
            max_term,
            sum: value.norm(),
        });
    }
    Ok(SeriesValue {
        value,
        magnitude,
        max_term,
        terms: k + 1,
    })
}

/// `Phi(a, b, z)` by its power series.
pub fn phi_series(p: &KummerParams, z: Complex64, rel_tol: f64) -> Result<Complex64> {
    phi_series_detailed(p, z, rel_tol).map(|s| s.value)
}

fn gamma_ratio(a: f64, b: f64) -> f64 {
    // Gamma(b) / (Gamma(a) Gamma(b - a))
    let is_int = |x: f64| x.fract() == 0.0 && x <= 35.0;
    if is_int(a) && is_int(b) {
        factorial(b as u64 - 1) / (factorial(a as u64 - 1) * factorial((b - a) as u64 - 1))
    } else if b < 150.0 {
        gamma(b) / (gamma(a) * gamma(b - a))
    } else {
        (ln_gamma(b) - ln_gamma(a) - ln_gamma(b - a)).exp()
    }
}

/// `Phi(a, b, z)` by the Euler integral; requires `b > a > 0`.
pub fn phi_integral(p: &KummerParams, z: Complex64) -> Result<Complex64> {
    p.validate()?;
    if !(p.b > p.a && p.a > 0.0) {
        return Err(Error::Precondition(format!(
            "integral representation needs b > a > 0, got a = {}, b = {}",
            p.a, p.b
        )));
    }
    let (ea, eb) = (p.a - 1.0, p.b - p.a - 1.0);
    // Split at 1/2 and write the right half in u = 1 - t so both endpoint
    // singularities sit at the origin, where nodes resolve them exactly.
    let left = move |t: f64| (z * t).exp() * (t.powf(ea) * (1.0 - t).powf(eb));
    let right = move |u: f64| (z * (1.0 - u)).exp() * (u.powf(eb) * (1.0 - u).powf(ea));
    let graded = |singular: bool| -> Vec<f64> {
        if singular {
            (2..80).map(|k| 0.5f64.powi(k)).collect()
        } else {
            Vec::new()
        }
    };
    let (bl, br) = (graded(p.a < 1.0), graded(p.b - p.a < 1.0));
    let fl = quadrature::integrate_to_rounding(left, 0.0, 0.5, &bl, 1e-15)?;
    let fr = quadrature::integrate_to_rounding(right, 0.0, 0.5, &br, 1e-15)?;
    Ok((fl.value + fr.value) * gamma_ratio(p.a, p.b))
}

/// Relative defect of the reflection identity `Phi(a,b,z) = e^z Phi(b-a,b,-z)`.
pub fn reflection_residual(p: &KummerParams, z: Complex64) -> Result<f64> {
    let lhs = phi_series(p, z, DEFAULT_REL_TOL)?;
    let rhs = z.exp() * phi_series(&p.reflected(), -z, DEFAULT_REL_TOL)?;
    Ok((lhs - rhs).norm() / rhs.norm().max(1.0))
}

/// Relative defect of Kummer's differential equation, with the derivatives
/// taken from the term-wise differentiated series.
pub fn ode_residual(p: &KummerParams, z: Complex64) -> Result<f64> {
    let (a, b) = (p.a, p.b);
    let phi = phi_series(p, z, DEFAULT_REL_TOL)?;
    let d1 = phi_series(&p.shifted(1.0), z, DEFAULT_REL_TOL)? * (a / b);
    let d2 = phi_series(&p.shifted(2.0), z, DEFAULT_REL_TOL)? * (a * (a + 1.0) / (b * (b + 1.0)));
    let defect = z * d2 + (b - z) * d1 - a * phi;
    Ok(defect.norm() / (a * phi).norm().max(1.0))
}

/// Half-plane in which the nontrivial zeros of `Phi(a, b, .)` lie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRegion {
    OnImaginaryAxis,
    RightHalf,
    LeftHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroClassification {
    pub region: ZeroRegion,
    /// Whether `Re(z)` agrees with `region` within the tolerance.
    pub consistent: bool,
    /// Whether the hyperbola inequality holds (vacuously true when `b = 2a`).
    pub hyperbola_ok: bool,
    /// Left-hand side of the hyperbola inequality, when it applies.
    pub hyperbola_margin: Option<f64>,
}

const REGION_TOL: f64 = 1e-7;

/// Classifies a nontrivial zero `z` of `Phi(a, b, .)` for `b >= 2`.
pub fn classify_zero_region(p: &KummerParams, z: Complex64) -> Result<ZeroClassification> {
    p.validate()?;
    if p.b < 2.0 {
        return Err(Error::Precondition(format!(
            "zero-location result needs b >= 2, got b = {}",
            p.b
        )));
    }
    if z.norm() == 0.0 {
        return Err(Error::Precondition("z must be a nontrivial zero".into()));
    }
    let s = phi_series_detailed(p, z, DEFAULT_REL_TOL)?;
    let threshold = 1e-8 * s.magnitude;
    if s.value.norm() >= threshold {
        return Err(Error::NotARoot {
            magnitude: s.value.norm(),
            threshold,
        });
    }
    let gap = p.b - 2.0 * p.a;
    let tol = REGION_TOL * z.norm().max(1.0);
    let (region, consistent) = if gap.abs() <= 1e-12 * p.b.abs() {
        (ZeroRegion::OnImaginaryAxis, z.re.abs() < tol)
    } else if gap > 0.0 {
        (ZeroRegion::RightHalf, z.re > -tol)
    } else {
        (ZeroRegion::LeftHalf, z.re < tol)
    };
    let (hyperbola_ok, hyperbola_margin) = if region == ZeroRegion::OnImaginaryAxis {
        (true, None)
    } else {
        let margin =
            gap * gap * z.im * z.im - (4.0 * p.a * (p.b - p.a) - 2.0 * p.b) * z.re * z.re;
        (margin > 0.0, Some(margin))
    };
    Ok(ZeroClassification {
        region,
        consistent,
        hyperbola_ok,
        hyperbola_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn value_at_origin_is_one() {
        for (a, b) in [(1.0, 2.0), (-3.0, 0.5), (2.5, 7.0)] {
            let p = KummerParams::new(a, b).unwrap();
            assert_eq!(phi_series(&p, c(0.0, 0.0), DEFAULT_REL_TOL).unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn exponential_closed_form() {
        let p = KummerParams::new(1.0, 2.0).unwrap();
        let v = phi_series(&p, c(1.0, 0.0), DEFAULT_REL_TOL).unwrap();
        assert!((v.re - (std::f64::consts::E - 1.0)).abs() < 1e-12);
        // strong cancellation on the negative axis
        let v = phi_series(&p, c(-20.0, 0.0), DEFAULT_REL_TOL).unwrap();
        let exact = (1.0 - (-20.0f64).exp()) / 20.0;
        assert!((v.re - exact).abs() < 1e-15 * exact);
    }

    #[test]
    fn terminating_series_is_a_polynomial() {
        // Phi(-2, b, z) = 1 - 2z/b + z^2/(b(b+1))
        let p = KummerParams::new(-2.0, 3.0).unwrap();
        let z = c(1.5, -0.5);
        let expected = 1.0 - 2.0 * z / 3.0 + z * z / 12.0;
        assert!((phi_series(&p, z, DEFAULT_REL_TOL).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(KummerParams::new(1.0, 0.0).is_err());
        assert!(KummerParams::new(1.0, -3.0).is_err());
        let p = KummerParams::new(1.0, 2.0).unwrap();
        assert!(phi_series(&p, c(250.0, 0.0), DEFAULT_REL_TOL).is_err());
        assert!(phi_series(&p, c(1.0, 0.0), 1e-17).is_err());
        assert!(matches!(
            phi_series(&p, c(-199.0, 0.0), DEFAULT_REL_TOL),
            Err(Error::PrecisionLoss { .. })
        ));
        let q = KummerParams::new(3.0, 2.0).unwrap();
        assert!(matches!(phi_integral(&q, c(0.0, 0.0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn integral_matches_series() {
        let p = KummerParams::new(1.0, 2.0).unwrap();
        assert!((phi_integral(&p, c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        let p = KummerParams::new(2.0, 4.0).unwrap();
        let z = c(-1.0, 0.0);
        let s = phi_series(&p, z, DEFAULT_REL_TOL).unwrap();
        let i = phi_integral(&p, z).unwrap();
        assert!((s - i).norm() < 1e-11 * s.norm());
    }

    #[test]
    fn integral_with_endpoint_singularities() {
        let p = KummerParams::new(0.5, 1.25).unwrap();
        let z = c(-2.0, 3.0);
        let s = phi_series(&p, z, DEFAULT_REL_TOL).unwrap();
        let i = phi_integral(&p, z).unwrap();
        assert!((s - i).norm() < 1e-9 * s.norm().max(1.0), "{s} vs {i}");
    }

    #[test]
    fn reflection_and_ode_examples() {
        let p = KummerParams::new(1.0, 2.0).unwrap();
        assert!(reflection_residual(&p, c(1.0, 0.0)).unwrap() < 1e-12);
        assert!(reflection_residual(&p, c(0.0, 0.0)).unwrap() < 1e-15);
        let q = KummerParams::new(2.0, 4.0).unwrap();
        assert!(reflection_residual(&q, c(0.0, 5.0)).unwrap() < 1e-11);

        assert!(ode_residual(&p, c(1.0, 0.0)).unwrap() < 1e-11);
        assert!(ode_residual(&p, c(0.0, 0.0)).unwrap() == 0.0);
        assert!(ode_residual(&q, c(-3.0, 2.0)).unwrap() < 1e-10);
    }

    #[test]
    fn classification_rejects_non_roots_and_small_b() {
        let p = KummerParams::new(2.0, 5.0).unwrap();
        assert!(matches!(
            classify_zero_region(&p, c(1.0, 1.0)),
            Err(Error::NotARoot { .. })
        ));
        let small = KummerParams::new(0.5, 1.5).unwrap();
        assert!(matches!(
            classify_zero_region(&small, c(1.0, 1.0)),
            Err(Error::Precondition(_))
        ));
        assert!(classify_zero_region(&p, c(0.0, 0.0)).is_err());
    }
}
