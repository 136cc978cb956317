//! Quasipolynomials with real shifts, the single-delay characteristic
//! function, and the affine change of variables `z = tau (s - s0)`.

use crate::combinatorics::{binomial, sign_pow};
use crate::dd::Dd;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest admissible `|sigma * Re(s)|` before `exp` is considered to overflow.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Highest derivative order accepted by [`Quasipolynomial::eval`].
pub const MAX_DERIVATIVE_ORDER: usize = 64;

/// Linear delay-differential equation with a single delay
///
/// `y^(n)(t) + sum a_k y^(k)(t) + sum alpha_l y^(l)(t - tau) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySystem {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Retarded,
    Neutral,
    /// Every delayed coefficient vanishes; the equation is an ODE.
    DelayFree,
}

impl DelaySystem {
    pub fn new(n: usize, m: usize, a: Vec<f64>, alpha: Vec<f64>, tau: f64) -> Result<Self> {
        let sys = DelaySystem {
            n,
            m,
            a,
            alpha,
            tau,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Checks the structural invariants. An identically zero `alpha` is
    /// accepted as the delay-free limit; otherwise `alpha[m]` must be nonzero.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.m > self.n {
            return bad(format!("m = {} exceeds n = {}", self.m, self.n));
        }
        if self.a.len() != self.n {
            return bad(format!("a has length {}, expected {}", self.a.len(), self.n));
        }
        if self.alpha.len() != self.m + 1 {
            return bad(format!(
                "alpha has length {}, expected {}",
                self.alpha.len(),
                self.m + 1
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive and finite, got {}", self.tau));
        }
        if self.a.iter().chain(&self.alpha).any(|v| !v.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        if self.alpha[self.m] == 0.0 && self.alpha.iter().any(|v| *v != 0.0) {
            return bad("alpha[m] must be nonzero (lower m instead)".into());
        }
        Ok(())
    }

    pub fn kind(&self) -> SystemKind {
        if self.alpha.iter().all(|v| *v == 0.0) {
            SystemKind::DelayFree
        } else if self.m < self.n {
            SystemKind::Retarded
        } else {
            SystemKind::Neutral
        }
    }

    /// `a_{n-1}`, the coefficient that fixes the admissible multiple root.
    pub fn a_last(&self) -> f64 {
        self.a[self.n - 1]
    }

    pub fn characteristic(&self) -> Quasipolynomial {
        as_quasipolynomial(self)
    }
}

/// One `P(s) e^{shift s}` summand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub shift: f64,
    /// Ascending monomial coefficients.
    pub poly: Vec<Complex64>,
}

impl Term {
    pub fn real(shift: f64, coeffs: &[f64]) -> Self {
        Term {
            shift,
            poly: coeffs.iter().map(|c| Complex64::new(*c, 0.0)).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.poly.len() - 1
    }
}

/// Finite sum of polynomial-times-exponential terms with pairwise distinct
/// shifts. Terms are kept sorted by decreasing shift and the leading
/// coefficient of the first term is normalized to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quasipolynomial {
    terms: Vec<Term>,
}

impl Quasipolynomial {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut terms: Vec<Term> = terms
            .into_iter()
            .filter_map(|mut t| {
                while t.poly.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
                    t.poly.pop();
                }
                (!t.poly.is_empty()).then_some(t)
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "quasipolynomial has no nonzero term".into(),
            ));
        }
        if terms
            .iter()
            .any(|t| !t.shift.is_finite() || t.poly.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite quasipolynomial data".into()));
        }
        terms.sort_by(|x, y| y.shift.partial_cmp(&x.shift).unwrap());
        if terms.windows(2).any(|w| w[0].shift == w[1].shift) {
            return Err(Error::InvalidArgument("shifts must be pairwise distinct".into()));
        }
        let lead = *terms[0].poly.last().unwrap();
        if lead != Complex64::new(1.0, 0.0) {
            for t in &mut terms {
                for c in &mut t.poly {
                    *c /= lead;
                }
            }
        }
        Ok(Quasipolynomial { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Pólya–Szegő degree: number of terms minus one plus the sum of the
    /// polynomial degrees.
    pub fn degree_ps(&self) -> usize {
        self.terms.len() - 1 + self.terms.iter().map(Term::degree).sum::<usize>()
    }

    /// Largest pairwise gap between shifts.
    pub fn shift_spread(&self) -> f64 {
        let first = self.terms.first().unwrap().shift;
        let last = self.terms.last().unwrap().shift;
        first - last
    }

    /// True when every coefficient is real, so roots come in conjugate pairs.
    pub fn has_real_coefficients(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.poly.iter().all(|c| c.im == 0.0))
    }

    /// Value of the `order`-th derivative at `s`.
    pub fn eval(&self, s: Complex64, order: usize) -> Result<Complex64> {
        self.eval_scaled(s, order).map(|(v, _)| v)
    }

    /// Value of the `order`-th derivative together with the sum of the
    /// magnitudes of every Leibniz summand, a scale against which rounding
    /// and cancellation can be judged.
    pub fn eval_scaled(&self, s: Complex64, order: usize) -> Result<(Complex64, f64)> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::InvalidArgument(format!(
                "derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"
            )));
        }
        let mut value = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        let abs_s = s.norm();
        for term in &self.terms {
            let exponent = term.shift * s.re;
            if exponent.abs() > EXPONENT_LIMIT {
                return Err(Error::Overflow {
                    exponent,
                    limit: EXPONENT_LIMIT,
                });
            }
            let e = (s * term.shift).exp();
            let e_abs = exponent.exp();
            let mut tv = Complex64::new(0.0, 0.0);
            let mut ts = 0.0;
            for i in 0..=order.min(term.degree()) {
                let weight = binomial(order as i64, i as i64) * term.shift.powi((order - i) as i32);
                if weight == 0.0 {
                    continue;
                }
                // i-th derivative of the polynomial by Horner on the
                // falling-factorial scaled coefficients
                let mut p = Complex64::new(0.0, 0.0);
                let mut pa = 0.0;
                for k in (i..term.poly.len()).rev() {
                    let falling: f64 = ((k - i + 1)..=k).map(|v| v as f64).product();
                    let c = term.poly[k] * falling;
                    p = p * s + c;
                    pa = pa * abs_s + c.norm();
                }
                tv += p * weight;
                ts += pa * weight.abs();
            }
            value += tv * e;
            scale += ts * e_abs;
        }
        Ok((value, scale))
    }

    /// Bounds on the number of roots, counted with multiplicity, in the
    /// closed strip `im_lo <= Im(s) <= im_hi`.
    pub fn polya_szego_bounds(&self, im_lo: f64, im_hi: f64) -> Result<(usize, usize)> {
        polya_szego_bounds(self, im_lo, im_hi)
    }
}

/// The characteristic function `s^n + sum a_k s^k + e^{-tau s} sum alpha_k s^k`.
pub fn as_quasipolynomial(sys: &DelaySystem) -> Quasipolynomial {
    let mut principal: Vec<f64> = sys.a.clone();
    principal.push(1.0);
    let terms = vec![
        Term::real(0.0, &principal),
        Term::real(-sys.tau, &sys.alpha),
    ];
    Quasipolynomial::new(terms).expect("monic principal term is never zero")
}

/// Pólya–Szegő strip bounds `(lower, upper)`; the lower bound is clamped at 0.
pub fn polya_szego_bounds(q: &Quasipolynomial, im_lo: f64, im_hi: f64) -> Result<(usize, usize)> {
    if !(im_lo <= im_hi) {
        return Err(Error::InvalidArgument(format!(
            "strip bounds out of order: {im_lo} > {im_hi}"
        )));
    }
    let spread = q.shift_spread() * (im_hi - im_lo) / (2.0 * PI);
    let d = q.degree_ps() as f64;
    let lower = (spread - d).ceil().max(0.0) as usize;
    let upper = (spread + d).floor() as usize;
    Ok((lower, upper))
}

/// Coefficients of the normalized quasipolynomial
/// `z^n + sum b_k z^k + e^{-z} sum beta_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoeffs {
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
}

impl NormalizedCoeffs {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn quasipolynomial(&self) -> Quasipolynomial {
        let mut principal = self.b.clone();
        principal.push(1.0);
        Quasipolynomial::new(vec![
            Term::real(0.0, &principal),
            Term::real(-1.0, &self.beta),
        ])
        .expect("monic principal term is never zero")
    }
}

fn check_exponent(s0: f64, tau: f64) -> Result<()> {
    let exponent = s0 * tau;
    if !exponent.is_finite() || exponent.abs() > EXPONENT_LIMIT {
        return Err(Error::Overflow {
            exponent,
            limit: EXPONENT_LIMIT,
        });
    }
    Ok(())
}

/// Coefficients of `tau^n Delta(s0 + z / tau)`.
pub fn normalize(sys: &DelaySystem, s0: f64) -> Result<NormalizedCoeffs> {
    sys.validate()?;
    check_exponent(s0, sys.tau)?;
    let (n, tau) = (sys.n, sys.tau);
    let exact = |v: &[f64]| v.iter().map(|&x| Dd::new(x)).collect::<Vec<_>>();
    let decay = (-s0 * tau).exp();
    let b = taylor_shift(&exact(&sys.a), Some(n), s0)
        .into_iter()
        .enumerate()
        .map(|(k, p)| tau_scale(p, tau, n - k, true).to_f64())
        .collect();
    let beta = taylor_shift(&exact(&sys.alpha), None, s0)
        .into_iter()
        .enumerate()
        .map(|(k, q)| tau_scale(q, tau, n - k, true).mul_f64(decay).to_f64())
        .collect();
    Ok(NormalizedCoeffs { b, beta })
}

/// `x tau^p` (or `x / tau^p`) without intermediate rounding.
fn tau_scale(x: Dd, tau: f64, p: usize, multiply: bool) -> Dd {
    (0..p).fold(x, |acc, _| if multiply { acc.mul_f64(tau) } else { acc.div_f64(tau) })
}

/// Coefficients of `c(x + s)` for `c(x) = sum c_j x^j` (plus `x^monic` when
/// given). The shift cancels heavily for `|s| > 1`, so everything stays in
/// double-double until the caller rounds once.
fn taylor_shift(c: &[Dd], monic: Option<usize>, s: f64) -> Vec<Dd> {
    let top = monic.unwrap_or(0).max(c.len());
    let mut pow = vec![Dd::new(1.0); top + 1];
    for d in 1..=top {
        pow[d] = pow[d - 1].mul_f64(s);
    }
    (0..c.len())
        .map(|k| {
            let mut acc = match monic {
                Some(deg) => pow[deg - k].mul_f64(binomial(deg as i64, k as i64)),
                None => Dd::new(0.0),
            };
            for (j, &cj) in c.iter().enumerate().skip(k) {
                acc = acc.add(pow[j - k].mul_f64(binomial(j as i64, k as i64)).mul(cj));
            }
            acc
        })
        .collect()
}

/// Inverse of [`normalize`].
pub fn denormalize(nc: &NormalizedCoeffs, n: usize, m: usize, tau: f64, s0: f64) -> Result<DelaySystem> {
    if nc.b.len() != n || nc.beta.len() != m + 1 || m > n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "coefficient lengths ({}, {}) do not match n = {n}, m = {m}",
            nc.b.len(),
            nc.beta.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    check_exponent(s0, tau)?;
    let unscale = |v: &[f64]| -> Vec<Dd> {
        v.iter()
            .enumerate()
            .map(|(j, &x)| tau_scale(Dd::new(x), tau, n - j, false))
            .collect()
    };
    let a = taylor_shift(&unscale(&nc.b), Some(n), -s0)
        .into_iter()
        .map(Dd::to_f64)
        .collect();
    let growth = (s0 * tau).exp();
    let alpha = taylor_shift(&unscale(&nc.beta), None, -s0)
        .into_iter()
        .map(|x| x.mul_f64(growth).to_f64())
        .collect();
    DelaySystem::new(n, m, a, alpha, tau)
}

/// The confluent Vandermonde matrix `T_k` and its closed-form inverse.
pub fn confluent_vandermonde(k: usize, tau: f64, s0: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i > j {
            0.0
        } else {
            binomial(j as i64, i as i64) * tau.powi((k - i) as i32) * s0.powi((j - i) as i32)
        }
    });
    let s = DMatrix::from_fn(k, k, |j, l| {
        if j > l {
            0.0
        } else {
            sign_pow((l - j) as i64) * binomial(l as i64, j as i64) * s0.powi((l - j) as i32)
                / tau.powi((k - l) as i32)
        }
    });
    Ok((t, s))
}
