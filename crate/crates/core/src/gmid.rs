//! Maximal-multiplicity ("GMID") synthesis and its certificates.
//!
//! A real `s0` is a root of multiplicity `m + n + 1` of the characteristic
//! function exactly when the coefficients take the closed form computed by
//! [`synthesize`]. Such a root is dominant: strictly for retarded systems,
//! and for neutral systems every other root lies on `Re s = s0` at the
//! offsets returned by [`neutral_chain`].

use crate::combinatorics::{binomial, factorial, factorial_ratio, sign_pow};
use crate::error::{Error, Result};
use crate::kummer::{phi_series, KummerParams, DEFAULT_REL_TOL};
use crate::quadrature;
use crate::quasipoly::{as_quasipolynomial, DelaySystem, NormalizedCoeffs, SystemKind, EXPONENT_LIMIT};
use crate::rootfinder::{self, DominanceReport, SearchOptions, Verdict};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tolerance used when a certificate reports the multiplicity.
pub const CERTIFICATE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dominance {
    #[serde(rename = "strict")]
    StrictlyDominant,
    #[serde(rename = "on_line")]
    DominantOnLine,
    #[serde(rename = "unverified")]
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmidCertificate {
    pub system: DelaySystem,
    pub s0: f64,
    pub multiplicity: usize,
    /// `|Delta^(k)(s0)|` over the Leibniz scale, `k = 0..=m+n`.
    pub residuals: Vec<f64>,
    pub dominance: Dominance,
    pub stable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_zeta: Option<Vec<f64>>,
}

/// Nonzero real solutions of the neutral chain equation in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    /// Sorted and symmetric about zero.
    pub zeta_values: Vec<f64>,
    pub window: f64,
}

fn check_orders(n: usize, m: usize) -> Result<()> {
    if n == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and 0 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// The only real value that can be a root of maximal multiplicity:
/// `s0 = -a_{n-1} / n - (m + 1) / tau`.
pub fn admissible_root(n: usize, m: usize, tau: f64, a_n_minus_1: f64) -> Result<f64> {
    check_orders(n, m)?;
    check_tau(tau)?;
    Ok(-a_n_minus_1 / n as f64 - (m + 1) as f64 / tau)
}

/// Exponential stability of a maximal-multiplicity system:
/// `a_{n-1} > -n (m + 1) / tau`, equivalently `s0 < 0`.
pub fn stability_verdict(n: usize, m: usize, tau: f64, a_n_minus_1: f64) -> Result<bool> {
    check_orders(n, m)?;
    check_tau(tau)?;
    Ok(a_n_minus_1 > -((n * (m + 1)) as f64) / tau)
}

/// Coefficients of `z^n + sum b_k z^k + e^{-z} sum beta_k z^k` having a root
/// of multiplicity `m + n + 1` at the origin.
pub fn normalized_max_mult(n: usize, m: usize) -> Result<NormalizedCoeffs> {
    check_orders(n, m)?;
    let b: Vec<f64> = (0..n)
        .map(|k| {
            sign_pow((n - k) as i64)
                * factorial_ratio(n as u64, k as u64)
                * binomial((m + n - k) as i64, m as i64)
        })
        .collect();
    let beta: Vec<f64> = (0..=m)
        .map(|k| {
            sign_pow(n as i64 - 1) * factorial_ratio((m + n - k) as u64, (m - k) as u64)
                / factorial(k as u64)
        })
        .collect();
    if b.iter().chain(&beta).any(|v| !v.is_finite()) {
        return Err(Error::Overflow {
            exponent: crate::combinatorics::ln_factorial((m + n) as u64),
            limit: EXPONENT_LIMIT,
        });
    }
    Ok(NormalizedCoeffs { b, beta })
}

fn system_matrix(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m + 1, m + 1, |j, k| {
        let d = n as i64 + j as i64 - k as i64;
        if d < 0 {
            0.0
        } else {
            sign_pow(d) / factorial(d as u64)
        }
    })
}

/// Solves the `(m+1) x (m+1)` system `T beta = -e_0` that the delayed
/// coefficients of the maximal-multiplicity normal form must satisfy.
pub fn max_mult_by_linear_system(n: usize, m: usize) -> Result<Vec<f64>> {
    check_orders(n, m)?;
    if m + n > 30 {
        return Err(Error::InvalidArgument(format!(
            "dense solve limited to m + n <= 30, got {}",
            m + n
        )));
    }
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    rhs[0] = -1.0;
    let beta = system_matrix(n, m).lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(beta.iter().copied().collect())
}

/// `det B` with `B_{jk} = (-1)^{n+j-k} C(n+j, k)`; it equals `(-1)^{n(m+1)}`.
pub fn scaled_system_determinant(n: usize, m: usize) -> Result<f64> {
    check_orders(n, m)?;
    let b = DMatrix::from_fn(m + 1, m + 1, |j, k| {
        sign_pow(n as i64 + j as i64 - k as i64) * binomial((n + j) as i64, k as i64)
    });
    Ok(b.determinant())
}

/// The maximal-multiplicity system for `(n, m, tau, s0)`, from the closed form.
pub fn gmid_system(n: usize, m: usize, tau: f64, s0: f64) -> Result<DelaySystem> {
    check_orders(n, m)?;
    check_tau(tau)?;
    if !s0.is_finite() || (s0 * tau).abs() > EXPONENT_LIMIT {
        return Err(Error::Overflow {
            exponent: s0 * tau,
            limit: EXPONENT_LIMIT,
        });
    }
    let nf = factorial(n as u64);
    let a: Vec<f64> = (0..n)
        .map(|k| {
            let head = binomial(n as i64, k as i64) * (-s0).powi((n - k) as i32);
            let tail: f64 = (k..n)
                .map(|j| {
                    binomial(j as i64, k as i64) * binomial((m + n - j) as i64, m as i64)
                        * s0.powi((j - k) as i32)
                        / (factorial(j as u64) * tau.powi((n - j) as i32))
                })
                .sum();
            head + sign_pow((n - k) as i64) * nf * tail
        })
        .collect();
    let growth = (s0 * tau).exp();
    let alpha: Vec<f64> = (0..=m)
        .map(|k| {
            let sum: f64 = (k..=m)
                .map(|j| {
                    sign_pow((j - k) as i64) * factorial((m + n - j) as u64) * s0.powi((j - k) as i32)
                        / (factorial(k as u64)
                            * factorial((j - k) as u64)
                            * factorial((m - j) as u64)
                            * tau.powi(n as i32 - j as i32))
                })
                .sum();
            sign_pow(n as i64 - 1) * growth * sum
        })
        .collect();
    DelaySystem::new(n, m, a, alpha, tau)
}

/// `|Delta^(k)(s0)| / scale_k` for `k = 0..=m+n`.
pub fn derivative_residuals(sys: &DelaySystem, s0: f64) -> Result<Vec<f64>> {
    let q = as_quasipolynomial(sys);
    (0..=sys.m + sys.n)
        .map(|k| {
            let (v, scale) = q.eval_scaled(Complex64::new(s0, 0.0), k)?;
            Ok(if scale > 0.0 { v.norm() / scale } else { v.norm() })
        })
        .collect()
}

/// Largest `k <= m + n + 1` with `|Delta^(j)(s0)| <= rel_tol * scale_j` for
/// every `j < k`; `scale_j` sums the magnitudes of the Leibniz summands.
pub fn verify_multiplicity(sys: &DelaySystem, s0: f64, rel_tol: f64) -> Result<usize> {
    sys.validate()?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "rel_tol must lie in (0, 1e-3], got {rel_tol}"
        )));
    }
    let q = as_quasipolynomial(sys);
    let cap = sys.m + sys.n + 1;
    for k in 0..cap {
        let (v, scale) = q.eval_scaled(Complex64::new(s0, 0.0), k)?;
        if v.norm() > rel_tol * scale {
            return Ok(k);
        }
    }
    Ok(cap)
}

/// Synthesizes the maximal-multiplicity system and its algebraic
/// certificate. Dominance is left unverified; see [`certify`].
pub fn synthesize(n: usize, m: usize, tau: f64, s0: f64) -> Result<GmidCertificate> {
    let system = gmid_system(n, m, tau, s0)?;
    let back = admissible_root(n, m, tau, system.a_last())?;
    if (back - s0).abs() > 1e-9 * s0.abs().max(1.0 / tau).max(1.0) {
        return Err(Error::Numerical(format!(
            "a_(n-1) maps back to s0 = {back}, expected {s0}"
        )));
    }
    let residuals = derivative_residuals(&system, s0)?;
    let multiplicity = verify_multiplicity(&system, s0, CERTIFICATE_REL_TOL)?;
    let stable = stability_verdict(n, m, tau, system.a_last())?;
    Ok(GmidCertificate {
        system,
        s0,
        multiplicity,
        residuals,
        dominance: Dominance::Unverified,
        stable,
        chain_zeta: None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Upper edge of the imaginary window, in the units of `s`.
    pub im_window: f64,
    /// Dominance margin; `None` means `1e-6 * max(1, |s0|)`.
    pub margin: Option<f64>,
    pub search: SearchOptions,
}

impl CertifyOptions {
    pub fn for_tau(tau: f64) -> Self {
        CertifyOptions {
            im_window: 40.0 / tau,
            margin: None,
            search: SearchOptions::default(),
        }
    }
}

/// Certificate for an arbitrary system at a candidate root `s0`, including
/// the windowed dominance check and, for neutral systems, the chain.
pub fn certify(sys: &DelaySystem, s0: f64, opts: &CertifyOptions) -> Result<(GmidCertificate, DominanceReport)> {
    sys.validate()?;
    let residuals = derivative_residuals(sys, s0)?;
    let multiplicity = verify_multiplicity(sys, s0, CERTIFICATE_REL_TOL)?;
    let margin = opts.margin.unwrap_or(1e-6 * s0.abs().max(1.0));
    let report = rootfinder::dominance_check(sys, s0, opts.im_window, margin, &opts.search)?;
    let dominance = match report.verdict {
        Verdict::StrictlyDominant => Dominance::StrictlyDominant,
        Verdict::DominantOnLine { .. } => Dominance::DominantOnLine,
        _ => Dominance::Unverified,
    };
    let maximal = multiplicity == sys.m + sys.n + 1;
    let stable = if maximal {
        stability_verdict(sys.n, sys.m, sys.tau, sys.a_last())?
    } else {
        report.roots.is_complete() && report.roots.max_re().is_some_and(|r| r < 0.0) && dominance != Dominance::Unverified
    };
    let chain_zeta = if sys.kind() == SystemKind::Neutral && maximal {
        Some(neutral_chain(sys.n, report.roots.window.im_hi * sys.tau)?.zeta_values)
    } else {
        None
    };
    Ok((
        GmidCertificate {
            system: sys.clone(),
            s0,
            multiplicity,
            residuals,
            dominance,
            stable,
            chain_zeta,
        },
        report,
    ))
}

/// Synthesis followed by [`certify`].
pub fn synthesize_certified(
    n: usize,
    m: usize,
    tau: f64,
    s0: f64,
    opts: &CertifyOptions,
) -> Result<(GmidCertificate, DominanceReport)> {
    let cert = synthesize(n, m, tau, s0)?;
    certify(&cert.system, s0, opts)
}

fn check_z(z: Complex64) -> Result<()> {
    if !(z.norm() <= 50.0) {
        return Err(Error::InvalidArgument(format!("|z| must be at most 50, got {}", z.norm())));
    }
    Ok(())
}

fn delta_tilde(n: usize, m: usize, z: Complex64) -> Result<Complex64> {
    normalized_max_mult(n, m)?.quasipolynomial().eval(z, 0)
}

/// Defect of `Delta~(z) = z^{m+n+1} / m! * int_0^1 t^m (1-t)^n e^{-zt} dt`,
/// relative to `max(1, |Delta~(z)|)`.
pub fn factorization_residual_integral(n: usize, m: usize, z: Complex64) -> Result<f64> {
    check_orders(n, m)?;
    check_z(z)?;
    let lhs = delta_tilde(n, m, z)?;
    let integrand = |t: f64| (-z * t).exp() * (t.powi(m as i32) * (1.0 - t).powi(n as i32));
    let integral = quadrature::integrate_to_rounding(integrand, 0.0, 1.0, &[], 1e-15)?;
    let rhs = z.powu((m + n + 1) as u32) / factorial(m as u64) * integral.value;
    Ok((lhs - rhs).norm() / lhs.norm().max(1.0))
}

/// Defect of `Delta~(z) = n! / (m+n+1)! * z^{m+n+1} Phi(m+1, m+n+2, -z)`,
/// relative to `max(1, |Delta~(z)|)`.
pub fn factorization_residual_kummer(n: usize, m: usize, z: Complex64) -> Result<f64> {
    check_orders(n, m)?;
    check_z(z)?;
    let lhs = delta_tilde(n, m, z)?;
    let p = KummerParams::new((m + 1) as f64, (m + n + 2) as f64)?;
    let phi = phi_series(&p, -z, DEFAULT_REL_TOL)?;
    let rhs = z.powu((m + n + 1) as u32) * phi / factorial_ratio((m + n + 1) as u64, n as u64);
    Ok((lhs - rhs).norm() / lhs.norm().max(1.0))
}

fn chain_polys(n: usize, zeta: f64) -> (f64, f64) {
    let z2 = zeta * zeta;
    let d: f64 = (0..=n / 2)
        .map(|l| {
            sign_pow(l as i64) * factorial_ratio((2 * n - 2 * l) as u64, (n - 2 * l) as u64)
                / factorial((2 * l) as u64)
                * z2.powi(l as i32)
        })
        .sum();
    let num: f64 = if n == 0 {
        0.0
    } else {
        (0..=(n - 1) / 2)
            .map(|l| {
                sign_pow(l as i64) * factorial_ratio((2 * n - 2 * l - 1) as u64, (n - 2 * l - 1) as u64)
                    / factorial((2 * l + 1) as u64)
                    * z2.powi(l as i32)
            })
            .sum()
    };
    (d, num)
}

/// `sin(zeta/2) D(zeta) - zeta cos(zeta/2) N(zeta)` (the chain equation
/// multiplied through by `cos(zeta/2) D(zeta)`, so it has no poles) together
/// with the magnitude of its two parts.
fn chain_function(n: usize, zeta: f64) -> (f64, f64) {
    let (d, num) = chain_polys(n, zeta);
    let (s, c) = (0.5 * zeta).sin_cos();
    let (p, q) = (s * d, zeta * c * num);
    (p - q, p.abs() + q.abs())
}

/// Relative defect of the chain equation at `zeta`.
pub fn chain_residual(n: usize, zeta: f64) -> f64 {
    let (g, scale) = chain_function(n, zeta);
    if scale > 0.0 {
        g.abs() / scale
    } else {
        g.abs()
    }
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi.abs().max(1.0) {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Every nonzero `zeta` with `|zeta| <= zeta_window` such that
/// `s0 + i zeta / tau` is a root of the neutral maximal-multiplicity system
/// of order `n`.
pub fn neutral_chain(n: usize, zeta_window: f64) -> Result<ChainSpec> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(zeta_window > 0.0 && zeta_window.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "zeta_window must be positive, got {zeta_window}"
        )));
    }
    // grid: uniform spacing <= pi/16 plus the poles (2k+1) pi of tan and
    // the sign changes of D
    let cells = (zeta_window / (PI / 16.0)).ceil() as usize;
    let mut grid: Vec<f64> = (1..=cells).map(|k| zeta_window * k as f64 / cells as f64).collect();
    grid.extend(
        (0..)
            .map(|k| (2 * k + 1) as f64 * PI)
            .take_while(|z| *z < zeta_window),
    );
    let d = |z: f64| chain_polys(n, z).0;
    let mut d_zeros = Vec::new();
    let mut prev = (f64::MIN_POSITIVE, d(f64::MIN_POSITIVE));
    for &z in &grid {
        let dz = d(z);
        if dz == 0.0 {
            d_zeros.push(z);
        } else if (dz > 0.0) != (prev.1 > 0.0) && prev.1 != 0.0 {
            d_zeros.push(bisect_root(d, prev.0, z, prev.1));
        }
        prev = (z, dz);
    }
    grid.extend(d_zeros);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let g = |z: f64| chain_function(n, z).0;
    // the origin is a zero of order 2n+1, so near it g is rounding noise;
    // scan from the first grid point where g stands clear of that noise
    let first = grid
        .iter()
        .position(|&z| chain_residual(n, z) > 1e-6)
        .unwrap_or(grid.len());
    let mut roots = Vec::new();
    let Some(&start) = grid.get(first) else {
        return Ok(ChainSpec {
            n,
            zeta_values: Vec::new(),
            window: zeta_window,
        });
    };
    let mut prev = (start, g(start));
    for &z in &grid[first + 1..] {
        let gz = g(z);
        if gz == 0.0 {
            roots.push(z);
        } else if prev.1 != 0.0 && (gz > 0.0) != (prev.1 > 0.0) {
            roots.push(bisect_root(g, prev.0, z, prev.1));
        }
        prev = (z, gz);
    }
    roots.retain(|z| *z <= zeta_window && chain_residual(n, *z) < 1e-10);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut zeta_values: Vec<f64> = roots.iter().rev().map(|z| -z).collect();
    zeta_values.extend(roots);
    Ok(ChainSpec {
        n,
        zeta_values,
        window: zeta_window,
    })
}
