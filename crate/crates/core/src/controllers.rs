//! Closed-form designs for the two case studies: a PD-controlled inverted
//! pendulum and a PI-controlled transport equation.
//!
//! Gains are stored in each model's own sign convention:
//!
//! * pendulum: `s^2 + g/L + (k_d s + k_p) e^{-tau s}`, so `a = [g/L, 0]`
//!   and `alpha = [k_p, k_d]`;
//! * transport: `s - (k_i + k_p s) e^{-tau s}` with `tau = L / lambda`, so
//!   `a = [0]` and `alpha = [-k_i, -k_p]`.

use crate::error::{Error, Result};
use crate::gmid::{self, CertifyOptions, GmidCertificate};
use crate::quasipoly::DelaySystem;
use crate::rootfinder::DominanceReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The quadruple root.
    Maximal,
    /// Triple root `s_+`, the rightmost of the pair.
    Plus,
    /// Triple root `s_-`.
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumDesign {
    #[serde(rename = "L")]
    pub length: f64,
    pub g: f64,
    pub k_p: f64,
    pub k_d: f64,
    pub tau: f64,
    pub s0: f64,
    pub multiplicity: usize,
    pub branch: Branch,
}

impl PendulumDesign {
    pub fn system(&self) -> Result<DelaySystem> {
        DelaySystem::new(
            2,
            1,
            vec![self.g / self.length, 0.0],
            vec![self.k_p, self.k_d],
            self.tau,
        )
    }

    /// Multiplicity check plus windowed dominance check at `s0`.
    pub fn certify(&self, opts: &CertifyOptions) -> Result<(GmidCertificate, DominanceReport)> {
        gmid::certify(&self.system()?, self.s0, opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportDesign {
    #[serde(rename = "L")]
    pub length: f64,
    pub lambda: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub tau: f64,
    pub s0: f64,
    pub multiplicity: usize,
}

impl TransportDesign {
    pub fn system(&self) -> Result<DelaySystem> {
        DelaySystem::new(1, 1, vec![0.0], vec![-self.k_i, -self.k_p], self.tau)
    }

    pub fn certify(&self, opts: &CertifyOptions) -> Result<(GmidCertificate, DominanceReport)> {
        gmid::certify(&self.system()?, self.s0, opts)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Quadruple root at `s0 = -sqrt(2 g / L)` with `tau = sqrt(2 L / g)`.
pub fn pendulum_gmid(length: f64, g: f64) -> Result<PendulumDesign> {
    check_positive("L", length)?;
    check_positive("g", g)?;
    let w = (g / length).sqrt();
    let e2 = (-2f64).exp();
    Ok(PendulumDesign {
        length,
        g,
        k_p: -5.0 * e2 * g / length,
        k_d: -(2f64.sqrt()) * e2 * w,
        tau: 2f64.sqrt() / w,
        s0: -(2f64.sqrt()) * w,
        multiplicity: 4,
        branch: Branch::Maximal,
    })
}

/// The two triple-root designs for a delay `tau < sqrt(2 L / g)`, returned
/// as `(s_+, s_-)`. The `s_+` design is the dominant-root branch.
pub fn pendulum_triple(length: f64, g: f64, tau: f64) -> Result<(PendulumDesign, PendulumDesign)> {
    check_positive("L", length)?;
    check_positive("g", g)?;
    check_positive("tau", tau)?;
    let limit = (2.0 * length / g).sqrt();
    if tau >= limit {
        return Err(Error::Precondition(format!(
            "triple roots need tau < sqrt(2 L / g) = {limit}, got {tau}"
        )));
    }
    let r = g * tau * tau / length;
    let root = (2.0 - r).sqrt();
    let design = |s: f64, branch| {
        let e = (tau * s).exp();
        PendulumDesign {
            length,
            g,
            k_p: 2.0 * (r + 5.0 * tau * s + 3.0) * e / (tau * tau),
            k_d: 2.0 * (tau * s + 1.0) * e / tau,
            tau,
            s0: s,
            multiplicity: 3,
            branch,
        }
    };
    Ok((
        design((-2.0 + root) / tau, Branch::Plus),
        design((-2.0 - root) / tau, Branch::Minus),
    ))
}

/// PI gains placing a triple root at `s0 = -2 lambda / L`.
pub fn transport_pi_gmid(length: f64, lambda: f64) -> Result<TransportDesign> {
    check_positive("L", length)?;
    check_positive("lambda", lambda)?;
    let e2 = (-2f64).exp();
    Ok(TransportDesign {
        length,
        lambda,
        k_p: -e2,
        k_i: -4.0 * e2 * lambda / length,
        tau: length / lambda,
        s0: -2.0 * lambda / length,
        multiplicity: 3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmid::{synthesize, verify_multiplicity, Dominance};
    use crate::quasipoly::as_quasipolynomial;
    use num_complex::Complex64;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * y.abs().max(1.0)
    }

    #[test]
    #[allow(clippy::approx_constant)] // tabulated reference values
    fn pendulum_reference_values() {
        let d = pendulum_gmid(1.0, 1.0).unwrap();
        assert!(close(d.s0, -1.41421356, 1e-8));
        assert!(close(d.tau, 2f64.sqrt(), 1e-15));
        assert!(close(d.k_p, -0.676676, 1e-6));
        assert!(close(d.k_d, -0.191393, 1e-5));
        let sys = d.system().unwrap();
        assert_eq!(verify_multiplicity(&sys, d.s0, 1e-8).unwrap(), 4);

        let big = pendulum_gmid(4.0, 1.0).unwrap();
        assert!(close(big.s0, d.s0 / 2.0, 1e-15));
        assert!(close(big.tau, 2.0 * d.tau, 1e-15));
    }

    #[test]
    fn pendulum_matches_general_synthesis() {
        for (l, g) in [(1.0, 1.0), (0.5, 9.81), (2.0, 3.0)] {
            let d = pendulum_gmid(l, g).unwrap();
            let sys = synthesize(2, 1, d.tau, d.s0).unwrap().system;
            let mine = d.system().unwrap();
            for (x, y) in sys.a.iter().chain(&sys.alpha).zip(mine.a.iter().chain(&mine.alpha)) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn triple_roots() {
        for tau in [0.3, 0.5, 0.7, 1.2] {
            let (plus, minus) = pendulum_triple(1.0, 1.0, tau).unwrap();
            assert!(plus.s0 > minus.s0);
            for d in [&plus, &minus] {
                let sys = d.system().unwrap();
                assert_eq!(verify_multiplicity(&sys, d.s0, 1e-8).unwrap(), 3, "tau {tau}");
                let q = as_quasipolynomial(&sys);
                let (v3, _) = q.eval_scaled(Complex64::new(d.s0, 0.0), 3).unwrap();
                assert!(v3.norm() > 1e-6);
            }
        }
        let (plus, _) = pendulum_triple(1.0, 1.0, 0.5).unwrap();
        assert!(close(plus.s0, -1.354249, 1e-6));
        assert!(matches!(pendulum_triple(1.0, 1.0, 1.5), Err(Error::Precondition(_))));

        // the branches merge into the quadruple root as tau -> sqrt(2)
        let (p, m) = pendulum_triple(1.0, 1.0, 2f64.sqrt() - 1e-12).unwrap();
        assert!((p.s0 + 2f64.sqrt()).abs() < 1e-5 && (m.s0 + 2f64.sqrt()).abs() < 1e-5);

        // s_+ rises on (0, sqrt(L/g)], peaks at -sqrt(g/L), then falls back
        // to the quadruple root; it is unbounded below as tau -> 0
        let s_plus = |t: f64| pendulum_triple(1.0, 1.0, t).unwrap().0.s0;
        let s: Vec<f64> = (1..=10).map(|k| s_plus(0.1 * k as f64)).collect();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!((s_plus(1.0) + 1.0).abs() < 1e-15);
        assert!(s_plus(1.2) < s_plus(1.1));
        assert!(s_plus(1e-3) < -500.0 && s_plus(1e-4) < s_plus(1e-3));
    }

    #[test]
    fn transport_reference_values() {
        let d = transport_pi_gmid(1.0, 1.0).unwrap();
        assert!(close(d.k_p, -0.135335, 1e-5));
        assert!(close(d.k_i, -0.541341, 1e-6));
        assert_eq!(d.s0, -2.0);
        let twice = transport_pi_gmid(1.0, 2.0).unwrap();
        assert_eq!(twice.k_p, d.k_p);
        assert!(close(twice.k_i, 2.0 * d.k_i, 1e-15) && close(twice.s0, 2.0 * d.s0, 1e-15));
        let sys = synthesize(1, 1, d.tau, d.s0).unwrap().system;
        let mine = d.system().unwrap();
        for (x, y) in sys.alpha.iter().zip(&mine.alpha) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn certified_designs() {
        let d = pendulum_gmid(1.0, 1.0).unwrap();
        let (cert, _) = d.certify(&CertifyOptions::for_tau(d.tau)).unwrap();
        assert_eq!(cert.dominance, Dominance::StrictlyDominant);
        assert_eq!(cert.multiplicity, 4);

        let (plus, minus) = pendulum_triple(1.0, 1.0, 0.5).unwrap();
        let (cert, report) = plus.certify(&CertifyOptions::for_tau(0.5)).unwrap();
        assert_eq!(cert.dominance, Dominance::StrictlyDominant, "{:?}", report.verdict);
        assert!(cert.stable);
        let (cert, _) = minus.certify(&CertifyOptions::for_tau(0.5)).unwrap();
        assert_eq!(cert.dominance, Dominance::Unverified);

        let t = transport_pi_gmid(1.0, 1.0).unwrap();
        let (cert, _) = t.certify(&CertifyOptions::for_tau(t.tau)).unwrap();
        assert_eq!(cert.dominance, Dominance::DominantOnLine);
    }
}
