//! Design and certification of maximal-multiplicity ("GMID") dominant roots
//! for linear delay-differential equations with a single delay.
//!
//! The characteristic function of
//!
//! ```text
//! y^(n)(t) + a_{n-1} y^(n-1)(t) + ... + a_0 y(t) + alpha_m y^(m)(t - tau) + ... + alpha_0 y(t - tau) = 0
//! ```
//!
//! is the quasipolynomial `Delta(s) = s^n + sum a_k s^k + e^{-tau s} sum alpha_k s^k`.
//! A real root of `Delta` can have multiplicity at most `m + n + 1`; when it
//! reaches that bound it is the rightmost root (strictly for retarded
//! systems, `m < n`; on a vertical line of roots for neutral ones, `m = n`).
//!
//! Modules:
//!
//! - [`quasipoly`]: representation, evaluation, strip bounds and the
//!   normalizing change of variables.
//! - [`gmid`]: coefficient synthesis, multiplicity checks, factorization
//!   oracles and the neutral root chain.
//! - [`kummer`]: the confluent hypergeometric function and its zero regions.
//! - [`rootfinder`]: argument-principle root isolation in rectangles,
//!   spectral abscissa and dominance checks.
//! - [`dde_sim`]: method-of-steps simulation and the transport PDE.
//! - [`controllers`]: the pendulum PD and transport PI recipes.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod controllers;
mod dd;
pub mod dde_sim;
pub mod error;
pub mod gmid;
pub mod kummer;
pub mod quadrature;
pub mod quasipoly;
pub mod rootfinder;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quasipoly::{DelaySystem, NormalizedCoeffs, Quasipolynomial, SystemKind, Term};
