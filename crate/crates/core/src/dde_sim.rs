//! Time-domain simulation by the method of steps, envelope decay fitting,
//! and the transport equation with a PI boundary controller.
//!
//! The step is snapped to `tau / N` so every delayed lookup lands on a
//! stored node or step midpoint. For neutral equations the delayed highest
//! derivative is recomputed from the equation itself, never by
//! differentiating an interpolant.

use crate::error::{Error, Result};
use crate::quasipoly::{DelaySystem, SystemKind};
use serde::{Deserialize, Serialize};

/// Upper bound on `t_end / tau`.
pub const MAX_HORIZON_DELAYS: f64 = 1e4;
const MAX_STEPS: usize = 10_000_000;

/// Initial function on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum History {
    /// `y(theta) = sum c_k theta^k`; a constant is the degree-0 case.
    Polynomial { coeffs: Vec<f64> },
    /// Rows `[y, y', ...]` at increasing times covering `[-tau, 0]`.
    Samples { t: Vec<f64>, values: Vec<Vec<f64>> },
}

impl History {
    pub fn constant(value: f64) -> Self {
        History::Polynomial {
            coeffs: vec![value],
        }
    }

    /// Number of derivatives (counting `y` itself) the history supplies.
    fn depth(&self) -> usize {
        match self {
            History::Polynomial { .. } => usize::MAX,
            History::Samples { values, .. } => values.iter().map(Vec::len).min().unwrap_or(0),
        }
    }

    fn validate(&self, sys: &DelaySystem) -> Result<()> {
        let needed = if sys.kind() == SystemKind::Neutral {
            sys.n + 1
        } else {
            sys.n
        };
        match self {
            History::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "polynomial history needs finite coefficients".into(),
                    ));
                }
            }
            History::Samples { t, values } => {
                if t.len() != values.len() || t.len() < 4 {
                    return Err(Error::InvalidArgument(
                        "sampled history needs at least 4 rows, one per time".into(),
                    ));
                }
                if t.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidArgument("history times must increase".into()));
                }
                let slack = 1e-12 * sys.tau;
                if t[0] > -sys.tau + slack || *t.last().unwrap() < -slack {
                    return Err(Error::InvalidArgument(format!(
                        "history must cover [-{}, 0], got [{}, {}]",
                        sys.tau,
                        t[0],
                        t.last().unwrap()
                    )));
                }
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("history values must be finite".into()));
                }
            }
        }
        if self.depth() < needed {
            return Err(Error::Precondition(format!(
                "history supplies {} derivative columns, {} needed{}",
                self.depth(),
                needed,
                if needed > sys.n { " (neutral runs need y^(n) too)" } else { "" }
            )));
        }
        Ok(())
    }

    /// `[y(theta), y'(theta), ..., y^(count-1)(theta)]`.
    pub fn derivatives(&self, theta: f64, count: usize) -> Vec<f64> {
        match self {
            History::Polynomial { coeffs } => (0..count)
                .map(|k| {
                    coeffs
                        .iter()
                        .enumerate()
                        .skip(k)
                        .rev()
                        .fold(0.0, |acc, (i, c)| {
                            let falling: f64 = ((i - k + 1)..=i).map(|v| v as f64).product();
                            acc * theta + c * falling
                        })
                })
                .collect(),
            History::Samples { t, values } => {
                let cols = values.iter().map(Vec::len).min().unwrap_or(0);
                let i = t.partition_point(|x| *x <= theta).clamp(1, t.len() - 1) - 1;
                (0..count.min(cols))
                    .map(|k| {
                        if k + 1 < cols {
                            hermite(t[i], t[i + 1], values[i][k], values[i + 1][k], values[i][k + 1], values[i + 1][k + 1], theta)
                        } else {
                            lagrange4(t, values, k, i, theta)
                        }
                    })
                    .collect()
            }
        }
    }
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

fn lagrange4(t: &[f64], values: &[Vec<f64>], col: usize, i: usize, x: f64) -> f64 {
    let start = i.saturating_sub(1).min(t.len() - 4);
    let idx = start..start + 4;
    idx.clone()
        .map(|j| {
            let w: f64 = idx
                .clone()
                .filter(|&k| k != j)
                .map(|k| (x - t[k]) / (t[j] - t[k]))
                .product();
            w * values[j][col]
        })
        .sum()
}

/// Dense solution on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// `[y, y', ..., y^(n-1)]` at each node.
    pub states: Vec<Vec<f64>>,
    /// Step actually used (`tau / N`).
    pub dt: f64,
    /// `y^(n)` at the start (right limit) and end (left limit) of each step.
    #[serde(skip)]
    dn_start: Vec<f64>,
    #[serde(skip)]
    dn_end: Vec<f64>,
}

impl Trajectory {
    pub fn y(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[0]).collect()
    }

    /// State at any `t` in the grid range from the cubic Hermite piece of
    /// the enclosing step.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let last = self.t.len() - 1;
        let i = ((t - self.t[0]) / self.dt).floor().clamp(0.0, (last.max(1) - 1) as f64) as usize;
        if last == 0 {
            return self.states[0].clone();
        }
        let n = self.states[0].len();
        (0..n)
            .map(|k| {
                let (d0, d1) = if k + 1 < n {
                    (self.states[i][k + 1], self.states[i + 1][k + 1])
                } else {
                    (self.dn_start[i], self.dn_end[i])
                };
                hermite(self.t[i], self.t[i + 1], self.states[i][k], self.states[i + 1][k], d0, d1, t)
            })
            .collect()
    }

    /// Every `stride`-th node so that at most `max_points` remain (the last
    /// node is always kept).
    pub fn thinned(&self, max_points: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let stride = self.t.len().div_ceil(max_points.max(2) - 1).max(1);
        let mut idx: Vec<usize> = (0..self.t.len()).step_by(stride).collect();
        if idx.last() != Some(&(self.t.len() - 1)) {
            idx.push(self.t.len() - 1);
        }
        (
            idx.iter().map(|&i| self.t[i]).collect(),
            idx.iter().map(|&i| self.states[i].clone()).collect(),
        )
    }
}

#[derive(Clone, Copy)]
enum At {
    Start,
    Mid,
    End,
}

struct Stepper<'a> {
    sys: &'a DelaySystem,
    hist: &'a History,
    h: f64,
    per_delay: usize,
    states: Vec<Vec<f64>>,
    mids: Vec<Vec<f64>>,
    dn_start: Vec<f64>,
    dn_mid: Vec<f64>,
    dn_end: Vec<f64>,
}

impl Stepper<'_> {
    /// `sum alpha_l y^(l)(t - tau)` for step `i` at the given position.
    fn delayed(&self, i: usize, at: At) -> f64 {
        let (n, m) = (self.sys.n, self.sys.m);
        let derivs: Vec<f64> = if i < self.per_delay {
            let offset = match at {
                At::Start => 0.0,
                At::Mid => 0.5 * self.h,
                At::End => self.h,
            };
            let theta = if i + 1 == self.per_delay && matches!(at, At::End) {
                0.0
            } else {
                -self.sys.tau + i as f64 * self.h + offset
            };
            self.hist.derivatives(theta, m + 1)
        } else {
            let j = i - self.per_delay;
            let (state, dn) = match at {
                At::Start => (&self.states[j], self.dn_start[j]),
                At::Mid => (&self.mids[j], self.dn_mid[j]),
                At::End => (&self.states[j + 1], self.dn_end[j]),
            };
            let mut d: Vec<f64> = state.iter().take(m + 1).copied().collect();
            if m == n {
                d.push(dn);
            }
            d
        };
        self.sys.alpha.iter().zip(&derivs).map(|(a, d)| a * d).sum()
    }

    fn highest(&self, x: &[f64], delayed: f64) -> f64 {
        -self.sys.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - delayed
    }

    fn rhs(&self, x: &[f64], delayed: f64) -> Vec<f64> {
        let n = self.sys.n;
        let mut dx: Vec<f64> = x[1..].to_vec();
        dx.push(self.highest(x, delayed));
        debug_assert_eq!(dx.len(), n);
        dx
    }

    fn step(&mut self, i: usize) {
        let h = self.h;
        let x0 = self.states[i].clone();
        let (d0, dm, d1) = (
            self.delayed(i, At::Start),
            self.delayed(i, At::Mid),
            self.delayed(i, At::End),
        );
        let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(a, b)| a + c * b).collect()
        };
        let k1 = self.rhs(&x0, d0);
        let k2 = self.rhs(&axpy(&x0, &k1, 0.5 * h), dm);
        let k3 = self.rhs(&axpy(&x0, &k2, 0.5 * h), dm);
        let k4 = self.rhs(&axpy(&x0, &k3, h), d1);
        let x1: Vec<f64> = (0..x0.len())
            .map(|j| x0[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        let dn0 = self.highest(&x0, d0);
        let dn1 = self.highest(&x1, d1);
        let n = x0.len();
        let xm: Vec<f64> = (0..n)
            .map(|j| {
                let (a, b) = if j + 1 < n { (x0[j + 1], x1[j + 1]) } else { (dn0, dn1) };
                0.5 * (x0[j] + x1[j]) + h * (a - b) / 8.0
            })
            .collect();
        let dnm = self.highest(&xm, dm);
        self.states.push(x1);
        self.mids.push(xm);
        self.dn_start.push(dn0);
        self.dn_mid.push(dnm);
        self.dn_end.push(dn1);
    }
}

/// Integrates the delay equation on `[0, t_end]` from the history on
/// `[-tau, 0]` with classic fourth-order Runge–Kutta steps of `tau / N`,
/// `N = ceil(tau / dt)`.
pub fn simulate(sys: &DelaySystem, hist: &History, t_end: f64, dt: f64) -> Result<Trajectory> {
    sys.validate()?;
    hist.validate(sys)?;
    if !(dt > 0.0 && dt <= sys.tau / 20.0) {
        return Err(Error::Precondition(format!(
            "dt must lie in (0, tau/20 = {}], got {dt}",
            sys.tau / 20.0
        )));
    }
    if !(t_end > 0.0 && t_end <= MAX_HORIZON_DELAYS * sys.tau) {
        return Err(Error::Precondition(format!(
            "t_end must lie in (0, {} tau], got {t_end}",
            MAX_HORIZON_DELAYS
        )));
    }
    let per_delay = (sys.tau / dt * (1.0 - 1e-12)).ceil() as usize;
    let h = sys.tau / per_delay as f64;
    let steps = (t_end / h * (1.0 - 1e-12)).ceil() as usize;
    if steps > MAX_STEPS {
        return Err(Error::Precondition(format!(
            "{steps} steps exceed the limit of {MAX_STEPS}"
        )));
    }
    let mut st = Stepper {
        sys,
        hist,
        h,
        per_delay,
        states: Vec::with_capacity(steps + 1),
        mids: Vec::with_capacity(steps),
        dn_start: Vec::with_capacity(steps),
        dn_mid: Vec::with_capacity(steps),
        dn_end: Vec::with_capacity(steps),
    };
    st.states.push(hist.derivatives(0.0, sys.n));
    for i in 0..steps {
        st.step(i);
    }
    if st.states.last().unwrap().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("solution overflowed".into()));
    }
    Ok(Trajectory {
        t: (0..=steps).map(|i| i as f64 * h).collect(),
        states: st.states,
        dt: h,
        dn_start: st.dn_start,
        dn_end: st.dn_end,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    sxy / sxx
}

/// Exponential decay rate of `|y|` after `t_skip`: the negated slope of a
/// least-squares line through the logarithms of the local maxima, or of all
/// samples when fewer than three maxima exist.
pub fn decay_rate_series(t: &[f64], y: &[f64], t_skip: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= t_skip)
        .map(|(t, y)| (*t, y.abs()))
        .collect();
    if pts.len() < 50 {
        return Err(Error::Precondition(format!(
            "decay fit needs at least 50 samples after t_skip, got {}",
            pts.len()
        )));
    }
    let peaks: Vec<(f64, f64)> = pts
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 0.0)
        .map(|w| (w[1].0, w[1].1.ln()))
        .collect();
    let fit = if peaks.len() >= 3 {
        peaks
    } else {
        pts.iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(t, v)| (*t, v.ln()))
            .collect()
    };
    if fit.len() < 2 {
        return Err(Error::Numerical("signal vanishes identically".into()));
    }
    Ok(-least_squares_slope(&fit))
}

pub fn decay_rate(traj: &Trajectory, t_skip: f64) -> Result<f64> {
    decay_rate_series(&traj.t, &traj.y(), t_skip)
}

/// Initial profile `phi(0, x)` on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `sin(2 pi cycles x / L)`.
    Sine { cycles: f64 },
    Constant { value: f64 },
    /// Values on a uniform grid over `[0, L]`, linearly interpolated.
    Samples { values: Vec<f64> },
}

impl InitialProfile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            InitialProfile::Sine { cycles } => (2.0 * std::f64::consts::PI * cycles * x / length).sin(),
            InitialProfile::Constant { value } => *value,
            InitialProfile::Samples { values } => {
                let k = values.len() - 1;
                let u = (x / length).clamp(0.0, 1.0) * k as f64;
                let i = (u.floor() as usize).min(k.saturating_sub(1));
                let f = u - i as f64;
                if k == 0 {
                    values[0]
                } else {
                    values[i] * (1.0 - f) + values[i + 1] * f
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialProfile::Sine { cycles } => cycles.is_finite(),
            InitialProfile::Constant { value } => value.is_finite(),
            InitialProfile::Samples { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid initial profile".into()))
        }
    }
}

/// Space-time solution of the controlled transport equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportField {
    pub x: Vec<f64>,
    /// Snapshot times of `phi`.
    pub t: Vec<f64>,
    /// `phi[k][i] = phi(t[k], x[i])`.
    pub phi: Vec<Vec<f64>>,
    /// `sup_x |phi(t[k], x)|`.
    pub sup_norm: Vec<f64>,
    /// Full-resolution time grid of the traces.
    pub trace_t: Vec<f64>,
    /// Inflow `phi(t, 0)` (right limits at jumps).
    pub boundary: Vec<f64>,
    /// Outflow `phi(t, L)` (right limits at jumps).
    pub outflow: Vec<f64>,
}

/// Upper bound on the number of `phi` entries kept in the snapshot array.
pub const MAX_FIELD_ENTRIES: usize = 1_000_000;

/// Solves `phi_t + lambda phi_x = 0` on `[0, L]` with inflow
/// `phi(t, 0) = k_p phi(t, L) + k_i int_0^t phi(s, L) ds` along
/// characteristics, with `dx = L / (nx - 1)` and `dt = dx / lambda`.
pub fn simulate_transport(
    length: f64,
    lambda: f64,
    k_p: f64,
    k_i: f64,
    phi0: &InitialProfile,
    t_end: f64,
    nx: usize,
) -> Result<TransportField> {
    phi0.validate()?;
    if !(length > 0.0 && lambda > 0.0 && length.is_finite() && lambda.is_finite()) {
        return Err(Error::InvalidArgument("L and lambda must be positive".into()));
    }
    if !(k_p.is_finite() && k_i.is_finite()) {
        return Err(Error::InvalidArgument("gains must be finite".into()));
    }
    if !(32..=4096).contains(&nx) {
        return Err(Error::Precondition(format!("nx must lie in [32, 4096], got {nx}")));
    }
    let tau = length / lambda;
    if !(t_end > 0.0 && t_end <= 100.0 * tau) {
        return Err(Error::Precondition(format!(
            "t_end must lie in (0, 100 L / lambda = {}], got {t_end}",
            100.0 * tau
        )));
    }
    let dx = length / (nx - 1) as f64;
    let dt = dx / lambda;
    let lag = nx - 1;
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil() as usize;
    let x: Vec<f64> = (0..nx).map(|i| i as f64 * dx).collect();
    let init: Vec<f64> = x.iter().map(|&xi| phi0.eval(xi, length)).collect();

    // (left, right) limits of the traces; they differ only at multiples of tau
    let mut u = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let mut integral = 0.0;
    for j in 0..=steps {
        let uj = if j < lag {
            (init[nx - 1 - j], init[nx - 1 - j])
        } else if j == lag {
            let (_, w0): (f64, f64) = w[0];
            (init[0], w0)
        } else {
            w[j - lag]
        };
        if j > 0 {
            let (_, prev): (f64, f64) = u[j - 1];
            integral += 0.5 * dt * (prev + uj.0);
        }
        let wj = (k_p * uj.0 + k_i * integral, k_p * uj.1 + k_i * integral);
        u.push(uj);
        w.push(if j == 0 { (init[0], wj.1) } else { wj });
    }

    let stride = ((steps + 1) * nx).div_ceil(MAX_FIELD_ENTRIES).max(1);
    let mut snap_t = Vec::new();
    let mut phi = Vec::new();
    let mut sup_norm = Vec::new();
    for j in (0..=steps).step_by(stride) {
        let row: Vec<f64> = (0..nx)
            .map(|i| if j < i { init[i - j] } else { w[j - i].1 })
            .collect();
        sup_norm.push(row.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        snap_t.push(j as f64 * dt);
        phi.push(row);
    }
    Ok(TransportField {
        x,
        t: snap_t,
        phi,
        sup_norm,
        trace_t: (0..=steps).map(|j| j as f64 * dt).collect(),
        boundary: w.iter().map(|p| p.1).collect(),
        outflow: u.iter().map(|p| p.1).collect(),
    })
}

/// The delay equation obeyed by the inflow trace for `t > tau`:
/// `w'(t) = k_p w'(t - tau) + k_i w(t - tau)`.
pub fn transport_trace_system(length: f64, lambda: f64, k_p: f64, k_i: f64) -> Result<DelaySystem> {
    DelaySystem::new(1, 1, vec![0.0], vec![-k_i, -k_p], length / lambda)
}
