//! Operations shared by the command line and the HTTP service.
//!
//! Every answer is an envelope `{"id", "ok", "data" | "error"}` rendered by
//! [`handle`]; the CLI prints it and the service returns it as the body, so
//! identical payloads give identical bytes.

use gmid_core::controllers::{self, PendulumDesign, TransportDesign};
use gmid_core::dde_sim::{self, History, InitialProfile};
use gmid_core::gmid::{self, CertifyOptions, GmidCertificate};
use gmid_core::kummer::{self, KummerParams};
use gmid_core::rootfinder::{self, DominanceReport, Rectangle, RootSet, SearchOptions};
use gmid_core::{Complex64, DelaySystem, Error};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::{Duration, Instant};

pub const DEFAULT_BUDGET_SECS: f64 = 30.0;
pub const BUDGET_ENV: &str = "GMID_TIME_BUDGET_SECS";

/// Per-request time budget from `GMID_TIME_BUDGET_SECS`, default 30 s.
pub fn time_budget() -> Duration {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(Duration::from_secs_f64)
        .unwrap_or(Duration::from_secs_f64(DEFAULT_BUDGET_SECS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Synthesize,
    Verify,
    Roots,
    Chain,
    Simulate,
    TransportSim,
    Pendulum,
    Transport,
    Kummer,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Synthesize => "synthesize",
            Op::Verify => "verify",
            Op::Roots => "roots",
            Op::Chain => "chain",
            Op::Simulate => "simulate",
            Op::TransportSim => "transport-sim",
            Op::Pendulum => "pendulum",
            Op::Transport => "transport",
            Op::Kummer => "kummer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed payload or a value outside its schema.
    InvalidRequest,
    /// Well-formed input the mathematics does not accept.
    Precondition,
    Numerical,
    Timeout,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::InvalidRequest => "invalid_request",
            ErrorKind::Precondition => "precondition",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Timeout => "timeout",
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorKind::InvalidRequest => 400,
            ErrorKind::Precondition => 422,
            ErrorKind::Numerical | ErrorKind::Timeout => 500,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::InvalidRequest | ErrorKind::Precondition => 2,
            ErrorKind::Numerical | ErrorKind::Timeout => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError {
            kind: ErrorKind::InvalidRequest,
            message: message.into(),
        }
    }

    pub fn timeout(budget: Duration) -> Self {
        ApiError {
            kind: ErrorKind::Timeout,
            message: format!("time budget of {:.3} s exhausted", budget.as_secs_f64()),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidSystem(_) | Error::InvalidArgument(_) => ErrorKind::InvalidRequest,
            Error::Precondition(_) | Error::Overflow { .. } | Error::NotARoot { .. } => ErrorKind::Precondition,
            Error::Timeout => ErrorKind::Timeout,
            _ => ErrorKind::Numerical,
        };
        ApiError {
            kind,
            message: e.to_string(),
        }
    }
}

/// Rendered envelope plus the error class, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub body: String,
    pub error: Option<ErrorKind>,
}

impl Reply {
    pub fn http_status(&self) -> u16 {
        self.error.map_or(200, ErrorKind::http_status)
    }

    pub fn exit_code(&self) -> i32 {
        self.error.map_or(0, ErrorKind::exit_code)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct Failure<'a> {
    id: &'a str,
    ok: bool,
    error: ErrorBody<'a>,
}

fn render_ok(id: &str, data: &str) -> String {
    let id = serde_json::to_string(id).expect("strings serialize");
    format!("{{\"id\":{id},\"ok\":true,\"data\":{data}}}")
}

pub fn render_error(id: &str, err: &ApiError) -> Reply {
    let body = serde_json::to_string(&Failure {
        id,
        ok: false,
        error: ErrorBody {
            code: err.kind.code(),
            message: &err.message,
        },
    })
    .expect("error envelope serializes");
    Reply {
        body,
        error: Some(err.kind),
    }
}

/// Stable id derived from the operation and the canonical payload.
fn derived_id(op: Op, canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(op.name().as_bytes());
    h.update(b"\n");
    h.update(canonical.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `op` on a JSON payload. `id` is echoed when given, otherwise derived
/// from the parsed payload so the same request always carries the same id.
pub fn handle(op: Op, payload: &[u8], id: Option<&str>, budget: Duration) -> Reply {
    let deadline = Instant::now() + budget;
    let outcome = match op {
        Op::Synthesize => run::<SynthRequest, _>(op, payload, |r| synthesize(r, deadline)),
        Op::Verify => run::<VerifyRequest, _>(op, payload, |r| verify(r, deadline)),
        Op::Roots => run::<RootsRequest, _>(op, payload, |r| roots(r, deadline)),
        Op::Chain => run::<ChainRequest, _>(op, payload, chain),
        Op::Simulate => run::<SimulateRequest, _>(op, payload, simulate),
        Op::TransportSim => run::<TransportSimRequest, _>(op, payload, transport_sim),
        Op::Pendulum => run::<PendulumRequest, _>(op, payload, pendulum),
        Op::Transport => run::<TransportRequest, _>(op, payload, transport),
        Op::Kummer => run::<KummerRequest, _>(op, payload, kummer_diag),
    };
    let (derived, result) = outcome;
    let id = id
        .map(str::to_owned)
        .or(derived)
        .unwrap_or_else(|| derived_id(op, &String::from_utf8_lossy(payload)));
    let result = result.and_then(|data| {
        if Instant::now() > deadline {
            Err(ApiError::timeout(budget))
        } else {
            Ok(data)
        }
    });
    match result {
        Ok(data) => Reply {
            body: render_ok(&id, &data),
            error: None,
        },
        Err(e) => render_error(&id, &e),
    }
}

fn run<R, T>(op: Op, payload: &[u8], f: impl FnOnce(&R) -> Result<T, ApiError>) -> (Option<String>, Result<String, ApiError>)
where
    R: DeserializeOwned + Serialize,
    T: Serialize,
{
    let req: R = match serde_json::from_slice(payload) {
        Ok(r) => r,
        Err(e) => return (None, Err(ApiError::invalid(format!("schema violation: {e}")))),
    };
    let canonical = serde_json::to_string(&req).expect("requests serialize");
    let id = derived_id(op, &canonical);
    let data = f(&req).and_then(|d| {
        serde_json::to_string(&d).map_err(|e| ApiError {
            kind: ErrorKind::Numerical,
            message: format!("result does not serialize: {e}"),
        })
    });
    (Some(id), data)
}

fn search(deadline: Instant) -> SearchOptions {
    SearchOptions {
        deadline: Some(deadline),
        ..SearchOptions::default()
    }
}

fn positive(name: &str, v: f64) -> Result<(), ApiError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ApiError::invalid(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRequest {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Alternative to `s0`: the coefficient `a_{n-1}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_last: Option<f64>,
    /// Run the windowed dominance check (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_window: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifiedDesign {
    pub certificate: GmidCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<DominanceReport>,
}

fn certify_options(tau: f64, im_window: Option<f64>, deadline: Instant) -> Result<CertifyOptions, ApiError> {
    let mut opts = CertifyOptions::for_tau(tau);
    if let Some(w) = im_window {
        positive("im_window", w)?;
        opts.im_window = w;
    }
    opts.search = search(deadline);
    Ok(opts)
}

fn synthesize(r: &SynthRequest, deadline: Instant) -> Result<CertifiedDesign, ApiError> {
    let s0 = match (r.s0, r.a_last) {
        (Some(s0), None) => s0,
        (None, Some(a)) => gmid::admissible_root(r.n, r.m, r.tau, a)?,
        _ => return Err(ApiError::invalid("give exactly one of s0 and a_last")),
    };
    if !r.certify.unwrap_or(true) {
        return Ok(CertifiedDesign {
            certificate: gmid::synthesize(r.n, r.m, r.tau, s0)?,
            report: None,
        });
    }
    let opts = certify_options(r.tau, r.im_window, deadline)?;
    let (certificate, report) = gmid::synthesize_certified(r.n, r.m, r.tau, s0, &opts)?;
    Ok(CertifiedDesign {
        certificate,
        report: Some(report),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub system: DelaySystem,
    /// Candidate root; defaults to the admissible root of the system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_window: Option<f64>,
}

fn verify(r: &VerifyRequest, deadline: Instant) -> Result<CertifiedDesign, ApiError> {
    let sys = &r.system;
    sys.validate()?;
    let s0 = match r.s0 {
        Some(s) => s,
        None => gmid::admissible_root(sys.n, sys.m, sys.tau, sys.a_last())?,
    };
    let opts = certify_options(sys.tau, r.im_window, deadline)?;
    let (certificate, report) = gmid::certify(sys, s0, &opts)?;
    Ok(CertifiedDesign {
        certificate,
        report: Some(report),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsRequest {
    pub system: DelaySystem,
    pub rect: Rectangle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

fn roots(r: &RootsRequest, deadline: Instant) -> Result<RootSet, ApiError> {
    r.system.validate()?;
    r.rect.validate()?;
    let mut opts = search(deadline);
    if let Some(t) = r.tol {
        positive("tol", t)?;
        opts.tol = t;
    }
    let q = r.system.characteristic();
    Ok(rootfinder::find_roots(&q, &r.rect, &opts)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRequest {
    pub n: usize,
    /// Largest `|zeta|` reported.
    pub window: f64,
}

fn chain(r: &ChainRequest) -> Result<gmid::ChainSpec, ApiError> {
    if r.window > 1e4 {
        return Err(ApiError::invalid(format!("window is limited to 1e4, got {}", r.window)));
    }
    Ok(gmid::neutral_chain(r.n, r.window)?)
}

fn default_history() -> History {
    History::constant(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub system: DelaySystem,
    #[serde(default = "default_history")]
    pub history: History,
    pub t_end: f64,
    /// Defaults to `tau / 200`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// When given, the decay rate is fitted after this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_skip: Option<f64>,
    /// Output thinning; default 2000 nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationResult {
    pub t: Vec<f64>,
    /// `[y, y', ..., y^(n-1)]` per time.
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
}

fn simulate(r: &SimulateRequest) -> Result<SimulationResult, ApiError> {
    r.system.validate()?;
    let dt = r.dt.unwrap_or(r.system.tau / 200.0);
    let traj = dde_sim::simulate(&r.system, &r.history, r.t_end, dt)?;
    let decay_rate = r.t_skip.map(|s| dde_sim::decay_rate(&traj, s)).transpose()?;
    let (t, states) = traj.thinned(r.max_points.unwrap_or(2000).max(2));
    Ok(SimulationResult {
        t,
        states,
        dt: traj.dt,
        decay_rate,
    })
}

fn default_profile() -> InitialProfile {
    InitialProfile::Sine { cycles: 1.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSimRequest {
    #[serde(rename = "L")]
    pub length: f64,
    pub lambda: f64,
    pub k_p: f64,
    pub k_i: f64,
    #[serde(default = "default_profile")]
    pub phi0: InitialProfile,
    pub t_end: f64,
    /// Default 256.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Snapshot rows kept in the answer; default 200.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_snapshots: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportResult {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub sup_norm: Vec<f64>,
    /// Inflow trace `phi(t, 0)` on the snapshot times.
    pub boundary: Vec<f64>,
}

fn transport_sim(r: &TransportSimRequest) -> Result<TransportResult, ApiError> {
    let field = dde_sim::simulate_transport(
        r.length,
        r.lambda,
        r.k_p,
        r.k_i,
        &r.phi0,
        r.t_end,
        r.nx.unwrap_or(256),
    )?;
    let keep = r.max_snapshots.unwrap_or(200).max(2);
    let stride = field.t.len().div_ceil(keep - 1).max(1);
    let mut idx: Vec<usize> = (0..field.t.len()).step_by(stride).collect();
    if idx.last() != Some(&(field.t.len() - 1)) {
        idx.push(field.t.len() - 1);
    }
    // snapshot times lie on the trace grid
    let trace_dt = field.trace_t.get(1).copied().unwrap_or(1.0);
    let boundary = idx
        .iter()
        .map(|&i| {
            let j = (field.t[i] / trace_dt).round() as usize;
            field.boundary[j.min(field.boundary.len() - 1)]
        })
        .collect();
    Ok(TransportResult {
        t: idx.iter().map(|&i| field.t[i]).collect(),
        phi: idx.iter().map(|&i| field.phi[i].clone()).collect(),
        sup_norm: idx.iter().map(|&i| field.sup_norm[i]).collect(),
        boundary,
        x: field.x,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumRequest {
    #[serde(rename = "L")]
    pub length: f64,
    pub g: f64,
    /// When given, the two triple-root designs for this delay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PendulumAnswer {
    Maximal { design: PendulumDesign },
    Triple { plus: PendulumDesign, minus: PendulumDesign },
}

fn pendulum(r: &PendulumRequest) -> Result<PendulumAnswer, ApiError> {
    Ok(match r.tau {
        None => PendulumAnswer::Maximal {
            design: controllers::pendulum_gmid(r.length, r.g)?,
        },
        Some(tau) => {
            let (plus, minus) = controllers::pendulum_triple(r.length, r.g, tau)?;
            PendulumAnswer::Triple { plus, minus }
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportRequest {
    #[serde(rename = "L")]
    pub length: f64,
    pub lambda: f64,
}

fn transport(r: &TransportRequest) -> Result<TransportDesign, ApiError> {
    Ok(controllers::transport_pi_gmid(r.length, r.lambda)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KummerRequest {
    pub a: f64,
    pub b: f64,
    pub z_re: f64,
    pub z_im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KummerResiduals {
    /// Series against the integral representation (when `b > a > 0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral: Option<f64>,
    pub reflection: f64,
    pub ode: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KummerAnswer {
    pub a: f64,
    pub b: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub residuals: KummerResiduals,
}

fn kummer_diag(r: &KummerRequest) -> Result<KummerAnswer, ApiError> {
    let p = KummerParams::new(r.a, r.b)?;
    let z = Complex64::new(r.z_re, r.z_im);
    let value = kummer::phi_series(&p, z, kummer::DEFAULT_REL_TOL)?;
    let integral = if r.b > r.a && r.a > 0.0 {
        let i = kummer::phi_integral(&p, z)?;
        Some((i - value).norm() / value.norm().max(1.0))
    } else {
        None
    };
    Ok(KummerAnswer {
        a: r.a,
        b: r.b,
        z_re: r.z_re,
        z_im: r.z_im,
        value_re: value.re,
        value_im: value.im,
        residuals: KummerResiduals {
            integral,
            reflection: kummer::reflection_residual(&p, z)?,
            ode: kummer::ode_residual(&p, z)?,
        },
    })
}
