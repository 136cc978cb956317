use clap::{Args, Parser, Subcommand};
use gmid_cli::api::{self, Op};
use gmid_cli::server::{self, ServiceConfig};
use gmid_core::dde_sim::{History, InitialProfile};
use gmid_core::rootfinder::Rectangle;
use gmid_core::DelaySystem;
use serde::Serialize;
use serde_json::Value;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::io::Write;
use std::process::ExitCode;

/// Design, certify and simulate maximal-multiplicity delay controllers.
///
/// Results are printed to stdout as a JSON envelope
/// `{"id", "ok", "data" | "error"}`. Exit status: 0 success, 2 invalid input
/// or violated precondition, 3 numerical failure or timeout.
#[derive(Parser)]
#[command(name = "gmid", version)]
struct Cli {
    /// Echoed as the envelope id instead of the derived one.
    #[arg(long, global = true)]
    request_id: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficients placing a root of multiplicity m+n+1, with certificate.
    Synth(SynthArgs),
    /// Certify a system read from a JSON file.
    Verify {
        /// A system `{"n", "m", "a", "alpha", "tau"}` or `{"system", "s0"?, "im_window"?}`.
        file: PathBuf,
    },
    /// Isolate the characteristic roots of a system inside a rectangle.
    Roots(RootsArgs),
    /// Imaginary offsets of the neutral root chain.
    Chain {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        window: f64,
    },
    /// Method-of-steps simulation.
    Simulate(SimulateArgs),
    /// Transport equation with PI boundary feedback.
    TransportSim(TransportSimArgs),
    /// PD design for the inverted pendulum.
    Pendulum {
        #[arg(long = "L")]
        length: f64,
        #[arg(long)]
        g: f64,
        /// Free delay for the triple-root designs.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// PI design for the transport equation.
    Transport {
        #[arg(long = "L")]
        length: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// Kummer function value and consistency residuals.
    Kummer {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_re: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_im: f64,
    },
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, allow_hyphen_values = true)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "a_last", required_unless_present = "a_last")]
    s0: Option<f64>,
    /// The coefficient a_{n-1}, determining s0.
    #[arg(long, allow_hyphen_values = true)]
    a_last: Option<f64>,
    /// Skip the windowed dominance check.
    #[arg(long)]
    no_certify: bool,
    #[arg(long)]
    im_window: Option<f64>,
}

#[derive(Args)]
struct RootsArgs {
    /// System JSON file.
    #[arg(long)]
    system: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    re_lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    re_hi: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    im_hi: f64,
    #[arg(long)]
    tol: Option<f64>,
    /// Also write `re,im,mult,residual` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// System JSON file.
    #[arg(long)]
    system: PathBuf,
    /// History JSON file; default is the constant 1.
    #[arg(long, conflicts_with = "constant")]
    history: Option<PathBuf>,
    /// Constant history value.
    #[arg(long, allow_hyphen_values = true)]
    constant: Option<f64>,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt: Option<f64>,
    /// Fit the decay rate after this time.
    #[arg(long)]
    t_skip: Option<f64>,
    #[arg(long)]
    max_points: Option<usize>,
    /// Also write `t,y,y',...` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TransportSimArgs {
    #[arg(long = "L")]
    length: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    k_p: f64,
    #[arg(long, allow_hyphen_values = true)]
    k_i: f64,
    /// Initial profile sin(2 pi cycles x / L).
    #[arg(long, default_value_t = 1.0)]
    cycles: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    max_snapshots: Option<usize>,
    /// Also write `t,x,phi` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Bind address; loopback unless asked otherwise.
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Serve the browser client from this directory.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

/// Failure before a request could be formed (unreadable file and the like).
fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("gmid: {msg}");
    ExitCode::from(2)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: schema violation: {e}", path.display()))
}

fn to_payload<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("requests serialize")
}

type CsvWriter = fn(&Value, &Path) -> Result<(), String>;

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record(header).map_err(|e| e.to_string())?;
    for row in rows {
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

/// Numbers keep their JSON spelling (shortest round-trip, exponent form).
fn num(v: &Value) -> String {
    if v.is_number() { v.to_string() } else { String::new() }
}

fn roots_csv(data: &Value, path: &Path) -> Result<(), String> {
    let roots = data["roots"].as_array().cloned().unwrap_or_default();
    let header = ["re", "im", "mult", "residual"].map(String::from);
    write_rows(
        path,
        &header,
        roots
            .iter()
            .map(|r| vec![num(&r["re"]), num(&r["im"]), r["mult"].to_string(), num(&r["residual"])]),
    )
}

fn trajectory_csv(data: &Value, path: &Path) -> Result<(), String> {
    let t = data["t"].as_array().cloned().unwrap_or_default();
    let states = data["states"].as_array().cloned().unwrap_or_default();
    let width = states.first().and_then(Value::as_array).map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..width).map(|k| format!("y{}", "'".repeat(k))));
    write_rows(
        path,
        &header,
        t.iter().zip(&states).map(|(t, s)| {
            let mut row = vec![num(t)];
            row.extend(s.as_array().into_iter().flatten().map(num));
            row
        }),
    )
}

fn field_csv(data: &Value, path: &Path) -> Result<(), String> {
    let x = data["x"].as_array().cloned().unwrap_or_default();
    let t = data["t"].as_array().cloned().unwrap_or_default();
    let phi = data["phi"].as_array().cloned().unwrap_or_default();
    let header = ["t", "x", "phi"].map(String::from);
    write_rows(
        path,
        &header,
        t.iter().zip(&phi).flat_map(|(t, row)| {
            let row = row.as_array().cloned().unwrap_or_default();
            x.iter()
                .zip(row)
                .map(|(x, p)| vec![num(t), num(x), num(&p)])
                .collect::<Vec<_>>()
        }),
    )
}

fn run_op(op: Op, payload: Vec<u8>, id: Option<&str>, csv: Option<(PathBuf, CsvWriter)>) -> ExitCode {
    let reply = api::handle(op, &payload, id, api::time_budget());
    // a closed pipe (e.g. `| head`) is not worth a panic
    let _ = writeln!(std::io::stdout().lock(), "{}", reply.body);
    if let Some(kind) = reply.error {
        let msg = serde_json::from_str::<Value>(&reply.body)
            .ok()
            .and_then(|v| v["error"]["message"].as_str().map(str::to_owned))
            .unwrap_or_default();
        eprintln!("gmid {}: {}: {msg}", op.name(), kind.code());
        return ExitCode::from(reply.exit_code() as u8);
    }
    if let Some((path, write)) = csv {
        let data = serde_json::from_str::<Value>(&reply.body).map(|v| v["data"].clone());
        if let Err(e) = data.map_err(|e| e.to_string()).and_then(|d| write(&d, &path)) {
            eprintln!("gmid {}: cannot write {}: {e}", op.name(), path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::SUCCESS
}

fn serve(args: ServeArgs) -> ExitCode {
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return input_error(format!("cannot start runtime: {e}")),
    };
    let cfg = ServiceConfig {
        budget: api::time_budget(),
        static_dir: args.static_dir,
    };
    let addr = SocketAddr::new(args.bind, args.port);
    let result = rt.block_on(server::serve(addr, cfg, |bound| {
        eprintln!("gmid: listening on http://{bound}");
    }));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => input_error(format!("cannot serve on {addr}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let id = cli.request_id.as_deref();
    match cli.command {
        Command::Synth(a) => {
            let req = api::SynthRequest {
                n: a.n,
                m: a.m,
                tau: a.tau,
                s0: a.s0,
                a_last: a.a_last,
                certify: a.no_certify.then_some(false),
                im_window: a.im_window,
            };
            run_op(Op::Synthesize, to_payload(&req), id, None)
        }
        Command::Verify { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return input_error(format!("{}: {e}", file.display())),
            };
            // a bare system is wrapped; anything else goes through as is so
            // schema errors are reported by the service layer
            let payload = match serde_json::from_str::<Value>(&text) {
                Ok(v) if v.get("system").is_none() => {
                    serde_json::to_vec(&serde_json::json!({ "system": v })).expect("json")
                }
                _ => text.into_bytes(),
            };
            run_op(Op::Verify, payload, id, None)
        }
        Command::Roots(a) => {
            let system: DelaySystem = match read_json(&a.system) {
                Ok(s) => s,
                Err(e) => return input_error(e),
            };
            let req = api::RootsRequest {
                system,
                rect: Rectangle {
                    re_lo: a.re_lo,
                    re_hi: a.re_hi,
                    im_lo: a.im_lo,
                    im_hi: a.im_hi,
                },
                tol: a.tol,
            };
            run_op(Op::Roots, to_payload(&req), id, a.csv.map(|p| (p, roots_csv as CsvWriter)))
        }
        Command::Chain { n, window } => run_op(Op::Chain, to_payload(&api::ChainRequest { n, window }), id, None),
        Command::Simulate(a) => {
            let system: DelaySystem = match read_json(&a.system) {
                Ok(s) => s,
                Err(e) => return input_error(e),
            };
            let history = match (&a.history, a.constant) {
                (Some(path), _) => match read_json::<History>(path) {
                    Ok(h) => h,
                    Err(e) => return input_error(e),
                },
                (None, Some(c)) => History::constant(c),
                (None, None) => History::constant(1.0),
            };
            let req = api::SimulateRequest {
                system,
                history,
                t_end: a.t_end,
                dt: a.dt,
                t_skip: a.t_skip,
                max_points: a.max_points,
            };
            run_op(Op::Simulate, to_payload(&req), id, a.csv.map(|p| (p, trajectory_csv as CsvWriter)))
        }
        Command::TransportSim(a) => {
            let req = api::TransportSimRequest {
                length: a.length,
                lambda: a.lambda,
                k_p: a.k_p,
                k_i: a.k_i,
                phi0: InitialProfile::Sine { cycles: a.cycles },
                t_end: a.t_end,
                nx: a.nx,
                max_snapshots: a.max_snapshots,
            };
            run_op(Op::TransportSim, to_payload(&req), id, a.csv.map(|p| (p, field_csv as CsvWriter)))
        }
        Command::Pendulum { length, g, tau } => {
            run_op(Op::Pendulum, to_payload(&api::PendulumRequest { length, g, tau }), id, None)
        }
        Command::Transport { length, lambda } => {
            run_op(Op::Transport, to_payload(&api::TransportRequest { length, lambda }), id, None)
        }
        Command::Kummer { a, b, z_re, z_im } => {
            run_op(Op::Kummer, to_payload(&api::KummerRequest { a, b, z_re, z_im }), id, None)
        }
        Command::Serve(a) => serve(a),
    }
}
