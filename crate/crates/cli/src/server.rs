//! Stateless HTTP front end over [`crate::api`].

use crate::api::{self, ApiError, Op, Reply};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;
use tower_http::services::ServeDir;

pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub budget: Duration,
    /// Directory served at `/` for the browser client.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            budget: api::time_budget(),
            static_dir: None,
        }
    }
}

fn json_response(status: u16, body: String) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut resp = (status, body).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    resp
}

fn reply_response(reply: Reply) -> Response {
    json_response(reply.http_status(), reply.body)
}

fn request_id(headers: &HeaderMap) -> Option<String> {
    headers
        .get(REQUEST_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
}

/// Runs the computation on the blocking pool. The core routines check the
/// deadline themselves; the outer timeout catches the rest.
async fn dispatch(op: Op, payload: Vec<u8>, id: Option<String>, budget: Duration) -> Response {
    let fallback = id.clone().unwrap_or_default();
    let job = tokio::task::spawn_blocking(move || api::handle(op, &payload, id.as_deref(), budget));
    let grace = budget + Duration::from_secs(1);
    match tokio::time::timeout(grace, job).await {
        Ok(Ok(reply)) => reply_response(reply),
        Ok(Err(e)) => reply_response(api::render_error(
            &fallback,
            &ApiError {
                kind: api::ErrorKind::Numerical,
                message: format!("worker failed: {e}"),
            },
        )),
        Err(_) => reply_response(api::render_error(&fallback, &ApiError::timeout(budget))),
    }
}

fn post_op(op: Op) -> axum::routing::MethodRouter<ServiceConfig> {
    post(move |State(cfg): State<ServiceConfig>, headers: HeaderMap, body: Bytes| async move {
        dispatch(op, body.to_vec(), request_id(&headers), cfg.budget).await
    })
}

/// GET endpoints carry their payload in the query string; it is turned into
/// the same JSON a POST would send.
fn get_op<Q>(op: Op) -> axum::routing::MethodRouter<ServiceConfig>
where
    Q: serde::de::DeserializeOwned + Serialize + Send + 'static,
{
    get(
        move |State(cfg): State<ServiceConfig>,
              headers: HeaderMap,
              query: Result<Query<Q>, axum::extract::rejection::QueryRejection>| async move {
            let id = request_id(&headers);
            match query {
                Ok(Query(q)) => {
                    let payload = serde_json::to_vec(&q).expect("queries serialize");
                    dispatch(op, payload, id, cfg.budget).await
                }
                Err(e) => reply_response(api::render_error(
                    id.as_deref().unwrap_or(""),
                    &ApiError::invalid(format!("schema violation: {}", e.body_text())),
                )),
            }
        },
    )
}

pub fn router(cfg: ServiceConfig) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(|| async { json_response(200, "{\"ok\":true}".into()) }))
        .route("/api/synthesize", post_op(Op::Synthesize))
        .route("/api/verify", post_op(Op::Verify))
        .route("/api/roots", post_op(Op::Roots))
        .route("/api/chain", post_op(Op::Chain))
        .route("/api/simulate", post_op(Op::Simulate))
        .route("/api/transport-sim", post_op(Op::TransportSim))
        .route("/api/kummer", post_op(Op::Kummer))
        .route("/api/examples/pendulum", get_op::<api::PendulumRequest>(Op::Pendulum))
        .route("/api/examples/transport", get_op::<api::TransportRequest>(Op::Transport));
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.with_state(cfg)
}

/// Binds and serves until the process is terminated. `on_bound` receives
/// the actual address (useful with port 0).
pub async fn serve(addr: SocketAddr, cfg: ServiceConfig, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(cfg)).await
}
