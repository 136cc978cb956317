use axum::body::Body;
use axum::http::{Request, StatusCode};
use gmid_cli::api::{self, Op};
use gmid_cli::server::{router, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::time::Duration;
use tower::ServiceExt;

fn config() -> ServiceConfig {
    ServiceConfig {
        budget: Duration::from_secs(30),
        static_dir: None,
    }
}

async fn send(cfg: ServiceConfig, req: Request<Body>) -> (StatusCode, String, Option<String>) {
    let resp = router(cfg).oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_owned());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap(), ctype)
}

fn post(path: &str, body: impl Into<String>) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.into()))
        .unwrap()
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn health_is_ok() {
    let (status, body, ctype) = send(config(), get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, r#"{"ok":true}"#);
    assert_eq!(ctype.as_deref(), Some("application/json"));
}

#[tokio::test]
async fn transport_example_returns_the_gains() {
    let (status, body, _) = send(config(), get("/api/examples/transport?L=1&lambda=1")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    let d = &v["data"];
    assert!((d["k_p"].as_f64().unwrap() + (-2f64).exp()).abs() < 1e-12);
    assert!((d["k_i"].as_f64().unwrap() + 4.0 * (-2f64).exp()).abs() < 1e-12);
    assert_eq!(d["multiplicity"], 3);
}

#[tokio::test]
async fn pendulum_example_both_branches() {
    let (status, body, _) = send(config(), get("/api/examples/pendulum?L=1&g=1")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!((v["data"]["design"]["tau"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);

    let (status, body, _) = send(config(), get("/api/examples/pendulum?L=1&g=1&tau=0.7")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["data"]["plus"]["multiplicity"], 3);
    assert_eq!(v["data"]["minus"]["multiplicity"], 3);

    let (status, body, _) = send(config(), get("/api/examples/pendulum?L=1&g=1&tau=1.5")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["ok"], false);
    assert_eq!(v["error"]["code"], "precondition");
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let (status, body, _) = send(config(), post("/api/synthesize", "{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"]["code"], "invalid_request");

    let unknown = json!({"n": 1, "m": 0, "tau": 1.0, "s0": -1.0, "colour": "red"});
    let (status, _, _) = send(config(), post("/api/synthesize", unknown.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _, _) = send(config(), get("/api/examples/transport?L=abc&lambda=1")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _, _) = send(config(), post("/api/chain", json!({"n": 1, "window": 1e9}).to_string())).await;
    assert!(status == StatusCode::BAD_REQUEST || status == StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn roots_of_the_pendulum_design() {
    let d = gmid_core::controllers::pendulum_gmid(1.0, 1.0).unwrap();
    let req = json!({
        "system": d.system().unwrap(),
        "rect": {"re_lo": -4.0, "re_hi": 1.0, "im_lo": 0.0, "im_hi": 40.0},
    });
    let (status, body, _) = send(config(), post("/api/roots", req.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    let roots = v["data"]["roots"].as_array().unwrap();
    let quad = roots.iter().find(|r| r["mult"] == 4).unwrap();
    assert!((quad["re"].as_f64().unwrap() + 2f64.sqrt()).abs() < 1e-8);
    assert!(v["data"]["unresolved"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn http_and_cli_produce_identical_bytes() {
    let payload = json!({"n": 2, "m": 1, "tau": 1.0, "s0": -1.0}).to_string();
    let (status, body, _) = send(config(), post("/api/synthesize", payload.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let direct = api::handle(Op::Synthesize, payload.as_bytes(), None, Duration::from_secs(30));
    assert_eq!(body, direct.body);

    let out = std::process::Command::new(env!("CARGO_BIN_EXE_gmid"))
        .args(["synth", "--n", "2", "--m", "1", "--tau", "1", "--s0", "-1"])
        .env_remove(api::BUDGET_ENV)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), body);
}

#[tokio::test]
async fn request_id_header_is_echoed() {
    let req = Request::post("/api/kummer")
        .header("x-request-id", "abc-123")
        .body(Body::from(json!({"a": 1.0, "b": 2.0, "z_re": 0.5, "z_im": 0.0}).to_string()))
        .unwrap();
    let (status, body, _) = send(config(), req).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["id"], "abc-123");
    // M(1, 2, z) = (e^z - 1) / z
    let exact = (0.5f64.exp() - 1.0) / 0.5;
    assert!((v["data"]["value_re"].as_f64().unwrap() - exact).abs() < 1e-12);
}

#[tokio::test]
async fn exhausted_budget_is_a_500_timeout() {
    let d = gmid_core::controllers::pendulum_gmid(1.0, 1.0).unwrap();
    let req = json!({
        "system": d.system().unwrap(),
        "rect": {"re_lo": -40.0, "re_hi": 1.0, "im_lo": -1.0, "im_hi": 5000.0},
    });
    let cfg = ServiceConfig {
        budget: Duration::from_millis(1),
        static_dir: None,
    };
    let (status, body, _) = send(cfg, post("/api/roots", req.to_string())).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"]["code"], "timeout");
}

#[tokio::test]
async fn static_directory_is_served_when_configured() {
    let dir = std::env::temp_dir().join(format!("gmid-static-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<p>client</p>").unwrap();
    let cfg = ServiceConfig {
        budget: Duration::from_secs(30),
        static_dir: Some(dir.clone()),
    };
    let (status, body, _) = send(cfg.clone(), get("/index.html")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "<p>client</p>");
    let (status, body, _) = send(cfg, get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, r#"{"ok":true}"#);

    let (status, _, _) = send(config(), get("/index.html")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
