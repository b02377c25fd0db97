use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ptgraph_cli::server::router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn figure(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../figures/{name}.dag", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = router().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

#[tokio::test]
async fn health() {
    let (status, body) = call("GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap(), json!({"status": "ok"}));
}

#[tokio::test]
async fn analyze_figure4() {
    let (status, body) = call("POST", "/v1/analyze", Some(json!({"graph_text": figure("fig4")}))).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["overall"], "NotRejected");
    assert_eq!(v["obligation"], json!(["U1"]));
}

#[tokio::test]
async fn cycle_is_a_bad_request() {
    let text = "dag { A [exposure] A -> Y1 Y0 X -> Z -> W -> X }";
    let (status, body) = call("POST", "/v1/analyze", Some(json!({"graph_text": text}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"], "validation");
    assert!(body.contains("CycleViolation") || body.contains("cycle"), "{body}");
}

#[tokio::test]
async fn zero_cap_is_unprocessable() {
    let req = json!({"graph_text": figure("fig4"), "options": {"completion_cap": 0}});
    let (status, _) = call("POST", "/v1/analyze", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_fields_and_bad_json_are_rejected() {
    let (status, _) = call("POST", "/v1/analyze", Some(json!({"graph": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call("POST", "/v1/minsets", Some(json!({"graph_text": figure("fig2"), "outcome": "Y2"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn minsets_and_simulate() {
    let (status, body) =
        call("POST", "/v1/minsets", Some(json!({"graph_text": figure("fig2"), "outcome": "Y1"}))).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["intersection"], json!([["U1", "U4"]]));

    let (status, body) =
        call("POST", "/v1/simulate", Some(json!({"graph_text": figure("fig2"), "seeds": 10}))).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["nonzero_gaps"], 10);
}

#[tokio::test]
async fn http_and_cli_emit_identical_json() {
    let path = format!("{}/../../figures/fig2.dag", env!("CARGO_MANIFEST_DIR"));
    let cli = std::process::Command::new(env!("CARGO_BIN_EXE_ptgraph"))
        .args(["analyze", &path, "--json"])
        .env_remove("PTGRAPH_COMPLETION_CAP")
        .output()
        .unwrap();
    let (_, body) = call("POST", "/v1/analyze", Some(json!({"graph_text": figure("fig2")}))).await;
    assert_eq!(String::from_utf8(cli.stdout).unwrap(), body);
}
