//! Stateless JSON service over the core analyses.

use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ptgraph::api::{self, ApiError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::cors::CorsLayer;

pub fn router() -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/analyze", post(analyze))
        .route("/v1/minsets", post(minsets))
        .route("/v1/simulate", post(simulate))
        .layer(CorsLayer::permissive())
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn respond<T: Serialize>(result: Result<T, ApiError>) -> Response {
    match result {
        Ok(v) => json(StatusCode::OK, api::to_json(&v)),
        Err(e) => json(
            StatusCode::from_u16(e.http_status()).expect("valid status"),
            e.to_json(),
        ),
    }
}

fn request<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("bad request body: {e}")))
}

async fn health() -> Response {
    json(StatusCode::OK, api::to_json(&api::HEALTH))
}

async fn analyze(body: Bytes) -> Response {
    respond(request(&body).and_then(|r| api::run_analyze(&r)))
}

async fn minsets(body: Bytes) -> Response {
    respond(request(&body).and_then(|r| api::run_minsets(&r)))
}

async fn simulate(body: Bytes) -> Response {
    // Large batches are CPU-bound; keep them off the async workers.
    let result = tokio::task::spawn_blocking(move || {
        request(&body).and_then(|r| api::run_simulate(&r))
    })
    .await
    .expect("simulation task does not panic");
    respond(result)
}

pub async fn serve(host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await
}
