//! Local HTTP facade over the pipeline and the protocol store.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use metacp_core::fixtures;
use metacp_core::pipeline::{compile, diagnostics_json, validate, CompileError};
use metacp_core::plugin::list_plugins;
use metacp_core::store::{ProtocolStore, StoreError};
use metacp_core::xml::{validate_schema, DEFAULT_MAX_BYTES};

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<ProtocolStore>,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = json!({ "error": { "code": code, "message": message.into() } });
    (status, Json(body)).into_response()
}

fn store_error(e: StoreError) -> Response {
    let status = match &e {
        StoreError::InvalidName(_) => (StatusCode::BAD_REQUEST, "invalid-name"),
        StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not-found"),
        StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
    };
    error(status.0, status.1, e.to_string())
}

fn xml(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/xml")], bytes).into_response()
}

pub fn router(state: AppState, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/validate", post(post_validate))
        .route("/api/compile", post(post_compile))
        .route("/api/examples", get(get_examples))
        .route("/api/examples/{name}", get(get_example))
        .route("/api/backends", get(get_backends))
        .route("/api/protocols", get(list_protocols))
        .route(
            "/api/protocols/{name}",
            get(get_protocol).put(put_protocol).delete(delete_protocol),
        )
        .route("/api/protocols/{name}/layout", get(get_layout).put(put_layout))
        .with_state(state)
        .layer(DefaultBodyLimit::max(2 * DEFAULT_MAX_BYTES));
    let app = match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { error(StatusCode::NOT_FOUND, "not-found", "no such route") }),
    };
    app.layer(middleware::from_fn(log_request))
}

async fn log_request(req: Request, next: Next) -> Response {
    let (method, uri) = (req.method().clone(), req.uri().clone());
    let start = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        "{method} {uri} {} {}ms",
        resp.status().as_u16(),
        start.elapsed().as_millis()
    );
    resp
}

async fn post_validate(body: Bytes) -> Response {
    Json(serde_json::to_value(validate(&body)).expect("serializable")).into_response()
}

#[derive(Debug, Deserialize)]
struct CompileParams {
    backend: Option<String>,
}

async fn post_compile(Query(p): Query<CompileParams>, body: Bytes) -> Response {
    let backend = p.backend.as_deref().unwrap_or("tamarin");
    match compile(&body, backend) {
        Ok(out) => ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], out.text).into_response(),
        Err(CompileError::Backend(e)) => error(StatusCode::BAD_REQUEST, "unknown-backend", e.to_string()),
        Err(CompileError::Invalid(diags)) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(diagnostics_json(&diags))).into_response()
        }
    }
}

async fn get_examples() -> Json<Vec<&'static str>> {
    Json(fixtures::ALL.iter().map(|f| f.name).collect())
}

async fn get_example(Path(name): Path<String>) -> Response {
    match fixtures::get(&name) {
        Some(f) => xml(f.psv.as_bytes().to_vec()),
        None => error(StatusCode::NOT_FOUND, "not-found", format!("no example named `{name}`")),
    }
}

async fn get_backends() -> Json<Vec<&'static str>> {
    Json(list_plugins())
}

async fn list_protocols(State(s): State<AppState>) -> Response {
    match s.store.list() {
        Ok(names) => Json(names).into_response(),
        Err(e) => store_error(e),
    }
}

async fn get_protocol(State(s): State<AppState>, Path(name): Path<String>) -> Response {
    match s.store.get(&name) {
        Ok(bytes) => xml(bytes),
        Err(e) => store_error(e),
    }
}

/// Drafts are stored after a schema check only.
async fn put_protocol(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> Response {
    if let Err(e) = metacp_core::store::check_name(&name) {
        return store_error(e);
    }
    let diags = validate_schema(&body);
    if !diags.is_empty() {
        return (StatusCode::UNPROCESSABLE_ENTITY, Json(diagnostics_json(&diags))).into_response();
    }
    match s.store.put(&name, &body) {
        Ok(created) => {
            let status = if created { StatusCode::CREATED } else { StatusCode::OK };
            (status, Json(diagnostics_json(&[]))).into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn delete_protocol(State(s): State<AppState>, Path(name): Path<String>) -> Response {
    match s.store.delete(&name) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}

async fn get_layout(State(s): State<AppState>, Path(name): Path<String>) -> Response {
    match s.store.get_layout(&name) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], Body::from(bytes)).into_response(),
        Err(e) => store_error(e),
    }
}

async fn put_layout(State(s): State<AppState>, Path(name): Path<String>, body: Bytes) -> Response {
    if serde_json::from_slice::<serde_json::Value>(&body).is_err() {
        return error(StatusCode::BAD_REQUEST, "bad-request", "layout must be a JSON document");
    }
    match s.store.put_layout(&name, &body) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}
