//! HTTP API consumed by the map UI.
//!
//! | route | |
//! |---|---|
//! | `GET /v1/preprompt?lat&lon[&radius]` | descriptor and preprompt |
//! | `POST /v1/ask` | preprompt-conditioned completion |
//! | `GET /v1/embeddings` | coloured GeoJSON layer |
//!
//! Every error body is `{"code", "message"}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use cartoprompt_core::curate::{AREA_MARKER, QUESTION_MARKER};
use cartoprompt_core::{DescriptorConfig, LatLon, VerbalizerRules};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use crate::config::{CompletionConfig, PipelineConfig};
use crate::error::Error;
use crate::overpass::classify;
use crate::store::{effective_radius, Description, FeatureStore};

/// Shared, read-only service state.
pub struct AppState {
    pub store: FeatureStore,
    pub descriptor: DescriptorConfig,
    pub rules: VerbalizerRules,
    pub completion: CompletionConfig,
    pub embeddings_path: PathBuf,
    http: reqwest::Client,
    token: Option<String>,
    limit: Semaphore,
}

impl AppState {
    pub fn new(store: FeatureStore, cfg: &PipelineConfig) -> crate::Result<Self> {
        Ok(Self {
            store,
            descriptor: cfg.descriptor.clone(),
            rules: cfg.verbalizer.clone(),
            completion: cfg.completion.clone(),
            embeddings_path: cfg.service.embeddings_path.clone(),
            http: reqwest::Client::builder()
                .timeout(cfg.completion.timeout())
                .build()?,
            token: std::env::var(&cfg.completion.token_env)
                .ok()
                .filter(|t| !t.is_empty()),
            limit: Semaphore::new(cfg.completion.max_concurrent),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/preprompt", get(preprompt))
        .route("/v1/ask", post(ask))
        .route("/v1/embeddings", get(embeddings))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    upstream_status: Option<u16>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            upstream_status: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "internal error");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(s) = self.upstream_status {
            body["upstream_status"] = json!(s);
        }
        (self.status, axum::Json(body)).into_response()
    }
}

fn parse_coord(q: &HashMap<String, String>, key: &str) -> Result<f64, ApiError> {
    let raw = q
        .get(key)
        .ok_or_else(|| ApiError::bad_request(format!("missing `{key}`")))?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ApiError::bad_request(format!("`{key}` is not a number")))
}

fn checked_center(lat: f64, lon: f64, store: &FeatureStore) -> Result<LatLon, ApiError> {
    let c = LatLon::new(lat, lon);
    if !c.is_valid() {
        return Err(ApiError::bad_request(format!(
            "({lat}, {lon}) is not a valid latitude/longitude"
        )));
    }
    if !store.covers(c) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "out_of_bounds",
            format!("({lat}, {lon}) lies outside the loaded data"),
        ));
    }
    Ok(c)
}

fn describe(state: &AppState, center: LatLon, radius: Option<f64>) -> Result<Description, ApiError> {
    let r = effective_radius(radius, state.descriptor.radius_m);
    state
        .store
        .describe(center, r, &state.descriptor, &state.rules)
        .map_err(ApiError::internal)
}

async fn preprompt(
    State(state): State<Arc<AppState>>,
    query: Result<Query<HashMap<String, String>>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let lat = parse_coord(&q, "lat")?;
    let lon = parse_coord(&q, "lon")?;
    let radius = match q.get("radius") {
        Some(_) => Some(parse_coord(&q, "radius")?),
        None => None,
    };
    let center = checked_center(lat, lon, &state.store)?;
    let d = describe(&state, center, radius)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], d.to_json()).into_response())
}

#[derive(Debug, Clone, Deserialize)]
pub struct AskRequest {
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub radius_m: Option<f64>,
    pub question: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AskResponse {
    pub preprompt: String,
    pub answer: String,
    pub model: String,
    pub latency_ms: u64,
}

/// `Area : {preprompt} Question : {question} Answer :`
pub fn ask_prompt(preprompt: &str, question: &str) -> String {
    format!("{AREA_MARKER}{preprompt}{QUESTION_MARKER}{question} Answer :")
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Result<axum::Json<AskResponse>, ApiError> {
    let req: AskRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    let question = req.question.trim();
    if question.is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    if let Some(r) = req.radius_m {
        if !r.is_finite() {
            return Err(ApiError::bad_request("radius_m is not a number"));
        }
    }
    let center = checked_center(req.lat, req.lon, &state.store)?;
    let d = describe(&state, center, req.radius_m)?;
    let prompt = ask_prompt(&d.preprompt, question);
    tracing::info!(prompt = %prompt, "ask");

    let _permit = state.limit.acquire().await.map_err(ApiError::internal)?;
    let started = Instant::now();
    let answer = complete(&state, &prompt).await.map_err(|e| {
        tracing::warn!(error = %e, "completion failed");
        ApiError {
            upstream_status: e.upstream_status(),
            ..ApiError::new(StatusCode::BAD_GATEWAY, "upstream_error", e.to_string())
        }
    })?;
    Ok(axum::Json(AskResponse {
        preprompt: d.preprompt,
        answer,
        model: state.completion.model.clone(),
        latency_ms: started.elapsed().as_millis() as u64,
    }))
}

async fn complete(state: &AppState, prompt: &str) -> crate::Result<String> {
    let c = &state.completion;
    let body = json!({ "model": c.model, "prompt": prompt });
    let mut req = state
        .http
        .post(&c.url)
        .header("content-type", "application/json")
        .body(body.to_string());
    if let Some(t) = &state.token {
        req = req.bearer_auth(t);
    }
    let resp = req.send().await.map_err(|e| classify(e, &c.url, c.timeout()))?;
    let status = resp.status();
    let text = resp.text().await.map_err(|e| classify(e, &c.url, c.timeout()))?;
    if !status.is_success() {
        return Err(Error::HttpStatus {
            status: status.as_u16(),
            url: c.url.clone(),
            body: text.chars().take(500).collect(),
        });
    }
    let v: Value = serde_json::from_str(&text)?;
    v.pointer("/choices/0/text")
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .ok_or_else(|| Error::Format("completion reply has no choices[0].text".into()))
}

/// Quoted SHA-256 of the artifact.
pub fn etag(bytes: &[u8]) -> String {
    format!("\"{}\"", hex::encode(Sha256::digest(bytes)))
}

fn etag_matches(headers: &HeaderMap, tag: &str) -> bool {
    headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(|t| t.trim().trim_start_matches("W/"))
        .any(|t| t == "*" || t == tag)
}

async fn embeddings(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    let bytes = match tokio::fs::read(&state.embeddings_path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "no_embeddings",
                "embedding layer not found; run `cartoprompt embed` first",
            ))
        }
        Err(e) => return Err(ApiError::internal(e)),
    };
    let tag = etag(&bytes);
    let tag_value = HeaderValue::from_str(&tag).map_err(ApiError::internal)?;
    if etag_matches(&headers, &tag) {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, tag_value)]).into_response());
    }
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/geo+json")),
            (header::ETAG, tag_value),
        ],
        bytes,
    )
        .into_response())
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: &str) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr, e))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr, e))?;
    tracing::info!(addr = %local, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr, e))
}
