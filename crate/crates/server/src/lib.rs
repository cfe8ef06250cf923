//! Read-only HTTP JSON API over a sealed knowledge base.
//!
//! Routes, all `GET`:
//!
//! - `/api/search?q=&limit=&offset=` ranked entity matches
//! - `/api/entity/{key}/neighborhood?depth=` subgraph around one entity
//! - `/api/sentence-graph?patent=&sent=` facts of one sentence
//! - `/api/stats` corpus counts
//!
//! Every error is a JSON body `{"code": .., "message": ..}`.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use facta_core::kb::{KbStats, KnowledgeBase};
use facta_core::query::{neighborhood, search_entities, sentence_graph, EntityMatch, Subgraph, DEFAULT_EDGE_CAP};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_SEARCH_LIMIT: usize = 20;
pub const MAX_SEARCH_LIMIT: usize = 1000;
pub const MAX_DEPTH: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub kb_path: PathBuf,
    pub edge_cap: usize,
    /// Allowed origins. Empty sends no CORS headers; `*` allows any.
    pub cors_allow: Vec<String>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            kb_path: PathBuf::from("kb.jsonl"),
            edge_cap: DEFAULT_EDGE_CAP,
            cors_allow: Vec::new(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub kb: Arc<KnowledgeBase>,
    pub edge_cap: usize,
}

impl AppState {
    pub fn new(kb: KnowledgeBase, edge_cap: usize) -> Self {
        AppState {
            kb: Arc::new(kb),
            edge_cap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<facta_core::Error> for ApiError {
    fn from(e: facta_core::Error) -> Self {
        match e {
            facta_core::Error::NotFound(m) => ApiError::new(StatusCode::NOT_FOUND, "not_found", m),
            facta_core::Error::InvalidArgument(m) => ApiError::bad_request(m),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "query failed"),
        }
    }
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

fn param_usize(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{name}` must be a non-negative integer, got `{v}`"))),
    }
}

fn required<'a>(params: &'a HashMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    match params.get(name).map(|v| v.trim()) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(ApiError::bad_request(format!("missing parameter `{name}`"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub total: usize,
    pub limit: usize,
    pub offset: usize,
    pub results: Vec<EntityMatch>,
}

async fn search(State(state): State<AppState>, params: Params) -> Result<Json<SearchResponse>, ApiError> {
    let Query(params) = params?;
    let q = required(&params, "q")?.to_string();
    let limit = param_usize(&params, "limit", DEFAULT_SEARCH_LIMIT)?;
    if limit > MAX_SEARCH_LIMIT {
        return Err(ApiError::bad_request(format!("`limit` must be at most {MAX_SEARCH_LIMIT}")));
    }
    let offset = param_usize(&params, "offset", 0)?;
    if state.kb.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "empty_kb",
            "the knowledge base holds no facts",
        ));
    }
    let all = search_entities(&state.kb, &q);
    let total = all.len();
    let results = all.into_iter().skip(offset).take(limit).collect();
    Ok(Json(SearchResponse {
        query: q,
        total,
        limit,
        offset,
        results,
    }))
}

async fn entity_neighborhood(
    State(state): State<AppState>,
    key: Result<Path<String>, PathRejection>,
    params: Params,
) -> Result<Json<Subgraph>, ApiError> {
    let Path(key) = key?;
    let Query(params) = params?;
    let depth = param_usize(&params, "depth", 1)?;
    if depth == 0 || depth > MAX_DEPTH {
        return Err(ApiError::bad_request(format!("`depth` must be between 1 and {MAX_DEPTH}")));
    }
    let key = facta_core::kb::normalize_entity(&key);
    Ok(Json(neighborhood(&state.kb, &key, depth, state.edge_cap)?))
}

async fn sentence(State(state): State<AppState>, params: Params) -> Result<Json<Subgraph>, ApiError> {
    let Query(params) = params?;
    let patent = required(&params, "patent")?;
    required(&params, "sent")?;
    let sent = param_usize(&params, "sent", 0)?;
    Ok(Json(sentence_graph(&state.kb, patent, sent)))
}

async fn stats(State(state): State<AppState>) -> Json<KbStats> {
    Json(state.kb.stats())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "only GET is supported")
}

fn cors_layer(allow: &[String]) -> Option<CorsLayer> {
    if allow.is_empty() {
        return None;
    }
    let origin = if allow.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(CorsLayer::new().allow_origin(origin).allow_methods([Method::GET]))
}

pub fn router(state: AppState, cors_allow: &[String]) -> Router {
    let app = Router::new()
        .route("/api/search", get(search))
        .route("/api/entity/{key}/neighborhood", get(entity_neighborhood))
        .route("/api/sentence-graph", get(sentence))
        .route("/api/stats", get(stats))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    match cors_layer(cors_allow) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

/// Serve `app` on `listener` until `shutdown` resolves, then drain in-flight
/// requests.
pub async fn run(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// Load the KB, bind and serve until Ctrl-C.
pub async fn serve(config: &ApiConfig) -> Result<(), facta_core::Error> {
    let kb = KnowledgeBase::load(&config.kb_path)?;
    let app = router(AppState::new(kb, config.edge_cap), &config.cors_allow);
    let listener = TcpListener::bind(config.bind).await?;
    run(listener, app, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
