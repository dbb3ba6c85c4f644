//! HTTP API over an opened index.
//!
//! | method | path                  | body / result                          |
//! |--------|-----------------------|----------------------------------------|
//! | POST   | `/api/search`         | `SearchBody` → `WireSearchResponse`    |
//! | POST   | `/api/aggregate`      | `AggregateBody` → `WireAnswerTable`    |
//! | GET    | `/api/procedure/{id}` | the stored interchange record          |
//! | GET    | `/api/schema`         | labels, slot names and corpus counts   |
//! | GET    | `/healthz`            | `ok`                                   |

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use procsearch_core::engine::{
    aggregate_answers, sample_for_review, search, EngineError, Page, SearchOptions, SearchRequest,
};
use procsearch_core::query::{QueryError, QueryErrorKind};
use procsearch_core::wire::{compile_request, AggregateBody, SearchBody, WireAnswerTable, WireSearchResponse};
use procsearch_core::IndexHandle;

pub const DEFAULT_PAGE_LIMIT: usize = 20;
pub const MAX_PAGE_LIMIT: usize = 500;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub default_limit: usize,
    pub max_limit: usize,
    /// `None` disables CORS headers; `"*"` allows any origin.
    pub cors_origin: Option<String>,
    pub search: SearchOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            default_limit: DEFAULT_PAGE_LIMIT,
            max_limit: MAX_PAGE_LIMIT,
            cors_origin: None,
            search: SearchOptions::default(),
        }
    }
}

struct AppState {
    index: Arc<IndexHandle>,
    config: ServerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadQuery,
    UnknownSlot,
    UnknownLabel,
    NotFound,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    /// Byte offset into `graph_query` for parse failures.
    #[serde(default)]
    pub position: Option<usize>,
}

impl ApiError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            position: None,
        }
    }

    fn status(&self) -> StatusCode {
        match self.code {
            ErrorCode::BadQuery | ErrorCode::UnknownSlot | ErrorCode::UnknownLabel => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let code = match e.kind {
            QueryErrorKind::UnknownSlot(_) => ErrorCode::UnknownSlot,
            QueryErrorKind::UnknownLabel(_) | QueryErrorKind::UnknownEdgeLabel(_) => ErrorCode::UnknownLabel,
            _ => ErrorCode::BadQuery,
        };
        ApiError {
            code,
            message: e.kind.to_string(),
            position: e.position,
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Index(_) => ErrorCode::Internal,
            _ => ErrorCode::BadQuery,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(ErrorCode::BadQuery, e.body_text())
    }
}

pub fn router(index: Arc<IndexHandle>, config: ServerConfig) -> Router {
    let cors = config.cors_origin.as_deref().map(|origin| {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            AllowOrigin::exact(HeaderValue::from_str(origin).unwrap_or(HeaderValue::from_static("null")))
        };
        CorsLayer::new().allow_origin(allow).allow_methods(Any).allow_headers(Any)
    });
    let state = Arc::new(AppState { index, config });
    let app = Router::new()
        .route("/api/search", post(search_handler))
        .route("/api/aggregate", post(aggregate_handler))
        .route("/api/procedure/{id}", get(procedure_handler))
        .route("/api/schema", get(schema_handler))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state);
    match cors {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

/// Serves `app` on `listener` until `shutdown` resolves, then drains
/// in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?
}

fn build_request(
    index: &IndexHandle,
    graph_query: Option<&str>,
    slot_query: Option<&std::collections::BTreeMap<String, String>>,
) -> Result<SearchRequest, ApiError> {
    Ok(compile_request(graph_query, slot_query, index.schema())?)
}

async fn search_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SearchBody>, JsonRejection>,
) -> Result<Json<WireSearchResponse>, ApiError> {
    let Json(body) = body?;
    run_blocking(move || {
        let mut req = build_request(&state.index, body.graph_query.as_deref(), body.slot_query.as_ref())?;
        let page = body.page.unwrap_or_default();
        let limit = page.limit.unwrap_or(state.config.default_limit).min(state.config.max_limit);
        req.page = Page {
            offset: page.offset,
            limit: Some(limit),
        };
        let resp = search(&state.index, &req, &state.config.search)?;
        Ok(Json(WireSearchResponse::from(&resp)))
    })
    .await
}

async fn aggregate_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<AggregateBody>, JsonRejection>,
) -> Result<Json<WireAnswerTable>, ApiError> {
    let Json(body) = body?;
    run_blocking(move || {
        let req = build_request(&state.index, body.graph_query.as_deref(), body.slot_query.as_ref())?;
        let resp = search(&state.index, &req, &state.config.search)?;
        let table = aggregate_answers(&resp, &body.capture)?;
        let sample = match body.sample_k {
            Some(0) => return Err(ApiError::new(ErrorCode::BadQuery, "sample_k must be positive")),
            Some(k) => Some(sample_for_review(&table, k, body.seed.unwrap_or(0))),
            None => None,
        };
        Ok(Json(WireAnswerTable::new(&table, sample)))
    })
    .await
}

async fn procedure_handler(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.index.record(&id) {
        Some(record) => (
            [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
            record.to_string(),
        )
            .into_response(),
        None => ApiError::new(ErrorCode::NotFound, format!("no procedure {id:?}")).into_response(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaInfo {
    pub schema_version: String,
    pub node_labels: Vec<String>,
    pub edge_labels: Vec<String>,
    pub slot_names: Vec<String>,
    pub corpus_stats: CorpusCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub procedures: u64,
    pub sentences: u64,
    pub terms: u64,
}

async fn schema_handler(State(state): State<Arc<AppState>>) -> Json<SchemaInfo> {
    let schema = state.index.schema();
    let stats = state.index.stats();
    Json(SchemaInfo {
        schema_version: schema.version().to_string(),
        node_labels: schema.node_labels().to_vec(),
        edge_labels: schema.edge_labels().to_vec(),
        slot_names: schema.slot_names().to_vec(),
        corpus_stats: CorpusCounts {
            procedures: stats.procedures,
            sentences: stats.sentences,
            terms: stats.terms,
        },
    })
}
