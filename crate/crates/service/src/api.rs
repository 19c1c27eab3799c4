//! HTTP routes.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;
use wdc::{DehazeConfig, Diagnostics};

use crate::preview::PreviewKind;
use crate::session::{RecordedMessage, Session, Stroke, StrokeError, StrokeOutcome};
use crate::store::{SessionStore, SharedSession, StoreError};

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound,
    Conflict(String),
    PayloadTooLarge(usize),
    Unprocessable(String, Value),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound => (StatusCode::NOT_FOUND, json!({ "error": "unknown session" })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::PayloadTooLarge(limit) => (
                StatusCode::PAYLOAD_TOO_LARGE,
                json!({ "error": format!("upload exceeds {limit} bytes") }),
            ),
            ApiError::Unprocessable(m, mut details) => {
                details["error"] = Value::String(m);
                (StatusCode::UNPROCESSABLE_ENTITY, details)
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Pipeline(
                e @ (wdc::DehazeError::UnsupportedFormat(_)
                | wdc::DehazeError::EmptyRaster { .. }
                | wdc::DehazeError::DimensionOverflow { .. }),
            ) => ApiError::BadRequest(e.to_string()),
            e => ApiError::Internal(e.to_string()),
        }
    }
}

impl From<StrokeError> for ApiError {
    fn from(e: StrokeError) -> Self {
        let details = match &e {
            StrokeError::Infeasible { target, bound } => {
                json!({ "t_s": target, "max_lower_bound": bound })
            }
            StrokeError::Pipeline(_) => return ApiError::Internal(e.to_string()),
            _ => json!({}),
        };
        ApiError::Unprocessable(e.to_string(), details)
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

/// Base64 PNGs of the radiance and the pseudo-colored transmission.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Previews {
    pub j: String,
    pub t: String,
}

impl Previews {
    fn of(session: &Session) -> Result<Self, ApiError> {
        let enc = |kind| -> Result<String, ApiError> {
            let png = session.preview(kind).map_err(internal)?;
            Ok(base64::engine::general_purpose::STANDARD.encode(png))
        };
        Ok(Self {
            j: enc(PreviewKind::Radiance)?,
            t: enc(PreviewKind::Transmission)?,
        })
    }
}

#[derive(Serialize)]
struct Created {
    id: Uuid,
    width: usize,
    height: usize,
    previews: Previews,
    diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    id: Uuid,
    width: usize,
    height: usize,
    config: &'a DehazeConfig,
    messages: &'a [RecordedMessage],
    previews: Previews,
    diagnostics: &'a Diagnostics,
}

#[derive(Deserialize)]
struct StrokeRequest {
    strokes: Vec<Stroke>,
}

#[derive(Serialize)]
struct StrokeResponse {
    #[serde(flatten)]
    outcome: StrokeOutcome,
    previews: Previews,
    diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct UndoResponse {
    message_count: usize,
    previews: Previews,
    diagnostics: Diagnostics,
}

fn parse_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError::NotFound)
}

async fn lookup(store: &Arc<SessionStore>, raw: &str) -> Result<(Uuid, SharedSession), ApiError> {
    let id = parse_id(raw)?;
    let store = store.clone();
    let found = tokio::task::spawn_blocking(move || store.get(id))
        .await
        .map_err(internal)??;
    found.map(|s| (id, s)).ok_or(ApiError::NotFound)
}

/// Runs `f` on the locked session off the async threads. Holding the lock
/// for the whole call serializes requests to one session.
async fn with_session<T: Send + 'static>(
    session: SharedSession,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let mut guard = session.lock_owned().await;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(internal)?
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    mut form: Multipart,
) -> Result<Response, ApiError> {
    let limit = store.config().max_upload_bytes;
    let mut image = None;
    let mut config = DehazeConfig::default();
    while let Some(field) = form.next_field().await.map_err(multipart_error(limit))? {
        match field.name() {
            Some("image") => {
                let bytes = field.bytes().await.map_err(multipart_error(limit))?;
                if bytes.len() > limit {
                    return Err(ApiError::PayloadTooLarge(limit));
                }
                image = Some(bytes);
            }
            Some("config") => {
                let text = field.text().await.map_err(multipart_error(limit))?;
                config = serde_json::from_str(&text)
                    .map_err(|e| ApiError::BadRequest(format!("config: {e}")))?;
            }
            _ => {}
        }
    }
    let image =
        image.ok_or_else(|| ApiError::BadRequest("missing multipart field `image`".into()))?;
    config
        .validate()
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;

    let store2 = store.clone();
    let (id, session) = tokio::task::spawn_blocking(move || store2.create(&image, config))
        .await
        .map_err(internal)??;
    let body = with_session(session, move |s| {
        let (width, height) = s.dims();
        Ok(Created {
            id,
            width,
            height,
            previews: Previews::of(s)?,
            diagnostics: s.current().diagnostics.clone(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn multipart_error(limit: usize) -> impl Fn(axum::extract::multipart::MultipartError) -> ApiError {
    move |e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::PayloadTooLarge(limit)
        } else {
            ApiError::BadRequest(e.body_text())
        }
    }
}

async fn get_session(
    State(store): State<Arc<SessionStore>>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let (id, session) = lookup(&store, &raw).await?;
    let body = with_session(session, move |s| {
        let (width, height) = s.dims();
        let snap = Snapshot {
            id,
            width,
            height,
            config: s.config(),
            messages: s.messages(),
            previews: Previews::of(s)?,
            diagnostics: &s.current().diagnostics,
        };
        serde_json::to_value(&snap).map_err(internal)
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn submit_strokes(
    State(store): State<Arc<SessionStore>>,
    Path(raw): Path<String>,
    Json(req): Json<StrokeRequest>,
) -> Result<Response, ApiError> {
    let (id, session) = lookup(&store, &raw).await?;
    let body = with_session(session, move |s| {
        let outcome = s.submit(&req.strokes)?;
        store.persist_messages(id, s.messages()).map_err(internal)?;
        Ok(StrokeResponse {
            outcome,
            previews: Previews::of(s)?,
            diagnostics: s.current().diagnostics.clone(),
        })
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn undo(
    State(store): State<Arc<SessionStore>>,
    Path(raw): Path<String>,
) -> Result<Response, ApiError> {
    let (id, session) = lookup(&store, &raw).await?;
    let body = with_session(session, move |s| {
        if !s.undo().map_err(internal)? {
            return Err(ApiError::Conflict("nothing to undo".into()));
        }
        store.persist_messages(id, s.messages()).map_err(internal)?;
        Ok(UndoResponse {
            message_count: s.messages().len(),
            previews: Previews::of(s)?,
            diagnostics: s.current().diagnostics.clone(),
        })
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn preview(
    State(store): State<Arc<SessionStore>>,
    Path((raw, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let kind = PreviewKind::from_file_name(&file).ok_or(ApiError::NotFound)?;
    let (_, session) = lookup(&store, &raw).await?;
    let png = with_session(session, move |s| s.preview(kind).map_err(internal)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

/// Builds the router. The body limit leaves room for multipart framing and
/// the config field on top of the image itself.
pub fn router(store: Arc<SessionStore>) -> Router {
    let body_limit = store.config().max_upload_bytes + 64 * 1024;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/strokes", post(submit_strokes))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/preview/{file}", get(preview))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(store)
}
