//! HTTP review service for stage QA, distortion rating and blinded pairwise
//! comparison sessions.
//!
//! Pairwise responses never name the models or expose the media paths of an
//! open session: items are addressed by index and media by opaque tokens.

pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Body;
use axum::extract::{Path, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use medcurate::eval::{Dimension, DistortionLevel, QaConfig, RatingKind};
use medcurate::{ClipRecord, VideoRecord};
use serde_json::{json, Value};
use tower::ServiceExt;
use tower_http::services::ServeFile;

pub use store::{CreateSession, RatingSubmission, Session, SessionStatus, Store, StoreError};

pub const RATER_HEADER: &str = "x-rater-id";

/// Where a clip's media lives: the source video plus the clip window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMedia {
    pub media: String,
    pub start_s: u32,
    pub end_s: u32,
}

/// Maps clip ids to their source video media.
pub fn clip_media_index(clips: &[ClipRecord], videos: &[VideoRecord]) -> HashMap<String, ClipMedia> {
    let parents: HashMap<&str, &VideoRecord> =
        videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    clips
        .iter()
        .filter_map(|c| {
            let video = parents.get(c.video_id.as_str())?;
            Some((
                c.clip_id.clone(),
                ClipMedia {
                    media: video.media_path.clone(),
                    start_s: c.start_index,
                    end_s: c.end_index,
                },
            ))
        })
        .collect()
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
    media_root: Arc<PathBuf>,
    clips: Arc<HashMap<String, ClipMedia>>,
    qa: Arc<QaConfig>,
}

impl AppState {
    pub fn new(
        store: Store,
        media_root: impl Into<PathBuf>,
        clips: HashMap<String, ClipMedia>,
        qa: QaConfig,
    ) -> Self {
        Self {
            store: Arc::new(Mutex::new(store)),
            media_root: Arc::new(media_root.into()),
            clips: Arc::new(clips),
            qa: Arc::new(qa),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Store> {
        // A panic while holding the lock cannot leave a half-applied rating:
        // the file append happens before the in-memory update.
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: Some(field.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(m) => ApiError::new(StatusCode::NOT_FOUND, m),
            StoreError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, m),
            StoreError::Invalid { field, message } => ApiError::invalid(&field, message),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(field) = self.field {
            body["field"] = json!(field);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/items/{n}", get(get_item))
        .route("/api/sessions/{id}/items/{n}/rating", post(post_rating))
        .route("/api/sessions/{id}/report", get(get_report))
        .route("/media/{id}", get(get_media))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "review service listening");
    axum::serve(listener, router(state)).await
}

fn rater(headers: &HeaderMap) -> Option<String> {
    headers
        .get(RATER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn summary(store: &Store, session: &Session, rater: Option<&str>) -> Value {
    let status = store.status(session);
    let mut body = json!({
        "session_id": session.session_id,
        "kind": session.kind,
        "stage": session.stage,
        "item_count": session.items.len(),
        "required_raters": session.required_raters,
        "status": status,
        "progress": store.progress(session),
    });
    if let Some(rater) = rater {
        body["rater_id"] = json!(rater);
        body["next_item"] = json!(store.next_unrated(session, rater));
    }
    if let (SessionStatus::Complete, Some(map)) = (status, &session.blinding) {
        body["models"] = json!({ "model_x": map.model_x, "model_y": map.model_y });
    }
    body
}

async fn create_session(State(state): State<AppState>, Json(body): Json<Value>) -> ApiResult<Response> {
    let req: CreateSession = serde_json::from_value(body)
        .map_err(|e| ApiError::invalid("body", e.to_string()))?;
    let mut store = state.lock();
    let session = store.create_session(req)?.clone();
    tracing::info!(session = %session.session_id, kind = %session.kind, items = session.items.len(), "session created");
    Ok((StatusCode::CREATED, Json(summary(&store, &session, None))).into_response())
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let store = state.lock();
    let session = store.session(&id)?;
    Ok(Json(summary(&store, session, rater(&headers).as_deref())))
}

fn media_url(token: &str) -> String {
    let mut out = String::from("/media/");
    for b in token.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn rubric(kind: RatingKind) -> Value {
    match kind {
        RatingKind::StageQa => json!({ "options": ["clean", "slightly_noisy", "noisy"] }),
        RatingKind::Distortion => json!({
            "options": DistortionLevel::ALL.iter().map(|level| json!({
                "value": level,
                "label": level.label(),
                "criteria": level.criteria(),
            })).collect::<Vec<_>>(),
        }),
        RatingKind::Pairwise => json!({
            "dimensions": Dimension::ALL.iter().map(|d| d.as_str()).collect::<Vec<_>>(),
            "options": ["A", "B", "both_loss"],
        }),
    }
}

async fn get_item(
    State(state): State<AppState>,
    Path((id, n)): Path<(String, usize)>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let store = state.lock();
    let session = store.session(&id)?;
    let item = session
        .item(n)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("session {id} has no item {n}")))?;
    let mut body = json!({
        "session_id": session.session_id,
        "kind": session.kind,
        "index": n,
        "count": session.items.len(),
        "rubric": rubric(session.kind),
    });
    if session.kind == RatingKind::Pairwise {
        body["prompt"] = json!(item.prompt);
        body["media"] = json!([
            { "slot": "A", "url": media_url(&session.alias(&item.item_id, "A")) },
            { "slot": "B", "url": media_url(&session.alias(&item.item_id, "B")) },
        ]);
    } else {
        body["item_id"] = json!(item.item_id);
        if item.media.is_some() {
            body["media"] = json!([{ "slot": "clip", "url": media_url(&session.alias(&item.item_id, "clip")) }]);
        } else if let Some(clip) = state.clips.get(&item.item_id) {
            body["media"] = json!([{ "slot": "clip", "url": media_url(&item.item_id) }]);
            body["window"] = json!({ "start_s": clip.start_s, "end_s": clip.end_s });
        } else {
            body["media"] = json!([]);
        }
    }
    if let Some(rater) = rater(&headers) {
        body["rated"] = json!(store.has_rated(session, &item.item_id, &rater));
    }
    Ok(Json(body))
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

async fn post_rating(
    State(state): State<AppState>,
    Path((id, n)): Path<(String, usize)>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let rater = rater(&headers).ok_or_else(|| ApiError {
        status: StatusCode::BAD_REQUEST,
        message: format!("missing {RATER_HEADER} header"),
        field: Some(RATER_HEADER.to_string()),
    })?;
    let submission: RatingSubmission = serde_json::from_value(body)
        .map_err(|e| ApiError::invalid("body", e.to_string()))?;
    let mut store = state.lock();
    let records = store.add_rating(&id, n, &rater, &submission, now())?;
    let session = store.session(&id)?;
    let status = store.status(session);
    let next = store.next_unrated(session, &rater);
    // Pairwise records name the item only, never a model.
    let stored: Vec<Value> = records.iter().map(|r| json!(r.value)).collect();
    Ok((
        StatusCode::CREATED,
        Json(json!({ "stored": stored, "status": status, "next_item": next })),
    )
        .into_response())
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let store = state.lock();
    let report = store.report(&id, &state.qa)?;
    Ok(Json(json!(report)))
}

async fn get_media(
    State(state): State<AppState>,
    Path(token): Path<String>,
    request: Request,
) -> ApiResult<Response> {
    let media = {
        let store = state.lock();
        let found = store
            .sessions()
            .flat_map(|s| s.media_aliases())
            .find(|(alias, _)| *alias == token)
            .map(|(_, media)| media);
        found
    }
    .or_else(|| state.clips.get(&token).map(|c| c.media.clone()))
    .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown media"))?;
    let path = store::resolve_media(&state.media_root, &media);
    if !path.is_file() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "media file missing"));
    }
    let response = ServeFile::new(path)
        .oneshot(request)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(response.map(Body::new))
}
