//! HTTP routes over a shared [`StudyStore`]. All mutations go through one
//! mutex, so operations on a study are linearizable.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rqi_core::image::{crop, encode_png, load_image, CropRect, ImageBuffer};
use serde::Deserialize;
use tokio::sync::Mutex;

use crate::error::StudyError;
use crate::model::{ChoiceSubmission, CropPolicy, StudyManifest};
use crate::store::StudyStore;
use crate::study::NextPair;

pub type SharedStore = Arc<Mutex<StudyStore>>;

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = match &self {
            StudyError::Validation(_) => StatusCode::BAD_REQUEST,
            StudyError::Conflict(_) | StudyError::StaleRecord(_) => StatusCode::CONFLICT,
            StudyError::UnknownStudy(_) | StudyError::UnknownRecord(_) | StudyError::UnknownItem(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let kind = match &self {
            StudyError::Validation(_) => "validation",
            StudyError::Conflict(_) => "conflict",
            StudyError::StaleRecord(_) => "stale_record",
            StudyError::UnknownStudy(_) => "unknown_study",
            StudyError::UnknownRecord(_) => "unknown_record",
            StudyError::UnknownItem(_) => "unknown_item",
            _ => "internal",
        };
        (status, Json(serde_json::json!({ "error": kind, "message": self.to_string() }))).into_response()
    }
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/studies", post(create_study))
        .route("/studies/{id}/next", get(next_pair))
        .route("/studies/{id}/choices", post(record_choice))
        .route("/studies/{id}/status", get(status))
        .route("/studies/{id}/export", get(export))
        .route("/studies/{id}/images/{item}", get(image))
        .with_state(store)
}

async fn create_study(State(store): State<SharedStore>, body: String) -> Result<Response, StudyError> {
    let manifest: StudyManifest =
        serde_json::from_str(&body).map_err(|e| StudyError::Validation(format!("manifest: {e}")))?;
    let mut s = store.lock().await;
    let study = s.create(manifest)?;
    let body = serde_json::json!({ "study_id": study.id(), "pairs": study.pair_count() });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

fn image_url(study: &str, content: &str, item: &str) -> String {
    format!("/studies/{study}/images/{item}?content={content}")
}

async fn next_pair(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    Query(q): Query<RaterQuery>,
) -> Result<Json<NextPair>, StudyError> {
    if q.rater.is_empty() {
        return Err(StudyError::Validation("rater id must not be empty".into()));
    }
    let mut s = store.lock().await;
    Ok(Json(match s.next_pair(&id, &q.rater)? {
        None => NextPair::Done,
        Some(a) => NextPair::Assigned {
            left_url: image_url(&id, &a.content_id, &a.left_item),
            right_url: image_url(&id, &a.content_id, &a.right_item),
            record_id: a.record_id,
            content_id: a.content_id,
            assignment_seed: a.assignment_seed,
        },
    }))
}

async fn record_choice(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, StudyError> {
    let sub: ChoiceSubmission =
        serde_json::from_str(&body).map_err(|e| StudyError::Validation(format!("choice: {e}")))?;
    let ack = store.lock().await.record_choice(&id, &sub)?;
    Ok(Json(ack).into_response())
}

async fn status(State(store): State<SharedStore>, Path(id): Path<String>) -> Result<Response, StudyError> {
    let s = store.lock().await;
    let now = s.now();
    Ok(Json(s.get(&id)?.status(now)).into_response())
}

async fn export(State(store): State<SharedStore>, Path(id): Path<String>) -> Result<Response, StudyError> {
    Ok(Json(store.lock().await.get(&id)?.export()).into_response())
}

#[derive(Deserialize)]
struct ContentQuery {
    content: String,
}

fn center_crop(img: &ImageBuffer, n: usize) -> rqi_core::Result<ImageBuffer> {
    let (w, h) = (img.width(), img.height());
    let (cw, ch) = (n.min(w), n.min(h));
    let rect = CropRect::new((w - cw) / 2, (h - ch) / 2, cw, ch);
    let planes = img.channel_planes().iter().map(|p| crop(p, rect)).collect::<rqi_core::Result<Vec<_>>>()?;
    ImageBuffer::from_planes(&planes)
}

async fn image(
    State(store): State<SharedStore>,
    Path((id, item)): Path<(String, String)>,
    Query(q): Query<ContentQuery>,
) -> Result<Response, StudyError> {
    let (path, policy) = {
        let s = store.lock().await;
        let study = s.get(&id)?;
        let content = study
            .manifest
            .contents
            .iter()
            .find(|c| c.content_id == q.content)
            .ok_or_else(|| StudyError::UnknownItem(format!("{}/{item}", q.content)))?;
        let spec = content
            .items
            .iter()
            .find(|i| i.item_id == item)
            .ok_or_else(|| StudyError::UnknownItem(format!("{}/{item}", q.content)))?;
        (spec.path.clone(), study.manifest.crop_policy)
    };
    let bytes = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, StudyError> {
        let img = load_image(&path)?;
        let img = match policy {
            CropPolicy::Full => img,
            CropPolicy::CenterCrop(n) => center_crop(&img, n)?,
        };
        Ok(encode_png(&img)?)
    })
    .await
    .map_err(|e| StudyError::Io(std::io::Error::other(e)))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

/// Serves the router on `addr` until the process is stopped.
pub async fn serve(store: StudyStore, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(Mutex::new(store)))).await
}
