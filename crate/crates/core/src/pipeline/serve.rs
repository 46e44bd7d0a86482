use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainingConfig;
use super::model::Synthesizer;
use crate::error::{Error, Result};
use crate::sketchdata::{ColorPhoto, SketchImage};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sketch2photo,
    Photo2sketch,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthesisRequest {
    /// Base64 PNG sketch (sketch2photo).
    #[serde(default)]
    pub sketch: Option<String>,
    /// Base64 PNG photo (photo2sketch).
    #[serde(default)]
    pub photo: Option<String>,
    /// Gallery id from `/api/references`.
    #[serde(default)]
    pub reference_id: Option<String>,
    /// Base64 PNG reference photo; ignored when `reference_id` is set.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResponse {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grayscale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub color: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sketch: Option<String>,
    pub model_version: String,
    pub latency_ms: u64,
    /// Normalizations applied to the uploads, e.g. padding and resizing.
    pub transforms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub id: String,
    /// Base64 PNG.
    pub thumbnail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub shape_loaded: bool,
    pub content_loaded: bool,
}

/// Reference photos scanned at startup, keyed by content hash.
#[derive(Debug, Clone, Default)]
pub struct Gallery {
    items: Vec<(String, ColorPhoto, String)>,
}

pub fn content_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl Gallery {
    pub fn scan(dir: &Path, image_size: usize, thumbnail_size: usize) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::Config(format!("gallery {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        paths.sort();
        let mut items: Vec<(String, ColorPhoto, String)> = Vec::new();
        for p in paths {
            let bytes = std::fs::read(&p)?;
            let id = content_id(&bytes);
            if items.iter().any(|(i, _, _)| *i == id) {
                continue;
            }
            let photo = ColorPhoto::from_png_bytes(&bytes)
                .map_err(|e| Error::Decode { path: p.clone(), reason: e.to_string() })?
                .normalized(image_size);
            let thumb = B64.encode(photo.resized(thumbnail_size).to_png_bytes()?);
            items.push((id, photo, thumb));
        }
        Ok(Self { items })
    }

    pub fn from_photos(photos: Vec<ColorPhoto>, thumbnail_size: usize) -> Result<Self> {
        let items = photos
            .into_iter()
            .map(|p| {
                let png = p.to_png_bytes()?;
                Ok((content_id(&png), p.clone(), B64.encode(p.resized(thumbnail_size).to_png_bytes()?)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ColorPhoto> {
        self.items.iter().find(|(i, _, _)| i == id).map(|(_, p, _)| p)
    }

    pub fn entries(&self) -> Vec<GalleryEntry> {
        self.items.iter().map(|(id, _, t)| GalleryEntry { id: id.clone(), thumbnail: t.clone() }).collect()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub model: Option<Arc<Synthesizer>>,
    pub gallery: Arc<Gallery>,
    pub image_size: usize,
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn unavailable(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::SERVICE_UNAVAILABLE, msg.into())
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => unavailable(m),
            Error::InvalidInput(m) | Error::Shape(m) => bad_request(m),
            other => ApiError(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

fn decode_png(field: &str, b64: &str) -> std::result::Result<Vec<u8>, ApiError> {
    B64.decode(b64.trim()).map_err(|e| bad_request(format!("{field}: malformed base64: {e}")))
}

fn note_resize(field: &str, w: usize, h: usize, size: usize, notes: &mut Vec<String>) {
    if (w, h) != (size, size) {
        let pad = if w != h { ", white-padded to square" } else { "" };
        notes.push(format!("{field}: {w}×{h} resized to {size}×{size}{pad}"));
    }
}

fn decode_sketch(field: &str, b64: &str, size: usize, notes: &mut Vec<String>) -> std::result::Result<SketchImage, ApiError> {
    let img = SketchImage::from_png_bytes(&decode_png(field, b64)?)
        .map_err(|e| bad_request(format!("{field}: invalid PNG: {e}")))?;
    note_resize(field, img.width(), img.height(), size, notes);
    Ok(img.normalized(size))
}

fn decode_photo(field: &str, b64: &str, size: usize, notes: &mut Vec<String>) -> std::result::Result<ColorPhoto, ApiError> {
    let img = ColorPhoto::from_png_bytes(&decode_png(field, b64)?)
        .map_err(|e| bad_request(format!("{field}: invalid PNG: {e}")))?;
    note_resize(field, img.width(), img.height(), size, notes);
    Ok(img.normalized(size))
}

fn model(state: &AppState) -> std::result::Result<Arc<Synthesizer>, ApiError> {
    state.model.clone().ok_or_else(|| unavailable("model not loaded"))
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> std::result::Result<T, ApiError> + Send + 'static,
) -> std::result::Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: state.model.as_ref().map(|m| m.version().to_string()).unwrap_or_default(),
        shape_loaded: state.model.as_ref().is_some_and(|m| m.has_shape()),
        content_loaded: state.model.as_ref().is_some_and(|m| m.has_content()),
    })
}

async fn references(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "references": state.gallery.entries() }))
}

fn photo_to_sketch_response(
    state: &AppState,
    m: &Synthesizer,
    photo_b64: &str,
    start: Instant,
) -> std::result::Result<SynthesisResponse, ApiError> {
    let mut notes = Vec::new();
    let photo = decode_photo("photo", photo_b64, state.image_size, &mut notes)?;
    let sketch = m.photo_to_sketch(&photo)?;
    Ok(SynthesisResponse {
        sketch: Some(B64.encode(sketch.to_png_bytes()?)),
        model_version: m.version().to_string(),
        latency_ms: start.elapsed().as_millis() as u64,
        transforms: notes,
        ..Default::default()
    })
}

async fn synthesize(
    State(state): State<AppState>,
    Json(req): Json<SynthesisRequest>,
) -> std::result::Result<Json<SynthesisResponse>, ApiError> {
    let start = Instant::now();
    let m = model(&state)?;
    run_blocking(move || {
        if req.mode == Mode::Photo2sketch {
            let photo = req.photo.as_deref().ok_or_else(|| bad_request("photo2sketch needs a photo"))?;
            return photo_to_sketch_response(&state, &m, photo, start);
        }
        let mut notes = Vec::new();
        let sketch_b64 = req.sketch.as_deref().ok_or_else(|| bad_request("missing sketch"))?;
        let sketch = decode_sketch("sketch", sketch_b64, state.image_size, &mut notes)?;
        let reference = match (&req.reference_id, &req.reference) {
            (Some(id), _) => Some(
                state
                    .gallery
                    .get(id)
                    .cloned()
                    .ok_or_else(|| bad_request(format!("unknown reference id {id}")))?,
            ),
            (None, Some(b64)) => Some(decode_photo("reference", b64, state.image_size, &mut notes)?),
            (None, None) => None,
        };
        let (gray, color) = m.synthesize(&sketch, reference.as_ref())?;
        Ok(SynthesisResponse {
            grayscale: Some(B64.encode(gray.to_png_bytes()?)),
            color: Some(B64.encode(color.to_png_bytes()?)),
            sketch: None,
            model_version: m.version().to_string(),
            latency_ms: start.elapsed().as_millis() as u64,
            transforms: notes,
        })
    })
    .await
    .map(Json)
}

async fn photo2sketch(
    State(state): State<AppState>,
    Json(req): Json<SynthesisRequest>,
) -> std::result::Result<Json<SynthesisResponse>, ApiError> {
    let start = Instant::now();
    let m = model(&state)?;
    run_blocking(move || {
        let photo = req.photo.as_deref().ok_or_else(|| bad_request("missing photo"))?;
        photo_to_sketch_response(&state, &m, photo, start)
    })
    .await
    .map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/references", get(references))
        .route("/api/synthesize", post(synthesize))
        .route("/api/photo2sketch", post(photo2sketch))
        .with_state(state)
}

/// Load checkpoints and gallery per `cfg.serve`. A missing checkpoint leaves
/// the model unloaded so inference endpoints answer 503.
pub fn state_from_config(cfg: &TrainingConfig) -> Result<AppState> {
    let s = &cfg.serve;
    let model = if s.shape_checkpoint.is_some() || s.content_checkpoint.is_some() {
        Some(Arc::new(Synthesizer::load(s.shape_checkpoint.as_deref(), s.content_checkpoint.as_deref())?))
    } else {
        None
    };
    let gallery = match &s.gallery_dir {
        Some(d) => Gallery::scan(d, cfg.data.image_size, s.thumbnail_size)?,
        None => Gallery::default(),
    };
    Ok(AppState { model, gallery: Arc::new(gallery), image_size: cfg.data.image_size })
}

/// Run the HTTP service until Ctrl-C.
pub async fn serve(cfg: &TrainingConfig) -> Result<()> {
    let state = state_from_config(cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.serve.addr).await?;
    info!(
        "serving on {} ({} references, model {})",
        listener.local_addr()?,
        state.gallery.len(),
        state.model.as_ref().map(|m| m.version()).unwrap_or("not loaded")
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
