//! Shared service state, persistence and the HTTP routes.
//!
//! Layout under the data directory:
//! `campaigns/<id>.json` holds each campaign definition and
//! `logs/<id>.jsonl` its append-only event log. Both are read back on start.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use vocalize_core::analytics::{self, AnalyticsError, ConcentrationCurve};
use vocalize_core::audio::ENVELOPE_BINS;
use vocalize_core::campaign::{
    create_campaign, AttemptResult, Campaign, CampaignDefinition, CampaignError, LiveCampaign,
};
use vocalize_core::contour::{contour_from_silhouette, GrayscaleImage, DEFAULT_THRESHOLD};
use vocalize_core::conversation::{
    default_exemplars, Dialog, DialogPhase, DialogSession, EmbeddingProvider, InboundMessage,
    Intent, IntentClassifier, ResponseProvider, TemplateResponder, DEFAULT_PERSONA,
};
use vocalize_core::scoring::{FixtureTranscriber, TranscriptionProvider};

use crate::config::ServiceConfig;
use crate::providers::{HttpEmbedder, HttpResponder, HttpTranscriber};

/// Largest accepted voice note.
pub const MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("data directory {path}: {source}")]
    DataDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("transcription fixtures {path}: {message}")]
    Fixtures { path: PathBuf, message: String },
    #[error("campaign {path}: {source}")]
    Campaign {
        path: PathBuf,
        source: CampaignError,
    },
}

struct CampaignRuntime {
    live: LiveCampaign,
    sessions: HashMap<String, DialogSession>,
}

/// Everything request handlers share. Each campaign sits behind its own lock,
/// which makes the holder of the write guard that campaign's single writer.
pub struct AppState {
    config: ServiceConfig,
    dialog: Dialog,
    transcriber: Arc<dyn TranscriptionProvider>,
    campaigns: RwLock<BTreeMap<String, Arc<RwLock<CampaignRuntime>>>>,
}

fn campaigns_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("campaigns")
}

fn logs_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("logs")
}

fn log_path(data_dir: &Path, id: &str) -> PathBuf {
    logs_dir(data_dir).join(format!("{id}.jsonl"))
}

impl AppState {
    /// Builds providers from the configuration and loads stored campaigns.
    /// Must not run inside an async context when remote providers are set.
    pub fn from_config(config: ServiceConfig) -> Result<Self, StartupError> {
        let transcriber: Arc<dyn TranscriptionProvider> = match (&config.transcription_url, &config.transcription_fixtures) {
            (Some(url), _) => Arc::new(HttpTranscriber::new(url, config.provider_timeout)),
            (None, Some(path)) => {
                let bytes = std::fs::read(path).map_err(|e| StartupError::Fixtures {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                Arc::new(FixtureTranscriber::from_json(&bytes).map_err(|e| StartupError::Fixtures {
                    path: path.clone(),
                    message: e.to_string(),
                })?)
            }
            (None, None) => Arc::new(FixtureTranscriber::new()),
        };
        let embedder: Option<Arc<dyn EmbeddingProvider>> = config.embedding_url.as_ref().map(|url| {
            Arc::new(HttpEmbedder::new(url, config.embedding_dimension, config.provider_timeout)) as _
        });
        let responder: Arc<dyn ResponseProvider> = match &config.response_url {
            Some(url) => Arc::new(HttpResponder::new(url, config.provider_timeout)),
            None => Arc::new(TemplateResponder),
        };
        let dialog = Dialog {
            classifier: Arc::new(IntentClassifier::new(&default_exemplars(), embedder, config.intent_threshold)),
            responder,
            persona: DEFAULT_PERSONA.to_string(),
            prizes: config.prizes.clone(),
        };
        Self::new(config, dialog, transcriber)
    }

    pub fn new(
        config: ServiceConfig,
        dialog: Dialog,
        transcriber: Arc<dyn TranscriptionProvider>,
    ) -> Result<Self, StartupError> {
        let state = Self {
            config,
            dialog,
            transcriber,
            campaigns: RwLock::new(BTreeMap::new()),
        };
        state.load_campaigns()?;
        Ok(state)
    }

    fn load_campaigns(&self) -> Result<(), StartupError> {
        let data_dir = &self.config.data_dir;
        for dir in [campaigns_dir(data_dir), logs_dir(data_dir)] {
            std::fs::create_dir_all(&dir).map_err(|source| StartupError::DataDir { path: dir.clone(), source })?;
        }
        let dir = campaigns_dir(data_dir);
        let entries = std::fs::read_dir(&dir).map_err(|source| StartupError::DataDir { path: dir.clone(), source })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut campaigns = self.campaigns.write().expect("campaign map lock");
        for path in paths {
            let fail = |source| StartupError::Campaign { path: path.clone(), source };
            let bytes = std::fs::read(&path).map_err(|e| fail(e.into()))?;
            let campaign = Campaign::from_json(&bytes).map_err(fail)?;
            let live = LiveCampaign::open(campaign, &log_path(data_dir, &campaign_id(&path))).map_err(fail)?;
            if live.campaign().id() != campaign_id(&path) {
                return Err(fail(CampaignError::InvalidId(live.campaign().id().to_string())));
            }
            log::info!("loaded campaign {} ({} events)", live.campaign().id(), live.events().len());
            campaigns.insert(
                live.campaign().id().to_string(),
                Arc::new(RwLock::new(CampaignRuntime {
                    live,
                    sessions: HashMap::new(),
                })),
            );
        }
        Ok(())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn campaign(&self, id: &str) -> Result<Arc<RwLock<CampaignRuntime>>, ApiError> {
        self.campaigns
            .read()
            .expect("campaign map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_campaign", format!("no campaign {id:?}")))
    }

    fn create(&self, def: CampaignDefinition) -> Result<Campaign, ApiError> {
        let campaign = create_campaign(def, self.config.bounds)?;
        let mut campaigns = self.campaigns.write().expect("campaign map lock");
        if campaigns.contains_key(campaign.id()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "campaign_exists",
                format!("campaign {:?} already exists", campaign.id()),
            ));
        }
        let data_dir = &self.config.data_dir;
        let path = campaigns_dir(data_dir).join(format!("{}.json", campaign.id()));
        std::fs::write(&path, campaign.to_json_pretty() + "\n").map_err(ApiError::internal)?;
        let live = LiveCampaign::open(campaign.clone(), &log_path(data_dir, campaign.id()))?;
        campaigns.insert(
            campaign.id().to_string(),
            Arc::new(RwLock::new(CampaignRuntime {
                live,
                sessions: HashMap::new(),
            })),
        );
        Ok(campaign)
    }
}

fn campaign_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outbound: Vec<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: code.to_string(),
                message: message.into(),
                outbound: Vec::new(),
            },
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        log::error!("internal error: {err}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", err.to_string())
    }
}

pub fn status_for(err: &CampaignError) -> (StatusCode, &'static str) {
    use CampaignError::*;
    match err {
        InvalidId(_) => (StatusCode::BAD_REQUEST, "invalid_id"),
        InvalidContour(_) | MissingContour => (StatusCode::BAD_REQUEST, "invalid_contour"),
        InvalidSchedule => (StatusCode::BAD_REQUEST, "invalid_schedule"),
        InvalidScoringConfig(_) => (StatusCode::BAD_REQUEST, "invalid_scoring_config"),
        InvalidCatchPhrase => (StatusCode::BAD_REQUEST, "invalid_catch_phrase"),
        InvalidBounds => (StatusCode::BAD_REQUEST, "invalid_bounds"),
        InvalidContact => (StatusCode::BAD_REQUEST, "invalid_contact"),
        InvalidAudio(_) => (StatusCode::BAD_REQUEST, "invalid_audio"),
        Scoring(_) => (StatusCode::BAD_REQUEST, "scoring_failed"),
        UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
        CampaignClosed(_) => (StatusCode::CONFLICT, "campaign_closed"),
        NotRegistered(_) => (StatusCode::CONFLICT, "not_registered"),
        RecordingRejected(_) => (StatusCode::UNPROCESSABLE_ENTITY, "recording_rejected"),
        TranscriptionUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable"),
        CorruptLog(_) | Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
    }
}

impl From<CampaignError> for ApiError {
    fn from(err: CampaignError) -> Self {
        let (status, code) = status_for(&err);
        if status.is_server_error() {
            log::error!("{err}");
        }
        Self::new(status, code, err.to_string())
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(err: AnalyticsError) -> Self {
        match err {
            AnalyticsError::InvalidShare(_) => Self::bad_request("invalid_share", err.to_string()),
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/contour", post(preview_contour))
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(show))
        .route("/campaigns/{id}/messages", post(message))
        .route("/campaigns/{id}/leaderboard", get(leaderboard))
        .route("/campaigns/{id}/users/{uid}/stats", get(user_stats))
        .route("/campaigns/{id}/reports/funnel", get(funnel))
        .route("/campaigns/{id}/reports/concentration", get(concentration))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES + 64 * 1024))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn create(State(state): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<Campaign>), ApiError> {
    let def: CampaignDefinition =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?;
    let campaign = blocking(move || state.create(def)).await?;
    Ok((StatusCode::CREATED, Json(campaign)))
}

async fn list(State(state): State<Shared>) -> Json<Vec<Campaign>> {
    let slots: Vec<_> = state.campaigns.read().expect("campaign map lock").values().cloned().collect();
    Json(
        slots
            .iter()
            .map(|s| s.read().expect("campaign lock").live.campaign().clone())
            .collect(),
    )
}

async fn show(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Campaign>, ApiError> {
    let slot = state.campaign(&id)?;
    let campaign = slot.read().expect("campaign lock").live.campaign().clone();
    Ok(Json(campaign))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MessageKind {
    Text,
    Audio,
}

/// Minimal webhook shape. Audio content is base64-encoded WAV.
#[derive(Debug, Deserialize)]
struct MessageBody {
    user_id: String,
    kind: MessageKind,
    content: String,
    #[serde(default)]
    at: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageResponse {
    pub outbound: Vec<String>,
    pub phase: DialogPhase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    pub attempt: Option<AttemptResult>,
}

struct ParsedMessage {
    user_id: String,
    inbound: InboundMessage,
    at: Option<DateTime<Utc>>,
}

fn parse_at(value: &str) -> Result<DateTime<Utc>, ApiError> {
    value
        .parse()
        .map_err(|_| ApiError::bad_request("invalid_timestamp", format!("not an RFC 3339 time: {value:?}")))
}

async fn parse_multipart(mut form: Multipart) -> Result<ParsedMessage, ApiError> {
    let bad = |e: axum::extract::multipart::MultipartError| {
        let code = if e.status() == StatusCode::PAYLOAD_TOO_LARGE { "too_large" } else { "invalid_multipart" };
        ApiError::new(e.status(), code, e.body_text())
    };
    let (mut user_id, mut audio, mut text, mut at) = (None, None, None, None);
    while let Some(field) = form.next_field().await.map_err(bad)? {
        match field.name().unwrap_or_default() {
            "user_id" => user_id = Some(field.text().await.map_err(bad)?),
            "text" => text = Some(field.text().await.map_err(bad)?),
            "at" => at = Some(parse_at(field.text().await.map_err(bad)?.trim())?),
            "audio" => {
                let bytes = field.bytes().await.map_err(bad)?;
                if bytes.len() > MAX_UPLOAD_BYTES {
                    return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", "upload exceeds 10 MiB"));
                }
                audio = Some(bytes.to_vec());
            }
            _ => {}
        }
    }
    let user_id = user_id.ok_or_else(|| ApiError::bad_request("missing_field", "user_id is required"))?;
    let inbound = match (audio, text) {
        (Some(bytes), None) => InboundMessage::Audio(bytes),
        (None, Some(t)) => InboundMessage::Text(t),
        _ => return Err(ApiError::bad_request("missing_field", "send exactly one of audio or text")),
    };
    Ok(ParsedMessage { user_id, inbound, at })
}

fn parse_json_message(body: &[u8]) -> Result<ParsedMessage, ApiError> {
    let msg: MessageBody =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?;
    let inbound = match msg.kind {
        MessageKind::Text => InboundMessage::Text(msg.content),
        MessageKind::Audio => InboundMessage::Audio(
            base64::engine::general_purpose::STANDARD
                .decode(msg.content.as_bytes())
                .map_err(|e| ApiError::bad_request("invalid_audio", format!("bad base64: {e}")))?,
        ),
    };
    Ok(ParsedMessage {
        user_id: msg.user_id,
        inbound,
        at: msg.at,
    })
}

async fn message(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    request: Request,
) -> Result<Json<MessageResponse>, ApiError> {
    let slot = state.campaign(&id)?;
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let parsed = if is_multipart {
        let form = Multipart::from_request(request, &())
            .await
            .map_err(|e| ApiError::bad_request("invalid_multipart", e.body_text()))?;
        parse_multipart(form).await?
    } else {
        let body = Bytes::from_request(request, &())
            .await
            .map_err(|e| ApiError::new(e.status(), "invalid_body", e.body_text()))?;
        parse_json_message(&body)?
    };
    if parsed.user_id.trim().is_empty() {
        return Err(ApiError::bad_request("missing_field", "user_id is required"));
    }
    let at = parsed.at.unwrap_or_else(Utc::now);
    blocking(move || {
        let mut guard = slot.write().expect("campaign lock");
        let CampaignRuntime { live, sessions } = &mut *guard;
        let session = sessions
            .entry(parsed.user_id.clone())
            .or_insert_with(|| DialogSession::resume(live, &parsed.user_id));
        let reply = state
            .dialog
            .handle_message(session, live, parsed.inbound, state.transcriber.as_ref(), at);
        if let Some(err) = reply.error {
            let mut api: ApiError = err.into();
            api.body.outbound = reply.outbound;
            return Err(api);
        }
        Ok(Json(MessageResponse {
            outbound: reply.outbound,
            phase: session.phase,
            intent: reply.intent,
            attempt: reply.attempt,
        }))
    })
    .await
}

fn parse_query<T: std::str::FromStr>(query: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    query
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request("invalid_query", format!("bad {key}: {v:?}")))
        })
        .transpose()
}

async fn leaderboard(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let top_k: Option<usize> = parse_query(&query, "top_k")?;
    let slot = state.campaign(&id)?;
    let board = slot.read().expect("campaign lock").live.leaderboard(top_k);
    Ok(Json(board).into_response())
}

async fn user_stats(
    State(state): State<Shared>,
    UrlPath((id, uid)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let slot = state.campaign(&id)?;
    let stats = slot.read().expect("campaign lock").live.user_stats(&uid)?;
    Ok(Json(stats).into_response())
}

async fn funnel(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let slot = state.campaign(&id)?;
    let report = analytics::funnel_report(slot.read().expect("campaign lock").live.events())?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConcentrationResponse {
    pub share: f64,
    /// `None` until the first scored recording.
    pub participant_fraction: Option<f64>,
    pub participant_pct: Option<f64>,
    pub curve: Vec<(f64, f64)>,
}

async fn concentration(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let share = parse_query(&query, "share")?.unwrap_or(0.8);
    let slot = state.campaign(&id)?;
    let guard = slot.read().expect("campaign lock");
    let events = guard.live.events();
    let (fraction, curve) = match analytics::concentration(events, share) {
        Ok(f) => (Some(f), ConcentrationCurve::from_log(events)?.points),
        Err(AnalyticsError::NoAttempts) => (None, Vec::new()),
        Err(e) => return Err(e.into()),
    };
    Ok(Json(ConcentrationResponse {
        share,
        participant_fraction: fraction,
        participant_pct: fraction.map(|f| analytics::round2(f * 100.0)),
        curve,
    })
    .into_response())
}

/// Contour preview for a PGM silhouette sent as the raw body.
async fn preview_contour(
    Query(query): Query<HashMap<String, String>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let threshold = parse_query(&query, "threshold")?.unwrap_or(DEFAULT_THRESHOLD);
    let contour = GrayscaleImage::from_pgm(&body)
        .and_then(|img| contour_from_silhouette(&img, ENVELOPE_BINS, threshold))
        .map_err(|e| ApiError::bad_request("invalid_contour", e.to_string()))?;
    Ok(Json(contour).into_response())
}
