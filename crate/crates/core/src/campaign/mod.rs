//! Campaigns, the lead funnel, attempts and leaderboards.
//!
//! Every mutation is recorded as an [`EngagementEvent`] and applied through
//! the same [`CampaignState::apply`] that replay uses. A [`LiveCampaign`] owns
//! one campaign's state and log and is the single writer for it.

pub mod events;
mod state;

use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::Path;

use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{
    compute_envelope, decode_audio, validate_recording, AudioError, RecordingBounds,
    RecordingCheck, RejectReason, ENVELOPE_BINS,
};
use crate::contour::{contour_from_silhouette, ContourError, ContourVector, GrayscaleImage};
use crate::scoring::{
    combined_score, keyword_score, normalize_text, shape_score, AudioInput, ScoringConfig,
    ScoringError, TranscriptionProvider,
};

pub use events::{
    parse_log, read_log, write_log, Contact, EngagementEvent, EventBody, EventKind,
    LogReadError, ScoredAttempt,
};
pub use state::{
    is_recurring, Attempt, BestAttempt, CampaignState, FunnelState, LeaderboardEntry,
    ReplayError, UserRecord, UserStats, RECURRING_MIN_ATTEMPTS,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign id {0:?}")]
    InvalidId(String),
    #[error("invalid contour: {0}")]
    InvalidContour(#[from] ContourError),
    #[error("campaign needs exactly one of a contour or a silhouette")]
    MissingContour,
    #[error("invalid schedule: campaign must end after it starts")]
    InvalidSchedule,
    #[error("invalid scoring config: {0}")]
    InvalidScoringConfig(ScoringError),
    #[error("catch phrase is empty after normalization")]
    InvalidCatchPhrase,
    #[error("invalid recording bounds")]
    InvalidBounds,
    #[error("campaign {0} is not accepting messages at this time")]
    CampaignClosed(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("user {0} has not finished registration")]
    NotRegistered(String),
    #[error("contact details are empty")]
    InvalidContact,
    #[error("recording rejected: {0}")]
    RecordingRejected(RejectReason),
    #[error("could not read audio: {0}")]
    InvalidAudio(AudioError),
    #[error("transcription unavailable: {0}")]
    TranscriptionUnavailable(String),
    #[error("scoring failed: {0}")]
    Scoring(ScoringError),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("event log I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ReplayError> for CampaignError {
    fn from(err: ReplayError) -> Self {
        CampaignError::CorruptLog(err.to_string())
    }
}

impl From<LogReadError> for CampaignError {
    fn from(err: LogReadError) -> Self {
        match err {
            LogReadError::Io(e) => CampaignError::Io(e),
            other => CampaignError::CorruptLog(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourInput {
    pub bins: Vec<f64>,
    #[serde(default)]
    pub label: String,
}

fn default_threshold() -> u8 {
    crate::contour::DEFAULT_THRESHOLD
}

/// A silhouette image shipped inline as base64-encoded binary PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteInput {
    pub pgm_base64: String,
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default)]
    pub label: String,
}

/// What a brand submits to launch a campaign. A serialized [`Campaign`] is
/// also a valid definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignDefinition {
    #[serde(default)]
    pub id: Option<String>,
    pub catch_phrase: String,
    #[serde(default)]
    pub contour: Option<ContourInput>,
    #[serde(default)]
    pub silhouette: Option<SilhouetteInput>,
    #[serde(default)]
    pub scoring: ScoringConfig,
    pub starts_at: DateTime<Utc>,
    pub ends_at: DateTime<Utc>,
    #[serde(default)]
    pub min_s: Option<f64>,
    #[serde(default)]
    pub max_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Campaign {
    id: String,
    catch_phrase: String,
    contour: ContourVector,
    scoring: ScoringConfig,
    starts_at: DateTime<Utc>,
    ends_at: DateTime<Utc>,
    min_s: f64,
    max_s: f64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Validates a definition into a campaign.
pub fn create_campaign(
    def: CampaignDefinition,
    default_bounds: RecordingBounds,
) -> Result<Campaign, CampaignError> {
    let id = def
        .id
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    if !valid_id(&id) {
        return Err(CampaignError::InvalidId(id));
    }
    if normalize_text(&def.catch_phrase).is_empty() {
        return Err(CampaignError::InvalidCatchPhrase);
    }
    let contour = match (def.contour, def.silhouette) {
        (Some(c), None) => ContourVector::new(c.bins, c.label)?,
        (None, Some(s)) => {
            let pgm = base64::engine::general_purpose::STANDARD
                .decode(s.pgm_base64.as_bytes())
                .map_err(|e| ContourError::InvalidImage(format!("bad base64: {e}")))?;
            let image = GrayscaleImage::from_pgm(&pgm)?;
            contour_from_silhouette(&image, ENVELOPE_BINS, s.threshold)?.with_label(s.label)
        }
        _ => return Err(CampaignError::MissingContour),
    };
    def.scoring
        .validate()
        .map_err(CampaignError::InvalidScoringConfig)?;
    if def.starts_at >= def.ends_at {
        return Err(CampaignError::InvalidSchedule);
    }
    let bounds = RecordingBounds {
        min_s: def.min_s.unwrap_or(default_bounds.min_s),
        max_s: def.max_s.unwrap_or(default_bounds.max_s),
    };
    if !bounds.is_valid() {
        return Err(CampaignError::InvalidBounds);
    }
    Ok(Campaign {
        id,
        catch_phrase: def.catch_phrase,
        contour,
        scoring: def.scoring,
        starts_at: def.starts_at,
        ends_at: def.ends_at,
        min_s: bounds.min_s,
        max_s: bounds.max_s,
    })
}

impl Campaign {
    /// Parses a campaign or campaign definition JSON document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, CampaignError> {
        let def: CampaignDefinition = serde_json::from_slice(bytes)
            .map_err(|e| CampaignError::CorruptLog(format!("campaign JSON: {e}")))?;
        create_campaign(def, RecordingBounds::default())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign serializes")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn catch_phrase(&self) -> &str {
        &self.catch_phrase
    }

    pub fn contour(&self) -> &ContourVector {
        &self.contour
    }

    pub fn scoring(&self) -> &ScoringConfig {
        &self.scoring
    }

    pub fn starts_at(&self) -> DateTime<Utc> {
        self.starts_at
    }

    pub fn ends_at(&self) -> DateTime<Utc> {
        self.ends_at
    }

    pub fn bounds(&self) -> RecordingBounds {
        RecordingBounds {
            min_s: self.min_s,
            max_s: self.max_s,
        }
    }

    pub fn is_open_at(&self, at: DateTime<Utc>) -> bool {
        self.starts_at <= at && at <= self.ends_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    Text(String),
    Audio { size_bytes: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Registration {
    Registered(UserRecord),
    AlreadyRegistered(UserRecord),
}

impl Registration {
    pub fn record(&self) -> &UserRecord {
        match self {
            Registration::Registered(r) | Registration::AlreadyRegistered(r) => r,
        }
    }
}

/// What a participant learns after a scored recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub combined: f64,
    pub keyword: Option<f64>,
    pub shape: Option<f64>,
    pub transcript: Option<String>,
    pub rank: u32,
    pub attempt_count: u32,
    pub best_score: f64,
    pub gap_to_next: Option<f64>,
    pub duration_s: f64,
    pub envelope: Vec<f64>,
}

/// Single-writer handle on one campaign: state, full event history and an
/// optional append-only log file.
#[derive(Debug)]
pub struct LiveCampaign {
    campaign: Campaign,
    state: CampaignState,
    events: Vec<EngagementEvent>,
    log: Option<File>,
}

impl LiveCampaign {
    pub fn new(campaign: Campaign) -> Self {
        Self {
            campaign,
            state: CampaignState::new(),
            events: Vec::new(),
            log: None,
        }
    }

    /// Rebuilds a campaign from previously recorded events.
    pub fn resume(campaign: Campaign, events: Vec<EngagementEvent>) -> Result<Self, CampaignError> {
        if let Some(foreign) = events.iter().find(|e| e.campaign_id != campaign.id) {
            return Err(CampaignError::CorruptLog(format!(
                "event {} belongs to campaign {}",
                foreign.seq, foreign.campaign_id
            )));
        }
        let state = CampaignState::replay(&events)?;
        Ok(Self {
            campaign,
            state,
            events,
            log: None,
        })
    }

    /// Opens (or creates) the JSON-lines log at `path`, replays it, and
    /// appends all further events to it.
    pub fn open(campaign: Campaign, path: &Path) -> Result<Self, CampaignError> {
        let events = match File::open(path) {
            Ok(f) => read_log(BufReader::new(f))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut live = Self::resume(campaign, events)?;
        live.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(live)
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn events(&self) -> &[EngagementEvent] {
        &self.events
    }

    fn ensure_open(&self, at: DateTime<Utc>) -> Result<(), CampaignError> {
        if self.campaign.is_open_at(at) {
            Ok(())
        } else {
            Err(CampaignError::CampaignClosed(self.campaign.id.clone()))
        }
    }

    fn append(
        &mut self,
        user_id: &str,
        at: DateTime<Utc>,
        body: EventBody,
    ) -> Result<(), CampaignError> {
        let event = EngagementEvent {
            seq: self.state.last_seq() + 1,
            at,
            campaign_id: self.campaign.id.clone(),
            user_id: user_id.to_string(),
            body,
        };
        self.state.check(&event)?;
        if let Some(log) = self.log.as_mut() {
            writeln!(log, "{}", event.to_json_line())?;
            log.flush()?;
        }
        self.state.apply(&event)?;
        self.events.push(event);
        Ok(())
    }

    fn user_record(&self, user_id: &str) -> Result<UserRecord, CampaignError> {
        self.state
            .user(user_id)
            .cloned()
            .ok_or_else(|| CampaignError::UnknownUser(user_id.to_string()))
    }

    /// Logs an inbound message; a user's first message makes them a potential lead.
    pub fn record_inbound(
        &mut self,
        user_id: &str,
        inbound: &Inbound,
        at: DateTime<Utc>,
    ) -> Result<UserRecord, CampaignError> {
        self.ensure_open(at)?;
        let body = match inbound {
            Inbound::Text(text) => EventBody::InboundText { text: text.clone() },
            Inbound::Audio { size_bytes } => EventBody::InboundAudio {
                size_bytes: *size_bytes,
            },
        };
        self.append(user_id, at, body)?;
        self.user_record(user_id)
    }

    pub fn record_outbound(
        &mut self,
        user_id: &str,
        text: &str,
        at: DateTime<Utc>,
    ) -> Result<(), CampaignError> {
        self.user_record(user_id)?;
        self.append(
            user_id,
            at,
            EventBody::OutboundMessage {
                text: text.to_string(),
            },
        )
    }

    pub fn register_user(
        &mut self,
        user_id: &str,
        contact: Contact,
        at: DateTime<Utc>,
    ) -> Result<Registration, CampaignError> {
        let existing = self.user_record(user_id)?;
        if existing.registered_at.is_some() {
            return Ok(Registration::AlreadyRegistered(existing));
        }
        self.ensure_open(at)?;
        if contact.is_empty() {
            return Err(CampaignError::InvalidContact);
        }
        self.append(user_id, at, EventBody::Registered { contact })?;
        Ok(Registration::Registered(self.user_record(user_id)?))
    }

    /// Scores a recording and records it as an attempt.
    ///
    /// Nothing is recorded when the recording is rejected or transcription fails.
    pub fn submit_attempt(
        &mut self,
        user_id: &str,
        audio: &[u8],
        at: DateTime<Utc>,
        transcriber: &dyn TranscriptionProvider,
    ) -> Result<AttemptResult, CampaignError> {
        self.ensure_open(at)?;
        match self.state.user(user_id) {
            Some(u) if u.registered_at.is_some() => {}
            _ => return Err(CampaignError::NotRegistered(user_id.to_string())),
        }
        let signal = decode_audio(audio).map_err(CampaignError::InvalidAudio)?;
        if let RecordingCheck::Rejected(reason) = validate_recording(&signal, self.campaign.bounds()) {
            return Err(CampaignError::RecordingRejected(reason));
        }
        let envelope = compute_envelope(&signal, ENVELOPE_BINS).map_err(|e| match e {
            AudioError::TooShort { .. } => CampaignError::RecordingRejected(RejectReason::TooShort),
            other => CampaignError::InvalidAudio(other),
        })?;
        let cfg = *self.campaign.scoring();
        let keyword = if cfg.keyword_enabled {
            let transcript = transcriber
                .transcribe(AudioInput {
                    wav: audio,
                    signal: &signal,
                })
                .map_err(|e| CampaignError::TranscriptionUnavailable(e.to_string()))?;
            Some(keyword_score(&transcript, &self.campaign.catch_phrase))
        } else {
            None
        };
        let shape = if cfg.shape_enabled {
            Some(
                shape_score(&envelope, &self.campaign.contour, cfg.shape_algorithm)
                    .map_err(CampaignError::Scoring)?,
            )
        } else {
            None
        };
        let combined =
            combined_score(keyword.as_ref(), shape.as_ref(), &cfg).map_err(CampaignError::Scoring)?;

        let seq = self.state.last_seq() + 1;
        let scored = ScoredAttempt {
            attempt_id: format!("att-{seq:06}"),
            duration_s: signal.duration_s(),
            combined,
            keyword: keyword.clone(),
            shape,
            envelope: Some(envelope.bins.clone()),
        };
        self.append(user_id, at, EventBody::AttemptScored(scored))?;

        let stats = self
            .state
            .user_stats(user_id)
            .expect("user exists after attempt");
        Ok(AttemptResult {
            combined,
            keyword: keyword.as_ref().map(|k| k.value),
            shape: shape.map(|s| s.value),
            transcript: keyword.map(|k| k.normalized_transcript),
            rank: stats.rank.expect("scored user is ranked"),
            attempt_count: stats.attempt_count,
            best_score: stats.best_score.expect("scored user has a best"),
            gap_to_next: stats.gap_to_next,
            duration_s: signal.duration_s(),
            envelope: envelope.bins,
        })
    }

    pub fn leaderboard(&self, top_k: Option<usize>) -> Vec<LeaderboardEntry> {
        self.state.leaderboard(top_k)
    }

    pub fn user_stats(&self, user_id: &str) -> Result<UserStats, CampaignError> {
        self.state
            .user_stats(user_id)
            .ok_or_else(|| CampaignError::UnknownUser(user_id.to_string()))
    }

    /// Pushes the end of the campaign later. The schedule is otherwise fixed.
    pub fn extend_end(&mut self, new_end: DateTime<Utc>) -> Result<(), CampaignError> {
        if new_end <= self.campaign.ends_at {
            return Err(CampaignError::InvalidSchedule);
        }
        self.campaign.ends_at = new_end;
        Ok(())
    }
}

/// Scores one recording as the first attempt of a lone registered player,
/// at the campaign's opening time. Same engine path as a live submission.
pub fn score_once(
    campaign: &Campaign,
    audio: &[u8],
    transcriber: &dyn TranscriptionProvider,
) -> Result<AttemptResult, CampaignError> {
    const PLAYER: &str = "one-shot";
    let mut live = LiveCampaign::new(campaign.clone());
    let at = campaign.starts_at();
    live.record_inbound(PLAYER, &Inbound::Audio { size_bytes: audio.len() as u64 }, at)?;
    live.register_user(
        PLAYER,
        Contact {
            name: Some(PLAYER.into()),
            ..Contact::default()
        },
        at,
    )?;
    live.submit_attempt(PLAYER, audio, at, transcriber)
}
