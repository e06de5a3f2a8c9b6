//! Engagement events and their JSON-lines encoding.
//!
//! One event per line:
//! `{"seq":1,"at":"2024-07-17T09:00:00Z","campaign_id":"...","user_id":"...","kind":"inbound_text","payload":{"text":"hi"}}`

use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{KeywordScore, ShapeScore};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Contact {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone: Option<String>,
}

impl Contact {
    pub fn is_empty(&self) -> bool {
        [&self.name, &self.email, &self.phone]
            .iter()
            .all(|f| f.as_deref().is_none_or(|s| s.trim().is_empty()))
    }
}

/// Payload of an `attempt_scored` event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAttempt {
    pub attempt_id: String,
    pub duration_s: f64,
    pub combined: f64,
    #[serde(default)]
    pub keyword: Option<KeywordScore>,
    #[serde(default)]
    pub shape: Option<ShapeScore>,
    /// Absent only in synthetic logs rebuilt from published aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    InboundText { text: String },
    InboundAudio { size_bytes: u64 },
    Registered { contact: Contact },
    AttemptScored(ScoredAttempt),
    OutboundMessage { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    InboundText,
    InboundAudio,
    Registered,
    AttemptScored,
    OutboundMessage,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::InboundText { .. } => EventKind::InboundText,
            EventBody::InboundAudio { .. } => EventKind::InboundAudio,
            EventBody::Registered { .. } => EventKind::Registered,
            EventBody::AttemptScored(_) => EventKind::AttemptScored,
            EventBody::OutboundMessage { .. } => EventKind::OutboundMessage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub campaign_id: String,
    pub user_id: String,
    #[serde(flatten)]
    pub body: EventBody,
}

impl EngagementEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Error)]
pub enum LogReadError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a JSON-lines event log, skipping blank lines.
pub fn read_log(reader: impl BufRead) -> Result<Vec<EngagementEvent>, LogReadError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| LogReadError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn parse_log(text: &str) -> Result<Vec<EngagementEvent>, LogReadError> {
    read_log(text.as_bytes())
}

pub fn write_log(mut writer: impl Write, events: &[EngagementEvent]) -> std::io::Result<()> {
    for event in events {
        writeln!(writer, "{}", event.to_json_line())?;
    }
    writer.flush()
}
