//! Campaign state derived from the event log.
//!
//! Live operations and replay share [`CampaignState::apply`], so a state
//! rebuilt from a log is the state that produced it.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::events::{Contact, EngagementEvent, EventBody, ScoredAttempt};

/// Scored attempts needed before a participant counts as recurring.
pub const RECURRING_MIN_ATTEMPTS: u32 = 2;

pub fn is_recurring(attempt_count: u32) -> bool {
    attempt_count >= RECURRING_MIN_ATTEMPTS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunnelState {
    PotentialLead,
    Lead,
    Participant,
    RecurringParticipant,
}

impl FunnelState {
    pub fn derive(registered: bool, attempt_count: u32) -> Self {
        if !registered {
            FunnelState::PotentialLead
        } else if attempt_count == 0 {
            FunnelState::Lead
        } else if is_recurring(attempt_count) {
            FunnelState::RecurringParticipant
        } else {
            FunnelState::Participant
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FunnelState::PotentialLead => "potential_lead",
            FunnelState::Lead => "lead",
            FunnelState::Participant => "participant",
            FunnelState::RecurringParticipant => "recurring_participant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestAttempt {
    pub score: f64,
    pub at: DateTime<Utc>,
    pub attempt_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub funnel_state: FunnelState,
    pub contact: Option<Contact>,
    pub first_seen: DateTime<Utc>,
    pub registered_at: Option<DateTime<Utc>>,
    pub attempt_count: u32,
    pub best: Option<BestAttempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub user_id: String,
    pub submitted_at: DateTime<Utc>,
    #[serde(flatten)]
    pub scored: ScoredAttempt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: u32,
    pub user_id: String,
    pub best_score: f64,
    pub best_at: DateTime<Utc>,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub user_id: String,
    pub funnel_state: FunnelState,
    pub attempt_count: u32,
    pub best_score: Option<f64>,
    pub rank: Option<u32>,
    pub gap_to_next: Option<f64>,
    pub leaderboard_size: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("event seq {found} follows {previous}; expected {}", previous + 1)]
    SeqGap { previous: u64, found: u64 },
    #[error("event {seq} belongs to campaign {found:?}, log is for {expected:?}")]
    ForeignCampaign {
        seq: u64,
        expected: String,
        found: String,
    },
    #[error("event {seq}: {reason}")]
    InvalidPayload { seq: u64, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignState {
    campaign_id: Option<String>,
    last_seq: u64,
    users: BTreeMap<String, UserRecord>,
    attempts: Vec<Attempt>,
}

impl CampaignState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds state from a seq-ordered log.
    pub fn replay(events: &[EngagementEvent]) -> Result<Self, ReplayError> {
        let mut state = Self::new();
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.users.get(user_id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.values()
    }

    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    /// Checks that `event` may follow the current state without applying it.
    pub fn check(&self, event: &EngagementEvent) -> Result<(), ReplayError> {
        let seq = event.seq;
        if seq != self.last_seq + 1 {
            return Err(ReplayError::SeqGap {
                previous: self.last_seq,
                found: seq,
            });
        }
        if let Some(expected) = &self.campaign_id {
            if *expected != event.campaign_id {
                return Err(ReplayError::ForeignCampaign {
                    seq,
                    expected: expected.clone(),
                    found: event.campaign_id.clone(),
                });
            }
        }
        let invalid = |reason: &str| {
            Err(ReplayError::InvalidPayload {
                seq,
                reason: reason.to_string(),
            })
        };
        if event.user_id.is_empty() {
            return invalid("empty user_id");
        }
        let user = self.users.get(&event.user_id);
        match &event.body {
            EventBody::InboundText { .. } | EventBody::InboundAudio { .. } => {}
            EventBody::OutboundMessage { .. } => {
                if user.is_none() {
                    return invalid("outbound message to unknown user");
                }
            }
            EventBody::Registered { contact } => match user {
                None => return invalid("registration of unknown user"),
                Some(u) if u.registered_at.is_some() => return invalid("duplicate registration"),
                Some(_) if contact.is_empty() => return invalid("registration without contact"),
                Some(_) => {}
            },
            EventBody::AttemptScored(a) => {
                match user {
                    Some(u) if u.registered_at.is_some() => {}
                    _ => return invalid("attempt by unregistered user"),
                }
                if a.attempt_id.is_empty() {
                    return invalid("empty attempt_id");
                }
                if !(0.0..=1.0).contains(&a.combined) {
                    return invalid("combined score outside [0, 1]");
                }
                if !(a.duration_s.is_finite() && a.duration_s > 0.0) {
                    return invalid("non-positive duration");
                }
            }
        }
        Ok(())
    }

    /// Validates and applies one event.
    pub fn apply(&mut self, event: &EngagementEvent) -> Result<(), ReplayError> {
        self.check(event)?;
        self.last_seq = event.seq;
        self.campaign_id
            .get_or_insert_with(|| event.campaign_id.clone());
        let user = self
            .users
            .entry(event.user_id.clone())
            .or_insert_with(|| UserRecord {
                user_id: event.user_id.clone(),
                funnel_state: FunnelState::PotentialLead,
                contact: None,
                first_seen: event.at,
                registered_at: None,
                attempt_count: 0,
                best: None,
            });
        match &event.body {
            EventBody::InboundText { .. }
            | EventBody::InboundAudio { .. }
            | EventBody::OutboundMessage { .. } => {}
            EventBody::Registered { contact } => {
                user.contact = Some(contact.clone());
                user.registered_at = Some(event.at);
            }
            EventBody::AttemptScored(scored) => {
                user.attempt_count += 1;
                let improves = user.best.as_ref().is_none_or(|b| scored.combined > b.score);
                if improves {
                    user.best = Some(BestAttempt {
                        score: scored.combined,
                        at: event.at,
                        attempt_id: scored.attempt_id.clone(),
                    });
                }
                self.attempts.push(Attempt {
                    user_id: event.user_id.clone(),
                    submitted_at: event.at,
                    scored: scored.clone(),
                });
            }
        }
        let next = FunnelState::derive(user.registered_at.is_some(), user.attempt_count);
        debug_assert!(next >= user.funnel_state);
        user.funnel_state = next;
        Ok(())
    }

    /// Best attempt per user, best score first, then earlier achievement, then user id.
    pub fn leaderboard(&self, top_k: Option<usize>) -> Vec<LeaderboardEntry> {
        let mut ranked: Vec<(&UserRecord, &BestAttempt)> = self
            .users
            .values()
            .filter_map(|u| u.best.as_ref().map(|b| (u, b)))
            .collect();
        ranked.sort_by(|(ua, a), (ub, b)| {
            b.score
                .total_cmp(&a.score)
                .then(a.at.cmp(&b.at))
                .then(ua.user_id.cmp(&ub.user_id))
        });
        ranked
            .into_iter()
            .take(top_k.unwrap_or(usize::MAX))
            .enumerate()
            .map(|(i, (u, b))| LeaderboardEntry {
                rank: i as u32 + 1,
                user_id: u.user_id.clone(),
                best_score: b.score,
                best_at: b.at,
                attempt_count: u.attempt_count,
            })
            .collect()
    }

    pub fn user_stats(&self, user_id: &str) -> Option<UserStats> {
        let user = self.users.get(user_id)?;
        let board = self.leaderboard(None);
        let position = board.iter().position(|e| e.user_id == user_id);
        let gap_to_next = position
            .filter(|&i| i > 0)
            .map(|i| board[i - 1].best_score - board[i].best_score);
        Some(UserStats {
            user_id: user.user_id.clone(),
            funnel_state: user.funnel_state,
            attempt_count: user.attempt_count,
            best_score: user.best.as_ref().map(|b| b.score),
            rank: position.map(|i| i as u32 + 1),
            gap_to_next,
            leaderboard_size: board.len() as u32,
        })
    }
}
