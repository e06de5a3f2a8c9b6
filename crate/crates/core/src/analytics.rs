//! Engagement reports computed straight from a campaign's event log.
//!
//! Funnel percentages are relative to the number of potential leads (users
//! who sent anything at all) and rounded to two decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{is_recurring, CampaignState, EngagementEvent, EventBody, FunnelState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("log contains no inbound messages")]
    NoMessages,
    #[error("log contains no scored attempts")]
    NoAttempts,
    #[error("message share must lie in (0, 1], got {0}")]
    InvalidShare(f64),
}

pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round2(part as f64 * 100.0 / whole as f64)
    }
}

fn check_sequence(events: &[EngagementEvent]) -> Result<(), AnalyticsError> {
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            return Err(AnalyticsError::CorruptLog(format!(
                "expected seq {}, found {}",
                i + 1,
                e.seq
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub potential_leads: u64,
    pub leads: u64,
    pub participants: u64,
    pub recurring_participants: u64,
}

impl FunnelCounts {
    /// Counts from reconstructed user records.
    pub fn from_state(state: &CampaignState) -> Self {
        let mut counts = Self::default();
        for user in state.users() {
            counts.potential_leads += 1;
            counts.leads += u64::from(user.funnel_state >= FunnelState::Lead);
            counts.participants += u64::from(user.funnel_state >= FunnelState::Participant);
            counts.recurring_participants +=
                u64::from(user.funnel_state >= FunnelState::RecurringParticipant);
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub potential_leads: u64,
    pub leads: u64,
    pub participants: u64,
    pub recurring_participants: u64,
    pub leads_pct: f64,
    pub participants_pct: f64,
    pub recurring_pct: f64,
    pub text_messages: u64,
    pub audio_messages: u64,
    pub text_share: f64,
    pub audio_share: f64,
}

impl FunnelReport {
    pub fn from_counts(counts: FunnelCounts, text_messages: u64, audio_messages: u64) -> Self {
        let base = counts.potential_leads;
        let inbound = text_messages + audio_messages;
        Self {
            potential_leads: base,
            leads: counts.leads,
            participants: counts.participants,
            recurring_participants: counts.recurring_participants,
            leads_pct: percent(counts.leads, base),
            participants_pct: percent(counts.participants, base),
            recurring_pct: percent(counts.recurring_participants, base),
            text_messages,
            audio_messages,
            text_share: percent(text_messages, inbound),
            audio_share: percent(audio_messages, inbound),
        }
    }
}

#[derive(Default)]
struct UserTally {
    registered: bool,
    attempts: u32,
}

/// Funnel counts and message mix, read directly from the events.
pub fn funnel_report(events: &[EngagementEvent]) -> Result<FunnelReport, AnalyticsError> {
    check_sequence(events)?;
    let mut users: BTreeMap<&str, UserTally> = BTreeMap::new();
    let (mut text, mut audio) = (0u64, 0u64);
    for e in events {
        match &e.body {
            EventBody::InboundText { .. } => {
                text += 1;
                users.entry(&e.user_id).or_default();
            }
            EventBody::InboundAudio { .. } => {
                audio += 1;
                users.entry(&e.user_id).or_default();
            }
            EventBody::Registered { .. } => {
                users
                    .get_mut(e.user_id.as_str())
                    .ok_or_else(|| corrupt(e, "registration before first message"))?
                    .registered = true;
            }
            EventBody::AttemptScored(_) => {
                let tally = users
                    .get_mut(e.user_id.as_str())
                    .ok_or_else(|| corrupt(e, "attempt before first message"))?;
                if !tally.registered {
                    return Err(corrupt(e, "attempt by unregistered user"));
                }
                tally.attempts += 1;
            }
            EventBody::OutboundMessage { .. } => {}
        }
    }
    let mut counts = FunnelCounts::default();
    for tally in users.values() {
        counts.potential_leads += 1;
        if tally.registered {
            counts.leads += 1;
            counts.participants += u64::from(tally.attempts >= 1);
            counts.recurring_participants += u64::from(is_recurring(tally.attempts));
        }
    }
    Ok(FunnelReport::from_counts(counts, text, audio))
}

fn corrupt(e: &EngagementEvent, what: &str) -> AnalyticsError {
    AnalyticsError::CorruptLog(format!("event {}: {what}", e.seq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageMix {
    pub text_messages: u64,
    pub audio_messages: u64,
    pub text_share: f64,
    pub audio_share: f64,
}

/// Shares of inbound text and voice messages, in percent.
pub fn message_mix(events: &[EngagementEvent]) -> Result<MessageMix, AnalyticsError> {
    check_sequence(events)?;
    let text = events
        .iter()
        .filter(|e| matches!(e.body, EventBody::InboundText { .. }))
        .count() as u64;
    let audio = events
        .iter()
        .filter(|e| matches!(e.body, EventBody::InboundAudio { .. }))
        .count() as u64;
    if text + audio == 0 {
        return Err(AnalyticsError::NoMessages);
    }
    Ok(MessageMix {
        text_messages: text,
        audio_messages: audio,
        text_share: percent(text, text + audio),
        audio_share: percent(audio, text + audio),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub count: u64,
    pub total_s: f64,
    /// Lower-middle element for even counts.
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

fn scored_attempts(events: &[EngagementEvent]) -> impl Iterator<Item = (&EngagementEvent, f64)> {
    events.iter().filter_map(|e| match &e.body {
        EventBody::AttemptScored(a) => Some((e, a.duration_s)),
        _ => None,
    })
}

pub fn duration_stats(events: &[EngagementEvent]) -> Result<DurationStats, AnalyticsError> {
    check_sequence(events)?;
    let mut durations: Vec<f64> = scored_attempts(events).map(|(_, d)| d).collect();
    if durations.is_empty() {
        return Err(AnalyticsError::NoAttempts);
    }
    durations.sort_by(f64::total_cmp);
    let total_s = durations.iter().sum();
    Ok(DurationStats {
        count: durations.len() as u64,
        total_s,
        median_s: durations[(durations.len() - 1) / 2],
        min_s: durations[0],
        max_s: durations[durations.len() - 1],
    })
}

/// Scored recordings per participant, heaviest first, ties by user id.
pub fn recording_counts(events: &[EngagementEvent]) -> Vec<(String, u64)> {
    let mut per_user: BTreeMap<&str, u64> = BTreeMap::new();
    for (e, _) in scored_attempts(events) {
        *per_user.entry(&e.user_id).or_default() += 1;
    }
    let mut counts: Vec<(String, u64)> = per_user
        .into_iter()
        .map(|(u, c)| (u.to_string(), c))
        .collect();
    counts.sort_by(|(ua, a), (ub, b)| b.cmp(a).then(ua.cmp(ub)));
    counts
}

/// Smallest fraction `k/n` of participants whose recordings reach `share` of
/// all recordings. `counts` must be sorted heaviest first.
pub fn concentration_from_counts(counts: &[u64], share: f64) -> Result<f64, AnalyticsError> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(AnalyticsError::InvalidShare(share));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AnalyticsError::NoAttempts);
    }
    let target = share * total as f64;
    let slack = 1e-9 * total as f64;
    let mut cumulative = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        cumulative += c;
        if cumulative as f64 + slack >= target {
            return Ok((i + 1) as f64 / counts.len() as f64);
        }
    }
    Ok(1.0)
}

pub fn concentration(events: &[EngagementEvent], share: f64) -> Result<f64, AnalyticsError> {
    check_sequence(events)?;
    let counts: Vec<u64> = recording_counts(events).into_iter().map(|(_, c)| c).collect();
    concentration_from_counts(&counts, share)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCurve {
    /// `(participant_fraction, message_fraction)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
}

impl ConcentrationCurve {
    pub fn from_counts(counts: &[u64]) -> Result<Self, AnalyticsError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(AnalyticsError::NoAttempts);
        }
        let n = counts.len();
        let mut points = Vec::with_capacity(n + 1);
        points.push((0.0, 0.0));
        let mut cumulative = 0u64;
        for (i, &c) in counts.iter().enumerate() {
            cumulative += c;
            points.push(((i + 1) as f64 / n as f64, cumulative as f64 / total as f64));
        }
        Ok(Self { points })
    }

    pub fn from_log(events: &[EngagementEvent]) -> Result<Self, AnalyticsError> {
        check_sequence(events)?;
        let counts: Vec<u64> = recording_counts(events).into_iter().map(|(_, c)| c).collect();
        Self::from_counts(&counts)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("participant_fraction,message_fraction\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }
}

/// Everything the replay command and report endpoints expose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub funnel: FunnelReport,
    pub durations: Option<DurationStats>,
    /// Participant fraction holding 80% of recordings, in percent.
    pub top_share_80_pct: Option<f64>,
}

pub fn engagement_report(events: &[EngagementEvent]) -> Result<EngagementReport, AnalyticsError> {
    let funnel = funnel_report(events)?;
    let durations = match duration_stats(events) {
        Ok(d) => Some(d),
        Err(AnalyticsError::NoAttempts) => None,
        Err(e) => return Err(e),
    };
    let top_share_80_pct = match concentration(events, 0.8) {
        Ok(f) => Some(round2(f * 100.0)),
        Err(AnalyticsError::NoAttempts) => None,
        Err(e) => return Err(e),
    };
    Ok(EngagementReport {
        funnel,
        durations,
        top_share_80_pct,
    })
}

impl EngagementReport {
    /// One `metric,value` row per figure.
    pub fn to_csv(&self) -> String {
        let f = &self.funnel;
        let mut rows: Vec<(&str, String)> = vec![
            ("potential_leads", f.potential_leads.to_string()),
            ("leads", f.leads.to_string()),
            ("participants", f.participants.to_string()),
            ("recurring_participants", f.recurring_participants.to_string()),
            ("leads_pct", format!("{:.2}", f.leads_pct)),
            ("participants_pct", format!("{:.2}", f.participants_pct)),
            ("recurring_pct", format!("{:.2}", f.recurring_pct)),
            ("text_messages", f.text_messages.to_string()),
            ("audio_messages", f.audio_messages.to_string()),
            ("text_share", format!("{:.2}", f.text_share)),
            ("audio_share", format!("{:.2}", f.audio_share)),
        ];
        if let Some(d) = &self.durations {
            rows.push(("recordings", d.count.to_string()));
            rows.push(("total_duration_s", format!("{:.2}", d.total_s)));
            rows.push(("median_duration_s", format!("{:.2}", d.median_s)));
            rows.push(("min_duration_s", format!("{:.2}", d.min_s)));
            rows.push(("max_duration_s", format!("{:.2}", d.max_s)));
        }
        if let Some(c) = self.top_share_80_pct {
            rows.push(("top_share_80_pct", format!("{c:.2}")));
        }
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}
