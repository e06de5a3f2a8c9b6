//! Turning campaign data into chat replies.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::intent::IntentName;
use super::ProviderError;

/// Tone instructions handed to generative response providers.
pub const DEFAULT_PERSONA: &str = "You are the host of a playful voice competition. \
Keep replies short, upbeat and fun. Cheer the player on, use their stats to \
suggest how to climb the leaderboard, and explain how to take part and win \
whenever they seem unsure.";

/// The facts a reply is built from. Absent fields are simply not mentioned.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_to_next: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaderboard_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catch_phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prizes: Option<String>,
}

/// Scores are always shown with two decimals.
pub fn format_score(value: f64) -> String {
    format!("{value:.2}")
}

fn format_deadline(at: &DateTime<Utc>) -> String {
    at.format("%Y-%m-%d %H:%M UTC").to_string()
}

impl FeedbackMetadata {
    /// Strings that must appear verbatim in any reply built from this record.
    pub fn required_tokens(&self) -> Vec<String> {
        let mut tokens = Vec::new();
        tokens.extend(self.score.map(format_score));
        tokens.extend(self.best_score.map(format_score));
        tokens.extend(self.rank.map(|r| r.to_string()));
        tokens.extend(self.attempts.map(|a| a.to_string()));
        tokens.extend(self.gap_to_next.map(format_score));
        tokens.extend(self.leaderboard_size.map(|n| n.to_string()));
        tokens.extend(self.deadline.as_ref().map(format_deadline));
        tokens
    }
}

pub trait ResponseProvider: Send + Sync {
    fn id(&self) -> &str;

    fn render(
        &self,
        intent: IntentName,
        metadata: &FeedbackMetadata,
        persona: &str,
    ) -> Result<String, ProviderError>;
}

/// Deterministic sentence templates.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateResponder;

impl TemplateResponder {
    pub fn render_text(intent: IntentName, m: &FeedbackMetadata) -> String {
        let mut parts: Vec<String> = Vec::new();
        let phrase = m.catch_phrase.as_deref().unwrap_or("the catch phrase");

        match intent {
            IntentName::AskScore | IntentName::AskRank => {}
            IntentName::AskRules => parts.push(format!(
                "Here's how it works: send a voice note saying \"{phrase}\" and try to make its \
                 waveform match the target outline. You're scored on the words and on the shape, \
                 and your best attempt is what counts."
            )),
            IntentName::AskPrizes => parts.push(
                m.prizes
                    .clone()
                    .unwrap_or_else(|| "The top of the leaderboard wins prizes when the competition closes.".into()),
            ),
            IntentName::AskDeadline => parts.push(match &m.deadline {
                Some(d) => format!("The competition closes at {}.", format_deadline(d)),
                None => "The competition is open right now.".into(),
            }),
            IntentName::Register => {
                parts.push("You're registered and ready to compete!".into())
            }
            IntentName::Unknown => parts.push(
                "Sorry, I didn't catch that. Ask me about your score, your rank, the rules, \
                 the prizes or the deadline, or just send a voice note!"
                    .into(),
            ),
        }

        if let Some(score) = m.score {
            parts.push(format!("You scored {}!", format_score(score)));
        }
        match (m.rank, m.leaderboard_size) {
            (Some(1), Some(n)) => parts.push(format!(
                "You're leading the pack at rank 1 of {n}. Amazing!"
            )),
            (Some(1), None) => parts.push("You're leading the pack at rank 1. Amazing!".into()),
            (Some(rank), Some(n)) => parts.push(format!("You're at rank {rank} of {n}.")),
            (Some(rank), None) => parts.push(format!("You're at rank {rank}.")),
            (None, Some(n)) => parts.push(format!("{n} players are on the leaderboard.")),
            (None, None) => {}
        }
        if let Some(gap) = m.gap_to_next {
            parts.push(format!(
                "Just {} more to climb a spot, keep going!",
                format_score(gap)
            ));
        }
        if let Some(best) = m.best_score {
            parts.push(format!("Your best so far is {}.", format_score(best)));
        } else if m.score.is_none() && matches!(intent, IntentName::AskScore | IntentName::AskRank) {
            parts.push(format!(
                "You haven't scored yet. Send a voice note saying \"{phrase}\" to get on the board!"
            ));
        }
        if let Some(attempts) = m.attempts {
            parts.push(format!("Attempts so far: {attempts}."));
        }
        if let Some(deadline) = m.deadline.as_ref().filter(|_| intent != IntentName::AskDeadline) {
            parts.push(format!("Closes {}.", format_deadline(deadline)));
        }
        parts.join(" ")
    }
}

impl ResponseProvider for TemplateResponder {
    fn id(&self) -> &str {
        "template"
    }

    fn render(
        &self,
        intent: IntentName,
        metadata: &FeedbackMetadata,
        _persona: &str,
    ) -> Result<String, ProviderError> {
        Ok(Self::render_text(intent, metadata))
    }
}

/// Renders a reply through `provider`, falling back to the templates when the
/// provider fails or drops any of the numbers the user must see.
pub fn render_feedback(
    intent: IntentName,
    metadata: &FeedbackMetadata,
    provider: &dyn ResponseProvider,
    persona: &str,
) -> String {
    match provider.render(intent, metadata, persona) {
        Ok(text) => {
            let missing = metadata
                .required_tokens()
                .into_iter()
                .find(|t| !text.contains(t.as_str()));
            match missing {
                None if !text.trim().is_empty() => return text,
                None => log::warn!("response provider {} returned empty text", provider.id()),
                Some(token) => log::warn!(
                    "response provider {} omitted {token:?}; using template",
                    provider.id()
                ),
            }
        }
        Err(e) => log::warn!("response provider {}: {e}", provider.id()),
    }
    TemplateResponder::render_text(intent, metadata)
}
