//! Per-user chat flow: welcome and rules, name and email collection, then
//! free play where voice notes are scored and questions are answered.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::feedback::{render_feedback, FeedbackMetadata, ResponseProvider, DEFAULT_PERSONA};
use super::intent::{Intent, IntentClassifier, IntentName};
use crate::audio::RejectReason;
use crate::campaign::{AttemptResult, CampaignError, Contact, Inbound, LiveCampaign, UserStats};
use crate::scoring::TranscriptionProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogPhase {
    Greeting,
    RulesExplained,
    CollectingContact,
    Competing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub user_id: String,
    pub campaign_id: String,
    pub phase: DialogPhase,
    pub last_activity: Option<DateTime<Utc>>,
    pub pending_name: Option<String>,
}

impl DialogSession {
    /// Session for a user, picking up where the campaign log left them.
    pub fn resume(live: &LiveCampaign, user_id: &str) -> Self {
        let phase = match live.state().user(user_id) {
            None => DialogPhase::Greeting,
            Some(u) if u.registered_at.is_some() => DialogPhase::Competing,
            Some(_) => DialogPhase::RulesExplained,
        };
        Self {
            user_id: user_id.to_string(),
            campaign_id: live.campaign().id().to_string(),
            phase,
            last_activity: None,
            pending_name: None,
        }
    }

    fn advance(&mut self, next: DialogPhase) {
        if next > self.phase {
            self.phase = next;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InboundMessage {
    Text(String),
    Audio(Vec<u8>),
}

#[derive(Debug)]
pub struct Reply {
    pub outbound: Vec<String>,
    pub attempt: Option<AttemptResult>,
    pub intent: Option<Intent>,
    /// Set when the underlying campaign operation failed; the failure is
    /// already explained to the user in `outbound`.
    pub error: Option<CampaignError>,
}

/// Conversation settings and providers shared by every session of a campaign.
pub struct Dialog {
    pub classifier: Arc<IntentClassifier>,
    pub responder: Arc<dyn ResponseProvider>,
    pub persona: String,
    pub prizes: Option<String>,
}

impl std::fmt::Debug for Dialog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dialog")
            .field("classifier", &self.classifier)
            .field("responder", &self.responder.id())
            .finish()
    }
}

fn looks_like_email(text: &str) -> bool {
    let Some((local, domain)) = text.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !text.chars().any(char::is_whitespace)
}

fn apology(err: &CampaignError) -> String {
    match err {
        CampaignError::CampaignClosed(_) => {
            "Sorry, this competition isn't running right now.".into()
        }
        CampaignError::RecordingRejected(RejectReason::TooShort) => {
            "Oops, that recording is too short. Say the whole phrase and try again!".into()
        }
        CampaignError::RecordingRejected(RejectReason::TooLong) => {
            "Whoa, that recording is too long. Keep it short and punchy!".into()
        }
        CampaignError::InvalidAudio(_) => {
            "Sorry, I couldn't read that audio. Please send a WAV recording.".into()
        }
        CampaignError::TranscriptionUnavailable(_) => {
            "Sorry, I couldn't process your recording right now. It did not count as an \
             attempt, so please try again in a moment."
                .into()
        }
        CampaignError::NotRegistered(_) => {
            "You need to finish signing up before your recordings can be scored.".into()
        }
        _ => "Sorry, something went wrong on our side. Please try again.".into(),
    }
}

impl Dialog {
    pub fn offline(classifier: IntentClassifier) -> Self {
        Self {
            classifier: Arc::new(classifier),
            responder: Arc::new(super::TemplateResponder),
            persona: DEFAULT_PERSONA.to_string(),
            prizes: None,
        }
    }

    fn render(&self, intent: IntentName, metadata: &FeedbackMetadata) -> String {
        render_feedback(intent, metadata, self.responder.as_ref(), &self.persona)
    }

    fn stats_metadata(stats: &UserStats) -> FeedbackMetadata {
        FeedbackMetadata {
            best_score: stats.best_score,
            rank: stats.rank,
            attempts: Some(stats.attempt_count),
            gap_to_next: stats.gap_to_next,
            leaderboard_size: Some(stats.leaderboard_size),
            ..FeedbackMetadata::default()
        }
    }

    fn info_reply(&self, intent: IntentName, live: &LiveCampaign) -> String {
        let campaign = live.campaign();
        let metadata = match intent {
            IntentName::AskRules => FeedbackMetadata {
                catch_phrase: Some(campaign.catch_phrase().to_string()),
                ..FeedbackMetadata::default()
            },
            IntentName::AskPrizes => FeedbackMetadata {
                prizes: self.prizes.clone(),
                ..FeedbackMetadata::default()
            },
            IntentName::AskDeadline => FeedbackMetadata {
                deadline: Some(campaign.ends_at()),
                ..FeedbackMetadata::default()
            },
            _ => FeedbackMetadata::default(),
        };
        self.render(intent, &metadata)
    }

    fn welcome(&self, live: &LiveCampaign) -> Vec<String> {
        vec![
            format!(
                "Welcome to the voice challenge! {}",
                self.info_reply(IntentName::AskRules, live)
            ),
            self.info_reply(IntentName::AskPrizes, live),
            "To join, tell me your name.".to_string(),
        ]
    }

    /// Handles one inbound message and records the replies in the campaign log.
    pub fn handle_message(
        &self,
        session: &mut DialogSession,
        live: &mut LiveCampaign,
        inbound: InboundMessage,
        transcriber: &dyn TranscriptionProvider,
        at: DateTime<Utc>,
    ) -> Reply {
        let mut reply = Reply {
            outbound: Vec::new(),
            attempt: None,
            intent: None,
            error: None,
        };
        let logged = match &inbound {
            InboundMessage::Text(t) => Inbound::Text(t.clone()),
            InboundMessage::Audio(bytes) => Inbound::Audio {
                size_bytes: bytes.len() as u64,
            },
        };
        if let Err(err) = live.record_inbound(&session.user_id, &logged, at) {
            reply.outbound.push(apology(&err));
            reply.error = Some(err);
            return reply;
        }
        session.last_activity = Some(at);

        match (session.phase, inbound) {
            (DialogPhase::Greeting, _) => {
                reply.outbound = self.welcome(live);
                session.advance(DialogPhase::RulesExplained);
            }
            (DialogPhase::RulesExplained | DialogPhase::CollectingContact, InboundMessage::Audio(_)) => {
                reply.outbound.push(format!(
                    "{} {}",
                    apology(&CampaignError::NotRegistered(session.user_id.clone())),
                    self.contact_prompt(session)
                ));
            }
            (DialogPhase::RulesExplained, InboundMessage::Text(text)) => {
                if let Some(answer) = self.answer_question(&text, live, &mut reply) {
                    reply.outbound.push(answer);
                    reply.outbound.push(self.contact_prompt(session));
                } else {
                    let name: String = text.trim().chars().take(80).collect();
                    if name.is_empty() {
                        reply.outbound.push(self.contact_prompt(session));
                    } else {
                        reply.outbound.push(format!(
                            "Nice to meet you, {name}! What's your email address?"
                        ));
                        session.pending_name = Some(name);
                        session.advance(DialogPhase::CollectingContact);
                    }
                }
            }
            (DialogPhase::CollectingContact, InboundMessage::Text(text)) => {
                let candidate = text.trim();
                if looks_like_email(candidate) {
                    let contact = Contact {
                        name: session.pending_name.clone(),
                        email: Some(candidate.to_string()),
                        phone: None,
                    };
                    match live.register_user(&session.user_id, contact, at) {
                        Ok(_) => {
                            session.advance(DialogPhase::Competing);
                            reply.outbound.push(format!(
                                "You're in! Now send a voice note saying \"{}\" and shape your \
                                 voice to match the outline. Every attempt counts, and your best \
                                 one goes on the leaderboard.",
                                live.campaign().catch_phrase()
                            ));
                        }
                        Err(err) => {
                            reply.outbound.push(apology(&err));
                            reply.error = Some(err);
                        }
                    }
                } else if let Some(answer) = self.answer_question(&text, live, &mut reply) {
                    reply.outbound.push(answer);
                    reply.outbound.push(self.contact_prompt(session));
                } else {
                    reply.outbound.push(
                        "That doesn't look like an email address. Please send it like \
                         name@example.com."
                            .into(),
                    );
                }
            }
            (DialogPhase::Competing, InboundMessage::Audio(bytes)) => {
                match live.submit_attempt(&session.user_id, &bytes, at, transcriber) {
                    Ok(result) => {
                        let metadata = FeedbackMetadata {
                            score: Some(result.combined),
                            best_score: Some(result.best_score),
                            rank: Some(result.rank),
                            attempts: Some(result.attempt_count),
                            gap_to_next: result.gap_to_next,
                            leaderboard_size: Some(live.leaderboard(None).len() as u32),
                            ..FeedbackMetadata::default()
                        };
                        reply.outbound.push(self.render(IntentName::AskScore, &metadata));
                        reply.attempt = Some(result);
                    }
                    Err(err) => {
                        reply.outbound.push(apology(&err));
                        reply.error = Some(err);
                    }
                }
            }
            (DialogPhase::Competing, InboundMessage::Text(text)) => {
                let intent = self.classifier.classify(&text);
                reply.intent = Some(intent);
                let text = match intent.name {
                    IntentName::AskScore | IntentName::AskRank => {
                        match live.user_stats(&session.user_id) {
                            Ok(stats) => {
                                let mut metadata = Self::stats_metadata(&stats);
                                metadata.catch_phrase =
                                    Some(live.campaign().catch_phrase().to_string());
                                self.render(intent.name, &metadata)
                            }
                            Err(err) => apology(&err),
                        }
                    }
                    IntentName::Register => self.render(IntentName::Register, &FeedbackMetadata::default()),
                    other => self.info_reply(other, live),
                };
                reply.outbound.push(text);
            }
        }

        for text in &reply.outbound {
            if let Err(err) = live.record_outbound(&session.user_id, text, at) {
                log::error!("could not log outbound message: {err}");
            }
        }
        reply
    }

    fn contact_prompt(&self, session: &DialogSession) -> String {
        match session.phase {
            DialogPhase::CollectingContact => "What's your email address?".into(),
            _ => "To join, tell me your name.".into(),
        }
    }

    /// Answers rules, prize and deadline questions asked during sign-up.
    fn answer_question(&self, text: &str, live: &LiveCampaign, reply: &mut Reply) -> Option<String> {
        let intent = self.classifier.classify(text);
        match intent.name {
            IntentName::AskRules | IntentName::AskPrizes | IntentName::AskDeadline => {
                reply.intent = Some(intent);
                Some(self.info_reply(intent.name, live))
            }
            IntentName::AskScore | IntentName::AskRank => {
                reply.intent = Some(intent);
                Some("You'll get a score and a rank as soon as you've signed up and sent your first voice note.".into())
            }
            _ => None,
        }
    }
}
