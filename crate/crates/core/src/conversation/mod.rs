//! The chat side of a campaign: intent routing, feedback wording and the
//! onboarding dialog.
//!
//! Hosted embedding and language models plug in through
//! [`EmbeddingProvider`] and [`ResponseProvider`]; the trigram embedder and
//! template responder are deterministic stand-ins used whenever a provider
//! is absent or fails.

mod dialog;
mod embedding;
mod feedback;
mod intent;

use thiserror::Error;

pub use dialog::{Dialog, DialogPhase, DialogSession, InboundMessage, Reply};
pub use embedding::{cosine, EmbeddingProvider, TrigramEmbedder, TRIGRAM_DIMENSION};
pub use feedback::{
    format_score, render_feedback, FeedbackMetadata, ResponseProvider, TemplateResponder,
    DEFAULT_PERSONA,
};
pub use intent::{
    default_exemplars, Intent, IntentClassifier, IntentExemplars, IntentName,
    DEFAULT_INTENT_THRESHOLD,
};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("provider failure: {0}")]
pub struct ProviderError(pub String);
