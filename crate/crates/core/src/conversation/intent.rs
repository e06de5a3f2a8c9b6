//! Nearest-exemplar intent classification.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::embedding::{cosine, EmbeddingProvider, TrigramEmbedder};

pub const DEFAULT_INTENT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentName {
    AskScore,
    AskRank,
    AskRules,
    AskPrizes,
    AskDeadline,
    Register,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub name: IntentName,
    pub confidence: f64,
}

/// Exemplar phrases per intent, as read from `{"ask_score": ["..."], ...}`.
pub type IntentExemplars = BTreeMap<IntentName, Vec<String>>;

const DEFAULT_EXEMPLARS: &str = r#"{
  "ask_score": ["what is my score", "my score", "how did i do", "how many points do i have", "show me my best score", "what was my last score"],
  "ask_rank": ["what is my rank", "whats my position", "where am i on the leaderboard", "am i winning", "show the leaderboard", "what place am i in"],
  "ask_rules": ["what are the rules", "how do i play", "how does this work", "explain the game", "what do i have to do", "help"],
  "ask_prizes": ["what are the prizes", "what can i win", "is there a prize", "what do winners get", "prize"],
  "ask_deadline": ["when does the competition end", "what is the deadline", "how much time is left", "when is the contest over", "when are the winners announced"],
  "register": ["i want to join", "sign me up", "register", "i want to play", "let me participate", "count me in"]
}"#;

pub fn default_exemplars() -> IntentExemplars {
    serde_json::from_str(DEFAULT_EXEMPLARS).expect("bundled exemplars parse")
}

struct Exemplar {
    intent: IntentName,
    vector: Vec<f64>,
}

/// Classifies messages by cosine similarity to embedded exemplars.
///
/// Exemplars are embedded with both the configured provider and the trigram
/// fallback, so a provider outage at query time degrades to the fallback
/// instead of failing.
pub struct IntentClassifier {
    provider: Option<Arc<dyn EmbeddingProvider>>,
    provider_exemplars: Vec<Exemplar>,
    fallback_exemplars: Vec<Exemplar>,
    threshold: f64,
}

impl std::fmt::Debug for IntentClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntentClassifier")
            .field("provider", &self.provider.as_ref().map(|p| p.id().to_string()))
            .field("exemplars", &self.fallback_exemplars.len())
            .field("threshold", &self.threshold)
            .finish()
    }
}

fn embed_all(
    exemplars: &IntentExemplars,
    embed: impl Fn(&str) -> Option<Vec<f64>>,
) -> Option<Vec<Exemplar>> {
    let mut out = Vec::new();
    for (&intent, phrases) in exemplars {
        if intent == IntentName::Unknown {
            continue;
        }
        for phrase in phrases {
            out.push(Exemplar {
                intent,
                vector: embed(phrase)?,
            });
        }
    }
    Some(out)
}

impl IntentClassifier {
    /// Uses only the trigram embedder.
    pub fn offline(exemplars: &IntentExemplars, threshold: f64) -> Self {
        Self::new(exemplars, None, threshold)
    }

    pub fn new(
        exemplars: &IntentExemplars,
        provider: Option<Arc<dyn EmbeddingProvider>>,
        threshold: f64,
    ) -> Self {
        let fallback_exemplars = embed_all(exemplars, |p| Some(TrigramEmbedder::vector(p)))
            .expect("trigram embedding is infallible");
        // A provider that cannot embed the exemplars is unusable.
        let (provider, provider_exemplars) = match provider {
            Some(p) => {
                let dim = p.dimension();
                match embed_all(exemplars, |s| p.embed(s).ok().filter(|v| v.len() == dim)) {
                    Some(vectors) => (Some(p), vectors),
                    None => {
                        log::warn!("embedding provider {} failed on exemplars; using trigram fallback", p.id());
                        (None, Vec::new())
                    }
                }
            }
            None => (None, Vec::new()),
        };
        Self {
            provider,
            provider_exemplars,
            fallback_exemplars,
            threshold,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, message: &str) -> Intent {
        if let Some(provider) = &self.provider {
            match provider.embed(message) {
                Ok(v) if v.len() == provider.dimension() => {
                    return self.best(&v, &self.provider_exemplars)
                }
                Ok(_) => log::warn!("embedding provider {} returned wrong dimension", provider.id()),
                Err(e) => log::warn!("embedding provider {}: {e}", provider.id()),
            }
        }
        self.best(&TrigramEmbedder::vector(message), &self.fallback_exemplars)
    }

    fn best(&self, query: &[f64], exemplars: &[Exemplar]) -> Intent {
        let mut best = Intent {
            name: IntentName::Unknown,
            confidence: 0.0,
        };
        for exemplar in exemplars {
            let similarity = cosine(query, &exemplar.vector).clamp(0.0, 1.0);
            if similarity > best.confidence {
                best = Intent {
                    name: exemplar.intent,
                    confidence: similarity,
                };
            }
        }
        if best.confidence < self.threshold {
            best.name = IntentName::Unknown;
        }
        best
    }
}
