//! HTTP clients for hosted transcription, embedding and response models.
//!
//! Wire formats:
//! - transcription: `POST <url>` with the WAV body, answer `{"transcript": "..."}`
//! - embedding: `POST <url>` with `{"text": "..."}`, answer `{"embedding": [..]}`
//! - response: `POST <url>` with `{"intent", "metadata", "persona"}`, answer `{"text": "..."}`
//!
//! Build these outside any async context; the blocking client owns a runtime.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use vocalize_core::conversation::{EmbeddingProvider, FeedbackMetadata, IntentName, ProviderError, ResponseProvider};
use vocalize_core::scoring::{AudioInput, TranscriptionError, TranscriptionProvider};

fn client(timeout: Duration) -> Client {
    Client::builder()
        .timeout(timeout)
        .build()
        .expect("HTTP client builds")
}

fn post<T: for<'de> Deserialize<'de>>(
    request: reqwest::blocking::RequestBuilder,
) -> Result<T, String> {
    let response = request.send().map_err(|e| e.to_string())?;
    let status = response.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    response.json::<T>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
pub struct HttpTranscriber {
    url: String,
    client: Client,
}

impl HttpTranscriber {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            client: client(timeout),
        }
    }
}

#[derive(Deserialize)]
struct TranscriptBody {
    transcript: String,
}

impl TranscriptionProvider for HttpTranscriber {
    fn id(&self) -> &str {
        &self.url
    }

    fn transcribe(&self, audio: AudioInput<'_>) -> Result<String, TranscriptionError> {
        let request = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "audio/wav")
            .body(audio.wav.to_vec());
        post::<TranscriptBody>(request)
            .map(|b| b.transcript)
            .map_err(TranscriptionError::Provider)
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    url: String,
    dimension: usize,
    client: Client,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            dimension,
            client: client(timeout),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedBody {
    embedding: Vec<f64>,
}

impl EmbeddingProvider for HttpEmbedder {
    fn id(&self) -> &str {
        &self.url
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let request = self.client.post(&self.url).json(&EmbedRequest { text });
        let body: EmbedBody = post(request).map_err(ProviderError)?;
        if body.embedding.len() != self.dimension {
            return Err(ProviderError(format!(
                "expected {} dimensions, got {}",
                self.dimension,
                body.embedding.len()
            )));
        }
        Ok(body.embedding)
    }
}

#[derive(Debug, Clone)]
pub struct HttpResponder {
    url: String,
    client: Client,
}

impl HttpResponder {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            client: client(timeout),
        }
    }
}

#[derive(Serialize)]
struct RenderRequest<'a> {
    intent: IntentName,
    metadata: &'a FeedbackMetadata,
    persona: &'a str,
}

#[derive(Deserialize)]
struct RenderBody {
    text: String,
}

impl ResponseProvider for HttpResponder {
    fn id(&self) -> &str {
        &self.url
    }

    fn render(
        &self,
        intent: IntentName,
        metadata: &FeedbackMetadata,
        persona: &str,
    ) -> Result<String, ProviderError> {
        let request = self.client.post(&self.url).json(&RenderRequest {
            intent,
            metadata,
            persona,
        });
        post::<RenderBody>(request)
            .map(|b| b.text)
            .map_err(ProviderError)
    }
}
