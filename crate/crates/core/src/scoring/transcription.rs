//! Speech-to-text providers.
//!
//! Hosted recognizers live outside this crate; the offline providers here map
//! audio fingerprints (SHA-256 of the uploaded file) to fixed transcripts.

use std::collections::HashMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::MonoSignal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscriptionError {
    #[error("no transcript known for audio {0}")]
    UnknownAudio(String),
    #[error("transcription provider failed: {0}")]
    Provider(String),
}

/// The uploaded file and its decoded signal.
#[derive(Debug, Clone, Copy)]
pub struct AudioInput<'a> {
    pub wav: &'a [u8],
    pub signal: &'a MonoSignal,
}

pub trait TranscriptionProvider: Send + Sync {
    fn id(&self) -> &str;

    fn transcribe(&self, audio: AudioInput<'_>) -> Result<String, TranscriptionError>;
}

/// Hex SHA-256 of the raw audio bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Deterministic provider backed by a fingerprint → transcript table.
#[derive(Debug, Clone, Default)]
pub struct FixtureTranscriber {
    transcripts: HashMap<String, String>,
}

impl FixtureTranscriber {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a JSON object mapping fingerprints to transcripts.
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        Ok(Self {
            transcripts: serde_json::from_slice(bytes)?,
        })
    }

    pub fn insert(&mut self, wav: &[u8], transcript: impl Into<String>) {
        self.transcripts.insert(fingerprint(wav), transcript.into());
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }
}

impl TranscriptionProvider for FixtureTranscriber {
    fn id(&self) -> &str {
        "fixture"
    }

    fn transcribe(&self, audio: AudioInput<'_>) -> Result<String, TranscriptionError> {
        let key = fingerprint(audio.wav);
        self.transcripts
            .get(&key)
            .cloned()
            .ok_or(TranscriptionError::UnknownAudio(key))
    }
}

/// Returns the same transcript for every recording.
#[derive(Debug, Clone)]
pub struct FixedTranscriber(pub String);

impl TranscriptionProvider for FixedTranscriber {
    fn id(&self) -> &str {
        "fixed"
    }

    fn transcribe(&self, _audio: AudioInput<'_>) -> Result<String, TranscriptionError> {
        Ok(self.0.clone())
    }
}
