//! Service settings from a flat `key = value` file plus `VOCALIZE_*`
//! environment overrides.
//!
//! ```text
//! # comment
//! listen = 127.0.0.1:8080
//! data_dir = ./data
//! transcription_url = http://localhost:9000/transcribe
//! ```
//!
//! `VOCALIZE_DATA_DIR=/srv/vocalize` overrides `data_dir`, and so on.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;
use vocalize_core::audio::RecordingBounds;
use vocalize_core::conversation::DEFAULT_INTENT_THRESHOLD;

pub const ENV_PREFIX: &str = "VOCALIZE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown setting {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value:?}")]
    InvalidValue { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Remote speech-to-text endpoint. Without it, transcripts come from
    /// `transcription_fixtures`.
    pub transcription_url: Option<String>,
    /// JSON map from WAV SHA-256 to transcript.
    pub transcription_fixtures: Option<PathBuf>,
    pub embedding_url: Option<String>,
    pub embedding_dimension: usize,
    pub response_url: Option<String>,
    pub provider_timeout: Duration,
    pub bounds: RecordingBounds,
    pub intent_threshold: f64,
    pub prizes: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            transcription_url: None,
            transcription_fixtures: None,
            embedding_url: None,
            embedding_dimension: 768,
            response_url: None,
            provider_timeout: Duration::from_secs(10),
            bounds: RecordingBounds::default(),
            intent_threshold: DEFAULT_INTENT_THRESHOLD,
            prizes: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

impl ServiceConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "listen" => self.listen = parse(key, value)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "transcription_url" => self.transcription_url = optional(value),
            "transcription_fixtures" => self.transcription_fixtures = optional(value).map(PathBuf::from),
            "embedding_url" => self.embedding_url = optional(value),
            "embedding_dimension" => self.embedding_dimension = parse(key, value)?,
            "response_url" => self.response_url = optional(value),
            "provider_timeout_ms" => {
                self.provider_timeout = Duration::from_millis(parse(key, value)?)
            }
            "min_recording_s" => self.bounds.min_s = parse(key, value)?,
            "max_recording_s" => self.bounds.max_s = parse(key, value)?,
            "intent_threshold" => self.intent_threshold = parse(key, value)?,
            "prizes" => self.prizes = optional(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        if !self.bounds.is_valid() {
            return Err(ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Applies every `VOCALIZE_<KEY>` variable; other variables are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            if let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) {
                if key == "LOG" {
                    continue;
                }
                self.set(&key.to_ascii_lowercase(), v.as_ref())?;
            }
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            cfg.apply_text(&text)?;
        }
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }
}
