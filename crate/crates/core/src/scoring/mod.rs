//! Attempt scoring.
//!
//! Two independent scores land in `[0, 1]`:
//!
//! * the keyword score `1 - D / L`, where `D` is the character edit distance
//!   between the normalized transcript and catch phrase and `L` is the length
//!   of the longer of the two;
//! * the shape score, comparing the recording's bar envelope with the
//!   campaign contour (cosine similarity by default).
//!
//! A campaign enables one or both and [`combined_score`] takes their weighted
//! mean.

mod text;
pub mod transcription;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::EnvelopeVector;
use crate::contour::ContourVector;

pub use text::{levenshtein, normalize_text};
pub use transcription::{
    fingerprint, AudioInput, FixedTranscriber, FixtureTranscriber, TranscriptionError,
    TranscriptionProvider,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("vector has no positive value")]
    ZeroVector,
    #[error("vector contains a negative or non-finite value")]
    InvalidValue,
    #[error("scores do not match the enabled modules: {0}")]
    ConfigMismatch(&'static str),
    #[error("invalid scoring config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub value: f64,
    pub distance: usize,
    pub longer_len: usize,
    pub normalized_transcript: String,
    pub normalized_target: String,
}

/// Scores a transcript against the catch phrase after normalizing both.
///
/// Two empty strings are identical and score 1.0; `L` is 0 in that case.
pub fn keyword_score(transcript: &str, target: &str) -> KeywordScore {
    let normalized_transcript = normalize_text(transcript);
    let normalized_target = normalize_text(target);
    let distance = levenshtein(&normalized_transcript, &normalized_target);
    let longer_len = normalized_transcript
        .chars()
        .count()
        .max(normalized_target.chars().count());
    let value = if longer_len == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longer_len as f64
    };
    KeywordScore {
        value,
        distance,
        longer_len,
        normalized_transcript,
        normalized_target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeAlgorithm {
    #[default]
    Cosine,
    /// Peak-normalized mean absolute bin difference.
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeScore {
    pub value: f64,
    pub algorithm: ShapeAlgorithm,
}

fn check_pair(user: &[f64], target: &[f64]) -> Result<(), ScoringError> {
    if user.len() != target.len() {
        return Err(ScoringError::LengthMismatch {
            left: user.len(),
            right: target.len(),
        });
    }
    if user
        .iter()
        .chain(target)
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(ScoringError::InvalidValue);
    }
    Ok(())
}

/// Cosine similarity of two non-negative vectors; 0.0 when either is all zero.
pub fn cosine_similarity(user: &[f64], target: &[f64]) -> Result<f64, ScoringError> {
    check_pair(user, target)?;
    let dot: f64 = user.iter().zip(target).map(|(a, b)| a * b).sum();
    let norm_user = user.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_target = target.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm_user == 0.0 || norm_target == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (norm_user * norm_target)).clamp(0.0, 1.0))
}

/// `1 - mean |u_i/max(u) - v_i/max(v)|`.
pub fn profile_similarity(user: &[f64], target: &[f64]) -> Result<f64, ScoringError> {
    check_pair(user, target)?;
    if user.is_empty() {
        return Err(ScoringError::ZeroVector);
    }
    let peak_user = user.iter().copied().fold(0.0, f64::max);
    let peak_target = target.iter().copied().fold(0.0, f64::max);
    if peak_user == 0.0 || peak_target == 0.0 {
        return Err(ScoringError::ZeroVector);
    }
    let total: f64 = user
        .iter()
        .zip(target)
        .map(|(a, b)| (a / peak_user - b / peak_target).abs())
        .sum();
    Ok((1.0 - total / user.len() as f64).clamp(0.0, 1.0))
}

pub fn shape_score_cosine(
    user: &EnvelopeVector,
    target: &ContourVector,
) -> Result<ShapeScore, ScoringError> {
    Ok(ShapeScore {
        value: cosine_similarity(&user.bins, target.bins())?,
        algorithm: ShapeAlgorithm::Cosine,
    })
}

pub fn shape_score_profile(
    user: &EnvelopeVector,
    target: &ContourVector,
) -> Result<ShapeScore, ScoringError> {
    Ok(ShapeScore {
        value: profile_similarity(&user.bins, target.bins())?,
        algorithm: ShapeAlgorithm::Profile,
    })
}

/// Shape score with the configured algorithm. A silent recording scores 0.0
/// under either algorithm.
pub fn shape_score(
    user: &EnvelopeVector,
    target: &ContourVector,
    algorithm: ShapeAlgorithm,
) -> Result<ShapeScore, ScoringError> {
    match algorithm {
        ShapeAlgorithm::Cosine => shape_score_cosine(user, target),
        ShapeAlgorithm::Profile => match shape_score_profile(user, target) {
            Err(ScoringError::ZeroVector) if user.bins.iter().all(|&b| b == 0.0) => {
                Ok(ShapeScore {
                    value: 0.0,
                    algorithm,
                })
            }
            other => other,
        },
    }
}

fn default_weight() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    #[serde(default = "default_true")]
    pub keyword_enabled: bool,
    #[serde(default = "default_true")]
    pub shape_enabled: bool,
    #[serde(default = "default_weight")]
    pub keyword_weight: f64,
    #[serde(default = "default_weight")]
    pub shape_weight: f64,
    #[serde(default)]
    pub shape_algorithm: ShapeAlgorithm,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            keyword_enabled: true,
            shape_enabled: true,
            keyword_weight: default_weight(),
            shape_weight: default_weight(),
            shape_algorithm: ShapeAlgorithm::Cosine,
        }
    }
}

impl ScoringConfig {
    pub fn keyword_only() -> Self {
        Self {
            shape_enabled: false,
            ..Self::default()
        }
    }

    pub fn shape_only() -> Self {
        Self {
            keyword_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        if !self.keyword_enabled && !self.shape_enabled {
            return Err(ScoringError::InvalidConfig("no scoring module enabled"));
        }
        for w in [self.keyword_weight, self.shape_weight] {
            if !w.is_finite() || w < 0.0 {
                return Err(ScoringError::InvalidConfig("weights must be non-negative"));
            }
        }
        if self.enabled_weight_sum() <= 0.0 {
            return Err(ScoringError::InvalidConfig("enabled weights sum to zero"));
        }
        Ok(())
    }

    fn enabled_weight_sum(&self) -> f64 {
        let k = if self.keyword_enabled { self.keyword_weight } else { 0.0 };
        let s = if self.shape_enabled { self.shape_weight } else { 0.0 };
        k + s
    }
}

/// Weighted mean of the enabled module scores, weights renormalized to sum 1.
pub fn combined_score(
    keyword: Option<&KeywordScore>,
    shape: Option<&ShapeScore>,
    cfg: &ScoringConfig,
) -> Result<f64, ScoringError> {
    cfg.validate()?;
    if cfg.keyword_enabled != keyword.is_some() {
        return Err(ScoringError::ConfigMismatch(if cfg.keyword_enabled {
            "keyword score missing"
        } else {
            "keyword score given but module disabled"
        }));
    }
    if cfg.shape_enabled != shape.is_some() {
        return Err(ScoringError::ConfigMismatch(if cfg.shape_enabled {
            "shape score missing"
        } else {
            "shape score given but module disabled"
        }));
    }
    let value = match (keyword, shape) {
        (Some(k), None) => k.value,
        (None, Some(s)) => s.value,
        (Some(k), Some(s)) => {
            (cfg.keyword_weight * k.value + cfg.shape_weight * s.value) / cfg.enabled_weight_sum()
        }
        (None, None) => unreachable!("validated config enables a module"),
    };
    Ok(value.clamp(0.0, 1.0))
}
