//! Sentence embeddings for intent matching.

use super::ProviderError;
use crate::scoring::normalize_text;

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Every vector a provider returns has this many components.
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

pub const TRIGRAM_DIMENSION: usize = 256;

/// Offline embedding: hashed character-trigram counts, L2-normalized.
///
/// Text is normalized and padded with one space on each side, so word
/// boundaries contribute trigrams too.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl TrigramEmbedder {
    pub fn trigrams(text: &str) -> Vec<String> {
        let normalized = normalize_text(text);
        if normalized.is_empty() {
            return Vec::new();
        }
        let padded: Vec<char> = format!(" {normalized} ").chars().collect();
        padded.windows(3).map(|w| w.iter().collect()).collect()
    }

    pub fn bucket(trigram: &str) -> usize {
        (fnv1a(trigram.as_bytes()) % TRIGRAM_DIMENSION as u64) as usize
    }

    pub fn vector(text: &str) -> Vec<f64> {
        let mut counts = vec![0.0; TRIGRAM_DIMENSION];
        for trigram in Self::trigrams(text) {
            counts[Self::bucket(&trigram)] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.iter_mut().for_each(|c| *c /= norm);
        }
        counts
    }
}

impl EmbeddingProvider for TrigramEmbedder {
    fn id(&self) -> &str {
        "trigram-hash"
    }

    fn dimension(&self) -> usize {
        TRIGRAM_DIMENSION
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(Self::vector(text))
    }
}

/// Cosine similarity; 0.0 if either vector is zero or the lengths differ.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
