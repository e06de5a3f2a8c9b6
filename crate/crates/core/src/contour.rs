//! Campaign target contours.
//!
//! A contour is the bar profile a recording should imitate. It is either
//! authored directly as JSON or extracted from a silhouette image, where each
//! column's height is measured from the bottom edge to its topmost dark pixel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{segment_bounds, ENVELOPE_BINS};

pub const DEFAULT_THRESHOLD: u8 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("contour must have {expected} bins, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("contour bin {index} is negative")]
    NegativeBin { index: usize },
    #[error("contour bin {index} is not a finite number")]
    NonFinite { index: usize },
    #[error("contour has no positive bin")]
    AllZero,
    #[error("invalid contour JSON: {0}")]
    Json(String),
    #[error("invalid PGM image: {0}")]
    InvalidImage(String),
    #[error("silhouette has no foreground pixels")]
    EmptySilhouette,
    #[error("image width {width} is narrower than {bins} bins")]
    TooNarrow { width: usize, bins: usize },
    #[error("bin count must be positive")]
    InvalidBinCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourVector {
    bins: Vec<f64>,
    #[serde(default)]
    label: String,
}

#[derive(Deserialize)]
struct RawContour {
    bins: Vec<f64>,
    #[serde(default)]
    label: String,
}

impl<'de> Deserialize<'de> for ContourVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawContour::deserialize(deserializer)?;
        ContourVector::new(raw.bins, raw.label).map_err(serde::de::Error::custom)
    }
}

impl ContourVector {
    /// Validates a 40-bin contour.
    pub fn new(bins: Vec<f64>, label: impl Into<String>) -> Result<Self, ContourError> {
        if bins.len() != ENVELOPE_BINS {
            return Err(ContourError::WrongLength {
                expected: ENVELOPE_BINS,
                found: bins.len(),
            });
        }
        Self::checked(bins, label.into())
    }

    fn checked(bins: Vec<f64>, label: String) -> Result<Self, ContourError> {
        for (index, &b) in bins.iter().enumerate() {
            if !b.is_finite() {
                return Err(ContourError::NonFinite { index });
            }
            if b < 0.0 {
                return Err(ContourError::NegativeBin { index });
            }
        }
        if bins.iter().all(|&b| b == 0.0) {
            return Err(ContourError::AllZero);
        }
        Ok(Self { bins, label })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("contour serializes")
    }
}

/// Parses and validates contour JSON (`{"bins": [...], "label": "..."}`).
pub fn load_contour(bytes: &[u8]) -> Result<ContourVector, ContourError> {
    let raw: RawContour =
        serde_json::from_slice(bytes).map_err(|e| ContourError::Json(e.to_string()))?;
    ContourVector::new(raw.bins, raw.label)
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayscaleImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ContourError> {
        if width == 0 || height == 0 {
            return Err(ContourError::InvalidImage("image is empty".into()));
        }
        if pixels.len() != width * height {
            return Err(ContourError::InvalidImage(format!(
                "expected {} pixels, found {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self, ContourError> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Parses a binary PGM (`P5`, maxval 255).
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ContourError> {
        let mut cursor = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // Skip whitespace and comments between header tokens.
            loop {
                match bytes.get(cursor) {
                    Some(b) if b.is_ascii_whitespace() => cursor += 1,
                    Some(b'#') => {
                        while bytes.get(cursor).is_some_and(|&b| b != b'\n') {
                            cursor += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = cursor;
            while bytes
                .get(cursor)
                .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
            {
                cursor += 1;
            }
            if start == cursor {
                return Err(ContourError::InvalidImage("truncated header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(ContourError::InvalidImage(format!(
                "magic {:?} is not P5",
                fields[0]
            )));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| ContourError::InvalidImage(format!("bad {what} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval != 255 {
            return Err(ContourError::InvalidImage(format!(
                "maxval {maxval} is not 255"
            )));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if !bytes.get(cursor).is_some_and(|b| b.is_ascii_whitespace()) {
            return Err(ContourError::InvalidImage("missing raster separator".into()));
        }
        cursor += 1;
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| ContourError::InvalidImage("dimensions overflow".into()))?;
        let raster = &bytes[cursor..];
        if raster.len() < expected {
            return Err(ContourError::InvalidImage(format!(
                "raster has {} bytes, expected {expected}",
                raster.len()
            )));
        }
        Self::new(width, height, raster[..expected].to_vec())
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Height of the silhouette in column `x`: distance from the bottom edge to
    /// the topmost pixel darker than `threshold`, or 0 for an empty column.
    pub fn column_height(&self, x: usize, threshold: u8) -> usize {
        (0..self.height)
            .find(|&y| self.pixel(x, y) < threshold)
            .map_or(0, |top| self.height - top)
    }
}

/// Extracts an `n_bins` contour from a dark-on-light silhouette.
pub fn contour_from_silhouette(
    image: &GrayscaleImage,
    n_bins: usize,
    threshold: u8,
) -> Result<ContourVector, ContourError> {
    if n_bins == 0 {
        return Err(ContourError::InvalidBinCount);
    }
    if image.width < n_bins {
        return Err(ContourError::TooNarrow {
            width: image.width,
            bins: n_bins,
        });
    }
    let heights: Vec<usize> = (0..image.width)
        .map(|x| image.column_height(x, threshold))
        .collect();
    if heights.iter().all(|&h| h == 0) {
        return Err(ContourError::EmptySilhouette);
    }
    let bins = (0..n_bins)
        .map(|k| {
            let (start, end) = segment_bounds(image.width, n_bins, k);
            let total: usize = heights[start..end].iter().sum();
            total as f64 / (end - start) as f64
        })
        .collect();
    ContourVector::checked(bins, String::new())
}
