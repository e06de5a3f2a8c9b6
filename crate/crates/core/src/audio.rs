//! WAV decoding and the RMS bar envelope of a voice recording.
//!
//! A recording is reduced to the same coarse shape a messaging app shows
//! for a voice note: a fixed number of vertical bars, one per equal slice
//! of the recording. Each bar is the root mean square of its slice.

use std::io::Cursor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of bars in a voice-note waveform.
pub const ENVELOPE_BINS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no frames")]
    EmptyAudio,
    #[error("signal has {samples} samples, fewer than the {bins} bins requested")]
    TooShort { samples: usize, bins: usize },
    #[error("bin count must be positive")]
    InvalidBinCount,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
}

/// A mono PCM signal with samples normalized to `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl MonoSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`, which must keep samples in range.
    pub fn scaled(&self, gain: f64) -> Result<Self, AudioError> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}

/// Decodes a RIFF/WAVE file with an integer PCM payload into a mono signal.
///
/// Accepts 8, 16 or 24-bit samples in one or two channels. Stereo frames are
/// downmixed by averaging the two channels, and integer samples are divided
/// by `2^(bits-1)`.
pub fn decode_audio(bytes: &[u8]) -> Result<MonoSignal, AudioError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound_error)?;
    let spec = reader.spec();

    if spec.sample_format != hound::SampleFormat::Int {
        return Err(AudioError::UnsupportedEncoding(
            "floating-point samples".to_string(),
        ));
    }
    if !matches!(spec.bits_per_sample, 8 | 16 | 24) {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{}-bit samples",
            spec.bits_per_sample
        )));
    }
    if !matches!(spec.channels, 1 | 2) {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels",
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::MalformedContainer("zero sample rate".into()));
    }

    let divisor = f64::from(1u32 << (spec.bits_per_sample - 1));
    let raw = reader
        .into_samples::<i32>()
        .map(|s| s.map(|v| f64::from(v) / divisor))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(map_hound_error)?;

    let samples: Vec<f64> = match spec.channels {
        1 => raw,
        _ => {
            if raw.len() % 2 != 0 {
                return Err(AudioError::MalformedContainer(
                    "stereo payload ends mid-frame".into(),
                ));
            }
            raw.chunks_exact(2).map(|f| (f[0] + f[1]) / 2.0).collect()
        }
    };
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    MonoSignal::new(samples, spec.sample_rate)
}

fn map_hound_error(err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("non-PCM format tag".to_string())
        }
        other => AudioError::MalformedContainer(other.to_string()),
    }
}

/// Encodes a signal as 16-bit mono PCM WAV.
pub fn encode_wav16(signal: &MonoSignal) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        // Writing into memory cannot fail for a valid spec.
        let mut writer = hound::WavWriter::new(&mut cursor, spec).expect("valid wav spec");
        for &s in &signal.samples {
            let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(q).expect("in-memory write");
        }
        writer.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

/// The bar envelope of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeVector {
    pub bins: Vec<f64>,
    #[serde(rename = "duration_s")]
    pub source_duration_s: f64,
}

impl EnvelopeVector {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Half-open index range `[floor(k*len/parts), floor((k+1)*len/parts))` of part `k`.
pub fn segment_bounds(len: usize, parts: usize, k: usize) -> (usize, usize) {
    let start = (k as u128 * len as u128 / parts as u128) as usize;
    let end = ((k as u128 + 1) * len as u128 / parts as u128) as usize;
    (start, end)
}

/// Splits the signal into `n_bins` contiguous segments and takes the RMS of each.
pub fn compute_envelope(signal: &MonoSignal, n_bins: usize) -> Result<EnvelopeVector, AudioError> {
    if n_bins == 0 {
        return Err(AudioError::InvalidBinCount);
    }
    let samples = signal.samples();
    if samples.len() < n_bins {
        return Err(AudioError::TooShort {
            samples: samples.len(),
            bins: n_bins,
        });
    }
    let bins = (0..n_bins)
        .map(|k| {
            let (start, end) = segment_bounds(samples.len(), n_bins, k);
            let segment = &samples[start..end];
            let energy: f64 = segment.iter().map(|s| s * s).sum();
            (energy / segment.len() as f64).sqrt()
        })
        .collect();
    Ok(EnvelopeVector {
        bins,
        source_duration_s: signal.duration_s(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordingBounds {
    pub min_s: f64,
    pub max_s: f64,
}

impl Default for RecordingBounds {
    fn default() -> Self {
        Self {
            min_s: 0.1,
            max_s: 60.0,
        }
    }
}

impl RecordingBounds {
    pub fn is_valid(&self) -> bool {
        self.min_s > 0.0 && self.min_s < self.max_s && self.max_s.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooShort,
    TooLong,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::TooShort => "recording is too short",
            RejectReason::TooLong => "recording is too long",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingCheck {
    Accepted,
    Rejected(RejectReason),
}

pub fn validate_recording(signal: &MonoSignal, bounds: RecordingBounds) -> RecordingCheck {
    let duration = signal.duration_s();
    if duration < bounds.min_s {
        RecordingCheck::Rejected(RejectReason::TooShort)
    } else if duration > bounds.max_s {
        RecordingCheck::Rejected(RejectReason::TooLong)
    } else {
        RecordingCheck::Accepted
    }
}
