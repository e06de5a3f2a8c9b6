//! Synthetic test signals and images.

use crate::audio::MonoSignal;
use crate::contour::GrayscaleImage;

/// A sine carrier whose amplitude follows `shape` step-wise over the duration.
/// The loudest step peaks at `peak`, which must lie in `(0, 1]`.
pub fn shaped_tone(shape: &[f64], duration_s: f64, sample_rate: u32, freq_hz: f64, peak: f64) -> MonoSignal {
    let len = (duration_s * sample_rate as f64).round().max(1.0) as usize;
    let max = shape.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { peak / max } else { 0.0 };
    let samples = (0..len)
        .map(|i| {
            let step = i * shape.len() / len;
            let amp = shape[step] * scale;
            let t = i as f64 / sample_rate as f64;
            (amp * (2.0 * std::f64::consts::PI * freq_hz * t).sin()).clamp(-1.0, 1.0)
        })
        .collect();
    MonoSignal::new(samples, sample_rate).expect("clamped samples are valid")
}

/// Black skyline on white: column `x` is filled from the bottom up to
/// `heights[x]` pixels.
pub fn skyline_image(heights: &[usize], height: usize) -> GrayscaleImage {
    GrayscaleImage::from_fn(heights.len(), height, |x, y| {
        if y >= height.saturating_sub(heights[x]) {
            0
        } else {
            255
        }
    })
    .expect("non-empty skyline")
}
