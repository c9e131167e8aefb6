use serde::{Deserialize, Serialize};

use super::{Estimate, VitalsError};
use crate::dsp::{self, Window};
use crate::frameio::FrameSequence;
use crate::roi::{self, Channel, RoiMode};

/// Shortest sequence the heart-rate pipeline accepts, in seconds.
pub const MIN_HR_DURATION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrConfig {
    /// Detrending weight; `None` uses [`dsp::default_lambda`] for the frame rate.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub band_lo: f64,
    pub band_hi: f64,
    #[serde(default)]
    pub window: Window,
}

impl Default for HrConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            band_lo: 0.75,
            band_hi: 4.0,
            window: Window::Hamming,
        }
    }
}

/// Green ROI mean -> detrend -> normalize -> bandpass -> dominant frequency.
pub fn estimate_hr(
    seq: &FrameSequence,
    roi_mode: &RoiMode,
    cfg: &HrConfig,
) -> Result<Estimate, VitalsError> {
    if seq.duration() < MIN_HR_DURATION {
        return Err(VitalsError::TooShort(format!(
            "{:.2} s, heart rate needs at least {MIN_HR_DURATION} s",
            seq.duration()
        )));
    }
    if seq.fps() < 2.0 * cfg.band_hi {
        return Err(VitalsError::FrameRateTooLow {
            fps: seq.fps(),
            band_hi: cfg.band_hi,
        });
    }
    let raw = roi::extract_series(seq, roi_mode, Channel::G)?;
    let lambda = cfg.lambda.unwrap_or_else(|| dsp::default_lambda(raw.fs()));
    let detrended = dsp::detrend(&raw, lambda);
    let normalized = dsp::normalize(&detrended);
    let filtered = dsp::bandpass(&normalized, cfg.band_lo, cfg.band_hi)?;
    let peak = dsp::dominant_frequency_with(&filtered, cfg.band_lo, cfg.band_hi, cfg.window)?;
    Ok(Estimate {
        value: 60.0 * peak.freq,
        confidence: peak.confidence,
    })
}
