use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Estimate, VitalsError};
use crate::frameio::{resize_bilinear, FrameSequence};
use crate::roi::{channel_stats, BoundingBox};

pub const SPO2_WORK_WIDTH: usize = 320;
pub const SPO2_WORK_HEIGHT: usize = 240;
/// Fewest frames the SpO₂ estimator accepts.
pub const MIN_SPO2_FRAMES: usize = 30;
const FLAT_CV: f64 = 1e-9;
/// Interquartile range (percentage points) at which confidence reaches zero.
const IQR_ZERO_CONFIDENCE: f64 = 5.0;

/// Linear calibration `SpO2 = a - b * R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spo2Calibration {
    #[serde(rename = "A", alias = "a")]
    pub a: f64,
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
}

impl Default for Spo2Calibration {
    fn default() -> Self {
        Self { a: 100.0, b: 5.0 }
    }
}

impl Spo2Calibration {
    pub fn new(a: f64, b: f64) -> Result<Self, VitalsError> {
        let cal = Self { a, b };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<(), VitalsError> {
        if !(80.0..=110.0).contains(&self.a) {
            return Err(VitalsError::InvalidCalibration(format!(
                "A = {} outside [80, 110]",
                self.a
            )));
        }
        if !(0.0..=40.0).contains(&self.b) {
            return Err(VitalsError::InvalidCalibration(format!(
                "B = {} outside [0, 40]",
                self.b
            )));
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Ratio-of-ratios SpO₂ over a finger-on-lens sequence.
///
/// Each frame is resized to 320x240; its red and blue AC/DC ratios (std over
/// mean) give `R`, and the per-frame `a - b * R` values are reduced by their
/// median. Frames with a flat blue channel carry no ratio and are skipped.
pub fn estimate_spo2(seq: &FrameSequence, cal: &Spo2Calibration) -> Result<Estimate, VitalsError> {
    cal.validate()?;
    if seq.len() < MIN_SPO2_FRAMES {
        return Err(VitalsError::TooShort(format!(
            "{} frames, SpO2 needs at least {MIN_SPO2_FRAMES}",
            seq.len()
        )));
    }

    let stats = seq
        .frames()
        .par_iter()
        .map(|f| {
            let work = resize_bilinear(f, SPO2_WORK_WIDTH, SPO2_WORK_HEIGHT)
                .expect("work dimensions are positive");
            channel_stats(&work, &BoundingBox::whole(&work))
        })
        .collect::<Vec<_>>();

    if let Some(frame) = stats.iter().position(|s| s.mean_r < 1.0 || s.mean_b < 1.0) {
        return Err(VitalsError::ChannelTooDark { frame });
    }

    let mut values: Vec<f64> = stats
        .iter()
        .filter_map(|s| {
            let cv_b = s.std_b / s.mean_b;
            (cv_b >= FLAT_CV).then(|| {
                let ratio = (s.std_r / s.mean_r) / cv_b;
                cal.a - cal.b * ratio
            })
        })
        .collect();
    let flat = stats.len() - values.len();
    if 2 * flat > stats.len() {
        return Err(VitalsError::InsufficientAc {
            flat,
            total: stats.len(),
        });
    }

    values.sort_by(f64::total_cmp);
    let median = quantile(&values, 0.5);
    let iqr = quantile(&values, 0.75) - quantile(&values, 0.25);
    Ok(Estimate {
        value: median.clamp(0.0, 100.0),
        confidence: 1.0 - (iqr / IQR_ZERO_CONFIDENCE).min(1.0),
    })
}
