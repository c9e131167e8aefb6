use serde::{Deserialize, Serialize};

use super::{Estimate, VitalsError};
use crate::dsp::{self, DspError, TimeSeries};
use crate::frameio::{Frame, FrameSequence};
use crate::roi::BoundingBox;

/// Side of the square template block, in pixels.
pub const TEMPLATE_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    /// Analysis window, seconds.
    pub window_secs: f64,
    /// Window hop, seconds.
    pub hop_secs: f64,
}

impl Default for RrConfig {
    fn default() -> Self {
        Self {
            band_lo: 0.1,
            band_hi: 0.7,
            window_secs: 10.0,
            hop_secs: 5.0,
        }
    }
}

/// Running mean and running maximum of per-window dominant frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrFusionState {
    pub window_len: usize,
    pub freqs: Vec<f64>,
    pub running_mean: f64,
    pub running_max: f64,
}

impl RrFusionState {
    pub fn new(window_len: usize) -> Self {
        Self {
            window_len,
            freqs: Vec::new(),
            running_mean: 0.0,
            running_max: 0.0,
        }
    }

    pub fn push(&mut self, freq: f64) {
        self.freqs.push(freq);
        let n = self.freqs.len() as f64;
        self.running_mean += (freq - self.running_mean) / n;
        self.running_max = if self.freqs.len() == 1 {
            freq
        } else {
            self.running_max.max(freq)
        };
    }

    /// Mean of the running mean and the running max, in Hz.
    pub fn fused(&self) -> Option<f64> {
        (!self.freqs.is_empty()).then_some(0.5 * (self.running_mean + self.running_max))
    }
}

fn luma(px: [u8; 3]) -> f64 {
    (f64::from(px[0]) + f64::from(px[1]) + f64::from(px[2])) / 3.0
}

/// Variance of the 4-neighbour Laplacian over the block's pixels whose
/// neighbours all lie inside the frame.
fn laplacian_variance(frame: &Frame, b: &BoundingBox) -> f64 {
    let (w, h) = (frame.width(), frame.height());
    let mut values = Vec::with_capacity(b.area());
    for y in b.y..b.y + b.h {
        for x in b.x..b.x + b.w {
            if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
                continue;
            }
            let c = luma(frame.pixel(x, y));
            let lap = luma(frame.pixel(x - 1, y))
                + luma(frame.pixel(x + 1, y))
                + luma(frame.pixel(x, y - 1))
                + luma(frame.pixel(x, y + 1))
                - 4.0 * c;
            values.push(lap);
        }
    }
    dsp::mean_std(&values).1.powi(2)
}

/// The 16x16 block on the frame's block grid with the sharpest texture
/// (largest Laplacian variance). Ties go to the first block in row-major
/// order; frames smaller than a block use the whole frame.
pub fn select_template(frame: &Frame) -> BoundingBox {
    let (w, h) = (frame.width(), frame.height());
    if w < TEMPLATE_SIZE || h < TEMPLATE_SIZE {
        return BoundingBox::whole(frame);
    }
    let mut best = (
        f64::NEG_INFINITY,
        BoundingBox::new(0, 0, TEMPLATE_SIZE, TEMPLATE_SIZE),
    );
    for by in (0..=h - TEMPLATE_SIZE).step_by(TEMPLATE_SIZE) {
        for bx in (0..=w - TEMPLATE_SIZE).step_by(TEMPLATE_SIZE) {
            let b = BoundingBox::new(bx, by, TEMPLATE_SIZE, TEMPLATE_SIZE);
            let v = laplacian_variance(frame, &b);
            if v > best.0 {
                best = (v, b);
            }
        }
    }
    best.1
}

fn template_mean(frame: &Frame, b: &BoundingBox) -> f64 {
    let mut sum = 0.0;
    for y in b.y..b.y + b.h {
        for x in b.x..b.x + b.w {
            sum += luma(frame.pixel(x, y));
        }
    }
    sum / b.area() as f64
}

/// Subtracts the window mean. A fitted line is not removed: over a 10 s
/// window a slow breathing tone projects onto it, and taking the line out
/// drags the peak toward the lowest band bin.
fn remove_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Windowed dominant frequency of the template intensity, fused as the mean
/// of the running mean and running maximum across windows.
pub fn estimate_rr(seq: &FrameSequence, cfg: &RrConfig) -> Result<Estimate, VitalsError> {
    let (fusion, confidences) = rr_windows(seq, cfg)?;
    let freq = fusion.fused().ok_or(DspError::NoSignalInBand)?;
    Ok(Estimate {
        value: 60.0 * freq,
        confidence: confidences.iter().sum::<f64>() / confidences.len() as f64,
    })
}

/// The fused per-window frequencies behind [`estimate_rr`].
pub fn rr_fusion(seq: &FrameSequence, cfg: &RrConfig) -> Result<RrFusionState, VitalsError> {
    Ok(rr_windows(seq, cfg)?.0)
}

/// Per-window analysis behind [`estimate_rr`]; windows without in-band
/// signal are skipped.
pub(crate) fn rr_windows(
    seq: &FrameSequence,
    cfg: &RrConfig,
) -> Result<(RrFusionState, Vec<f64>), VitalsError> {
    if seq.duration() < 2.0 * cfg.window_secs {
        return Err(VitalsError::TooShort(format!(
            "{:.2} s, respiratory rate needs at least {} s",
            seq.duration(),
            2.0 * cfg.window_secs
        )));
    }
    let fs = seq.fps();
    let template = select_template(&seq.frames()[0]);
    let series: Vec<f64> = seq
        .frames()
        .iter()
        .map(|f| template_mean(f, &template))
        .collect();

    let win = (cfg.window_secs * fs).round() as usize;
    let hop = ((cfg.hop_secs * fs).round() as usize).max(1);
    let mut fusion = RrFusionState::new(win);
    let mut confidences = Vec::new();
    let mut start = 0;
    while start + win <= series.len() {
        let segment = TimeSeries::new(remove_mean(&series[start..start + win]), fs)?;
        match dsp::dominant_frequency(&segment, cfg.band_lo, cfg.band_hi) {
            Ok(peak) => {
                fusion.push(peak.freq);
                confidences.push(peak.confidence);
            }
            Err(DspError::NoSignalInBand) => {}
            Err(e) => return Err(e.into()),
        }
        start += hop;
    }
    Ok((fusion, confidences))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn rr_seq(freq: f64, secs: f64) -> FrameSequence {
        let spec = SynthSpec {
            width: 16,
            height: 16,
            duration: secs,
            rr_freq: Some(freq),
            rr_amp: 4.0,
            ..Default::default()
        };
        generate(&spec, 3).unwrap()
    }

    #[test]
    fn fifteen_breaths_per_minute() {
        let est = estimate_rr(&rr_seq(0.25, 60.0), &RrConfig::default()).unwrap();
        assert!((est.value - 15.0).abs() <= 0.5, "{est:?}");
    }

    #[test]
    fn stationary_fusion_degenerates() {
        let (fusion, _) = rr_windows(&rr_seq(0.25, 60.0), &RrConfig::default()).unwrap();
        assert!(fusion.freqs.len() >= 2);
        assert!((fusion.running_max - fusion.running_mean).abs() <= 0.02);
    }

    #[test]
    fn fusion_state_tracks_mean_and_max() {
        let mut s = RrFusionState::new(300);
        assert_eq!(s.fused(), None);
        for f in [0.2, 0.3, 0.25] {
            s.push(f);
        }
        assert!((s.running_mean - 0.25).abs() < 1e-12);
        assert_eq!(s.running_max, 0.3);
        assert!((s.fused().unwrap() - 0.275).abs() < 1e-12);
    }

    #[test]
    fn too_short() {
        let err = estimate_rr(&rr_seq(0.25, 15.0), &RrConfig::default()).unwrap_err();
        assert!(matches!(err, VitalsError::TooShort(_)));
    }

    #[test]
    fn template_prefers_texture() {
        let mut px = vec![100u8; 48 * 32 * 3];
        // Checkerboard in the block at (16, 16).
        for y in 16..32 {
            for x in 16..32 {
                if (x + y) % 2 == 0 {
                    let i = (y * 48 + x) * 3;
                    px[i..i + 3].copy_from_slice(&[200, 200, 200]);
                }
            }
        }
        let f = Frame::new(48, 32, px).unwrap();
        assert_eq!(select_template(&f), BoundingBox::new(16, 16, 16, 16));
        let flat = Frame::filled(48, 32, [9, 9, 9]).unwrap();
        assert_eq!(select_template(&flat), BoundingBox::new(0, 0, 16, 16));
    }

    #[test]
    fn window_mean_removed() {
        let x: Vec<f64> = (0..50).map(|i| 3.0 + (i % 5) as f64).collect();
        let r = remove_mean(&x);
        assert!(r.iter().sum::<f64>().abs() < 1e-9);
        assert_eq!(r[1] - r[0], 1.0);
    }
}
