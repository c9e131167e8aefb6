//! Synthetic frame sequences with known embedded vitals, used as the ground
//! truth oracle for the estimators.
//!
//! Frame `n` at time `t = n / fps` has, per pixel and channel,
//!
//! ```text
//! base[c] + hr_amp * sin(2 pi hr_freq t) * [c == green]
//!         + rr_amp * sin(2 pi rr_freq t)
//!         + drift_per_s * t
//!         + N(0, noise_sigma)
//! ```
//!
//! rounded half-up and clamped to `[0, 255]`. Noise is drawn from
//! [`rng::Xoshiro256StarStar`] in frame, row, column, channel order, one draw
//! per modulated sample and only when `noise_sigma > 0`.
//!
//! When an SpO₂ ratio is requested the red and blue channels are replaced by
//! two-level row tilings (even rows low, odd rows high) whose
//! `(std_r / mean_r) / (std_b / mean_b)` equals the ratio; those channels get
//! no modulation, drift or noise.

pub mod rng;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frameio::{self, round_half_up_u8, Frame, FrameError, FrameSequence};
use crate::vitals::Spo2Calibration;
use rng::Xoshiro256StarStar;

/// Fraction of samples allowed to clip before generation is refused.
const MAX_CLIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("amplitude too large for base color: {clipped} of {total} samples clip")]
    AmplitudeTooLarge { clipped: usize, total: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("cannot write ground truth: {0}")]
    GroundTruth(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub hr_freq: Option<f64>,
    #[serde(default)]
    pub hr_amp: f64,
    #[serde(default)]
    pub rr_freq: Option<f64>,
    #[serde(default)]
    pub rr_amp: f64,
    #[serde(default, alias = "spo2_ratio_R")]
    pub spo2_ratio_r: Option<f64>,
    pub base_color: [u8; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub drift_per_s: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            fps: 30.0,
            duration: 30.0,
            hr_freq: None,
            hr_amp: 0.0,
            rr_freq: None,
            rr_amp: 0.0,
            spo2_ratio_r: None,
            base_color: [180, 120, 100],
            noise_sigma: 0.0,
            drift_per_s: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("dimensions {}x{}", self.width, self.height));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps {}", self.fps));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) || self.fps * self.duration < 4.0 {
            return bad(format!(
                "fps * duration must be at least 4, got {}",
                self.fps * self.duration
            ));
        }
        if let Some(f) = self.hr_freq {
            if !(f > 0.5 && f < 4.5) {
                return bad(format!("hr_freq {f} outside (0.5, 4.5)"));
            }
        }
        if let Some(f) = self.rr_freq {
            if !(f > 0.05 && f < 1.0) {
                return bad(format!("rr_freq {f} outside (0.05, 1.0)"));
            }
        }
        for (name, v) in [
            ("hr_amp", self.hr_amp),
            ("rr_amp", self.rr_amp),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !self.drift_per_s.is_finite() {
            return bad("drift_per_s must be finite".into());
        }
        if let Some(r) = self.spo2_ratio_r {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("spo2 ratio {r} must be positive"));
            }
            if !self.height.is_multiple_of(2) {
                return bad("spo2 tiling needs an even frame height".into());
            }
        }
        Ok(())
    }
}

/// Integer levels of the red and blue two-level tilings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingLevels {
    pub red: [u8; 2],
    pub blue: [u8; 2],
}

impl TilingLevels {
    /// Ratio of ratios realised by the levels on an even number of rows.
    pub fn ratio(&self) -> f64 {
        cv(self.red) / cv(self.blue)
    }
}

/// std/mean of a half-and-half two-level field.
fn cv([lo, hi]: [u8; 2]) -> f64 {
    (f64::from(hi) - f64::from(lo)) / (f64::from(hi) + f64::from(lo))
}

/// Picks integer tiling levels whose ratio of ratios is closest to `ratio`,
/// preferring blue levels near (50, 60). Ratios with small rational
/// structure (0.8, 1, 1.5, 2, ...) are hit exactly.
pub fn tiling_levels(ratio: f64) -> TilingLevels {
    let mut best: Option<(f64, TilingLevels)> = None;
    let blue_candidates = std::iter::once((50u8, 60u8))
        .chain((5u8..=60).flat_map(|d| (20u8..=120).map(move |lo| (lo, lo + d))));
    for (lb, hb) in blue_candidates {
        let target = ratio * cv([lb, hb]);
        if target >= 1.0 {
            continue;
        }
        // Red sums nearest the blue sum first, so simple ratios land on
        // levels close to the blue ones.
        let centre = i64::from(lb) + i64::from(hb);
        let mut sums: Vec<u32> = (3u32..=510).collect();
        sums.sort_by_key(|&s| (i64::from(s) - centre).abs());
        for sum in sums {
            let diff = (target * f64::from(sum)).round() as u32;
            if diff == 0 || diff >= sum || !(sum + diff).is_multiple_of(2) {
                continue;
            }
            let (lo, hi) = ((sum - diff) / 2, (sum + diff) / 2);
            if lo < 1 || hi > 255 {
                continue;
            }
            let levels = TilingLevels {
                red: [lo as u8, hi as u8],
                blue: [lb, hb],
            };
            let err = (levels.ratio() - ratio).abs();
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, levels));
            }
        }
        if best.is_some_and(|(e, _)| e <= 1e-12 * ratio.max(1.0)) {
            break;
        }
    }
    best.map(|(_, l)| l).unwrap_or(TilingLevels {
        red: [50, 60],
        blue: [50, 60],
    })
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<FrameSequence, SynthError> {
    spec.validate()?;
    let n_frames = spec.frame_count();
    let tiling = spec.spo2_ratio_r.map(tiling_levels);
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let noisy = spec.noise_sigma > 0.0;
    let base = spec.base_color.map(f64::from);

    let mut clipped = 0usize;
    let mut total = 0usize;
    let mut frames = Vec::with_capacity(n_frames);
    for n in 0..n_frames {
        let t = n as f64 / spec.fps;
        let hr = spec
            .hr_freq
            .map_or(0.0, |f| spec.hr_amp * (std::f64::consts::TAU * f * t).sin());
        let rr = spec
            .rr_freq
            .map_or(0.0, |f| spec.rr_amp * (std::f64::consts::TAU * f * t).sin());
        let shared = rr + spec.drift_per_s * t;
        let level = [base[0] + shared, base[1] + hr + shared, base[2] + shared];

        let mut pixels = Vec::with_capacity(spec.width * spec.height * 3);
        for y in 0..spec.height {
            for _x in 0..spec.width {
                for (c, &channel_level) in level.iter().enumerate() {
                    let fixed = match (&tiling, c) {
                        (Some(l), 0) => Some(l.red[y % 2]),
                        (Some(l), 2) => Some(l.blue[y % 2]),
                        _ => None,
                    };
                    let value = match fixed {
                        Some(v) => v,
                        None => {
                            let mut v = channel_level;
                            if noisy {
                                v += spec.noise_sigma * rng.next_normal();
                            }
                            total += 1;
                            let r = (v + 0.5).floor();
                            if !(0.0..=255.0).contains(&r) {
                                clipped += 1;
                            }
                            round_half_up_u8(v)
                        }
                    };
                    pixels.push(value);
                }
            }
        }
        frames.push(Frame::new(spec.width, spec.height, pixels)?);
    }

    if clipped as f64 > MAX_CLIPPED_FRACTION * total as f64 {
        return Err(SynthError::AmplitudeTooLarge { clipped, total });
    }
    Ok(FrameSequence::new(
        frames,
        spec.fps,
        format!("synth:{seed}"),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_bpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rr_brpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spo2_pct: Option<f64>,
}

pub fn ground_truth(spec: &SynthSpec, cal: &Spo2Calibration) -> GroundTruth {
    GroundTruth {
        hr_bpm: spec.hr_freq.map(|f| 60.0 * f),
        rr_brpm: spec.rr_freq.map(|f| 60.0 * f),
        spo2_pct: spec.spo2_ratio_r.map(|r| cal.a - cal.b * r),
    }
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    truth: GroundTruth,
    seed: u64,
    calibration: &'a Spo2Calibration,
    spec: &'a SynthSpec,
}

/// Writes the P6 frame directory plus `ground_truth.json`.
pub fn write_fixture(
    dir: impl AsRef<Path>,
    spec: &SynthSpec,
    seed: u64,
    cal: &Spo2Calibration,
) -> Result<GroundTruth, SynthError> {
    let dir = dir.as_ref();
    let seq = generate(spec, seed)?;
    frameio::write_sequence(dir, &seq)?;
    let truth = ground_truth(spec, cal);
    let sidecar = Sidecar {
        truth: truth.clone(),
        seed,
        calibration: cal,
        spec,
    };
    fs::write(
        dir.join("ground_truth.json"),
        serde_json::to_vec_pretty(&sidecar)?,
    )
    .map_err(FrameError::from)?;
    Ok(truth)
}
