//! Region-of-interest selection and per-region channel statistics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{DspError, TimeSeries};
use crate::frameio::{Frame, FrameSequence};

/// Skin pixels needed (as a fraction of the frame) before the skin box is
/// trusted over the centred fallback.
const SKIN_MIN_FRACTION: f64 = 0.02;
/// Fraction of skin pixels trimmed from each side along each axis; four
/// trims of 2.5% keep at least 90% of the skin pixels inside the box.
const SKIN_TRIM: f64 = 0.025;
const FALLBACK_FRACTION: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoiError {
    #[error("roi out of bounds: {0}")]
    OutOfBounds(BoundingBox),
    #[error("invalid roi mode: {0}")]
    InvalidMode(String),
    #[error(transparent)]
    Series(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn whole(frame: &Frame) -> Self {
        Self::new(0, 0, frame.width(), frame.height())
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RoiMode {
    Fixed(BoundingBox),
    #[default]
    SkinSegment,
    CenterFraction {
        fraction: f64,
    },
}

/// Parses `auto`, `center:F` or `box:x,y,w,h`.
impl FromStr for RoiMode {
    type Err = RoiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RoiError::InvalidMode(s.to_string());
        let s = s.trim();
        if s == "auto" {
            return Ok(RoiMode::SkinSegment);
        }
        if let Some(f) = s.strip_prefix("center:") {
            let fraction: f64 = f.trim().parse().map_err(|_| bad())?;
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(bad());
            }
            return Ok(RoiMode::CenterFraction { fraction });
        }
        if let Some(rest) = s.strip_prefix("box:") {
            let parts: Vec<usize> = rest
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            if let [x, y, w, h] = parts[..] {
                if w == 0 || h == 0 {
                    return Err(bad());
                }
                return Ok(RoiMode::Fixed(BoundingBox::new(x, y, w, h)));
            }
        }
        Err(bad())
    }
}

impl fmt::Display for RoiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoiMode::Fixed(b) => write!(f, "box:{b}"),
            RoiMode::SkinSegment => f.write_str("auto"),
            RoiMode::CenterFraction { fraction } => write!(f, "center:{fraction}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    pub std_r: f64,
    pub std_g: f64,
    pub std_b: f64,
}

impl ChannelStats {
    pub fn mean(&self, channel: Channel) -> f64 {
        match channel {
            Channel::R => self.mean_r,
            Channel::G => self.mean_g,
            Channel::B => self.mean_b,
        }
    }

    pub fn std(&self, channel: Channel) -> f64 {
        match channel {
            Channel::R => self.std_r,
            Channel::G => self.std_g,
            Channel::B => self.std_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    fn offset(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

/// Explicit RGB skin rule.
#[inline]
pub fn is_skin([r, g, b]: [u8; 3]) -> bool {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    r > 95 && g > 40 && b > 20 && r > g && r > b && max - min > 15
}

pub fn detect_roi(frame: &Frame, mode: &RoiMode) -> Result<BoundingBox, RoiError> {
    match *mode {
        RoiMode::Fixed(b) => clip_box(frame, b),
        RoiMode::CenterFraction { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(RoiError::InvalidMode(format!("center:{fraction}")));
            }
            Ok(center_box(frame, fraction))
        }
        RoiMode::SkinSegment => Ok(skin_box(frame)),
    }
}

fn clip_box(frame: &Frame, b: BoundingBox) -> Result<BoundingBox, RoiError> {
    if b.w == 0 || b.h == 0 || b.x >= frame.width() || b.y >= frame.height() {
        return Err(RoiError::OutOfBounds(b));
    }
    let x1 = (b.x + b.w).min(frame.width());
    let y1 = (b.y + b.h).min(frame.height());
    Ok(BoundingBox::new(b.x, b.y, x1 - b.x, y1 - b.y))
}

fn center_box(frame: &Frame, fraction: f64) -> BoundingBox {
    let side = |len: usize| ((fraction * len as f64).round() as usize).clamp(1, len);
    let (w, h) = (side(frame.width()), side(frame.height()));
    BoundingBox::new((frame.width() - w) / 2, (frame.height() - h) / 2, w, h)
}

fn skin_box(frame: &Frame) -> BoundingBox {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            if is_skin(frame.pixel(x, y)) {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let total = frame.width() * frame.height();
    if (xs.len() as f64) < SKIN_MIN_FRACTION * total as f64 || xs.is_empty() {
        return center_box(frame, FALLBACK_FRACTION);
    }
    // Row-major scan already yields ys sorted.
    xs.sort_unstable();
    let trim = (SKIN_TRIM * xs.len() as f64).floor() as usize;
    let last = xs.len() - 1 - trim;
    let (x0, x1) = (xs[trim], xs[last]);
    let (y0, y1) = (ys[trim], ys[last]);
    BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

/// Per-channel mean and population standard deviation over the box.
///
/// # Panics
/// If `bbox` does not fit inside the frame.
pub fn channel_stats(frame: &Frame, bbox: &BoundingBox) -> ChannelStats {
    assert!(
        bbox.fits(frame.width(), frame.height()),
        "box {bbox} outside {}x{} frame",
        frame.width(),
        frame.height()
    );
    let n = bbox.area() as f64;
    let rows = || {
        (bbox.y..bbox.y + bbox.h).map(move |y| {
            let start = (y * frame.width() + bbox.x) * 3;
            &frame.pixels()[start..start + bbox.w * 3]
        })
    };

    let mut sum = [0u64; 3];
    for row in rows() {
        for px in row.chunks_exact(3) {
            for c in 0..3 {
                sum[c] += u64::from(px[c]);
            }
        }
    }
    let mean = sum.map(|s| s as f64 / n);

    let mut sq = [0.0f64; 3];
    for row in rows() {
        for px in row.chunks_exact(3) {
            for c in 0..3 {
                let d = f64::from(px[c]) - mean[c];
                sq[c] += d * d;
            }
        }
    }
    let std = sq.map(|s| (s / n).sqrt());

    ChannelStats {
        mean_r: mean[0],
        mean_g: mean[1],
        mean_b: mean[2],
        std_r: std[0],
        std_g: std[1],
        std_b: std[2],
    }
}

/// Mean of one channel over the box.
pub fn channel_mean(frame: &Frame, bbox: &BoundingBox, channel: Channel) -> f64 {
    let off = channel.offset();
    let mut sum = 0u64;
    for y in bbox.y..bbox.y + bbox.h {
        let start = (y * frame.width() + bbox.x) * 3;
        sum += frame.pixels()[start..start + bbox.w * 3]
            .chunks_exact(3)
            .map(|px| u64::from(px[off]))
            .sum::<u64>();
    }
    sum as f64 / bbox.area() as f64
}

/// ROI channel mean per frame. The box is detected on frame 0 and held for
/// the whole sequence.
pub fn extract_series(
    seq: &FrameSequence,
    mode: &RoiMode,
    channel: Channel,
) -> Result<TimeSeries, RoiError> {
    let bbox = detect_roi(&seq.frames()[0], mode)?;
    let samples: Vec<f64> = seq
        .frames()
        .par_iter()
        .map(|f| channel_mean(f, &bbox, channel))
        .collect();
    Ok(TimeSeries::new(samples, seq.fps())?)
}
