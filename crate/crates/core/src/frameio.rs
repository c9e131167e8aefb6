//! Frame and frame-sequence types, binary PPM (P6) I/O and base64 transport.
//!
//! Sequences on disk are directories of `frame_%06d.ppm` files numbered
//! consecutively from zero. Frames carry no timing, so the frame rate is
//! always supplied by the caller.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("non-contiguous sequence: {0}")]
    NonContiguous(String),
    #[error("heterogeneous frames: frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    Heterogeneous {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("bad frame file {path}: {reason}")]
    BadFrameFile { path: String, reason: String },
    #[error("bad encoding: {0}")]
    BadEncoding(String),
    #[error("bad frame payload: {0}")]
    BadPayload(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single RGB raster, 8 bits per channel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| FrameError::InvalidFrame("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(FrameError::InvalidFrame(format!(
                "expected {expected} bytes for {width}x{height}, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A frame filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, FrameError> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width.saturating_mul(height).saturating_mul(3))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Serializes the frame as a binary P6 PPM with maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Parses a binary P6 PPM. Only maxval 255 is accepted.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self, String> {
        let mut cursor = PpmCursor { bytes, pos: 0 };
        if bytes.len() < 2 || &bytes[..2] != b"P6" {
            return Err("missing P6 magic".into());
        }
        cursor.pos = 2;
        let width = cursor.next_number()?;
        let height = cursor.next_number()?;
        let maxval = cursor.next_number()?;
        if maxval != 255 {
            return Err(format!("unsupported maxval {maxval}"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err("missing raster separator".into()),
        }
        if width == 0 || height == 0 {
            return Err(format!("zero dimension {width}x{height}"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or("dimensions overflow")?;
        let raster = &bytes[cursor.pos..];
        if raster.len() < len {
            return Err(format!(
                "truncated raster: expected {len} bytes, found {}",
                raster.len()
            ));
        }
        if raster.len() > len {
            return Err(format!(
                "trailing data: expected {len} bytes, found {}",
                raster.len()
            ));
        }
        Self::new(width, height, raster.to_vec()).map_err(|e| e.to_string())
    }
}

struct PpmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PpmCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self) -> Result<usize, String> {
        let before = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == before {
            return Err("expected whitespace in header".into());
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err("expected a number in header".into());
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "header number out of range".into())
    }
}

/// An ordered run of equally sized frames with a nominal frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
    source_id: String,
}

impl FrameSequence {
    pub fn new(
        frames: Vec<Frame>,
        fps: f64,
        source_id: impl Into<String>,
    ) -> Result<Self, FrameError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(FrameError::InvalidSequence(format!(
                "fps must be positive, got {fps}"
            )));
        }
        if frames.len() < 2 {
            return Err(FrameError::InvalidSequence(format!(
                "at least 2 frames required, got {}",
                frames.len()
            )));
        }
        let (want_w, want_h) = (frames[0].width, frames[0].height);
        if let Some((index, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.width != want_w || f.height != want_h)
        {
            return Err(FrameError::Heterogeneous {
                index,
                got_w: f.width,
                got_h: f.height,
                want_w,
                want_h,
            });
        }
        Ok(Self {
            frames,
            fps,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; a valid sequence holds at least two frames.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Duration in seconds, `len / fps`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Loads `frame_%06d.ppm` files from `dir`. Other files are ignored.
pub fn load_sequence(dir: impl AsRef<Path>, fps: f64) -> Result<FrameSequence, FrameError> {
    let dir = dir.as_ref();
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if let Some(idx) = entry.file_name().to_str().and_then(parse_frame_index) {
            indices.push(idx);
        }
    }
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(FrameError::NonContiguous(format!(
            "no frame_%06d.ppm files in {}",
            dir.display()
        )));
    }
    if let Some((expected, &found)) = indices
        .iter()
        .enumerate()
        .find(|(expected, &found)| *expected != found)
    {
        return Err(FrameError::NonContiguous(format!(
            "expected {}, found {}",
            frame_file_name(expected),
            frame_file_name(found)
        )));
    }

    let mut frames = Vec::with_capacity(indices.len());
    for idx in indices {
        let path = dir.join(frame_file_name(idx));
        let bytes = fs::read(&path)?;
        let frame = Frame::from_ppm(&bytes).map_err(|reason| FrameError::BadFrameFile {
            path: path.display().to_string(),
            reason,
        })?;
        frames.push(frame);
    }
    FrameSequence::new(frames, fps, dir.display().to_string())
}

/// Writes every frame as `frame_%06d.ppm` into `dir`, creating it if needed.
pub fn write_sequence(dir: impl AsRef<Path>, seq: &FrameSequence) -> Result<(), FrameError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, frame) in seq.frames().iter().enumerate() {
        fs::write(dir.join(frame_file_name(i)), frame.to_ppm())?;
    }
    Ok(())
}

/// Base64 (standard alphabet, no line breaks) of the frame's P6 encoding.
pub fn encode_frame(frame: &Frame) -> String {
    STANDARD.encode(frame.to_ppm())
}

pub fn decode_base64_frame(payload: &str) -> Result<Frame, FrameError> {
    let bytes = STANDARD
        .decode(payload.trim())
        .map_err(|e| FrameError::BadEncoding(e.to_string()))?;
    Frame::from_ppm(&bytes).map_err(FrameError::BadPayload)
}

/// Bilinear resize with corner-aligned sampling: output corners map onto
/// input corners. A single-pixel output axis samples the input center.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Result<Frame, FrameError> {
    if out_w == 0 || out_h == 0 {
        return Err(FrameError::InvalidFrame(format!(
            "output dimensions must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == frame.width && out_h == frame.height {
        return Ok(frame.clone());
    }

    let xs = axis_samples(frame.width, out_w);
    let ys = axis_samples(frame.height, out_h);
    let mut pixels = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = frame.pixel(x0, y0);
            let p10 = frame.pixel(x1, y0);
            let p01 = frame.pixel(x0, y1);
            let p11 = frame.pixel(x1, y1);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(round_half_up_u8(v));
            }
        }
    }
    Frame::new(out_w, out_h, pixels)
}

/// For each output coordinate: (lower source index, upper source index, fraction).
fn axis_samples(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    (0..out_len)
        .map(|o| {
            let src = if out_len == 1 {
                (in_len - 1) as f64 / 2.0
            } else {
                o as f64 * (in_len - 1) as f64 / (out_len - 1) as f64
            };
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

#[inline]
pub(crate) fn round_half_up_u8(v: f64) -> u8 {
    // Bilinear weights can leave values like 127.49999999999999 for an exact
    // 127.5; nudge by a few ulps before flooring.
    let r = (v + 0.5 + 1e-9).floor();
    r.clamp(0.0, 255.0) as u8
}
