//! Heart-rate, respiratory-rate and SpO₂ estimators and the report they
//! produce.

mod hr;
mod rr;
mod spo2;

pub use hr::{estimate_hr, HrConfig};
pub use rr::{estimate_rr, rr_fusion, select_template, RrConfig, RrFusionState, TEMPLATE_SIZE};
pub use spo2::{estimate_spo2, Spo2Calibration, SPO2_WORK_HEIGHT, SPO2_WORK_WIDTH};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;
use crate::frameio::FrameSequence;
use crate::roi::{RoiError, RoiMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VitalsError {
    #[error("sequence too short: {0}")]
    TooShort(String),
    #[error("frame rate too low: {fps} fps cannot resolve {band_hi} Hz")]
    FrameRateTooLow { fps: f64, band_hi: f64 },
    #[error("channel too dark: frame {frame} has a red or blue mean below 1")]
    ChannelTooDark { frame: usize },
    #[error("insufficient AC signal: {flat} of {total} frames have a flat blue channel")]
    InsufficientAc { flat: usize, total: usize },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("estimate {value} outside plausible range for {kind}")]
    OutOfRange { kind: VitalKind, value: f64 },
    #[error(transparent)]
    Roi(#[from] RoiError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VitalKind {
    Hr,
    Rr,
    Spo2,
}

impl VitalKind {
    /// Inclusive normal range for an adult.
    pub fn normal_range(self) -> (f64, f64) {
        match self {
            VitalKind::Hr => (60.0, 100.0),
            VitalKind::Rr => (12.0, 20.0),
            VitalKind::Spo2 => (95.0, 100.0),
        }
    }

    /// Values a report may carry at all.
    pub fn plausible_range(self) -> (f64, f64) {
        match self {
            VitalKind::Hr => (30.0, 240.0),
            VitalKind::Rr => (4.0, 60.0),
            VitalKind::Spo2 => (0.0, 100.0),
        }
    }
}

impl fmt::Display for VitalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VitalKind::Hr => "hr",
            VitalKind::Rr => "rr",
            VitalKind::Spo2 => "spo2",
        })
    }
}

impl FromStr for VitalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hr" => Ok(VitalKind::Hr),
            "rr" => Ok(VitalKind::Rr),
            "spo2" => Ok(VitalKind::Spo2),
            other => Err(format!("unknown vital kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    BelowNormal,
    Normal,
    AboveNormal,
}

/// Step function against the inclusive normal range.
pub fn classify(kind: VitalKind, value: f64) -> Flag {
    let (lo, hi) = kind.normal_range();
    if value < lo {
        Flag::BelowNormal
    } else if value > hi {
        Flag::AboveNormal
    } else {
        Flag::Normal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub confidence: f64,
}

/// One optional value per vital, keyed like the report fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct PerVital<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr_bpm: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rr_brpm: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spo2_pct: Option<T>,
}

impl<T> Default for PerVital<T> {
    fn default() -> Self {
        Self {
            hr_bpm: None,
            rr_brpm: None,
            spo2_pct: None,
        }
    }
}

impl<T> PerVital<T> {
    fn slot(&mut self, kind: VitalKind) -> &mut Option<T> {
        match kind {
            VitalKind::Hr => &mut self.hr_bpm,
            VitalKind::Rr => &mut self.rr_brpm,
            VitalKind::Spo2 => &mut self.spo2_pct,
        }
    }

    pub fn get(&self, kind: VitalKind) -> Option<&T> {
        match kind {
            VitalKind::Hr => self.hr_bpm.as_ref(),
            VitalKind::Rr => self.rr_brpm.as_ref(),
            VitalKind::Spo2 => self.spo2_pct.as_ref(),
        }
    }
}

/// Serialises as `{hr_bpm, rr_brpm, spo2_pct, confidence, flags}` with
/// absent vitals omitted everywhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VitalsReport {
    #[serde(flatten)]
    values: PerVital<f64>,
    confidence: PerVital<f64>,
    flags: PerVital<Flag>,
}

impl VitalsReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an estimate, classifying it against the normal range.
    pub fn set(&mut self, kind: VitalKind, est: Estimate) -> Result<(), VitalsError> {
        let (lo, hi) = kind.plausible_range();
        if !(est.value.is_finite() && est.value >= lo && est.value <= hi) {
            return Err(VitalsError::OutOfRange {
                kind,
                value: est.value,
            });
        }
        *self.values.slot(kind) = Some(est.value);
        *self.confidence.slot(kind) = Some(est.confidence.clamp(0.0, 1.0));
        *self.flags.slot(kind) = Some(classify(kind, est.value));
        Ok(())
    }

    pub fn with(mut self, kind: VitalKind, est: Estimate) -> Result<Self, VitalsError> {
        self.set(kind, est)?;
        Ok(self)
    }

    pub fn value(&self, kind: VitalKind) -> Option<f64> {
        self.values.get(kind).copied()
    }

    pub fn confidence(&self, kind: VitalKind) -> Option<f64> {
        self.confidence.get(kind).copied()
    }

    pub fn flag(&self, kind: VitalKind) -> Option<Flag> {
        self.flags.get(kind).copied()
    }

    pub fn hr_bpm(&self) -> Option<f64> {
        self.values.hr_bpm
    }

    pub fn rr_brpm(&self) -> Option<f64> {
        self.values.rr_brpm
    }

    pub fn spo2_pct(&self) -> Option<f64> {
        self.values.spo2_pct
    }
}

/// Everything needed to run any one estimator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateOptions {
    pub roi: RoiMode,
    pub hr: HrConfig,
    pub rr: RrConfig,
    pub calibration: Spo2Calibration,
}

pub fn estimate(
    kind: VitalKind,
    seq: &FrameSequence,
    opts: &EstimateOptions,
) -> Result<VitalsReport, VitalsError> {
    let est = match kind {
        VitalKind::Hr => estimate_hr(seq, &opts.roi, &opts.hr)?,
        VitalKind::Rr => estimate_rr(seq, &opts.rr)?,
        VitalKind::Spo2 => estimate_spo2(seq, &opts.calibration)?,
    };
    VitalsReport::new().with(kind, est)
}
