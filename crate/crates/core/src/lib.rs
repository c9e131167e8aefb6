//! Camera-based vitals estimation (heart rate, respiratory rate, SpO₂),
//! weighted patient triage and a decision-graph dialog engine.
//!
//! The estimators consume [`frameio::FrameSequence`]s of RGB frames. The
//! [`synth`] module generates sequences with known embedded vitals and is
//! the reference the estimators are tested against.

pub mod dialog;
pub mod dsp;
pub mod frameio;
pub mod roi;
pub mod synth;
pub mod triage;
pub mod vitals;
