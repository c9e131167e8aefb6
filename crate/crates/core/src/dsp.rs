//! One-dimensional signal operations used by the vitals estimators.
//!
//! Everything here works on [`TimeSeries`] (uniformly sampled, `f64`) and is
//! pure: inputs are never mutated.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of samples a [`TimeSeries`] may hold.
pub const MIN_SAMPLES: usize = 4;

/// Relative magnitude below which a neighbouring bin is treated as empty and
/// the peak is not refined.
const NEGLIGIBLE_NEIGHBOUR: f64 = 1e-9;

/// In-band magnitudes below this are "no signal".
const SILENCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid band [{lo}, {hi}] Hz for sample rate {fs} Hz")]
    InvalidBand { lo: f64, hi: f64, fs: f64 },
    #[error("band too narrow: {bins} bins in [{lo}, {hi}] Hz, need at least 3")]
    BandTooNarrow { lo: f64, hi: f64, bins: usize },
    #[error("no signal in band")]
    NoSignalInBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self, DspError> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(DspError::InvalidSeries(format!(
                "sample rate must be positive, got {fs}"
            )));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(DspError::InvalidSeries(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(DspError::InvalidSeries("non-finite sample".into()));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Copy of `samples[start..start + len]` at the same rate.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self, DspError> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or_else(|| DspError::InvalidSeries("slice out of range".into()))?;
        Self::new(self.samples[start..end].to_vec(), self.fs)
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            fs: self.fs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hamming,
}

impl Window {
    /// Periodic (DFT-even) coefficients. With the periodic Hamming window an
    /// on-bin tone leaks into exactly its two neighbours, symmetrically.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hamming => (0..n)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided magnitude spectrum, bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mags: Vec<f64>,
    /// Analysis length `N`; bin spacing is `fs / N`.
    pub n: usize,
    pub fs: f64,
}

impl Spectrum {
    pub fn resolution(&self) -> f64 {
        self.fs / self.n as f64
    }

    pub fn argmax(&self) -> usize {
        self.mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantFrequency {
    pub freq: f64,
    /// Peak magnitude over the sum of in-band magnitudes.
    pub confidence: f64,
}

/// Smoothness-priors detrending.
///
/// The trend `t` minimises `|x - t|^2 + lambda^2 |D2 t|^2`, i.e. solves
/// `(I + lambda^2 D2'D2) t = x`, and the residual `x - t` is returned. The
/// system is symmetric positive definite and pentadiagonal, so it is solved
/// with a banded LDL' factorisation in O(N).
pub fn detrend(x: &TimeSeries, lambda: f64) -> TimeSeries {
    let trend = smoothness_prior_trend(x.samples(), lambda);
    let residual = x.samples().iter().zip(&trend).map(|(v, t)| v - t).collect();
    x.with_samples(residual)
}

/// Default smoothing weight: 300 at 30 Hz, scaled linearly with the rate.
pub fn default_lambda(fs: f64) -> f64 {
    300.0 * fs / 30.0
}

pub(crate) fn smoothness_prior_trend(x: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len();
    if n < 3 || lambda == 0.0 {
        return x.to_vec();
    }
    let l2 = lambda * lambda;
    // D2 annihilates constants, so the mean passes straight into the trend;
    // solving on the centred series keeps constant inputs exact.
    let mean = x.iter().sum::<f64>() / n as f64;

    // Bands of A = I + l2 * D2'D2: main diagonal, first and second
    // sub-diagonals (A is symmetric).
    let mut d0 = vec![1.0; n];
    let mut d1 = vec![0.0; n - 1];
    let mut d2 = vec![0.0; n - 2];
    const C: [f64; 3] = [1.0, -2.0, 1.0];
    for r in 0..n - 2 {
        for i in 0..3 {
            d0[r + i] += l2 * C[i] * C[i];
            for j in 0..i {
                let v = l2 * C[i] * C[j];
                match i - j {
                    1 => d1[r + j] += v,
                    _ => d2[r + j] += v,
                }
            }
        }
    }

    // LDL': l1[i] = L[i][i-1], l2v[i] = L[i][i-2].
    let mut diag = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2v = vec![0.0; n];
    for i in 0..n {
        if i >= 2 {
            l2v[i] = d2[i - 2] / diag[i - 2];
        }
        if i >= 1 {
            let mut a = d1[i - 1];
            if i >= 2 {
                a -= l2v[i] * l1[i - 1] * diag[i - 2];
            }
            l1[i] = a / diag[i - 1];
        }
        let mut d = d0[i];
        if i >= 1 {
            d -= l1[i] * l1[i] * diag[i - 1];
        }
        if i >= 2 {
            d -= l2v[i] * l2v[i] * diag[i - 2];
        }
        diag[i] = d;
    }

    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut v = x[i] - mean;
        if i >= 1 {
            v -= l1[i] * z[i - 1];
        }
        if i >= 2 {
            v -= l2v[i] * z[i - 2];
        }
        z[i] = v;
    }
    for i in 0..n {
        z[i] /= diag[i];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        if i + 1 < n {
            v -= l1[i + 1] * z[i + 1];
        }
        if i + 2 < n {
            v -= l2v[i + 2] * z[i + 2];
        }
        z[i] = v;
    }
    for v in &mut z {
        *v += mean;
    }
    z
}

/// Zero mean, unit population standard deviation. A (numerically) constant
/// input maps to all zeros.
pub fn normalize(x: &TimeSeries) -> TimeSeries {
    let (mean, std) = mean_std(x.samples());
    if std < 1e-12 {
        return x.with_samples(vec![0.0; x.len()]);
    }
    x.with_samples(x.samples().iter().map(|v| (v - mean) / std).collect())
}

/// Mean and population standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn forward_fft(values: impl Iterator<Item = f64>, n: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.map(|v| Complex::new(v, 0.0)).collect();
    debug_assert_eq!(buf.len(), n);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

pub fn magnitude_spectrum(x: &TimeSeries, window: Window) -> Spectrum {
    let n = x.len();
    let w = window.coefficients(n);
    let bins = forward_fft(x.samples().iter().zip(&w).map(|(v, w)| v * w), n);
    let half = n / 2;
    let res = x.fs() / n as f64;
    Spectrum {
        freqs: (0..=half).map(|k| k as f64 * res).collect(),
        mags: bins[..=half].iter().map(|c| c.norm()).collect(),
        n,
        fs: x.fs(),
    }
}

fn check_band(fs: f64, lo: f64, hi: f64) -> Result<(), DspError> {
    let ok = lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi && hi <= fs / 2.0;
    if ok {
        Ok(())
    } else {
        Err(DspError::InvalidBand { lo, hi, fs })
    }
}

/// Dominant in-band frequency with a Hamming window.
pub fn dominant_frequency(
    x: &TimeSeries,
    band_lo: f64,
    band_hi: f64,
) -> Result<DominantFrequency, DspError> {
    dominant_frequency_with(x, band_lo, band_hi, Window::Hamming)
}

pub fn dominant_frequency_with(
    x: &TimeSeries,
    band_lo: f64,
    band_hi: f64,
    window: Window,
) -> Result<DominantFrequency, DspError> {
    check_band(x.fs(), band_lo, band_hi)?;
    let spec = magnitude_spectrum(x, window);
    peak_in_band(&spec, band_lo, band_hi)
}

/// Argmax bin inside `[band_lo, band_hi]`, refined by a parabola through the
/// log-magnitudes of the peak and its two neighbours.
pub fn peak_in_band(
    spec: &Spectrum,
    band_lo: f64,
    band_hi: f64,
) -> Result<DominantFrequency, DspError> {
    let res = spec.resolution();
    // Tolerate round-off in k * res when a band edge sits exactly on a bin.
    let eps = res * 1e-9;
    let in_band: Vec<usize> = (0..spec.mags.len())
        .filter(|&k| spec.freqs[k] >= band_lo - eps && spec.freqs[k] <= band_hi + eps)
        .collect();
    if in_band.len() < 3 {
        return Err(DspError::BandTooNarrow {
            lo: band_lo,
            hi: band_hi,
            bins: in_band.len(),
        });
    }
    let total: f64 = in_band.iter().map(|&k| spec.mags[k]).sum();
    let peak_bin = in_band
        .iter()
        .copied()
        .max_by(|&a, &b| spec.mags[a].total_cmp(&spec.mags[b]))
        .expect("band is non-empty");
    let peak = spec.mags[peak_bin];
    if peak < SILENCE {
        return Err(DspError::NoSignalInBand);
    }

    let offset = if peak_bin == 0 || peak_bin + 1 >= spec.mags.len() {
        0.0
    } else {
        let (a, c) = (spec.mags[peak_bin - 1], spec.mags[peak_bin + 1]);
        if a < peak * NEGLIGIBLE_NEIGHBOUR || c < peak * NEGLIGIBLE_NEIGHBOUR {
            0.0
        } else {
            let (la, lb, lc) = (a.ln(), peak.ln(), c.ln());
            let denom = la - 2.0 * lb + lc;
            if denom < 0.0 {
                (0.5 * (la - lc) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
    };

    Ok(DominantFrequency {
        freq: (peak_bin as f64 + offset) * res,
        confidence: peak / total,
    })
}

/// Spectral-mask bandpass: zero every DFT bin whose absolute frequency lies
/// outside `[band_lo, band_hi]`, then invert.
pub fn bandpass(x: &TimeSeries, band_lo: f64, band_hi: f64) -> Result<TimeSeries, DspError> {
    check_band(x.fs(), band_lo, band_hi)?;
    let n = x.len();
    let res = x.fs() / n as f64;
    let eps = res * 1e-9;
    let mut bins = forward_fft(x.samples().iter().copied(), n);
    for (k, bin) in bins.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * res;
        if f < band_lo - eps || f > band_hi + eps {
            *bin = Complex::new(0.0, 0.0);
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut bins);
    let scale = 1.0 / n as f64;
    Ok(x.with_samples(bins.iter().map(|c| c.re * scale).collect()))
}
