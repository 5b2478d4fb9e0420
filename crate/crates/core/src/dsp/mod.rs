//! Preprocessing chain: band-pass filtering, z-normalisation, windowing and
//! Fourier resampling.
//!
//! The canonical order is filter → normalise → segment → resample, applied to
//! one recording at a time. Every function here is pure.

mod filter;
mod resample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{apply_filter, design_butterworth_bandpass, BandpassFilter};
pub use resample::fourier_resample;

/// Activity performed while a recording was taken.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Activity {
    Sitting,
    Walking,
    Other(String),
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activity::Sitting => f.write_str("sitting"),
            Activity::Walking => f.write_str("walking"),
            Activity::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.is_empty() || trimmed.chars().any(char::is_whitespace) {
            return Err(Error::config(format!("invalid activity name {s:?}")));
        }
        Ok(match trimmed.to_ascii_lowercase().as_str() {
            "sitting" => Activity::Sitting,
            "walking" => Activity::Walking,
            _ => Activity::Other(trimmed.to_string()),
        })
    }
}

impl From<Activity> for String {
    fn from(a: Activity) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Activity {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A single-channel PPG recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    fs: f64,
    pub subject_id: String,
    pub activity: Activity,
}

impl TimeSeries {
    pub fn new(
        samples: Vec<f64>,
        fs: f64,
        subject_id: impl Into<String>,
        activity: Activity,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("time series must contain at least one sample"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::config(format!("sampling rate must be positive, got {fs}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            fs,
            subject_id: subject_id.into(),
            activity,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
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

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Same metadata, new samples. Used by the stages that keep length.
    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            fs: self.fs,
            subject_id: self.subject_id.clone(),
            activity: self.activity.clone(),
        }
    }
}

/// One fixed-length segment of a recording.
///
/// `index` is the window's position within its recording and `offset` the
/// first sample it covers in the source signal; together with the subject
/// and activity they identify the window uniquely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub values: Vec<f64>,
    pub source_subject: String,
    pub source_activity: Activity,
    pub start_time_s: f64,
    pub index: usize,
    pub offset: usize,
}

impl Window {
    /// A window with no provenance, mostly for tests and ad-hoc scoring.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            source_subject: String::new(),
            source_activity: Activity::Other("unknown".into()),
            start_time_s: 0.0,
            index: 0,
            offset: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            source_subject: self.source_subject.clone(),
            source_activity: self.source_activity.clone(),
            start_time_s: self.start_time_s,
            index: self.index,
            offset: self.offset,
        }
    }
}

/// Zero-mean, unit-variance scaling over the whole signal (population std).
pub fn znormalize(ts: &TimeSeries) -> Result<TimeSeries> {
    let n = ts.len() as f64;
    let mean = ts.samples.iter().sum::<f64>() / n;
    let var = ts.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = ts.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(std > 1e-12 * scale) || std == 0.0 {
        return Err(Error::Degenerate(format!(
            "recording {}/{} has zero variance",
            ts.subject_id, ts.activity
        )));
    }
    Ok(ts.with_samples(ts.samples.iter().map(|v| (v - mean) / std).collect()))
}

/// Output of [`segment`]. `too_short` is set when the recording could not
/// hold a single window, in which case `windows` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Segments {
    pub windows: Vec<Window>,
    pub too_short: bool,
}

/// Window length and stride in samples for a given sampling rate.
pub fn window_geometry(fs: f64, win_s: f64, overlap_s: f64) -> Result<(usize, usize)> {
    if !(win_s.is_finite() && overlap_s.is_finite() && win_s > overlap_s && overlap_s > 0.0) {
        return Err(Error::config(format!(
            "window length {win_s} s must exceed overlap {overlap_s} s > 0"
        )));
    }
    let len = (win_s * fs).round() as usize;
    let stride = ((win_s - overlap_s) * fs).round() as usize;
    if len == 0 || stride == 0 {
        return Err(Error::config(format!(
            "window {win_s} s / overlap {overlap_s} s rounds to zero samples at {fs} Hz"
        )));
    }
    Ok((len, stride))
}

/// Cut a recording into overlapping windows; the trailing partial window is
/// dropped.
pub fn segment(ts: &TimeSeries, win_s: f64, overlap_s: f64) -> Result<Segments> {
    let (len, stride) = window_geometry(ts.fs, win_s, overlap_s)?;
    if ts.len() < len {
        return Ok(Segments {
            windows: Vec::new(),
            too_short: true,
        });
    }
    let count = (ts.len() - len) / stride + 1;
    let windows = (0..count)
        .map(|index| {
            let offset = index * stride;
            Window {
                values: ts.samples[offset..offset + len].to_vec(),
                source_subject: ts.subject_id.clone(),
                source_activity: ts.activity.clone(),
                start_time_s: offset as f64 / ts.fs,
                index,
                offset,
            }
        })
        .collect();
    Ok(Segments {
        windows,
        too_short: false,
    })
}

/// Preprocessing settings for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub window_s: f64,
    pub overlap_s: f64,
    pub target_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            low_hz: 0.1,
            high_hz: 10.0,
            window_s: 8.0,
            overlap_s: 7.5,
            target_len: 512,
        }
    }
}

impl PipelineConfig {
    /// Checks everything that does not depend on the sampling rate.
    pub fn validate(&self) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::config(format!(
                "invalid band {}:{} Hz",
                self.low_hz, self.high_hz
            )));
        }
        if self.target_len < 2 {
            return Err(Error::config("target length must be at least 2"));
        }
        if !(self.window_s > self.overlap_s && self.overlap_s > 0.0) {
            return Err(Error::config(format!(
                "window length {} s must exceed overlap {} s > 0",
                self.window_s, self.overlap_s
            )));
        }
        Ok(())
    }

    pub fn validate_for_fs(&self, fs: f64) -> Result<()> {
        self.validate()?;
        design_butterworth_bandpass(self.low_hz, self.high_hz, fs)?;
        window_geometry(fs, self.window_s, self.overlap_s)?;
        Ok(())
    }
}

/// Full chain for one recording: filter, normalise, segment, resample.
pub fn preprocess(ts: &TimeSeries, cfg: &PipelineConfig) -> Result<Segments> {
    cfg.validate()?;
    let filter = design_butterworth_bandpass(cfg.low_hz, cfg.high_hz, ts.fs())?;
    let filtered = apply_filter(&filter, ts)?;
    let normalized = znormalize(&filtered)?;
    let mut segs = segment(&normalized, cfg.window_s, cfg.overlap_s)?;
    for w in &mut segs.windows {
        if w.len() != cfg.target_len {
            *w = fourier_resample(w, cfg.target_len)?;
        }
    }
    Ok(segs)
}
