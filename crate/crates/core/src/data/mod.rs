//! Dataset ingestion, window archives and the synthetic cohort generator.
//!
//! # Manifest
//!
//! A dataset is described by a JSON manifest:
//!
//! ```json
//! {
//!   "format": "ppg-manifest",
//!   "version": 1,
//!   "band": [0.1, 10.0],
//!   "records": [
//!     {"subject_id": "S01", "activity": "sitting", "fs": 64.0,
//!      "path": "S01_sitting.txt", "samples": 7680}
//!   ]
//! }
//! ```
//!
//! `path` is relative to the manifest's directory (absolute paths are used
//! as-is). Every record must share the same `fs`.
//!
//! # Sample files
//!
//! Plain text, one decimal sample per line, no header. Blank lines are
//! not allowed except for a single trailing newline.

mod archive;
mod synth;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{design_butterworth_bandpass, preprocess, Activity, PipelineConfig, TimeSeries, Window};
use crate::error::{Error, Result};

pub use archive::{WindowArchive, ARCHIVE_MAGIC};
pub use synth::{
    make_synthetic_cohort, random_profile, synth_subject, CohortConfig, MotionProfile,
    SubjectProfile, SyntheticCohort,
};

pub const MANIFEST_FORMAT: &str = "ppg-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub subject_id: String,
    pub activity: Activity,
    pub fs: f64,
    pub path: PathBuf,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub band: (f64, f64),
    pub records: Vec<RecordEntry>,
    /// Directory the record paths are resolved against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(band: (f64, f64), records: Vec<RecordEntry>, root: impl Into<PathBuf>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            band,
            records,
            root: root.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::ingestion(path, e.to_string()))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::ingestion(
                path,
                format!("unsupported manifest {} v{}", m.format, m.version),
            ));
        }
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| Error::ingestion(path, e.to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Sampling rate shared by all records, `None` for an empty manifest.
    pub fn fs(&self) -> Option<f64> {
        self.records.first().map(|r| r.fs)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.subject_id.trim().is_empty() {
                return Err(Error::config(format!("record {} has an empty subject id", r.path.display())));
            }
        }
        if let Some(fs) = self.fs() {
            if let Some(r) = self.records.iter().find(|r| r.fs != fs) {
                return Err(Error::config(format!(
                    "mixed sampling rates {fs} and {} Hz ({})",
                    r.fs,
                    r.path.display()
                )));
            }
            design_butterworth_bandpass(self.band.0, self.band.1, fs)?;
        } else if !(self.band.0 > 0.0 && self.band.0 < self.band.1) {
            return Err(Error::config(format!("invalid band {:?}", self.band)));
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &RecordEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body = text.strip_suffix('\n').unwrap_or(&text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.trim_end_matches('\r').trim();
            let v: f64 = line.parse().map_err(|_| {
                Error::ingestion(path, format!("line {}: cannot parse {line:?} as a number", i + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::ingestion(
                    path,
                    format!("line {} (sample index {i}): non-finite value {line}", i + 1),
                ));
            }
            Ok(v)
        })
        .collect()
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(samples.len() * 20);
    for v in samples {
        text.push_str(&format!("{v:?}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// All records of a manifest, in manifest order, plus warnings.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<(Vec<TimeSeries>, Vec<String>)> {
    manifest.validate()?;
    let mut warnings = Vec::new();
    if manifest.records.is_empty() {
        log::warn!("manifest lists no records");
        warnings.push("manifest lists no records".to_string());
    }
    let series = manifest
        .records
        .par_iter()
        .map(|r| {
            let path = manifest.resolve(r);
            let samples = read_samples(&path)?;
            if samples.len() != r.samples {
                return Err(Error::ingestion(
                    &path,
                    format!(
                        "record {}/{}: manifest says {} samples, file has {}",
                        r.subject_id,
                        r.activity,
                        r.samples,
                        samples.len()
                    ),
                ));
            }
            TimeSeries::new(samples, r.fs, r.subject_id.clone(), r.activity.clone())
                .map_err(|e| Error::ingestion(&path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((series, warnings))
}

/// Run the preprocessing chain on every recording and concatenate the
/// windows. Recordings too short for one window are skipped with a warning.
pub fn preprocess_all(series: &[TimeSeries], cfg: &PipelineConfig) -> Result<(Vec<Window>, Vec<String>)> {
    cfg.validate()?;
    let parts = series
        .par_iter()
        .map(|ts| preprocess(ts, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut windows = Vec::new();
    let mut warnings = Vec::new();
    for (ts, seg) in series.iter().zip(parts) {
        if seg.too_short {
            let msg = format!(
                "{}/{} shorter than one window; skipped",
                ts.subject_id, ts.activity
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        windows.extend(seg.windows);
    }
    Ok((windows, warnings))
}

/// Every `stride`-th window of each recording, for pretext training.
pub fn thin_windows(windows: &[Window], stride: usize) -> Vec<Window> {
    let stride = stride.max(1);
    windows.iter().filter(|w| w.index % stride == 0).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        let v = vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0];
        write_samples(&p, &v).unwrap();
        assert_eq!(read_samples(&p).unwrap(), v);
    }

    #[test]
    fn nan_is_reported_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        std::fs::write(&p, "1.0\n2.0\nNaN\n").unwrap();
        let err = read_samples(&p).unwrap_err().to_string();
        assert!(err.contains("bad.txt") && err.contains("sample index 2"), "{err}");
    }

    #[test]
    fn golden_manifest_parses() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "1\n2\n3\n").unwrap();
        let golden = r#"{
  "format": "ppg-manifest",
  "version": 1,
  "band": [0.1, 10.0],
  "records": [
    {"subject_id": "S01", "activity": "sitting", "fs": 64.0, "path": "a.txt", "samples": 3}
  ]
}"#;
        let mp = dir.path().join("manifest.json");
        std::fs::write(&mp, golden).unwrap();
        let m = DatasetManifest::load(&mp).unwrap();
        assert_eq!(m.records[0].activity, Activity::Sitting);
        let (series, warn) = load_dataset(&m).unwrap();
        assert!(warn.is_empty());
        assert_eq!(series[0].samples(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn count_mismatch_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "1\n2\n").unwrap();
        let entry = |path: &str, samples| RecordEntry {
            subject_id: "S01".into(),
            activity: Activity::Sitting,
            fs: 64.0,
            path: path.into(),
            samples,
        };
        let m = DatasetManifest::new((0.1, 10.0), vec![entry("a.txt", 3)], dir.path());
        assert!(matches!(load_dataset(&m), Err(Error::Ingestion { .. })));
        let m = DatasetManifest::new((0.1, 10.0), vec![entry("nope.txt", 3)], dir.path());
        assert!(load_dataset(&m).is_err());
    }

    #[test]
    fn empty_manifest_warns() {
        let m = DatasetManifest::new((0.1, 10.0), vec![], ".");
        let (series, warn) = load_dataset(&m).unwrap();
        assert!(series.is_empty());
        assert_eq!(warn.len(), 1);
    }

    #[test]
    fn mixed_rates_rejected() {
        let mk = |fs| RecordEntry {
            subject_id: "S".into(),
            activity: Activity::Walking,
            fs,
            path: "x".into(),
            samples: 1,
        };
        let m = DatasetManifest::new((0.1, 10.0), vec![mk(64.0), mk(128.0)], ".");
        assert!(m.validate().is_err());
    }
}
