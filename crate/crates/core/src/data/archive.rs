//! Windows archive.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "PPGWIN01"
//! 8       8     header length H, u64 little-endian
//! 16      H     UTF-8 JSON header: format version, library version,
//!               window_len T, fs, pipeline settings and a provenance
//!               table with one entry per window
//! 16+H    8·N·T window samples, f64 little-endian, window after window
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::{Activity, PipelineConfig, Window};
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"PPGWIN01";
const FORMAT_VERSION: u32 = 1;

/// Preprocessed windows with the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowArchive {
    pub fs: f64,
    pub pipeline: PipelineConfig,
    pub windows: Vec<Window>,
}

#[derive(Serialize, Deserialize)]
struct Provenance {
    subject: String,
    activity: Activity,
    index: usize,
    offset: usize,
    start_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    library_version: String,
    window_len: usize,
    fs: f64,
    pipeline: PipelineConfig,
    provenance: Vec<Provenance>,
}

impl WindowArchive {
    pub fn window_len(&self) -> usize {
        self.pipeline.target_len
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let t = self.window_len();
        if let Some(w) = self.windows.iter().find(|w| w.len() != t) {
            return Err(Error::Shape(format!("archive window of length {} (expected {t})", w.len())));
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            library_version: crate::VERSION.into(),
            window_len: t,
            fs: self.fs,
            pipeline: self.pipeline.clone(),
            provenance: self
                .windows
                .iter()
                .map(|w| Provenance {
                    subject: w.source_subject.clone(),
                    activity: w.source_activity.clone(),
                    index: w.index,
                    offset: w.offset,
                    start_time_s: w.start_time_s,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * t * self.windows.len());
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for w in &self.windows {
            for v in &w.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("windows archive: {m}"));
        if bytes.len() < 16 || &bytes[..8] != ARCHIVE_MAGIC {
            return Err(bad("missing magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(bad("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", header.format_version)));
        }
        let t = header.window_len;
        let raw = &body[hlen..];
        if raw.len() != 8 * t * header.provenance.len() {
            return Err(bad(format!(
                "expected {} sample bytes, found {}",
                8 * t * header.provenance.len(),
                raw.len()
            )));
        }
        let windows = header
            .provenance
            .into_iter()
            .enumerate()
            .map(|(k, p)| Window {
                values: raw[8 * t * k..8 * t * (k + 1)]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                source_subject: p.subject,
                source_activity: p.activity,
                start_time_s: p.start_time_s,
                index: p.index,
                offset: p.offset,
            })
            .collect();
        Ok(Self {
            fs: header.fs,
            pipeline: header.pipeline,
            windows,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::ingestion(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WindowArchive {
        let pipeline = PipelineConfig {
            target_len: 4,
            ..Default::default()
        };
        let windows = (0..3)
            .map(|k| Window {
                values: vec![k as f64, 0.1, -1e-3, f64::MIN_POSITIVE],
                source_subject: format!("S{k}"),
                source_activity: Activity::Walking,
                start_time_s: 0.5 * k as f64,
                index: k,
                offset: 32 * k,
            })
            .collect();
        WindowArchive {
            fs: 64.0,
            pipeline,
            windows,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let a = sample();
        let bytes = a.to_bytes().unwrap();
        assert_eq!(WindowArchive::from_bytes(&bytes).unwrap(), a);
        assert!(WindowArchive::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn wrong_length_window_rejected() {
        let mut a = sample();
        a.windows[1].values.pop();
        assert!(a.to_bytes().is_err());
    }
}
