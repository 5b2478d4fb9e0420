//! Model checkpoint container.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "PPGCKPT1"
//! 8       8     header length H, u64 little-endian
//! 16      H     UTF-8 JSON header (see `Header`)
//! 16+H    8·N   N = header.param_count parameters, f64 little-endian,
//!               in `Layout` order
//! ```
//!
//! Parameters are stored as raw IEEE-754 bits, so a save/load cycle is
//! bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, ModelParams, TrainConfig, TrainTrace};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PPGCKPT1";
const FORMAT_VERSION: u32 = 1;

/// A trained (or initial) network with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub train_config: TrainConfig,
    pub seed: u64,
    /// Subject excluded from the pretext data, for leave-one-subject-out
    /// encoders; `None` when trained on everyone.
    pub held_out_subject: Option<String>,
    pub trace: TrainTrace,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    library_version: String,
    architecture: ArchitectureSpec,
    train_config: TrainConfig,
    seed: u64,
    held_out_subject: Option<String>,
    param_count: usize,
    trace: TrainTrace,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            library_version: crate::VERSION.to_string(),
            architecture: self.params.spec().clone(),
            train_config: self.train_config.clone(),
            seed: self.seed,
            held_out_subject: self.held_out_subject.clone(),
            param_count: self.params.len(),
            trace: self.trace.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.params.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..hlen]).map_err(|e| bad(&e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {}", header.format_version)));
        }
        let raw = &body[hlen..];
        if raw.len() != 8 * header.param_count {
            return Err(bad(&format!(
                "expected {} parameter bytes, found {}",
                8 * header.param_count,
                raw.len()
            )));
        }
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            params: ModelParams::from_vec(&header.architecture, data)?,
            train_config: header.train_config,
            seed: header.seed,
            held_out_subject: header.held_out_subject,
            trace: header.trace,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;

    fn sample() -> Checkpoint {
        let spec = ArchitectureSpec {
            input_len: 32,
            kernel: 4,
            channels: 2,
            blocks: 2,
            latent_dim: 3,
            n_classes: 4,
        };
        Checkpoint {
            params: init_params(&spec, 42).unwrap(),
            train_config: TrainConfig::default(),
            seed: 42,
            held_out_subject: Some("S03".into()),
            trace: TrainTrace::default(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.params.as_slice().iter().zip(ck.params.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"not a checkpoint at all").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
    }
}
