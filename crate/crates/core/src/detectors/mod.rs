//! Unsupervised anomaly scorers and AUC.
//!
//! Every detector reports a score where higher means more anomalous:
//! negative log-density for the Gaussian, `2^(-E[L]/c)` for the isolation
//! forest and squared reconstruction residual for PCA.

mod auc;
pub mod iforest;
pub mod mvn;
pub mod pca;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use auc::auc;
pub use iforest::{fit_iforest, IForestModel};
pub use mvn::{fit_mvn, MvnModel};
pub use pca::{fit_pca, PcaModel};

use crate::error::{Error, Result};

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!(
            "detector fitted on dimension {expected}, got {got}"
        )));
    }
    Ok(())
}

/// Row-per-sample matrix, mean-centred, and the column means.
pub(crate) fn to_matrix<R: AsRef<[f64]>>(data: &[R]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = data[0].as_ref().len();
    if d == 0 {
        return Err(Error::Shape("zero-dimensional samples".into()));
    }
    let n = data.len();
    let mut mean = vec![0.0; d];
    for row in data {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::Shape(format!("mixed dimensions {d} and {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("non-finite training value".into()));
        }
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| data[i].as_ref()[j] - mean[j]);
    Ok((x, mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Mvn,
    IForest,
    Pca,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Mvn, DetectorKind::IForest, DetectorKind::Pca];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Mvn => "mvn",
            DetectorKind::IForest => "iforest",
            DetectorKind::Pca => "pca",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mvn" | "gaussian" => Ok(DetectorKind::Mvn),
            "iforest" | "isolation-forest" => Ok(DetectorKind::IForest),
            "pca" => Ok(DetectorKind::Pca),
            other => Err(Error::config(format!(
                "unknown detector '{other}' (expected mvn, iforest or pca)"
            ))),
        }
    }
}

/// Hyperparameters for all detectors; each kind reads only its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub n_trees: usize,
    pub subsample: usize,
    pub variance_threshold: f64,
    pub seed: u64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            n_trees: iforest::DEFAULT_TREES,
            subsample: iforest::DEFAULT_SUBSAMPLE,
            variance_threshold: pca::DEFAULT_VARIANCE_THRESHOLD,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorModel {
    Mvn(MvnModel),
    IForest(IForestModel),
    Pca(PcaModel),
}

pub fn fit_detector<R: AsRef<[f64]>>(
    kind: DetectorKind,
    data: &[R],
    params: &DetectorParams,
) -> Result<DetectorModel> {
    Ok(match kind {
        DetectorKind::Mvn => DetectorModel::Mvn(fit_mvn(data)?),
        DetectorKind::IForest => DetectorModel::IForest(fit_iforest(
            data,
            params.n_trees,
            params.subsample,
            params.seed,
        )?),
        DetectorKind::Pca => DetectorModel::Pca(fit_pca(data, params.variance_threshold)?),
    })
}

impl DetectorModel {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorModel::Mvn(_) => DetectorKind::Mvn,
            DetectorModel::IForest(_) => DetectorKind::IForest,
            DetectorModel::Pca(_) => DetectorKind::Pca,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DetectorModel::Mvn(m) => m.dim(),
            DetectorModel::IForest(m) => m.dim,
            DetectorModel::Pca(m) => m.dim(),
        }
    }

    /// Anomaly score, higher is more anomalous.
    pub fn score(&self, h: &[f64]) -> Result<f64> {
        let s = match self {
            DetectorModel::Mvn(m) => m.score(h)?,
            DetectorModel::IForest(m) => m.score(h)?,
            DetectorModel::Pca(m) => m.score(h)?,
        };
        if !s.is_finite() {
            return Err(Error::Degenerate(format!("{} produced a non-finite score", self.kind())));
        }
        Ok(s)
    }

    pub fn score_many<R: AsRef<[f64]> + Sync>(&self, data: &[R]) -> Result<Vec<f64>> {
        data.par_iter().map(|h| self.score(h.as_ref())).collect()
    }
}

/// On-disk form of a fitted detector (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorFile {
    pub format: String,
    pub version: u32,
    pub library_version: String,
    pub fit_seed: u64,
    pub model: DetectorModel,
}

const DETECTOR_FORMAT: &str = "ppg-detector";

impl DetectorFile {
    pub fn new(model: DetectorModel, fit_seed: u64) -> Self {
        Self {
            format: DETECTOR_FORMAT.into(),
            version: 1,
            library_version: crate::VERSION.into(),
            fit_seed,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: DetectorFile =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("detector: {e}")))?;
        if f.format != DETECTOR_FORMAT || f.version != 1 {
            return Err(Error::Format(format!(
                "unsupported detector container {} v{}",
                f.format, f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
