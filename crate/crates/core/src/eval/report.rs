use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalResult;
use crate::error::{Error, Result};

/// Fixed-width text table, one row per result.
pub fn format_table(results: &[EvalResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<36} {:>5} {:>6} {:>13}  per-unit AUC",
        "scenario", "dim", "units", "AUC mean±std"
    );
    for r in results {
        let units: Vec<String> = r
            .per_unit_auc
            .iter()
            .map(|(k, v)| format!("{k}={v:.4}"))
            .collect();
        let _ = writeln!(
            out,
            "{:<36} {:>5} {:>6} {:>6.4}±{:<6.4}  {}",
            r.config.label(),
            r.feature_dim,
            r.per_unit_auc.len(),
            r.mean,
            r.std,
            units.join(" ")
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub dim: usize,
    pub result: std::result::Result<EvalResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Same scenario on the original windows.
    pub baseline: std::result::Result<EvalResult, String>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.result.is_err()).count() + usize::from(self.baseline.is_err())
    }

    /// `(dim, mean AUC)` rows for the successful dimensions.
    pub fn series(&self) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.result.as_ref().ok().map(|r| (e.dim, r.mean)))
            .collect()
    }

    /// Two-column CSV; the baseline row has `original` in the dim column,
    /// failed rows an empty AUC.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,mean_auc\n");
        for e in &self.entries {
            match &e.result {
                Ok(r) => {
                    let _ = writeln!(out, "{},{}", e.dim, r.mean);
                }
                Err(_) => {
                    let _ = writeln!(out, "{},", e.dim);
                }
            }
        }
        match &self.baseline {
            Ok(r) => {
                let _ = writeln!(out, "original,{}", r.mean);
            }
            Err(_) => out.push_str("original,\n"),
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}
