//! Evaluation protocols.
//!
//! A scenario is first turned into an explicit [`ScenarioPlan`]: for each
//! evaluation unit (a left-out subject or an intended user), a list of
//! splits made of training, normal-test and anomalous-test window indices.
//! Plans are pure data, so the protocol can be inspected and its
//! train/test disjointness checked independently of any model. Executing a
//! plan fits one detector per distinct training set and averages split
//! AUCs into a unit AUC.

mod plan;
mod report;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, DetectorParams};
use crate::dsp::Activity;
use crate::error::{Error, Result};

pub use plan::{plan_scenario, verify_provenance, EvalUnit, ScenarioPlan, Split};
pub use report::{format_table, SweepEntry, SweepResult};
pub use run::{
    average_results, build_encoder_bank, run_plan, run_scenario, sweep_dimensionality,
    EncoderBank, EncoderPolicy, EncoderRecipe,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Movement,
    Biometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Generalized,
    Personalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationKind {
    Learned,
    Original,
}

macro_rules! text_enum {
    ($t:ty, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$t>::$v => $s),+ })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok(<$t>::$v),)+
                    other => Err(Error::config(format!(
                        "unknown {} '{other}' (expected {})",
                        stringify!($t).to_ascii_lowercase(),
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(Task, Movement => "movement", Biometric => "biometric");
text_enum!(Mode, Generalized => "generalized", Personalized => "personalized");
text_enum!(RepresentationKind, Learned => "learned", Original => "original");

impl Task {
    pub const ALL: [Task; 2] = [Task::Movement, Task::Biometric];
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Generalized, Mode::Personalized];
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 2] = [RepresentationKind::Learned, RepresentationKind::Original];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub task: Task,
    pub mode: Mode,
    pub normal_activity: Activity,
    /// Used by the movement task only.
    pub anomalous_activity: Activity,
    pub detector: DetectorKind,
    pub detector_params: DetectorParams,
    pub representation: RepresentationKind,
    pub folds: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(task: Task, mode: Mode, detector: DetectorKind, representation: RepresentationKind) -> Self {
        Self {
            task,
            mode,
            detector,
            representation,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.task == Task::Movement && self.normal_activity == self.anomalous_activity {
            return Err(Error::config(format!(
                "movement detection needs distinct activities, both are '{}'",
                self.normal_activity
            )));
        }
        if !(self.detector_params.variance_threshold > 0.0 && self.detector_params.variance_threshold <= 1.0) {
            return Err(Error::config("PCA variance threshold must be in (0, 1]"));
        }
        Ok(())
    }

    /// Short row label, e.g. `movement/generalized RL-MVN`.
    pub fn label(&self) -> String {
        let prefix = match self.representation {
            RepresentationKind::Learned => "RL-",
            RepresentationKind::Original => "",
        };
        format!(
            "{}/{} {prefix}{}",
            self.task,
            self.mode,
            self.detector.name().to_ascii_uppercase()
        )
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            task: Task::Movement,
            mode: Mode::Generalized,
            normal_activity: Activity::Sitting,
            anomalous_activity: Activity::Walking,
            detector: DetectorKind::Mvn,
            detector_params: DetectorParams::default(),
            representation: RepresentationKind::Learned,
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: ScenarioConfig,
    pub per_unit_auc: BTreeMap<String, f64>,
    /// Number of splits averaged into each unit's AUC.
    pub per_unit_splits: BTreeMap<String, usize>,
    pub mean: f64,
    pub std: f64,
    /// Detector input dimension.
    pub feature_dim: usize,
    pub warnings: Vec<String>,
    pub library_version: String,
}

impl EvalResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Eval("nothing to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Split `0..n` into `k` folds: a seeded permutation cut into contiguous
/// blocks, the first `n % k` blocks one element longer.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::config(format!("cannot split {n} items into {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// FNV-1a, used to derive per-subject fold seeds from names.
pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        let (m, s) = aggregate(&[0.9, 1.0]).unwrap();
        assert!((m - 0.95).abs() < 1e-12 && (s - 0.05).abs() < 1e-12);
        assert_eq!(aggregate(&[0.7]).unwrap(), (0.7, 0.0));
        let (m, s) = aggregate(&[0.92, 0.92, 0.92]).unwrap();
        assert!((m - 0.92).abs() < 1e-12 && s < 1e-12);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn kfold_partitions() {
        for (n, k) in [(10, 5), (11, 5), (7, 2), (5, 5)] {
            let folds = kfold(n, k, 3).unwrap();
            assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        assert_eq!(kfold(20, 4, 1).unwrap(), kfold(20, 4, 1).unwrap());
        assert!(kfold(3, 4, 0).is_err());
        assert!(kfold(3, 1, 0).is_err());
    }

    #[test]
    fn config_validation_and_parsing() {
        assert!(ScenarioConfig::default().validate().is_ok());
        assert!(ScenarioConfig { folds: 1, ..Default::default() }.validate().is_err());
        let same = ScenarioConfig {
            anomalous_activity: Activity::Sitting,
            ..Default::default()
        };
        assert!(same.validate().is_err());
        assert!(ScenarioConfig { task: Task::Biometric, ..same }.validate().is_ok());
        assert_eq!("Personalized".parse::<Mode>().unwrap(), Mode::Personalized);
        assert!("bogus".parse::<Task>().is_err());
        assert_eq!(
            ScenarioConfig::default().label(),
            "movement/generalized RL-MVN"
        );
    }
}
