use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{plan_scenario, verify_provenance, ScenarioPlan};
use super::report::{SweepEntry, SweepResult};
use super::{aggregate, EvalResult, RepresentationKind, ScenarioConfig, Task};
use crate::augment::build_pretext_dataset;
use crate::data::thin_windows;
use crate::detectors::{auc, fit_detector};
use crate::dsp::Window;
use crate::error::{Error, Result};
use crate::nn::{encode, train_pretext, ArchitectureSpec, ModelParams, TrainConfig};

/// Which pretext data an encoder may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderPolicy {
    /// One encoder trained on every subject.
    Shared,
    /// One encoder per subject, trained on everyone else.
    Loso,
}

impl EncoderPolicy {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Movement => EncoderPolicy::Loso,
            Task::Biometric => EncoderPolicy::Shared,
        }
    }
}

/// How to train encoders for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderRecipe {
    pub spec: ArchitectureSpec,
    pub train: TrainConfig,
    /// Keep every n-th window of each recording for pretext training.
    pub pretext_stride: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncoderBank {
    pub shared: Option<ModelParams>,
    pub per_subject: BTreeMap<String, ModelParams>,
}

impl EncoderBank {
    pub fn shared(params: ModelParams) -> Self {
        Self {
            shared: Some(params),
            per_subject: BTreeMap::new(),
        }
    }

    /// Movement units use the encoder that excluded their subject when one
    /// exists; everything else uses the shared encoder.
    fn encoder_for(&self, task: Task, unit: &str) -> Result<(Option<&str>, &ModelParams)> {
        if task == Task::Movement {
            if let Some((k, p)) = self.per_subject.get_key_value(unit) {
                return Ok((Some(k.as_str()), p));
            }
        }
        self.shared
            .as_ref()
            .map(|p| (None, p))
            .ok_or_else(|| Error::config(format!("no encoder available for unit {unit}")))
    }
}

fn train_one(windows: &[&Window], recipe: &EncoderRecipe) -> Result<ModelParams> {
    let owned: Vec<Window> = windows.iter().map(|w| (*w).clone()).collect();
    let thinned = thin_windows(&owned, recipe.pretext_stride);
    let dataset = build_pretext_dataset(&thinned)?;
    Ok(train_pretext(&dataset, &recipe.spec, &recipe.train)?.0)
}

pub fn build_encoder_bank(
    windows: &[Window],
    recipe: &EncoderRecipe,
    policy: EncoderPolicy,
) -> Result<EncoderBank> {
    recipe.spec.validate()?;
    recipe.train.validate()?;
    match policy {
        EncoderPolicy::Shared => {
            let all: Vec<&Window> = windows.iter().collect();
            Ok(EncoderBank::shared(train_one(&all, recipe)?))
        }
        EncoderPolicy::Loso => {
            let mut subjects: Vec<&str> = windows.iter().map(|w| w.source_subject.as_str()).collect();
            subjects.sort_unstable();
            subjects.dedup();
            let trained = subjects
                .par_iter()
                .map(|s| {
                    let rest: Vec<&Window> = windows.iter().filter(|w| w.source_subject != *s).collect();
                    log::info!("training encoder without {s} on {} windows", rest.len());
                    train_one(&rest, recipe).map(|p| (s.to_string(), p))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(EncoderBank {
                shared: None,
                per_subject: trained,
            })
        }
    }
}

fn encode_all(params: &ModelParams, windows: &[Window]) -> Result<Vec<Vec<f64>>> {
    Ok(encode(params, windows)?.into_iter().map(|r| r.values).collect())
}

/// Execute a plan. `bank` is required for the learned representation.
pub fn run_plan(
    plan: &ScenarioPlan,
    windows: &[Window],
    cfg: &ScenarioConfig,
    bank: Option<&EncoderBank>,
) -> Result<EvalResult> {
    cfg.validate()?;
    if plan.units.is_empty() {
        return Err(Error::Eval("scenario has no evaluation units".into()));
    }
    verify_provenance(plan, windows)?;

    // Features per distinct encoder (None = raw windows or shared encoder).
    let mut features: BTreeMap<Option<String>, Vec<Vec<f64>>> = BTreeMap::new();
    let mut unit_feature_key = Vec::with_capacity(plan.units.len());
    for unit in &plan.units {
        let key = match cfg.representation {
            RepresentationKind::Original => {
                if !features.contains_key(&None) {
                    features.insert(None, windows.iter().map(|w| w.values.clone()).collect());
                }
                None
            }
            RepresentationKind::Learned => {
                let bank = bank.ok_or_else(|| {
                    Error::config("learned representation requested without an encoder")
                })?;
                let (name, params) = bank.encoder_for(cfg.task, &unit.key)?;
                let key = name.map(str::to_string);
                if !features.contains_key(&key) {
                    features.insert(key.clone(), encode_all(params, windows)?);
                }
                key
            }
        };
        unit_feature_key.push(key);
    }
    let feature_dim = features.values().next().and_then(|f| f.first()).map_or(0, Vec::len);

    let per_unit: Vec<(String, f64, usize)> = plan
        .units
        .par_iter()
        .zip(&unit_feature_key)
        .map(|(unit, key)| {
            let feats = &features[key];
            let rows = |idx: &[usize]| idx.iter().map(|&i| feats[i].as_slice()).collect::<Vec<_>>();
            let models = unit
                .train_sets
                .iter()
                .map(|t| fit_detector(cfg.detector, &rows(t), &cfg.detector_params))
                .collect::<Result<Vec<_>>>()?;
            let mut total = 0.0;
            for split in &unit.splits {
                let m = &models[split.train];
                let neg = m.score_many(&rows(&split.negatives))?;
                let pos = m.score_many(&rows(&split.positives))?;
                total += auc(&neg, &pos)?;
            }
            Ok((unit.key.clone(), total / unit.splits.len() as f64, unit.splits.len()))
        })
        .collect::<Result<_>>()?;

    let per_unit_auc: BTreeMap<String, f64> = per_unit.iter().map(|(k, a, _)| (k.clone(), *a)).collect();
    let per_unit_splits = per_unit.iter().map(|(k, _, n)| (k.clone(), *n)).collect();
    let values: Vec<f64> = per_unit_auc.values().copied().collect();
    let (mean, std) = aggregate(&values)?;
    Ok(EvalResult {
        config: cfg.clone(),
        per_unit_auc,
        per_unit_splits,
        mean,
        std,
        feature_dim,
        warnings: plan.warnings.clone(),
        library_version: crate::VERSION.into(),
    })
}

/// Plan, check and run one scenario.
pub fn run_scenario(
    windows: &[Window],
    cfg: &ScenarioConfig,
    bank: Option<&EncoderBank>,
) -> Result<EvalResult> {
    if cfg.representation == RepresentationKind::Learned && bank.is_none() {
        return Err(Error::config("learned representation requested without an encoder"));
    }
    let plan = plan_scenario(windows, cfg)?;
    for w in &plan.warnings {
        log::warn!("{}: {w}", cfg.label());
    }
    run_plan(&plan, windows, cfg, bank)
}

/// Mean over repeats of each unit's AUC; mean and std are then taken over
/// those per-unit means.
pub fn average_results(results: &[EvalResult]) -> Result<EvalResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::Eval("no results to average".into()))?;
    if results.len() == 1 {
        return Ok(first.clone());
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        if r.config != first.config {
            return Err(Error::Eval("cannot average results of different scenarios".into()));
        }
        for (k, v) in &r.per_unit_auc {
            let e = sums.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let per_unit_auc: BTreeMap<String, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let values: Vec<f64> = per_unit_auc.values().copied().collect();
    let (mean, std) = aggregate(&values)?;
    let mut warnings: Vec<String> = results.iter().flat_map(|r| r.warnings.clone()).collect();
    warnings.dedup();
    Ok(EvalResult {
        per_unit_auc,
        mean,
        std,
        warnings,
        ..first.clone()
    })
}

/// Train a fresh encoder bank per latent dimension and run the scenario
/// with each, plus once on the original windows. Per-dimension failures
/// are recorded, not propagated.
pub fn sweep_dimensionality(
    windows: &[Window],
    dims: &[usize],
    cfg: &ScenarioConfig,
    recipe: &EncoderRecipe,
) -> Result<SweepResult> {
    let mut warnings = Vec::new();
    let mut unique: Vec<usize> = Vec::with_capacity(dims.len());
    for &d in dims {
        if d == 0 {
            return Err(Error::config("latent dimensions must be at least 1"));
        }
        if unique.contains(&d) {
            warnings.push(format!("duplicate dimension {d} ignored"));
        } else {
            unique.push(d);
        }
    }
    if unique.is_empty() {
        return Err(Error::config("no dimensions to sweep"));
    }
    cfg.validate()?;
    let learned = ScenarioConfig {
        representation: RepresentationKind::Learned,
        ..cfg.clone()
    };
    let entries = unique
        .iter()
        .map(|&dim| {
            let r = EncoderRecipe {
                spec: ArchitectureSpec {
                    latent_dim: dim,
                    ..recipe.spec.clone()
                },
                ..recipe.clone()
            };
            let result = build_encoder_bank(windows, &r, EncoderPolicy::for_task(cfg.task))
                .and_then(|bank| run_scenario(windows, &learned, Some(&bank)));
            if let Err(e) = &result {
                log::error!("sweep dim {dim}: {e}");
            }
            SweepEntry {
                dim,
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect();
    let baseline = run_scenario(
        windows,
        &ScenarioConfig {
            representation: RepresentationKind::Original,
            ..cfg.clone()
        },
        None,
    )
    .map_err(|e| e.to_string());
    Ok(SweepResult {
        entries,
        baseline,
        warnings,
    })
}
