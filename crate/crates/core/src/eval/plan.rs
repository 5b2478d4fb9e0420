use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{fnv1a, kfold, Mode, ScenarioConfig, Task};
use crate::dsp::{Activity, Window};
use crate::error::{Error, Result};

/// One train/test split; indices point into the window list the plan was
/// built from, `train` into the unit's `train_sets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub negatives: Vec<usize>,
    pub positives: Vec<usize>,
    /// Human-readable description, e.g. `fold 2` or `vs S03 fold 2`.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalUnit {
    pub key: String,
    pub train_sets: Vec<Vec<usize>>,
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlan {
    pub units: Vec<EvalUnit>,
    pub warnings: Vec<String>,
}

type Groups = BTreeMap<String, BTreeMap<Activity, Vec<usize>>>;

fn group(windows: &[Window]) -> Groups {
    let mut g: Groups = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        g.entry(w.source_subject.clone())
            .or_default()
            .entry(w.source_activity.clone())
            .or_default()
            .push(i);
    }
    g
}

fn get<'a>(g: &'a Groups, subject: &str, act: &Activity) -> &'a [usize] {
    g.get(subject)
        .and_then(|m| m.get(act))
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

/// Folds of `idx`, keyed by (subject, activity) so that the same
/// recording is always split the same way within a seed.
fn folds_of(idx: &[usize], k: usize, seed: u64, subject: &str, act: &Activity) -> Result<Vec<Vec<usize>>> {
    let s = seed ^ fnv1a(&format!("{subject}/{act}"));
    Ok(kfold(idx.len(), k, s)?
        .into_iter()
        .map(|f| f.into_iter().map(|p| idx[p]).collect())
        .collect())
}

fn effective_folds(requested: usize, n: usize, who: &str, warnings: &mut Vec<String>) -> Option<usize> {
    if n < 2 {
        warnings.push(format!("{who}: {n} window(s), too few for cross-validation; skipped"));
        return None;
    }
    if n < requested {
        warnings.push(format!("{who}: only {n} windows, using {n} folds instead of {requested}"));
        return Some(n);
    }
    Some(requested)
}

fn without(all: &[usize], drop: &[usize]) -> Vec<usize> {
    let d: HashSet<usize> = drop.iter().copied().collect();
    all.iter().copied().filter(|i| !d.contains(i)).collect()
}

pub fn plan_scenario(windows: &[Window], cfg: &ScenarioConfig) -> Result<ScenarioPlan> {
    cfg.validate()?;
    let g = group(windows);
    let mut warnings = Vec::new();
    let normal = &cfg.normal_activity;
    let anomalous = &cfg.anomalous_activity;
    let units = match (cfg.task, cfg.mode) {
        (Task::Movement, Mode::Generalized) => {
            let mut eligible = Vec::new();
            for s in g.keys() {
                if get(&g, s, normal).is_empty() || get(&g, s, anomalous).is_empty() {
                    warnings.push(format!("{s}: missing '{normal}' or '{anomalous}' windows; skipped"));
                } else {
                    eligible.push(s.clone());
                }
            }
            if eligible.len() < 2 {
                return Err(Error::Eval(format!(
                    "movement/generalized needs 2 subjects with both activities, found {}",
                    eligible.len()
                )));
            }
            eligible
                .iter()
                .map(|s| {
                    let train: Vec<usize> = g
                        .keys()
                        .filter(|o| *o != s)
                        .flat_map(|o| get(&g, o, normal).iter().copied())
                        .collect();
                    EvalUnit {
                        key: s.clone(),
                        train_sets: vec![train],
                        splits: vec![Split {
                            train: 0,
                            negatives: get(&g, s, normal).to_vec(),
                            positives: get(&g, s, anomalous).to_vec(),
                            label: "left out".into(),
                        }],
                    }
                })
                .collect()
        }
        (Task::Movement, Mode::Personalized) => {
            let mut units = Vec::new();
            for s in g.keys() {
                let (neg, pos) = (get(&g, s, normal), get(&g, s, anomalous));
                if neg.is_empty() || pos.is_empty() {
                    warnings.push(format!("{s}: missing '{normal}' or '{anomalous}' windows; skipped"));
                    continue;
                }
                let Some(k) = effective_folds(cfg.folds, neg.len().min(pos.len()), s, &mut warnings)
                else {
                    continue;
                };
                let nf = folds_of(neg, k, cfg.seed, s, normal)?;
                let pf = folds_of(pos, k, cfg.seed, s, anomalous)?;
                let mut unit = EvalUnit {
                    key: s.clone(),
                    train_sets: Vec::new(),
                    splits: Vec::new(),
                };
                for i in 0..k {
                    unit.train_sets.push(without(neg, &nf[i]));
                    unit.splits.push(Split {
                        train: i,
                        negatives: nf[i].clone(),
                        positives: pf[i].clone(),
                        label: format!("fold {i}"),
                    });
                }
                units.push(unit);
            }
            if units.is_empty() {
                return Err(Error::Eval("movement/personalized: no subject has both activities".into()));
            }
            units
        }
        (Task::Biometric, Mode::Generalized) => {
            let subjects: Vec<&String> = g.keys().filter(|s| !get(&g, s, normal).is_empty()).collect();
            if subjects.len() < 3 {
                return Err(Error::Eval(format!(
                    "biometric/generalized needs 3 subjects with '{normal}' windows, found {}",
                    subjects.len()
                )));
            }
            // Every subject's normal windows are folded once; the fold count
            // is shared so fold i means the same thing for every unit.
            let min_n = subjects.iter().map(|s| get(&g, s, normal).len()).min().unwrap();
            let Some(k) = effective_folds(cfg.folds, min_n, "cohort", &mut warnings) else {
                return Err(Error::Eval("biometric/generalized: too few windows".into()));
            };
            let mut folds = BTreeMap::new();
            for s in &subjects {
                folds.insert((*s).clone(), folds_of(get(&g, s, normal), k, cfg.seed, s, normal)?);
            }
            subjects
                .iter()
                .map(|left_out| {
                    let mut unit = EvalUnit {
                        key: (*left_out).clone(),
                        train_sets: Vec::new(),
                        splits: Vec::new(),
                    };
                    for i in 0..k {
                        let (mut train, mut neg) = (Vec::new(), Vec::new());
                        for u in subjects.iter().filter(|u| *u != left_out) {
                            let f = &folds[*u];
                            train.extend(without(get(&g, u, normal), &f[i]));
                            neg.extend(f[i].iter().copied());
                        }
                        unit.train_sets.push(train);
                        unit.splits.push(Split {
                            train: i,
                            negatives: neg,
                            positives: get(&g, left_out, normal).to_vec(),
                            label: format!("fold {i}"),
                        });
                    }
                    unit
                })
                .collect()
        }
        (Task::Biometric, Mode::Personalized) => {
            let subjects: Vec<&String> = g.keys().filter(|s| !get(&g, s, normal).is_empty()).collect();
            if subjects.len() < 2 {
                return Err(Error::Eval(format!(
                    "biometric/personalized needs 2 subjects with '{normal}' windows, found {}",
                    subjects.len()
                )));
            }
            let min_n = subjects.iter().map(|s| get(&g, s, normal).len()).min().unwrap();
            let Some(k) = effective_folds(cfg.folds, min_n, "cohort", &mut warnings) else {
                return Err(Error::Eval("biometric/personalized: too few windows".into()));
            };
            let mut folds = BTreeMap::new();
            for s in &subjects {
                folds.insert((*s).clone(), folds_of(get(&g, s, normal), k, cfg.seed, s, normal)?);
            }
            subjects
                .iter()
                .map(|user| {
                    let own = &folds[*user];
                    let mut unit = EvalUnit {
                        key: (*user).clone(),
                        train_sets: Vec::new(),
                        splits: Vec::new(),
                    };
                    for i in 0..k {
                        unit.train_sets.push(without(get(&g, user, normal), &own[i]));
                        for other in subjects.iter().filter(|o| *o != user) {
                            unit.splits.push(Split {
                                train: i,
                                negatives: own[i].clone(),
                                positives: folds[*other][i].clone(),
                                label: format!("vs {other} fold {i}"),
                            });
                        }
                    }
                    unit
                })
                .collect()
        }
    };
    Ok(ScenarioPlan { units, warnings })
}

/// Checks that no test window's (subject, activity, index) appears in the
/// training set of the same split.
pub fn verify_provenance(plan: &ScenarioPlan, windows: &[Window]) -> Result<()> {
    let key = |i: usize| {
        let w = &windows[i];
        (w.source_subject.as_str(), &w.source_activity, w.index)
    };
    for unit in &plan.units {
        for split in &unit.splits {
            let train: HashSet<_> = unit.train_sets[split.train].iter().map(|&i| key(i)).collect();
            if let Some(&i) = split
                .negatives
                .iter()
                .chain(&split.positives)
                .find(|&&i| train.contains(&key(i)))
            {
                let (s, a, idx) = key(i);
                return Err(Error::Eval(format!(
                    "unit {} ({}): test window {s}/{a}#{idx} is also in the training set",
                    unit.key, split.label
                )));
            }
        }
    }
    Ok(())
}
