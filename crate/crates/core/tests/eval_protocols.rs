//! Scenario plans checked against the protocol definitions, independently of
//! any model.

use std::collections::BTreeSet;

use ppg_anomaly::data::{make_synthetic_cohort, preprocess_all, CohortConfig};
use ppg_anomaly::detectors::DetectorKind;
use ppg_anomaly::dsp::{Activity, PipelineConfig, Window};
use ppg_anomaly::eval::{
    plan_scenario, run_scenario, verify_provenance, Mode, RepresentationKind, ScenarioConfig, Task,
};

fn windows() -> Vec<Window> {
    let cohort = make_synthetic_cohort(&CohortConfig {
        n_subjects: 3,
        duration_s: 30.0,
        seed: 9,
        ..CohortConfig::default()
    })
    .unwrap();
    let cfg = PipelineConfig {
        target_len: 32,
        ..PipelineConfig::default()
    };
    preprocess_all(&cohort.series, &cfg).unwrap().0
}

fn cfg(task: Task, mode: Mode) -> ScenarioConfig {
    ScenarioConfig {
        folds: 3,
        ..ScenarioConfig::new(task, mode, DetectorKind::Mvn, RepresentationKind::Original)
    }
}

#[test]
fn every_plan_is_disjoint_and_role_correct() {
    let w = windows();
    for task in Task::ALL {
        for mode in Mode::ALL {
            let c = cfg(task, mode);
            let plan = plan_scenario(&w, &c).unwrap();
            verify_provenance(&plan, &w).unwrap();
            assert_eq!(plan.units.len(), 3, "{}", c.label());
            for unit in &plan.units {
                for split in &unit.splits {
                    let train: BTreeSet<usize> = unit.train_sets[split.train].iter().copied().collect();
                    assert!(split.negatives.iter().chain(&split.positives).all(|i| !train.contains(i)));
                    assert!(!split.negatives.is_empty() && !split.positives.is_empty());
                    // Training data is always normal activity.
                    assert!(train.iter().all(|&i| w[i].source_activity == Activity::Sitting));
                    for &i in &split.negatives {
                        assert_eq!(w[i].source_activity, Activity::Sitting);
                    }
                    let subjects_of = |idx: &[usize]| -> BTreeSet<&str> {
                        idx.iter().map(|&i| w[i].source_subject.as_str()).collect()
                    };
                    let train_subjects = subjects_of(&train.iter().copied().collect::<Vec<_>>());
                    match (task, mode) {
                        (Task::Movement, Mode::Generalized) => {
                            assert!(!train_subjects.contains(unit.key.as_str()));
                            assert!(split.positives.iter().all(|&i| w[i].source_activity == Activity::Walking));
                        }
                        (Task::Movement, Mode::Personalized) => {
                            assert_eq!(train_subjects, BTreeSet::from([unit.key.as_str()]));
                            assert!(split.positives.iter().all(|&i| w[i].source_activity == Activity::Walking));
                        }
                        (Task::Biometric, Mode::Generalized) => {
                            assert!(!train_subjects.contains(unit.key.as_str()));
                            assert!(!subjects_of(&split.negatives).contains(unit.key.as_str()));
                            assert_eq!(subjects_of(&split.positives), BTreeSet::from([unit.key.as_str()]));
                        }
                        (Task::Biometric, Mode::Personalized) => {
                            assert_eq!(train_subjects, BTreeSet::from([unit.key.as_str()]));
                            assert!(subjects_of(&split.negatives).iter().all(|s| *s == unit.key));
                            assert!(split.positives.iter().all(|&i| {
                                w[i].source_subject != unit.key && w[i].source_activity == Activity::Sitting
                            }));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn plans_are_deterministic_per_seed() {
    let w = windows();
    let c = cfg(Task::Biometric, Mode::Personalized);
    assert_eq!(plan_scenario(&w, &c).unwrap(), plan_scenario(&w, &c).unwrap());
    let other = ScenarioConfig { seed: 1, ..c.clone() };
    assert_ne!(plan_scenario(&w, &c).unwrap(), plan_scenario(&w, &other).unwrap());
}

#[test]
fn original_representation_uses_window_length() {
    let w = windows();
    let r = run_scenario(&w, &cfg(Task::Movement, Mode::Personalized), None).unwrap();
    assert_eq!(r.feature_dim, 32);
    let learned = ScenarioConfig {
        representation: RepresentationKind::Learned,
        ..cfg(Task::Movement, Mode::Personalized)
    };
    assert!(run_scenario(&w, &learned, None).is_err());
}

#[test]
fn tampered_plan_is_rejected() {
    let w = windows();
    let mut plan = plan_scenario(&w, &cfg(Task::Movement, Mode::Personalized)).unwrap();
    let leaked = plan.units[0].splits[0].negatives[0];
    let t = plan.units[0].splits[0].train;
    plan.units[0].train_sets[t].push(leaked);
    assert!(verify_provenance(&plan, &w).is_err());
}
