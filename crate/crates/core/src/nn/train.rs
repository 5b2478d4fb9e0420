use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{batch_gradient, forward_trace};
use super::optim::{adam_step, AdamState};
use super::{init_params, ArchitectureSpec, ModelParams};
use crate::augment::{LabeledWindow, TransformClass};
use crate::detectors::auc;
use crate::error::{Error, Result};

/// Optimiser and schedule settings for pretext training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub repeats: usize,
}

impl TrainConfig {
    /// Settings used for the 500 Hz finger-PPG dataset.
    pub fn ptt_ppg() -> Self {
        Self {
            learning_rate: 1e-5,
            decay: 1e-4,
            batch_size: 64,
            epochs: 400,
            seed: 0,
            repeats: 5,
        }
    }

    /// Settings used for the 64 Hz wrist-PPG dataset.
    pub fn dalia() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 1e-3,
            ..Self::ptt_ppg()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::config(format!("decay must be >= 0, got {}", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            repeats: 1,
            ..Self::dalia()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's mini-batches, measured before
    /// each update.
    pub loss: f64,
    /// Macro one-vs-rest AUC of the same in-training predictions.
    pub auc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

/// Macro-averaged one-vs-rest AUC for the four-class problem. Classes with
/// no positive or no negative samples are skipped.
pub fn pretext_auc(probs: &[Vec<f64>], labels: &[TransformClass]) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0;
    for class in TransformClass::ALL {
        let c = class.index();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (p, l) in probs.iter().zip(labels) {
            if *l == class {
                pos.push(p[c]);
            } else {
                neg.push(p[c]);
            }
        }
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        total += auc(&neg, &pos)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Eval("pretext AUC needs at least two classes".into()));
    }
    Ok(total / used as f64)
}

fn check_balanced(dataset: &[LabeledWindow]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::config("pretext dataset is empty"));
    }
    let mut counts = [0usize; 4];
    for lw in dataset {
        counts[lw.label.index()] += 1;
    }
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::config(format!("pretext classes unbalanced: {counts:?}")));
    }
    Ok(())
}

/// Train from a fresh Glorot initialisation seeded with `cfg.seed`.
pub fn train_pretext(
    dataset: &[LabeledWindow],
    spec: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    let params = init_params(spec, cfg.seed)?;
    train_pretext_from(params, dataset, cfg)
}

/// Continue training `params`. Mini-batches are drawn from a per-epoch
/// shuffle of a ChaCha8 stream (seed `cfg.seed`, stream 1).
pub fn train_pretext_from(
    mut params: ModelParams,
    dataset: &[LabeledWindow],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    check_balanced(dataset)?;
    let want = params.spec().input_len;
    if let Some(bad) = dataset.iter().find(|lw| lw.window.len() != want) {
        return Err(Error::Shape(format!(
            "pretext window of length {} for a network expecting {want}",
            bad.window.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen_probs = Vec::with_capacity(dataset.len());
        let mut seen_labels = Vec::with_capacity(dataset.len());
        for chunk in order.chunks(cfg.batch_size) {
            let labels: Vec<TransformClass> = chunk.iter().map(|&i| dataset[i].label).collect();
            let inputs = chunk.iter().map(|&i| &dataset[i].window.values[..]);
            let (loss, grad, probs) = batch_gradient(&params, inputs, &labels)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(params.as_mut_slice(), &grad, &mut adam, cfg.learning_rate, cfg.decay)?;
            seen_probs.extend(probs);
            seen_labels.extend(labels);
        }
        if params.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("parameters diverged in epoch {epoch}")));
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / dataset.len() as f64,
            auc: pretext_auc(&seen_probs, &seen_labels)?,
        };
        log::debug!("epoch {epoch}: loss {:.5} auc {:.4}", stats.loss, stats.auc);
        trace.epochs.push(stats);
    }
    Ok((params, trace))
}

/// Independent trainings with seeds `cfg.seed`, `cfg.seed + 1`, ...
pub fn train_repeats(
    dataset: &[LabeledWindow],
    spec: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> Result<Vec<(ModelParams, TrainTrace)>> {
    cfg.validate()?;
    (0..cfg.repeats as u64)
        .map(|r| {
            let run = TrainConfig {
                seed: cfg.seed.wrapping_add(r),
                ..cfg.clone()
            };
            train_pretext(dataset, spec, &run)
        })
        .collect()
}

/// Loss and macro AUC of a fixed network on a labelled set.
pub fn evaluate_pretext(params: &ModelParams, dataset: &[LabeledWindow]) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Eval("empty pretext evaluation set".into()));
    }
    let mut probs = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for lw in dataset {
        probs.push(forward_trace(params, &lw.window.values)?.probs);
        labels.push(lw.label);
    }
    let loss = super::cross_entropy_loss(&probs, &labels)?;
    Ok((loss, pretext_auc(&probs, &labels)?))
}
