//! Encoder-classifier network for the reversal-classification pretext task.
//!
//! Layout (defaults in brackets):
//!
//! ```text
//! input (1 × 512)
//! conv, valid, kernel 64, 32 channels          -> 449 × 32   (no activation)
//! 5 × [conv same + ELU, conv same + ELU, max-pool 2]
//!                                              -> 224, 112, 56, 28, 14
//! flatten                                      -> 448
//! dense + ReLU                                 -> latent (64)
//! dense + softmax                              -> 4 class probabilities
//! ```
//!
//! Everything runs in `f64`. Parameters live in one flat buffer described by
//! [`Layout`]; gradients and optimiser state share that layout.

mod checkpoint;
mod layers;
mod model;
mod optim;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use model::{
    backward, cross_entropy_loss, encode, forward, forward_trace, ForwardOutput, ForwardTrace,
    Representation,
};
pub use optim::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use train::{
    evaluate_pretext, pretext_auc, train_pretext, train_pretext_from, train_repeats, EpochStats,
    TrainConfig, TrainTrace,
};

/// Architectural knobs. The defaults reproduce the published network; the
/// other knobs exist so tests and desk-scale runs can shrink it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_len: usize,
    pub kernel: usize,
    pub channels: usize,
    pub blocks: usize,
    pub latent_dim: usize,
    pub n_classes: usize,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self {
            input_len: 512,
            kernel: 64,
            channels: 32,
            blocks: 5,
            latent_dim: 64,
            n_classes: 4,
        }
    }
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.channels == 0 || self.latent_dim == 0 || self.n_classes < 2 {
            return Err(Error::config(format!("degenerate architecture {self:?}")));
        }
        if self.input_len < self.kernel {
            return Err(Error::config(format!(
                "input length {} shorter than kernel {}",
                self.input_len, self.kernel
            )));
        }
        if self.final_len() == 0 {
            return Err(Error::config(format!(
                "{} pooling blocks reduce length {} to zero",
                self.blocks,
                self.head_len()
            )));
        }
        Ok(())
    }

    /// Length after the unpadded head convolution.
    pub fn head_len(&self) -> usize {
        self.input_len + 1 - self.kernel
    }

    /// Sequence length entering each block, followed by the final length.
    pub fn stage_lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.head_len()];
        for _ in 0..self.blocks {
            let last = *lens.last().unwrap();
            lens.push(last / 2);
        }
        lens
    }

    pub fn final_len(&self) -> usize {
        *self.stage_lengths().last().unwrap()
    }

    pub fn flat_len(&self) -> usize {
        self.final_len() * self.channels
    }

    /// (length, channels) after the head convolution and after each pool.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.stage_lengths()
            .into_iter()
            .map(|l| (l, self.channels))
            .collect()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// "same" padding split for the block convolutions: the extra sample
    /// goes on the right for even kernels.
    pub(crate) fn same_pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

/// Offsets of one convolution layer inside the flat parameter buffer.
/// Weights are stored `[out][in][k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSlot {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub w: usize,
    pub b: usize,
}

impl ConvSlot {
    pub fn w_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.w_len() + self.out_ch
    }
}

/// Offsets of a dense layer; weights stored `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSlot {
    pub inputs: usize,
    pub outputs: usize,
    pub w: usize,
    pub b: usize,
}

impl DenseSlot {
    pub fn w_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.w_len() + self.outputs
    }
}

/// Where every tensor lives in the flat parameter vector. `convs[0]` is the
/// head; block `i` uses `convs[1 + 2i]` and `convs[2 + 2i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub convs: Vec<ConvSlot>,
    pub latent: DenseSlot,
    pub output: DenseSlot,
    pub total: usize,
}

impl Layout {
    fn new(spec: &ArchitectureSpec) -> Self {
        let mut offset = 0;
        let mut conv = |in_ch: usize| {
            let w = offset;
            let b = w + spec.channels * in_ch * spec.kernel;
            offset = b + spec.channels;
            ConvSlot {
                in_ch,
                out_ch: spec.channels,
                kernel: spec.kernel,
                w,
                b,
            }
        };
        let mut convs = vec![conv(1)];
        for _ in 0..2 * spec.blocks {
            convs.push(conv(spec.channels));
        }
        let mut dense = |inputs: usize, outputs: usize| {
            let w = offset;
            let b = w + inputs * outputs;
            offset = b + outputs;
            DenseSlot { inputs, outputs, w, b }
        };
        let latent = dense(spec.flat_len(), spec.latent_dim);
        let output = dense(spec.latent_dim, spec.n_classes);
        Self {
            convs,
            latent,
            output,
            total: offset,
        }
    }

    /// (fan_in, fan_out, weight range) for every weight tensor, in order.
    fn weight_tensors(&self) -> Vec<(usize, usize, std::ops::Range<usize>)> {
        let mut out: Vec<_> = self
            .convs
            .iter()
            .map(|c| (c.in_ch * c.kernel, c.out_ch * c.kernel, c.w..c.w + c.w_len()))
            .collect();
        for d in [self.latent, self.output] {
            out.push((d.inputs, d.outputs, d.w..d.w + d.w_len()));
        }
        out
    }
}

/// All trainable parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ArchitectureSpec,
    layout: Layout,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(spec: &ArchitectureSpec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(Self {
            spec: spec.clone(),
            data: vec![0.0; layout.total],
            layout,
        })
    }

    pub fn from_vec(spec: &ArchitectureSpec, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        if data.len() != p.data.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                p.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite parameter".into()));
        }
        p.data = data;
        Ok(p)
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Glorot-uniform weights, zero biases, drawn from a ChaCha8 stream seeded
/// with `seed` in layout order.
pub fn init_params(spec: &ArchitectureSpec, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (fan_in, fan_out, range) in params.layout.weight_tensors() {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut params.data[range] {
            *v = rng.random_range(-limit..limit);
        }
    }
    Ok(params)
}
