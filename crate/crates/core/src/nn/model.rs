use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv1d_backward, conv1d_forward, elu, elu_backward, maxpool2, maxpool2_backward, softmax,
};
use super::ModelParams;
use crate::augment::TransformClass;
use crate::dsp::Window;
use crate::error::{Error, Result};

/// Latent vector produced by the frozen encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub values: Vec<f64>,
}

impl AsRef<[f64]> for Representation {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

struct BlockCache {
    input: Vec<f64>,
    len: usize,
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    argmax: Vec<usize>,
}

/// Every intermediate of one forward pass, kept for backpropagation.
pub struct ForwardTrace {
    input: Vec<f64>,
    head: Vec<f64>,
    blocks: Vec<BlockCache>,
    flat: Vec<f64>,
    latent_pre: Vec<f64>,
    pub latent: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    channels: usize,
}

impl ForwardTrace {
    /// (length, channels) after the head convolution and after each pool.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(self.head.len() / self.channels, self.channels)];
        for b in &self.blocks {
            out.push((b.len / 2, self.channels));
        }
        out
    }

    pub fn flat_len(&self) -> usize {
        self.flat.len()
    }
}

fn check_len(params: &ModelParams, values: &[f64]) -> Result<()> {
    let want = params.spec().input_len;
    if values.len() != want {
        return Err(Error::Shape(format!(
            "window has {} samples, network expects {want}",
            values.len()
        )));
    }
    Ok(())
}

fn dense(params: &[f64], w: usize, b: usize, inputs: usize, x: &[f64], outputs: usize) -> Vec<f64> {
    (0..outputs)
        .map(|o| {
            let row = &params[w + o * inputs..w + (o + 1) * inputs];
            params[b + o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
        })
        .collect()
}

pub fn forward_trace(params: &ModelParams, values: &[f64]) -> Result<ForwardTrace> {
    check_len(params, values)?;
    let spec = params.spec();
    let layout = params.layout();
    let p = params.as_slice();
    let ch = spec.channels;
    let pad = spec.same_pad_left();

    let head_len = spec.head_len();
    let head = conv1d_forward(p, &layout.convs[0], values, spec.input_len, 0, head_len);

    let mut blocks = Vec::with_capacity(spec.blocks);
    let mut current = head.clone();
    let mut len = head_len;
    for bi in 0..spec.blocks {
        let c1 = &layout.convs[1 + 2 * bi];
        let c2 = &layout.convs[2 + 2 * bi];
        let pre1 = conv1d_forward(p, c1, &current, len, pad, len);
        let act1 = elu(&pre1);
        let pre2 = conv1d_forward(p, c2, &act1, len, pad, len);
        let act2 = elu(&pre2);
        let (pooled, argmax) = maxpool2(&act2, ch, len);
        blocks.push(BlockCache {
            input: std::mem::replace(&mut current, pooled),
            len,
            pre1,
            act1,
            pre2,
            act2,
            argmax,
        });
        len /= 2;
    }

    let flat = current;
    let lat = layout.latent;
    let latent_pre = dense(p, lat.w, lat.b, lat.inputs, &flat, lat.outputs);
    let latent: Vec<f64> = latent_pre.iter().map(|&v| v.max(0.0)).collect();
    let out = layout.output;
    let logits = dense(p, out.w, out.b, out.inputs, &latent, out.outputs);
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        input: values.to_vec(),
        head,
        blocks,
        flat,
        latent_pre,
        latent,
        logits,
        probs,
        channels: ch,
    })
}

/// Accumulate `d loss / d params` for one sample given `d loss / d logits`.
fn backward_trace(params: &ModelParams, trace: &ForwardTrace, dlogits: &[f64], grad: &mut [f64]) {
    let spec = params.spec();
    let layout = params.layout();
    let p = params.as_slice();
    let pad = spec.same_pad_left();

    let out = layout.output;
    let mut dlatent = vec![0.0; out.inputs];
    for (o, &g) in dlogits.iter().enumerate() {
        grad[out.b + o] += g;
        let row = out.w + o * out.inputs;
        for j in 0..out.inputs {
            grad[row + j] += g * trace.latent[j];
            dlatent[j] += p[row + j] * g;
        }
    }
    for (d, &pre) in dlatent.iter_mut().zip(&trace.latent_pre) {
        if pre <= 0.0 {
            *d = 0.0;
        }
    }

    let lat = layout.latent;
    let mut dflat = vec![0.0; lat.inputs];
    for (o, &g) in dlatent.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad[lat.b + o] += g;
        let row = lat.w + o * lat.inputs;
        let grow = &mut grad[row..row + lat.inputs];
        for (gw, &x) in grow.iter_mut().zip(&trace.flat) {
            *gw += g * x;
        }
        for (d, &w) in dflat.iter_mut().zip(&p[row..row + lat.inputs]) {
            *d += w * g;
        }
    }

    let mut dcur = dflat;
    for (bi, b) in trace.blocks.iter().enumerate().rev() {
        let c1 = &layout.convs[1 + 2 * bi];
        let c2 = &layout.convs[2 + 2 * bi];
        let dact2 = maxpool2_backward(&b.argmax, &dcur, b.act2.len());
        let dpre2 = elu_backward(&b.pre2, &b.act2, &dact2);
        let dact1 = conv1d_backward(p, grad, c2, &b.act1, &dpre2, b.len, pad, b.len, true)
            .expect("input gradient requested");
        let dpre1 = elu_backward(&b.pre1, &b.act1, &dact1);
        dcur = conv1d_backward(p, grad, c1, &b.input, &dpre1, b.len, pad, b.len, true)
            .expect("input gradient requested");
    }

    conv1d_backward(
        p,
        grad,
        &layout.convs[0],
        &trace.input,
        &dcur,
        spec.input_len,
        0,
        spec.head_len(),
        false,
    );
}

/// Batch outputs: latent vectors and class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub latents: Vec<Representation>,
    pub probs: Vec<Vec<f64>>,
}

pub fn forward(params: &ModelParams, batch: &[Window]) -> Result<ForwardOutput> {
    let traces: Vec<ForwardTrace> = batch
        .par_iter()
        .map(|w| forward_trace(params, &w.values))
        .collect::<Result<_>>()?;
    let mut latents = Vec::with_capacity(traces.len());
    let mut probs = Vec::with_capacity(traces.len());
    for t in traces {
        latents.push(Representation { values: t.latent });
        probs.push(t.probs);
    }
    Ok(ForwardOutput { latents, probs })
}

/// Mean categorical cross-entropy with probabilities floored at 1e-12.
pub fn cross_entropy_loss(probs: &[Vec<f64>], labels: &[TransformClass]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probability rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, l)| -p[l.index()].max(1e-12).ln())
        .sum();
    Ok(total / probs.len() as f64)
}

/// Loss and gradient of the mean cross-entropy over `batch`.
pub fn backward(
    params: &ModelParams,
    batch: &[Window],
    labels: &[TransformClass],
) -> Result<(f64, Vec<f64>)> {
    let (loss, grad, _) = batch_gradient(params, batch.iter().map(|w| &w.values[..]), labels)?;
    Ok((loss, grad))
}

/// Shared by [`backward`] and the trainer: mean loss, gradient, and the
/// per-sample probabilities seen on the way.
pub(crate) fn batch_gradient<'a>(
    params: &ModelParams,
    inputs: impl ExactSizeIterator<Item = &'a [f64]>,
    labels: &[TransformClass],
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs for {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let n = labels.len();
    let mut grad = vec![0.0; params.len()];
    if n == 0 {
        return Ok((0.0, grad, Vec::new()));
    }
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut probs = Vec::with_capacity(n);
    for (x, label) in inputs.zip(labels) {
        let trace = forward_trace(params, x)?;
        let target = label.index();
        loss -= trace.probs[target].max(1e-12).ln();
        let dlogits: Vec<f64> = trace
            .probs
            .iter()
            .enumerate()
            .map(|(c, &pc)| (pc - if c == target { 1.0 } else { 0.0 }) * scale)
            .collect();
        backward_trace(params, &trace, &dlogits, &mut grad);
        probs.push(trace.probs);
    }
    Ok((loss * scale, grad, probs))
}

/// Latent vectors only; the classifier head is not evaluated.
pub fn encode(params: &ModelParams, windows: &[Window]) -> Result<Vec<Representation>> {
    windows
        .par_iter()
        .map(|w| {
            forward_trace(params, &w.values).map(|t| Representation { values: t.latent })
        })
        .collect()
}
