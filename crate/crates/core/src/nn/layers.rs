//! Raw kernels on channel-major buffers (`[channel][time]`).

use super::ConvSlot;

/// Index range of output positions `t` for which `t + shift` falls inside
/// an input of length `len_in`.
#[inline]
fn valid_range(shift: isize, len_in: usize, len_out: usize) -> (usize, usize) {
    let start = (-shift).max(0) as usize;
    let end = (len_in as isize - shift).min(len_out as isize).max(0) as usize;
    (start.min(end), end)
}

/// Cross-correlation `y[o][t] = b[o] + Σ_i Σ_j w[o][i][j] x[i][t + j - pad]`
/// with implicit zeros outside the input.
pub(crate) fn conv1d_forward(
    params: &[f64],
    slot: &ConvSlot,
    x: &[f64],
    len_in: usize,
    pad_left: usize,
    len_out: usize,
) -> Vec<f64> {
    let k = slot.kernel;
    let w = &params[slot.w..slot.w + slot.w_len()];
    let b = &params[slot.b..slot.b + slot.out_ch];
    let mut y = vec![0.0; slot.out_ch * len_out];
    for o in 0..slot.out_ch {
        let yo = &mut y[o * len_out..(o + 1) * len_out];
        yo.fill(b[o]);
        for i in 0..slot.in_ch {
            let xi = &x[i * len_in..(i + 1) * len_in];
            let wk = &w[(o * slot.in_ch + i) * k..(o * slot.in_ch + i + 1) * k];
            for (j, &wj) in wk.iter().enumerate() {
                let shift = j as isize - pad_left as isize;
                let (t0, t1) = valid_range(shift, len_in, len_out);
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + shift) as usize;
                let src = &xi[s0..s0 + (t1 - t0)];
                for (yv, xv) in yo[t0..t1].iter_mut().zip(src) {
                    *yv += wj * xv;
                }
            }
        }
    }
    y
}

/// Backward pass of [`conv1d_forward`]. Accumulates weight and bias
/// gradients into `grad`; returns the input gradient when `want_dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_backward(
    params: &[f64],
    grad: &mut [f64],
    slot: &ConvSlot,
    x: &[f64],
    dy: &[f64],
    len_in: usize,
    pad_left: usize,
    len_out: usize,
    want_dx: bool,
) -> Option<Vec<f64>> {
    let k = slot.kernel;
    let mut dx = want_dx.then(|| vec![0.0; slot.in_ch * len_in]);
    for o in 0..slot.out_ch {
        let dyo = &dy[o * len_out..(o + 1) * len_out];
        grad[slot.b + o] += dyo.iter().sum::<f64>();
        for i in 0..slot.in_ch {
            let xi = &x[i * len_in..(i + 1) * len_in];
            let base = (o * slot.in_ch + i) * k;
            for j in 0..k {
                let shift = j as isize - pad_left as isize;
                let (t0, t1) = valid_range(shift, len_in, len_out);
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + shift) as usize;
                let n = t1 - t0;
                let dyr = &dyo[t0..t1];
                let dot: f64 = dyr.iter().zip(&xi[s0..s0 + n]).map(|(a, b)| a * b).sum();
                grad[slot.w + base + j] += dot;
                if let Some(dx) = dx.as_mut() {
                    let wj = params[slot.w + base + j];
                    let dxi = &mut dx[i * len_in + s0..i * len_in + s0 + n];
                    for (d, g) in dxi.iter_mut().zip(dyr) {
                        *d += wj * g;
                    }
                }
            }
        }
    }
    dx
}

/// ELU with alpha = 1.
pub(crate) fn elu(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { v } else { v.exp_m1() })
        .collect()
}

/// `dy * elu'(pre)`, using the cached activation for the negative branch.
pub(crate) fn elu_backward(pre: &[f64], act: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(act)
        .zip(dy)
        .map(|((&p, &a), &g)| if p > 0.0 { g } else { g * (a + 1.0) })
        .collect()
}

/// Max-pool, size 2, stride 2, trailing odd element dropped. Returns the
/// pooled values and, per output, the winning input index (first on ties).
pub(crate) fn maxpool2(x: &[f64], channels: usize, len_in: usize) -> (Vec<f64>, Vec<usize>) {
    let len_out = len_in / 2;
    let mut out = Vec::with_capacity(channels * len_out);
    let mut arg = Vec::with_capacity(channels * len_out);
    for c in 0..channels {
        let xc = &x[c * len_in..(c + 1) * len_in];
        for t in 0..len_out {
            let (a, b) = (xc[2 * t], xc[2 * t + 1]);
            if a >= b {
                out.push(a);
                arg.push(c * len_in + 2 * t);
            } else {
                out.push(b);
                arg.push(c * len_in + 2 * t + 1);
            }
        }
    }
    (out, arg)
}

pub(crate) fn maxpool2_backward(argmax: &[usize], dy: &[f64], input_size: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_size];
    for (&idx, &g) in argmax.iter().zip(dy) {
        dx[idx] += g;
    }
    dx
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(in_ch: usize, out_ch: usize, kernel: usize) -> ConvSlot {
        ConvSlot {
            in_ch,
            out_ch,
            kernel,
            w: 0,
            b: out_ch * in_ch * kernel,
        }
    }

    /// Direct definition, no range tricks.
    fn naive(params: &[f64], s: &ConvSlot, x: &[f64], len_in: usize, pad: usize, len_out: usize) -> Vec<f64> {
        let mut y = vec![0.0; s.out_ch * len_out];
        for o in 0..s.out_ch {
            for t in 0..len_out {
                let mut acc = params[s.b + o];
                for i in 0..s.in_ch {
                    for j in 0..s.kernel {
                        let pos = t as isize + j as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < len_in {
                            acc += params[s.w + (o * s.in_ch + i) * s.kernel + j]
                                * x[i * len_in + pos as usize];
                        }
                    }
                }
                y[o * len_out + t] = acc;
            }
        }
        y
    }

    #[test]
    fn conv_matches_naive_definition() {
        for (in_ch, out_ch, k, len_in, same) in [(1, 3, 4, 10, false), (2, 2, 4, 9, true), (3, 1, 5, 7, true), (2, 2, 8, 5, true)] {
            let s = slot(in_ch, out_ch, k);
            let params: Vec<f64> = (0..s.b + out_ch).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
            let x: Vec<f64> = (0..in_ch * len_in).map(|i| ((i * 13 % 7) as f64 - 3.0) / 3.0).collect();
            let (pad, len_out) = if same { ((k - 1) / 2, len_in) } else { (0, len_in + 1 - k) };
            let fast = conv1d_forward(&params, &s, &x, len_in, pad, len_out);
            let slow = naive(&params, &s, &x, len_in, pad, len_out);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxpool_drops_trailing_element_and_prefers_first_max() {
        let (out, arg) = maxpool2(&[1.0, 1.0, 3.0, 2.0, 9.0], 1, 5);
        assert_eq!(out, vec![1.0, 3.0]);
        assert_eq!(arg, vec![0, 2]);
        let dx = maxpool2_backward(&arg, &[1.0, 2.0], 5);
        assert_eq!(dx, vec![1.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let p = softmax(&[1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] >= 0.0);
    }

    #[test]
    fn elu_values() {
        let pre = [-1.0, 0.0, 2.0];
        let act = elu(&pre);
        assert!((act[0] - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(act[1], 0.0);
        assert_eq!(act[2], 2.0);
        let g = elu_backward(&pre, &act, &[1.0, 1.0, 1.0]);
        assert!((g[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g[2], 1.0);
    }
}
