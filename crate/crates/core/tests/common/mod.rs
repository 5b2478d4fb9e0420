//! Oracles shared by the oracle suites and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use ppg_anomaly::augment::TransformClass;
use ppg_anomaly::dsp::Window;
use ppg_anomaly::nn::{backward, init_params, ArchitectureSpec, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Polynomial product, coefficients lowest power first.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(p: &[f64], n: usize) -> Vec<f64> {
    (0..n).fold(vec![1.0], |acc, _| poly_mul(&acc, p))
}

/// Oracle: H(s) = bw^2 s^2 / D(s) with D the second-order Butterworth
/// prototype after s -> (s^2 + w0^2) / (bw s), then s = K (z-1)/(z+1).
pub fn oracle_bandpass(low: f64, high: f64, fs: f64) -> ([f64; 5], [f64; 5]) {
    let k = 2.0 * fs;
    let w1 = k * (PI * low / fs).tan();
    let w2 = k * (PI * high / fs).tan();
    let bw = w2 - w1;
    let w0sq = w1 * w2;
    // Analog numerator and denominator, coefficient of s^j at index j.
    let num_s = [0.0, 0.0, bw * bw, 0.0, 0.0];
    let den_s = [
        w0sq * w0sq,
        SQRT_2 * bw * w0sq,
        2.0 * w0sq + bw * bw,
        SQRT_2 * bw,
        1.0,
    ];
    let zm1 = [-1.0, 1.0]; // z - 1
    let zp1 = [1.0, 1.0]; // z + 1
    let map = |c: &[f64; 5]| {
        let mut acc = vec![0.0; 5];
        for (j, &cj) in c.iter().enumerate() {
            let term = poly_mul(&poly_pow(&zm1, j), &poly_pow(&zp1, 4 - j));
            for (i, t) in term.iter().enumerate() {
                acc[i] += cj * k.powi(j as i32) * t;
            }
        }
        acc
    };
    // Lowest power of z first; reversing gives descending powers, i.e.
    // ascending powers of z^-1 once divided by z^4.
    let mut num = map(&num_s);
    let mut den = map(&den_s);
    num.reverse();
    den.reverse();
    let a0 = den[0];
    let mut b = [0.0; 5];
    let mut a = [0.0; 5];
    for i in 0..5 {
        b[i] = num[i] / a0;
        a[i] = den[i] / a0;
    }
    (b, a)
}

pub const EPS: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-5;
/// Below this magnitude both gradients count as zero and the absolute
/// difference is compared instead.
pub const ZERO_FLOOR: f64 = 1e-6;

pub fn tiny_spec(latent_dim: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        input_len: 16,
        kernel: 3,
        channels: 2,
        blocks: 1,
        latent_dim,
        n_classes: 4,
    }
}

fn loss_at(params: &ModelParams, batch: &[Window], labels: &[TransformClass]) -> f64 {
    backward(params, batch, labels).unwrap().0
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < ZERO_FLOOR {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Worst gradient error over all parameters of one random tiny network.
pub fn gradient_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let spec = tiny_spec(2 + (seed as usize % 5));
    let mut params = init_params(&spec, seed).unwrap();
    // Non-zero biases so every code path is exercised.
    for v in params.as_mut_slice() {
        *v += rng.random_range(-0.1..0.1);
    }
    let batch: Vec<Window> = (0..3)
        .map(|_| Window::from_values((0..16).map(|_| rng.random_range(-2.0..2.0)).collect()))
        .collect();
    let labels: Vec<TransformClass> = (0..3)
        .map(|_| TransformClass::ALL[rng.random_range(0..4)])
        .collect();

    let (_, grad) = backward(&params, &batch, &labels).unwrap();
    assert_eq!(grad.len(), params.len());
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params.as_slice()[i];
        params.as_mut_slice()[i] = orig + EPS;
        let up = loss_at(&params, &batch, &labels);
        params.as_mut_slice()[i] = orig - EPS;
        let down = loss_at(&params, &batch, &labels);
        params.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * EPS);
        worst = worst.max(rel_err(grad[i], numeric));
    }
    worst
}

