use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix4, Vector4};
use rustfft::num_complex::Complex64;

use super::TimeSeries;
use crate::error::{Error, Result};

/// Fourth-order IIR band-pass (second-order Butterworth per band edge).
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    pub b: [f64; 5],
    pub a: [f64; 5],
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs: f64,
}

impl BandpassFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.fs;
        let zinv = Complex64::from_polar(1.0, -w);
        let eval = |c: &[f64; 5]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * zinv + ci)
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Roots of the denominator polynomial, from the companion matrix.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut companion = DMatrix::<f64>::zeros(4, 4);
        for j in 0..4 {
            companion[(0, j)] = -self.a[j + 1] / self.a[0];
        }
        for i in 1..4 {
            companion[(i, i - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Steady-state initial conditions for a unit step, in transposed
    /// direct-form II state order.
    fn step_initial_state(&self) -> [f64; 4] {
        // (I - A^T) zi = b[1:] - a[1:] * b[0], with A the companion matrix.
        let mut m = Matrix4::<f64>::identity();
        for i in 0..4 {
            m[(i, 0)] += self.a[i + 1];
        }
        for i in 0..3 {
            m[(i, i + 1)] -= 1.0;
        }
        let rhs = Vector4::from_fn(|i, _| self.b[i + 1] - self.a[i + 1] * self.b[0]);
        let zi = m.lu().solve(&rhs).unwrap_or_else(Vector4::zeros);
        [zi[0], zi[1], zi[2], zi[3]]
    }

    fn run(&self, x: &[f64], mut state: [f64; 4]) -> Vec<f64> {
        let (b, a) = (&self.b, &self.a);
        x.iter()
            .map(|&xn| {
                let y = b[0] * xn + state[0];
                state[0] = b[1] * xn + state[1] - a[1] * y;
                state[1] = b[2] * xn + state[2] - a[2] * y;
                state[2] = b[3] * xn + state[3] - a[3] * y;
                state[3] = b[4] * xn - a[4] * y;
                y
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering of a raw slice.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.b.len()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_initial_state();
        let scaled = |s: f64| zi.map(|z| z * s);

        let mut y = self.run(&ext, scaled(ext[0]));
        y.reverse();
        let mut y = self.run(&y, scaled(y[0]));
        y.reverse();
        y.drain(..pad);
        y.truncate(n);
        y
    }
}

/// Butterworth band-pass design: analog prototype, low-pass to band-pass
/// transform, then bilinear transform with pre-warped band edges.
pub fn design_butterworth_bandpass(low_hz: f64, high_hz: f64, fs: f64) -> Result<BandpassFilter> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::config(format!("sampling rate must be positive, got {fs}")));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(Error::config(format!(
            "band {low_hz}:{high_hz} Hz invalid for fs = {fs} Hz (need 0 < low < high < {})",
            fs / 2.0
        )));
    }

    let fs2 = 2.0 * fs;
    let w_lo = fs2 * (PI * low_hz / fs).tan();
    let w_hi = fs2 * (PI * high_hz / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    // Second-order prototype poles -e^{±jπ/4}.
    let proto = [
        Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    ];
    let mut analog_poles = Vec::with_capacity(4);
    for p in proto {
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        analog_poles.push(half + disc);
        analog_poles.push(half - disc);
    }
    // Two analog zeros at s = 0, gain bw^2.
    let analog_zeros = [Complex64::new(0.0, 0.0); 2];
    let analog_gain = bw * bw;

    let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);
    let mut zeros: Vec<Complex64> = analog_zeros.iter().map(|&z| bilinear(z)).collect();
    zeros.extend([Complex64::new(-1.0, 0.0); 2]);
    let poles: Vec<Complex64> = analog_poles.iter().map(|&p| bilinear(p)).collect();

    let num: Complex64 = analog_zeros.iter().map(|&z| fs2 - z).product();
    let den: Complex64 = analog_poles.iter().map(|&p| fs2 - p).product();
    let gain = analog_gain * (num / den).re;

    let b_poly = poly_from_roots(&zeros);
    let a_poly = poly_from_roots(&poles);
    let mut b = [0.0; 5];
    let mut a = [0.0; 5];
    for i in 0..5 {
        b[i] = gain * b_poly[i].re;
        a[i] = a_poly[i].re;
    }
    Ok(BandpassFilter {
        b,
        a,
        low_hz,
        high_hz,
        fs,
    })
}

/// Monic polynomial coefficients (highest power first) with the given roots.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Zero-phase band-pass filtering of a recording.
///
/// The signal is extended at both ends by odd reflection (15 samples, or
/// fewer for very short inputs), run forward and backward with steady-state
/// initial conditions, then trimmed back to its original length.
pub fn apply_filter(filter: &BandpassFilter, ts: &TimeSeries) -> Result<TimeSeries> {
    if (ts.fs() - filter.fs).abs() > 1e-9 * filter.fs {
        return Err(Error::config(format!(
            "filter designed for {} Hz applied to a {} Hz recording",
            filter.fs,
            ts.fs()
        )));
    }
    Ok(ts.with_samples(filter.filtfilt(ts.samples())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Activity;

    #[test]
    fn rejects_invalid_bands() {
        assert!(design_butterworth_bandpass(5.0, 5.0, 100.0).is_err());
        assert!(design_butterworth_bandpass(6.0, 5.0, 100.0).is_err());
        assert!(design_butterworth_bandpass(1.0, 50.0, 100.0).is_err());
        assert!(design_butterworth_bandpass(0.0, 10.0, 100.0).is_err());
        assert!(design_butterworth_bandpass(1.0, 10.0, -1.0).is_err());
    }

    #[test]
    fn blocks_dc() {
        for (lo, hi, fs) in [(0.35, 20.0, 500.0), (0.1, 10.0, 64.0), (1.0, 3.0, 10.0)] {
            let f = design_butterworth_bandpass(lo, hi, fs).unwrap();
            assert!(f.response(0.0).norm() < 1e-12);
            assert!(f.is_stable());
        }
    }

    #[test]
    fn fs_mismatch_is_an_error() {
        let f = design_butterworth_bandpass(0.1, 10.0, 64.0).unwrap();
        let ts = TimeSeries::new(vec![0.0; 100], 100.0, "s", Activity::Sitting).unwrap();
        assert!(matches!(apply_filter(&f, &ts), Err(Error::Config(_))));
    }

    #[test]
    fn zero_in_zero_out() {
        let f = design_butterworth_bandpass(0.35, 20.0, 500.0).unwrap();
        let ts = TimeSeries::new(vec![0.0; 1000], 500.0, "s", Activity::Sitting).unwrap();
        let out = apply_filter(&f, &ts).unwrap();
        assert_eq!(out.len(), 1000);
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_inputs_do_not_panic() {
        let f = design_butterworth_bandpass(0.35, 20.0, 500.0).unwrap();
        assert_eq!(f.filtfilt(&[1.0]).len(), 1);
        assert_eq!(f.filtfilt(&[1.0, 2.0, 3.0]).len(), 3);
        assert!(f.filtfilt(&[]).is_empty());
    }
}
