use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Window;
use crate::error::{Error, Result};

/// Frequency-domain resampling to `target_len` samples.
///
/// The spectrum is truncated or zero-padded around DC. For an even shared
/// length the Nyquist bin is folded (downsampling) or split in half
/// (upsampling) so the result stays real. The output is scaled by
/// `target_len / source_len` so sinusoid amplitudes are preserved.
pub fn fourier_resample(w: &Window, target_len: usize) -> Result<Window> {
    Ok(w.with_values(resample_slice(&w.values, target_len)?))
}

pub(crate) fn resample_slice(x: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::config("cannot resample an empty window"));
    }
    if target_len < 2 {
        return Err(Error::config(format!("target length {target_len} < 2")));
    }
    if n == target_len {
        return Ok(x.to_vec());
    }

    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);

    let m = target_len;
    let shared = n.min(m);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    // Bins strictly below the shared Nyquist frequency on both sides.
    let half = (shared - 1) / 2;
    out[0] = spec[0];
    for k in 1..=half {
        out[k] = spec[k];
        out[m - k] = spec[n - k];
    }
    if shared % 2 == 0 {
        let k = shared / 2;
        if m < n {
            out[k] = spec[k] + spec[n - k];
        } else {
            out[k] = spec[k] * 0.5;
            out[m - k] = spec[k] * 0.5;
        }
    }

    planner.plan_fft_inverse(m).process(&mut out);
    let scale = 1.0 / n as f64;
    Ok(out.iter().map(|c| c.re * scale).collect())
}
