//! Parametric PPG generator.
//!
//! Each beat is a systolic Gaussian pulse followed by a smaller, wider
//! diastolic one. Beat periods are jittered, a slow respiratory baseline is
//! added, and walking recordings additionally get a raised heart rate,
//! cadence-locked baseline wander, amplitude modulation and short noise
//! bursts.
//!
//! Randomness comes from `ChaCha8Rng`. For a recording with seed `s`, beat
//! timing and sensor noise use stream 0 of `seed_from_u64(s)`; the motion
//! terms use stream 1 and the fidget artefacts, present in every activity,
//! use stream 2. Cohort profiles are drawn from `seed_from_u64(seed)`
//! in subject order, and recording `k` of subject `i` (sitting `k = 0`,
//! walking `k = 1`) is generated with seed `seed ^ ((i·2 + k + 1)·φ)`, where
//! φ = 0x9E3779B97F4A7C15.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{write_samples, DatasetManifest, RecordEntry};
use crate::dsp::{Activity, TimeSeries};
use crate::error::{Error, Result};

/// Motion artefact settings, used for walking recordings only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Baseline wander amplitude, relative to the systolic peak.
    pub wander_amp: f64,
    /// Step cadence driving the wander and amplitude modulation.
    pub wander_hz: f64,
    pub am_depth: f64,
    /// Noise bursts per second.
    pub burst_rate: f64,
    pub burst_sigma: f64,
    pub hr_increase_bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub heart_rate_bpm: f64,
    /// Standard deviation of the beat period, as a fraction of the period.
    pub hr_variability: f64,
    /// Gaussian widths and delays in seconds.
    pub systolic_width: f64,
    pub diastolic_width: f64,
    pub diastolic_delay: f64,
    pub diastolic_amplitude: f64,
    pub resp_amp: f64,
    pub resp_hz: f64,
    pub noise_sigma: f64,
    /// Standard deviation of per-beat amplitude, relative to the mean.
    pub beat_amp_variability: f64,
    /// Short artefacts from small movements, present in every activity.
    pub fidget_rate: f64,
    pub fidget_sigma: f64,
    pub motion: MotionProfile,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        Self {
            heart_rate_bpm: 70.0,
            hr_variability: 0.03,
            systolic_width: 0.08,
            diastolic_width: 0.14,
            diastolic_delay: 0.32,
            diastolic_amplitude: 0.5,
            resp_amp: 0.1,
            resp_hz: 0.25,
            noise_sigma: 0.03,
            beat_amp_variability: 0.1,
            fidget_rate: 0.05,
            fidget_sigma: 0.4,
            motion: MotionProfile {
                wander_amp: 0.5,
                wander_hz: 1.8,
                am_depth: 0.3,
                burst_rate: 0.2,
                burst_sigma: 0.8,
                hr_increase_bpm: 20.0,
            },
        }
    }
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        if !(40.0..=200.0).contains(&self.heart_rate_bpm) {
            return Err(Error::config(format!(
                "heart rate {} bpm outside [40, 200]",
                self.heart_rate_bpm
            )));
        }
        let m = &self.motion;
        let positive = [
            self.hr_variability,
            self.systolic_width,
            self.diastolic_width,
            self.diastolic_delay,
            self.diastolic_amplitude,
            self.resp_amp,
            self.resp_hz,
            self.noise_sigma,
            self.beat_amp_variability,
            self.fidget_rate,
            self.fidget_sigma,
            m.wander_amp,
            m.wander_hz,
            m.am_depth,
            m.burst_rate,
            m.burst_sigma,
            m.hr_increase_bpm,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("synthetic profile parameters must be positive"));
        }
        if m.am_depth >= 1.0 || self.hr_variability >= 0.5 {
            return Err(Error::config("am_depth and hr_variability must be below 1 and 0.5"));
        }
        Ok(())
    }

    fn heart_rate_for(&self, activity: &Activity) -> f64 {
        match activity {
            Activity::Walking => (self.heart_rate_bpm + self.motion.hr_increase_bpm).min(200.0),
            _ => self.heart_rate_bpm,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Draw a profile from the ranges used for synthetic cohorts.
pub fn random_profile(rng: &mut ChaCha8Rng) -> SubjectProfile {
    SubjectProfile {
        heart_rate_bpm: uniform(rng, 55.0, 85.0),
        hr_variability: uniform(rng, 0.02, 0.05),
        systolic_width: uniform(rng, 0.06, 0.11),
        diastolic_width: uniform(rng, 0.10, 0.20),
        diastolic_delay: uniform(rng, 0.22, 0.40),
        diastolic_amplitude: uniform(rng, 0.25, 0.75),
        resp_amp: uniform(rng, 0.05, 0.15),
        resp_hz: uniform(rng, 0.18, 0.30),
        noise_sigma: uniform(rng, 0.02, 0.05),
        beat_amp_variability: uniform(rng, 0.05, 0.2),
        fidget_rate: uniform(rng, 0.03, 0.1),
        fidget_sigma: uniform(rng, 0.2, 0.6),
        motion: MotionProfile {
            wander_amp: uniform(rng, 0.3, 0.8),
            wander_hz: uniform(rng, 1.5, 2.0),
            am_depth: uniform(rng, 0.2, 0.4),
            burst_rate: uniform(rng, 0.1, 0.3),
            burst_sigma: uniform(rng, 0.5, 1.0),
            hr_increase_bpm: uniform(rng, 15.0, 30.0),
        },
    }
}

fn add_gaussian(out: &mut [f64], fs: f64, center: f64, width: f64, amp: f64) {
    let lo = ((center - 5.0 * width) * fs).floor().max(0.0) as usize;
    let hi = (((center + 5.0 * width) * fs).ceil().max(0.0) as usize).min(out.len());
    for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
        let z = (i as f64 / fs - center) / width;
        *o += amp * (-0.5 * z * z).exp();
    }
}

/// Half-sine-windowed white noise bursts of 0.3 to 1 s with exponential gaps.
fn add_bursts(x: &mut [f64], fs: f64, rate: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = x.len();
    let duration_s = n as f64 / fs;
    let gaps = Exp::new(rate).map_err(|e| Error::config(e.to_string()))?;
    let mut tb = gaps.sample(rng);
    while tb < duration_s {
        let dur = uniform(rng, 0.3, 1.0);
        let lo = (tb * fs) as usize;
        let hi = (((tb + dur) * fs) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let env = (PI * (i as f64 / fs - tb) / dur).sin();
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * env * z;
        }
        tb += dur + gaps.sample(rng);
    }
    Ok(())
}

pub fn synth_subject(
    profile: &SubjectProfile,
    activity: &Activity,
    duration_s: f64,
    fs: f64,
    seed: u64,
    subject_id: &str,
) -> Result<TimeSeries> {
    profile.validate()?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::config(format!("sampling rate must be positive, got {fs}")));
    }
    let hr = profile.heart_rate_for(activity);
    let period = 60.0 / hr;
    if !(duration_s >= period) {
        return Err(Error::config(format!(
            "duration {duration_s} s shorter than one beat ({period:.3} s)"
        )));
    }
    let n = (duration_s * fs).round() as usize;
    let mut x = vec![0.0; n];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lead = 3.0 * profile.systolic_width;
    let mut t = -period * rng.random::<f64>();
    while t < duration_s + period {
        let sys = t + lead;
        let g: f64 = rng.sample(StandardNormal);
        let amp = (1.0 + profile.beat_amp_variability * g).max(0.2);
        add_gaussian(&mut x, fs, sys, profile.systolic_width, amp);
        add_gaussian(
            &mut x,
            fs,
            sys + profile.diastolic_delay,
            profile.diastolic_width,
            amp * profile.diastolic_amplitude,
        );
        let jitter: f64 = rng.sample(StandardNormal);
        t += period * (1.0 + profile.hr_variability * jitter).clamp(0.5, 1.5);
    }
    let resp_phase = 2.0 * PI * rng.random::<f64>();
    for (i, v) in x.iter_mut().enumerate() {
        let ti = i as f64 / fs;
        let noise: f64 = rng.sample(StandardNormal);
        *v += profile.resp_amp * (2.0 * PI * profile.resp_hz * ti + resp_phase).sin()
            + profile.noise_sigma * noise;
    }

    if *activity == Activity::Walking {
        let m = &profile.motion;
        let mut mrng = ChaCha8Rng::seed_from_u64(seed);
        mrng.set_stream(1);
        let ph_w = 2.0 * PI * mrng.random::<f64>();
        let ph_a = 2.0 * PI * mrng.random::<f64>();
        for (i, v) in x.iter_mut().enumerate() {
            let ti = i as f64 / fs;
            let am = 1.0 + m.am_depth * (2.0 * PI * m.wander_hz * ti + ph_a).sin();
            *v = *v * am + m.wander_amp * (2.0 * PI * m.wander_hz * ti + ph_w).sin();
        }
        add_bursts(&mut x, fs, m.burst_rate, m.burst_sigma, &mut mrng)?;
    }
    let mut frng = ChaCha8Rng::seed_from_u64(seed);
    frng.set_stream(2);
    add_bursts(&mut x, fs, profile.fidget_rate, profile.fidget_sigma, &mut frng)?;
    TimeSeries::new(x, fs, subject_id, activity.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub fs: f64,
    pub band: (f64, f64),
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_subjects: 5,
            seed: 0,
            duration_s: 120.0,
            fs: 64.0,
            band: (0.1, 10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub profiles: Vec<(String, SubjectProfile)>,
    /// Sitting then walking for each subject, in subject order.
    pub series: Vec<TimeSeries>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn subject_id(i: usize) -> String {
    format!("S{:02}", i + 1)
}

pub fn make_synthetic_cohort(cfg: &CohortConfig) -> Result<SyntheticCohort> {
    if cfg.n_subjects == 0 {
        return Err(Error::config("a cohort needs at least one subject"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profiles: Vec<(String, SubjectProfile)> =
        (0..cfg.n_subjects).map(|i| (subject_id(i), random_profile(&mut rng))).collect();
    let mut series = Vec::with_capacity(2 * cfg.n_subjects);
    for (i, (id, p)) in profiles.iter().enumerate() {
        for (k, act) in [Activity::Sitting, Activity::Walking].iter().enumerate() {
            let s = cfg.seed ^ ((i as u64 * 2 + k as u64 + 1).wrapping_mul(GOLDEN));
            series.push(synth_subject(p, act, cfg.duration_s, cfg.fs, s, id)?);
        }
    }
    Ok(SyntheticCohort { profiles, series })
}

impl SyntheticCohort {
    /// Write one sample file per recording plus `manifest.json`.
    pub fn write(&self, dir: &Path, band: (f64, f64)) -> Result<DatasetManifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut records = Vec::with_capacity(self.series.len());
        for ts in &self.series {
            let name = format!("{}_{}.txt", ts.subject_id, ts.activity);
            write_samples(&dir.join(&name), ts.samples())?;
            records.push(RecordEntry {
                subject_id: ts.subject_id.clone(),
                activity: ts.activity.clone(),
                fs: ts.fs(),
                path: name.into(),
                samples: ts.len(),
            });
        }
        let manifest = DatasetManifest::new(band, records, dir);
        manifest.validate()?;
        manifest.save(&dir.join("manifest.json"))?;
        Ok(manifest)
    }
}
