//! Seeded parametric generator for the four induced gait classes.
//!
//! The model is a sum of stride harmonics per channel with class-specific
//! modulation. It gives controllable separability for model tests and is not
//! a biomechanical simulation.
//!
//! * walking (MN): harmonic sum at `stride_freq` with stride-to-stride
//!   amplitude and phase variability, plus Gaussian noise.
//! * marching (MS): amplitude scaled by [`MARCH_GAIN`]; stride variability is
//!   scaled by `1 - regularity`, so `regularity = 1` gives identical strides.
//! * limping (MM): the `ax`/`az` periodic component of every other stride is
//!   attenuated by `1 - asymmetry` (smooth raised-cosine alternation).
//! * feint (MF): low-amplitude walk plus damped transient bursts with Poisson
//!   arrival times at `burst_rate` events per second.
//!
//! `noise_sigma` drives every stochastic term except the burst process:
//! additive noise (in g; gyroscope noise is `noise_sigma * GYRO_PER_G`),
//! per-recording amplitude/cadence/phase spread and stride variability. With
//! `noise_sigma = 0` a walking recording is exactly periodic.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csv::quantize_sample;
use crate::dataset::Dataset;
use crate::label::GaitLabel;
use crate::recording::{
    Channel, GaitRecording, SessionId, SubjectMeta, CHANNEL_COUNT, SAMPLES_PER_CHANNEL,
    SAMPLE_RATE_HZ,
};
use crate::seed::{derive_seed, rng_from_seed};

pub const HARMONICS: usize = 4;
pub const MARCH_GAIN: f64 = 1.6;
pub const FEINT_GAIN: f64 = 0.5;
/// Gyroscope deg/s per accelerometer g when scaling the noise terms.
pub const GYRO_PER_G: f64 = 60.0;
/// Number of synthetic volunteers recordings are attributed to.
pub const SUBJECTS: u64 = 20;

const GRAVITY_AZ: f64 = 1.0;
const BASELINE_REGULARITY: f64 = 0.0;
const STRIDE_AMP_GAIN: f64 = 3.0;
const STRIDE_PHASE_GAIN: f64 = 3.0;
const SUBJECT_AMP_GAIN: f64 = 2.0;
const SUBJECT_CADENCE_GAIN: f64 = 0.2;
const SUBJECT_PHASE_GAIN: f64 = 2.0;
const BURST_TAU_S: f64 = 0.08;
const BURST_FREQ_HZ: f64 = 6.0;
const BURST_GAIN: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSignalParams {
    /// Stride frequency in Hz.
    pub stride_freq: f64,
    /// Amplitude of harmonics 1..=4 per channel, in channel units.
    pub harmonic_amps: [[f64; HARMONICS]; CHANNEL_COUNT],
    pub noise_sigma: f64,
    pub asymmetry: f64,
    pub burst_rate: f64,
    pub regularity: f64,
}

impl Default for GaitSignalParams {
    fn default() -> Self {
        Self {
            stride_freq: 1.6,
            harmonic_amps: [
                [0.35, 0.20, 0.10, 0.05],
                [0.15, 0.10, 0.05, 0.02],
                [0.50, 0.30, 0.15, 0.08],
                [40.0, 20.0, 8.0, 4.0],
                [25.0, 12.0, 6.0, 2.0],
                [120.0, 50.0, 20.0, 8.0],
            ],
            noise_sigma: 0.05,
            asymmetry: 0.5,
            burst_rate: 0.8,
            regularity: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid signal parameter {field}: {reason}")]
pub struct ParamsError {
    pub field: &'static str,
    pub reason: String,
}

impl GaitSignalParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let err = |field, reason: &str| {
            Err(ParamsError {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.stride_freq > 0.5 && self.stride_freq < 3.0) {
            return err("stride_freq", "must lie in (0.5, 3.0) Hz");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return err("noise_sigma", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.asymmetry) {
            return err("asymmetry", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.regularity) {
            return err("regularity", "must lie in [0, 1]");
        }
        if !(self.burst_rate >= 0.0 && self.burst_rate.is_finite()) {
            return err("burst_rate", "must be finite and >= 0");
        }
        if self.harmonic_amps.iter().flatten().any(|a| !a.is_finite()) {
            return err("harmonic_amps", "must be finite");
        }
        Ok(())
    }
}

/// Fixed harmonic phase table so waveforms differ between channels.
fn harmonic_phase(channel: usize, harmonic: usize) -> f64 {
    (channel as f64 * 1.3 + harmonic as f64 * 0.7).rem_euclid(TAU)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn noise_unit(ch: Channel) -> f64 {
    if ch.is_gyro() {
        GYRO_PER_G
    } else {
        1.0
    }
}

/// Metadata for synthetic volunteer `subject` (stable across runs).
pub fn subject_meta(subject: u64) -> SubjectMeta {
    let mut rng = rng_from_seed(derive_seed(0x5eed_5eb1, subject));
    let age = rng.gen_range(18..=60);
    let height = (rng.gen_range(150.0..195.0_f64) * 10.0).round() / 10.0;
    let weight = (rng.gen_range(50.0..100.0_f64) * 10.0).round() / 10.0;
    SubjectMeta::new(format!("subject-{:02}", subject + 1), age, height, weight)
        .expect("synthetic metadata within range")
}

/// Smoothly interpolated per-stride values: `values[k]` at the centre of
/// stride `k`, linear in between.
fn stride_curve(values: &[f64], stride_pos: f64) -> f64 {
    let x = stride_pos - 0.5;
    if x <= 0.0 {
        return values[0];
    }
    let k = x.floor() as usize;
    if k + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let frac = x - k as f64;
    values[k] * (1.0 - frac) + values[k + 1] * frac
}

/// Generates one recording. Deterministic for `(label, params, seed)`;
/// samples are quantized to the six-decimal CSV resolution so a recording
/// survives persistence bit-exactly.
pub fn generate_recording(label: GaitLabel, params: &GaitSignalParams, seed: u64) -> GaitRecording {
    params.validate().expect("valid signal parameters");
    let mut rng = rng_from_seed(seed);
    let session_id = SessionId::from_random_bytes(rng.gen());
    let meta = subject_meta(rng.gen_range(0..SUBJECTS));

    let sigma = params.noise_sigma;
    let regularity = match label {
        GaitLabel::Marching => params.regularity,
        _ => BASELINE_REGULARITY,
    };
    let gain = match label {
        GaitLabel::Marching => MARCH_GAIN,
        GaitLabel::Feint => FEINT_GAIN,
        _ => 1.0,
    };

    let amp_scale = 1.0 + SUBJECT_AMP_GAIN * sigma * normal(&mut rng);
    let freq = params.stride_freq * (1.0 + SUBJECT_CADENCE_GAIN * sigma * normal(&mut rng));
    let phase0 = SUBJECT_PHASE_GAIN * sigma * normal(&mut rng);

    let duration = SAMPLES_PER_CHANNEL as f64 / SAMPLE_RATE_HZ as f64;
    let strides = (freq * duration).ceil() as usize + 2;
    let variability = sigma * (1.0 - regularity);
    let stride_amp: Vec<f64> = (0..strides)
        .map(|_| 1.0 + STRIDE_AMP_GAIN * variability * normal(&mut rng))
        .collect();
    let stride_phase: Vec<f64> = (0..strides)
        .map(|_| STRIDE_PHASE_GAIN * variability * normal(&mut rng))
        .collect();

    let bursts = if label == GaitLabel::Feint {
        sample_bursts(&mut rng, params, duration)
    } else {
        Vec::new()
    };

    let mut channels: [Vec<f64>; CHANNEL_COUNT] =
        std::array::from_fn(|_| Vec::with_capacity(SAMPLES_PER_CHANNEL));
    for i in 0..SAMPLES_PER_CHANNEL {
        let t = i as f64 / SAMPLE_RATE_HZ as f64;
        let stride_pos = freq * t + phase0 / TAU;
        let amp = amp_scale * stride_curve(&stride_amp, stride_pos) * gain;
        let phase = TAU * stride_pos + stride_curve(&stride_phase, stride_pos);
        // 1 on even strides, (1 - asymmetry) on odd ones.
        let limp = 1.0 - params.asymmetry * (1.0 - (std::f64::consts::PI * stride_pos).cos()) / 2.0;
        for ch in Channel::ALL {
            let c = ch.index();
            let mut periodic = 0.0;
            for (h, a) in params.harmonic_amps[c].iter().enumerate() {
                periodic += a * ((h + 1) as f64 * phase + harmonic_phase(c, h)).sin();
            }
            periodic *= amp;
            if label == GaitLabel::Limping && matches!(ch, Channel::Ax | Channel::Az) {
                periodic *= limp;
            }
            let mut v = periodic;
            if ch == Channel::Az {
                v += GRAVITY_AZ;
            }
            for burst in &bursts {
                v += burst.value(c, t, params);
            }
            if sigma > 0.0 {
                v += sigma * noise_unit(ch) * normal(&mut rng);
            }
            channels[c].push(quantize_sample(v));
        }
    }

    GaitRecording::new(session_id, meta, label, channels).expect("generator output is valid")
}

struct Burst {
    onset: f64,
    weights: [f64; CHANNEL_COUNT],
}

impl Burst {
    fn value(&self, channel: usize, t: f64, params: &GaitSignalParams) -> f64 {
        if t < self.onset {
            return 0.0;
        }
        let dt = t - self.onset;
        let scale = params.harmonic_amps[channel][0] * BURST_GAIN;
        self.weights[channel] * scale * (-dt / BURST_TAU_S).exp() * (TAU * BURST_FREQ_HZ * dt).sin()
    }
}

fn sample_bursts(rng: &mut ChaCha8Rng, params: &GaitSignalParams, duration: f64) -> Vec<Burst> {
    let mut bursts = Vec::new();
    if params.burst_rate <= 0.0 {
        return bursts;
    }
    let gaps = Exp::new(params.burst_rate).expect("positive rate");
    let mut t: f64 = gaps.sample(rng);
    while t < duration {
        let weights = std::array::from_fn(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.gen_range(0.6..1.4)
        });
        bursts.push(Burst { onset: t, weights });
        t += gaps.sample(rng);
    }
    bursts
}

/// `4 * n_per_class` recordings, class-major order, balanced by construction.
///
/// Recording `i` of class `c` uses seed `derive_seed(seed, c * n_per_class + i)`.
pub fn generate_dataset(n_per_class: usize, params: &GaitSignalParams, seed: u64) -> Dataset {
    assert!(n_per_class >= 1, "n_per_class must be >= 1");
    let recordings = GaitLabel::ALL
        .iter()
        .flat_map(|&label| {
            (0..n_per_class).map(move |i| {
                let stream = (label.index() * n_per_class + i) as u64;
                generate_recording(label, params, derive_seed(seed, stream))
            })
        })
        .collect();
    Dataset::new(recordings)
}
