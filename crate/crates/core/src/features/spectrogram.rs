use std::f64::consts::TAU;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::recording::{GaitRecording, SAMPLE_RATE_HZ};

use super::{concat_signal, normalize_signal, FeatureError};

/// Frames for a 3000-sample signal with the default configuration.
pub const IMAGE_FRAMES: usize = 22;
/// Bins for the default 256-sample window.
pub const IMAGE_BINS: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub window_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_size: 256,
            hop: 128,
            sample_rate: SAMPLE_RATE_HZ,
        }
    }
}

/// Magnitude grid, `frames × bins`, `bins = window_size / 2 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub config: SpectrogramConfig,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.config.sample_rate as f64 / self.config.window_size as f64
    }
}

/// Symmetric Hann window, `0.5 - 0.5 cos(2πn/(N-1))`.
///
/// Symmetry makes the magnitude spectrum of a reversed frame equal to that
/// of the original frame.
pub fn hann_window(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / denom).cos())
        .collect()
}

/// Short-time Fourier magnitudes of Hann-windowed frames.
pub fn spectrogram(signal: &[f64], config: SpectrogramConfig) -> Result<Spectrogram, FeatureError> {
    let SpectrogramConfig { window_size, hop, .. } = config;
    if window_size < 2 || hop == 0 {
        return Err(FeatureError::InvalidConfig(format!(
            "window_size {window_size} / hop {hop}"
        )));
    }
    if signal.len() < window_size {
        return Err(FeatureError::SignalTooShort {
            len: signal.len(),
            window: window_size,
        });
    }
    let frames = (signal.len() - window_size) / hop + 1;
    let bins = window_size / 2 + 1;
    let window = hann_window(window_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_size);
    let mut buf = vec![Complex::new(0.0, 0.0); window_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitudes = Array2::zeros((frames, bins));
    for f in 0..frames {
        let start = f * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(signal[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, m) in magnitudes.row_mut(f).iter_mut().enumerate() {
            *m = buf[k].norm();
        }
    }
    Ok(Spectrogram { magnitudes, config })
}

/// `20·log10(|X| + 1e-10)` min-max normalized to [0, 1] over the image.
/// A degenerate (constant) image maps to all zeros.
pub fn spectrogram_to_image(sp: &Spectrogram) -> Array2<f64> {
    let db = sp.magnitudes.mapv(|m| 20.0 * (m + 1e-10).log10());
    let lo = db.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Array2::zeros(db.dim());
    }
    db.mapv(|v| (v - lo) / range)
}

/// Full CNN input chain for one recording: concatenate, normalize,
/// spectrogram, image. Always `IMAGE_FRAMES × IMAGE_BINS`.
pub fn recording_image(rec: &GaitRecording) -> Array2<f64> {
    let signal = normalize_signal(&concat_signal(rec));
    let sp = spectrogram(&signal, SpectrogramConfig::default()).expect("3000 samples >= window");
    spectrogram_to_image(&sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn naive_dft_magnitudes(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in frame.iter().enumerate() {
                    let angle = -TAU * (k * t % n) as f64 / n as f64;
                    re += x * angle.cos();
                    im += x * angle.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn shape_for_capture_length() {
        let sp = spectrogram(&vec![0.3; 3000], SpectrogramConfig::default()).unwrap();
        assert_eq!((sp.frames(), sp.bins()), (IMAGE_FRAMES, IMAGE_BINS));
        assert_eq!(sp.frames(), (3000 - 256) / 128 + 1);
    }

    #[test]
    fn too_short_signal() {
        assert_eq!(
            spectrogram(&[1.0; 100], SpectrogramConfig::default()).unwrap_err(),
            FeatureError::SignalTooShort { len: 100, window: 256 }
        );
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sp = spectrogram(&x, SpectrogramConfig::default()).unwrap();
        let w = hann_window(256);
        let windowed: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let oracle = naive_dft_magnitudes(&windowed);
        let diff = sp.magnitudes.row(0).iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "max diff {diff}");
    }

    #[test]
    fn cosine_peaks_at_its_bin() {
        let cfg = SpectrogramConfig::default();
        let freq = 8.0 * cfg.sample_rate as f64 / cfg.window_size as f64;
        let x: Vec<f64> = (0..3000)
            .map(|t| (TAU * freq * t as f64 / cfg.sample_rate as f64).cos())
            .collect();
        let sp = spectrogram(&x, cfg).unwrap();
        assert_eq!(sp.bin_hz(8), freq);
        for row in sp.magnitudes.rows() {
            let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(argmax, 8);
        }
    }

    #[test]
    fn constant_signal_is_dc_dominated() {
        let c = -2.5;
        let sp = spectrogram(&vec![c; 1024], SpectrogramConfig::default()).unwrap();
        let window_sum: f64 = hann_window(256).iter().sum();
        for row in sp.magnitudes.rows() {
            assert!((row[0] - c.abs() * window_sum).abs() < 1e-9);
            // Hann main lobe reaches bin 1; everything beyond is sidelobe leakage.
            assert!(row[1] < 0.51 * row[0]);
            assert!(row[2] < 2e-3 * row[0]);
            assert!(row.iter().skip(3).all(|&m| m <= 1e-3 * row[0]));
        }
    }

    #[test]
    fn time_reversal_reverses_frames() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        // 256 + 9 * 128 samples, so frame boundaries map onto each other.
        let x: Vec<f64> = (0..1408).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let a = spectrogram(&x, SpectrogramConfig::default()).unwrap();
        let b = spectrogram(&rev, SpectrogramConfig::default()).unwrap();
        let frames = a.frames();
        assert_eq!(frames, 10);
        for f in 0..frames {
            for (p, q) in a.magnitudes.row(f).iter().zip(b.magnitudes.row(frames - 1 - f)) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn image_normalization() {
        let uniform = Spectrogram {
            magnitudes: Array2::from_elem((22, 129), 3.0),
            config: SpectrogramConfig::default(),
        };
        assert!(spectrogram_to_image(&uniform).iter().all(|&v| v == 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sp = Spectrogram {
            magnitudes: Array2::from_shape_fn((22, 129), |_| rng.gen_range(0.0..10.0)),
            config: SpectrogramConfig::default(),
        };
        let img = spectrogram_to_image(&sp);
        assert_eq!(img.dim(), (22, 129));
        let (lo, hi) = img.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert_eq!((lo, hi), (0.0, 1.0));
        let m: Vec<f64> = sp.magnitudes.iter().copied().collect();
        let p: Vec<f64> = img.iter().copied().collect();
        for i in (0..m.len()).step_by(7) {
            for j in (0..m.len()).step_by(11) {
                if m[i] > m[j] {
                    assert!(p[i] >= p[j]);
                }
            }
        }
    }
}
