//! Preprocessing shared by every classifier.
//!
//! Classic models and the feedforward network consume
//! `flatten -> standardize -> PCA(60)`; the CNN consumes
//! `concat -> max-abs normalize -> spectrogram -> log image`.

mod audio;
mod pca;
mod spectrogram;
mod standardize;

pub use audio::{concat_signal, normalize_signal, write_wav, WAV_HEADER_LEN};
pub use pca::{fit_pca, PcaModel};
pub use spectrogram::{
    hann_window, recording_image, spectrogram, spectrogram_to_image, Spectrogram, SpectrogramConfig,
    IMAGE_BINS, IMAGE_FRAMES,
};
pub use standardize::{fit_standardizer, Standardizer};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::{GaitRecording, CHANNEL_COUNT, SAMPLES_PER_CHANNEL, TOTAL_SAMPLES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("data rank {rank} is below the {k} requested components")]
    RankDeficient { k: usize, rank: usize },
    #[error("signal of {len} samples is shorter than the {window}-sample window")]
    SignalTooShort { len: usize, window: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLayout {
    Raw,
    Pca,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: FeatureLayout,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `ax[0..500) ‖ ay ‖ az ‖ gx ‖ gy ‖ gz`.
pub fn flatten(rec: &GaitRecording) -> FeatureVector {
    let mut values = Vec::with_capacity(TOTAL_SAMPLES);
    for ch in &rec.channels {
        values.extend_from_slice(ch);
    }
    FeatureVector {
        values,
        layout: FeatureLayout::Raw,
    }
}

/// Inverse of [`flatten`] on the channel data.
pub fn unflatten(values: &[f64]) -> Result<[Vec<f64>; CHANNEL_COUNT], FeatureError> {
    if values.len() != TOTAL_SAMPLES {
        return Err(FeatureError::LengthMismatch {
            expected: TOTAL_SAMPLES,
            got: values.len(),
        });
    }
    Ok(std::array::from_fn(|c| {
        values[c * SAMPLES_PER_CHANNEL..(c + 1) * SAMPLES_PER_CHANNEL].to_vec()
    }))
}

/// Stacks flattened recordings as rows of an `n × 3000` matrix.
pub fn raw_matrix<'a>(recs: impl IntoIterator<Item = &'a GaitRecording>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = recs.into_iter().map(|r| flatten(r).values).collect();
    let n = rows.len();
    Array2::from_shape_vec((n, TOTAL_SAMPLES), rows.concat()).expect("rows of equal length")
}

/// Standardizer + PCA fitted together on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPipeline {
    pub standardizer: Standardizer,
    pub pca: PcaModel,
}

impl PcaPipeline {
    pub fn fit(x: &Array2<f64>, k: usize) -> Result<Self, FeatureError> {
        let standardizer = fit_standardizer(x)?;
        let z = standardizer.standardize(x)?;
        let pca = fit_pca(&z, k)?;
        Ok(Self { standardizer, pca })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>, FeatureError> {
        self.pca.transform_matrix(&self.standardizer.standardize(x)?)
    }
}
