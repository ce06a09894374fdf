use crate::nn::NnError;
use crate::{Cnn, Fnn, Forest, OvoSvm};
use gaitlab_core::GaitLabel;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

const FORMATS: [&str; 4] = ["gaitlab-svm-1", "gaitlab-rf-1", "gaitlab-fnn-1", "gaitlab-cnn-1"];

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown model format {0:?}")]
    UnknownFormat(String),
    #[error("missing \"format\" field")]
    MissingFormat,
}

/// A trained classifier in its versioned JSON envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format")]
pub enum TrainedModel {
    #[serde(rename = "gaitlab-svm-1")]
    SvmOvo { model: OvoSvm },
    #[serde(rename = "gaitlab-rf-1")]
    Forest { model: Forest },
    #[serde(rename = "gaitlab-fnn-1")]
    Fnn { model: Fnn },
    #[serde(rename = "gaitlab-cnn-1")]
    Cnn { model: Cnn },
}

impl TrainedModel {
    pub fn format(&self) -> &'static str {
        match self {
            TrainedModel::SvmOvo { .. } => FORMATS[0],
            TrainedModel::Forest { .. } => FORMATS[1],
            TrainedModel::Fnn { .. } => FORMATS[2],
            TrainedModel::Cnn { .. } => FORMATS[3],
        }
    }

    /// Short model name: `svm`, `rf`, `fnn` or `cnn`.
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::SvmOvo { .. } => "svm",
            TrainedModel::Forest { .. } => "rf",
            TrainedModel::Fnn { .. } => "fnn",
            TrainedModel::Cnn { .. } => "cnn",
        }
    }

    /// Predicts each row. Rows are PCA features for SVM, forest and FNN,
    /// and flattened spectrogram images for the CNN.
    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Vec<GaitLabel>, NnError> {
        match self {
            TrainedModel::SvmOvo { model } => Ok(model.predict_batch(x)),
            TrainedModel::Forest { model } => Ok(model.predict_batch(x)),
            TrainedModel::Fnn { model } => model.predict_batch(x),
            TrainedModel::Cnn { model } => model.predict_batch(x),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, PersistError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format").and_then(|f| f.as_str()) {
            None => return Err(PersistError::MissingFormat),
            Some(f) if !FORMATS.contains(&f) => return Err(PersistError::UnknownFormat(f.to_string())),
            Some(_) => {}
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        std::fs::write(path, self.to_json()).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        let text = std::fs::read_to_string(path).map_err(|source| PersistError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
