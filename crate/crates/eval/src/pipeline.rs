//! Recording-level training: fit preprocessing on the training recordings,
//! transform, train, and package the result with its split.

use crate::metrics::{confusion, metrics};
use crate::report::EvalReport;
use crate::EvalError;
use gaitlab_core::features::{
    concat_signal, normalize_signal, raw_matrix, spectrogram, spectrogram_to_image, PcaPipeline, SpectrogramConfig,
};
use gaitlab_core::seed::derive_seed;
use gaitlab_core::{GaitLabel, GaitRecording};
use gaitlab_models::nn::{self, History, TrainConfig};
use gaitlab_models::{train_forest, train_ovo, Cnn, CnnSpec, Fnn, FnnSpec, ForestParams, PersistError, SvmParams, TrainedModel};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Rf,
    Fnn,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Svm, ModelKind::Rf, ModelKind::Fnn, ModelKind::Cnn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
            ModelKind::Fnn => "fnn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?}; expected svm, rf, fnn or cnn"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub pca_components: usize,
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub fnn: FnnSpec,
    pub fnn_train: TrainConfig,
    pub cnn: CnnSpec,
    pub cnn_train: TrainConfig,
}

/// CNN epochs default lower than the FNN's: each CNN epoch costs roughly
/// two orders of magnitude more.
pub const DEFAULT_CNN_EPOCHS: usize = 30;

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            pca_components: 60,
            svm: SvmParams::default(),
            forest: ForestParams::default(),
            fnn: FnnSpec::default(),
            fnn_train: TrainConfig::default(),
            cnn: CnnSpec::default(),
            cnn_train: TrainConfig {
                epochs: DEFAULT_CNN_EPOCHS,
                ..TrainConfig::default()
            },
        }
    }
}

/// Fitted input transform. PCA models share standardize + PCA; the CNN
/// reads spectrogram images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preprocessing {
    Pca { pipeline: PcaPipeline },
    Spectrogram { config: SpectrogramConfig },
}

impl Preprocessing {
    pub fn fit(kind: ModelKind, train: &[&GaitRecording], k: usize) -> Result<Self, EvalError> {
        Ok(match kind {
            ModelKind::Cnn => Preprocessing::Spectrogram {
                config: SpectrogramConfig::default(),
            },
            _ => Preprocessing::Pca {
                pipeline: PcaPipeline::fit(&raw_matrix(train.iter().copied()), k)?,
            },
        })
    }

    /// One row per recording: PCA scores, or a flattened spectrogram image.
    pub fn transform(&self, recs: &[&GaitRecording]) -> Result<Array2<f64>, EvalError> {
        match self {
            Preprocessing::Pca { pipeline } => Ok(pipeline.transform(&raw_matrix(recs.iter().copied()))?),
            Preprocessing::Spectrogram { config } => {
                let images: Vec<Array2<f64>> = recs
                    .par_iter()
                    .map(|r| {
                        let signal = normalize_signal(&concat_signal(r));
                        Ok(spectrogram_to_image(&spectrogram(&signal, *config)?))
                    })
                    .collect::<Result<_, EvalError>>()?;
                Ok(nn::image_matrix(&images))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub preprocessing: Preprocessing,
    pub history: Option<History>,
    pub train_seconds: f64,
}

fn labels(recs: &[&GaitRecording]) -> Vec<GaitLabel> {
    recs.iter().map(|r| r.label).collect()
}

/// Fits preprocessing on `train` only, then the model. Seeds: the SVM and
/// forest use `seed` directly; the networks initialize from `seed` and
/// shuffle from `derive_seed(seed, 1)`.
pub fn train_model(
    kind: ModelKind,
    hp: &Hyperparams,
    train: &[&GaitRecording],
    validation: Option<&[&GaitRecording]>,
    seed: u64,
) -> Result<TrainOutcome, EvalError> {
    let start = Instant::now();
    let preprocessing = Preprocessing::fit(kind, train, hp.pca_components)?;
    let x = preprocessing.transform(train)?;
    let y = labels(train);
    let val = match validation {
        Some(v) => Some((preprocessing.transform(v)?, labels(v))),
        None => None,
    };
    let val_view = val.as_ref().map(|(vx, vy)| (vx.view(), vy.as_slice()));
    let shuffle_seed = derive_seed(seed, 1);
    let (model, history) = match kind {
        ModelKind::Svm => {
            let params = SvmParams { seed, ..hp.svm.clone() };
            (TrainedModel::SvmOvo { model: train_ovo(x.view(), &y, &params)? }, None)
        }
        ModelKind::Rf => (
            TrainedModel::Forest {
                model: train_forest(x.view(), &y, &hp.forest, seed)?,
            },
            None,
        ),
        ModelKind::Fnn => {
            let cfg = TrainConfig { shuffle_seed, ..hp.fnn_train.clone() };
            let net = Fnn::new(hp.fnn.clone(), seed)?;
            let (net, h) = nn::train(net, x.view(), &y, val_view, &cfg)?;
            (TrainedModel::Fnn { model: net }, Some(h))
        }
        ModelKind::Cnn => {
            let cfg = TrainConfig { shuffle_seed, ..hp.cnn_train.clone() };
            let net = Cnn::new(hp.cnn.clone(), seed)?;
            let (net, h) = nn::train(net, x.view(), &y, val_view, &cfg)?;
            (TrainedModel::Cnn { model: net }, Some(h))
        }
    };
    Ok(TrainOutcome {
        model,
        preprocessing,
        history,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Session ids of the split a bundle was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub test_fraction: f64,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub const BUNDLE_FORMAT: &str = "gaitlab-bundle-1";

/// Everything needed to re-evaluate a trained model on the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub kind: ModelKind,
    pub model: TrainedModel,
    pub preprocessing: Preprocessing,
    pub split: SplitRecord,
    pub hyperparams: Hyperparams,
    pub history: Option<History>,
    pub report: Option<EvalReport>,
}

impl ModelBundle {
    /// Predicts recordings end to end.
    pub fn predict(&self, recs: &[&GaitRecording]) -> Result<Vec<GaitLabel>, EvalError> {
        let x = self.preprocessing.transform(recs)?;
        Ok(self.model.predict_rows(x.view())?)
    }

    pub fn evaluate(&self, recs: &[&GaitRecording]) -> Result<EvalReport, EvalError> {
        let pred = self.predict(recs)?;
        let cm = confusion(&labels(recs), &pred)?;
        Ok(EvalReport {
            model: self.kind.to_string(),
            n: recs.len(),
            metrics: metrics(&cm),
            confusion: cm,
        })
    }

    /// Picks the recordings named by `ids`, in that order.
    pub fn select<'a>(recs: &'a [GaitRecording], ids: &[String]) -> Result<Vec<&'a GaitRecording>, EvalError> {
        let by_id: std::collections::HashMap<&str, &GaitRecording> =
            recs.iter().map(|r| (r.session_id.as_str(), r)).collect();
        ids.iter()
            .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| EvalError::UnknownSession(id.clone())))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()).map_err(|source| io_err(path, source))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        let bundle: ModelBundle = serde_json::from_str(&text).map_err(PersistError::from)?;
        if bundle.format != BUNDLE_FORMAT {
            return Err(PersistError::UnknownFormat(bundle.format).into());
        }
        Ok(bundle)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Persist(PersistError::Io {
        path: PathBuf::from(path),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaitlab_core::synth::{generate_dataset, GaitSignalParams};

    #[test]
    fn model_kind_parses() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("knn".parse::<ModelKind>().is_err());
    }

    #[test]
    fn spectrogram_rows_are_images() {
        let ds = generate_dataset(1, &GaitSignalParams::default(), 3);
        let recs: Vec<&GaitRecording> = ds.recordings().iter().collect();
        let p = Preprocessing::fit(ModelKind::Cnn, &recs, 60).unwrap();
        let x = p.transform(&recs).unwrap();
        assert_eq!(x.dim(), (4, 22 * 129));
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
