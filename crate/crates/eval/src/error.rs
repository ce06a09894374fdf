use gaitlab_core::features::FeatureError;
use gaitlab_core::GaitLabel;
use gaitlab_models::forest::ForestError;
use gaitlab_models::nn::NnError;
use gaitlab_models::{PersistError, SvmError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {label} has {count} samples, need at least {needed}")]
    ClassTooSmall {
        label: GaitLabel,
        count: usize,
        needed: usize,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("training fraction {fraction} leaves class {label} empty in a fold")]
    InfeasibleFraction { fraction: f64, label: GaitLabel },
    #[error("unknown session {0} in stored split")]
    UnknownSession(String),
    #[error("{0}")]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Svm(#[from] SvmError),
    #[error("{0}")]
    Forest(#[from] ForestError),
    #[error("{0}")]
    Nn(#[from] NnError),
    #[error("{0}")]
    Persist(#[from] PersistError),
    #[error("model {model} expects {expected} preprocessing")]
    PreprocessingMismatch { model: String, expected: String },
}
