//! Classifiers for four-class gait recognition, all written from scratch:
//!
//! * [`svm`]: RBF-kernel SVM trained with SMO, one-vs-one multiclass.
//! * [`forest`]: Gini CART trees with bootstrap aggregation.
//! * [`nn`]: feedforward network and a small spectrogram CNN trained by
//!   backpropagation with Adam.
//!
//! [`TrainedModel`] is the versioned JSON envelope used for persistence.

pub mod forest;
pub mod nn;
mod persist;
pub mod svm;

pub use forest::{forest_predict, gini_impurity, train_forest, Forest, ForestParams, MaxFeatures};
pub use nn::{Cnn, CnnSpec, Fnn, FnnSpec, History, TrainConfig};
pub use persist::{PersistError, TrainedModel};
pub use svm::{rbf_kernel, train_binary_svm, train_ovo, BinarySvm, OvoSvm, SvmError, SvmParams};

use gaitlab_core::GaitLabel;

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn label_of(index: usize) -> GaitLabel {
    GaitLabel::from_index(index).expect("class index < 4")
}
