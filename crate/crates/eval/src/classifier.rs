use gaitlab_core::GaitLabel;
use gaitlab_models::nn::Network;
use gaitlab_models::{Cnn, Fnn, Forest, OvoSvm, TrainedModel};
use ndarray::ArrayView2;

/// Anything that labels rows of a feature matrix.
pub trait Classifier: Send + Sync {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel>;

    /// Size measure used to break grid-search ties: support vectors, trees
    /// or parameters.
    fn complexity(&self) -> usize {
        0
    }
}

impl Classifier for OvoSvm {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        self.predict_batch(x)
    }

    fn complexity(&self) -> usize {
        self.n_support()
    }
}

impl Classifier for Forest {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        self.predict_batch(x)
    }

    fn complexity(&self) -> usize {
        self.n_trees()
    }
}

impl Classifier for Fnn {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        self.predict_batch(x).expect("input width checked by caller")
    }

    fn complexity(&self) -> usize {
        self.param_count()
    }
}

impl Classifier for Cnn {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        self.predict_batch(x).expect("input width checked by caller")
    }

    fn complexity(&self) -> usize {
        self.param_count()
    }
}

impl Classifier for TrainedModel {
    fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        TrainedModel::predict_rows(self, x).expect("input width checked by caller")
    }

    fn complexity(&self) -> usize {
        match self {
            TrainedModel::SvmOvo { model } => model.complexity(),
            TrainedModel::Forest { model } => model.complexity(),
            TrainedModel::Fnn { model } => model.complexity(),
            TrainedModel::Cnn { model } => model.complexity(),
        }
    }
}
