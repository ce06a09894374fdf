use super::{logit_cross_entropy, shape_err, softmax, BatchGradients, Network, NnError};
use gaitlab_core::seed::rng_from_seed;
use gaitlab_core::GaitLabel;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer widths from input to output. Hidden layers use ReLU, the output
/// layer softmax; the input layer applies no activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnSpec {
    pub layers: Vec<usize>,
}

impl Default for FnnSpec {
    fn default() -> Self {
        Self {
            layers: vec![60, 2048, 1024, 4],
        }
    }
}

impl FnnSpec {
    pub fn new(layers: Vec<usize>) -> Result<Self, NnError> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layers.len() < 2 {
            return Err(NnError::InvalidSpec("need at least input and output layers".into()));
        }
        if self.layers.contains(&0) {
            return Err(NnError::InvalidSpec(format!("zero-width layer in {:?}", self.layers)));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Dense network. `weights[l]` has shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fnn {
    pub spec: FnnSpec,
    pub seed: u64,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// He-uniform bound `sqrt(6 / fan_in)`.
pub(crate) fn he_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

impl Fnn {
    /// He-uniform weights, zero biases.
    pub fn new(spec: FnnSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in spec.layers.windows(2) {
            let b = he_bound(w[0]);
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-b..=b)));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(Self { spec, seed, weights, biases })
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.spec.layers[0] {
            return Err(shape_err(format!("{} input features", self.spec.layers[0]), x.ncols()));
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer. `acts[0]` is the input;
    /// the last entry of `pre` holds the output logits.
    fn forward_trace(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(w) + b;
            if l < last {
                acts.push(z.mapv(|v| v.max(0.0)));
            }
            pre.push(z);
        }
        (pre, acts)
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(w) + b;
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        let z = self.logits(x)?;
        Ok(softmax(z.row(0).as_slice().expect("contiguous")))
    }

    pub fn predict(&self, x: &[f64]) -> Result<GaitLabel, NnError> {
        Ok(crate::label_of(crate::argmax(&self.forward(x)?)))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<GaitLabel>, NnError> {
        let z = self.logits(x)?;
        Ok(z.rows()
            .into_iter()
            .map(|r| crate::label_of(crate::argmax(&r.to_vec())))
            .collect())
    }
}

impl Network for Fnn {
    fn input_dim(&self) -> usize {
        self.spec.layers[0]
    }

    fn n_classes(&self) -> usize {
        *self.spec.layers.last().expect("validated spec")
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<BatchGradients, NnError> {
        self.check_input(x)?;
        if x.nrows() != y.len() {
            return Err(shape_err(format!("{} labels", x.nrows()), y.len()));
        }
        if y.is_empty() {
            return Err(NnError::EmptyData);
        }
        let n = y.len() as f64;
        let (pre, acts) = self.forward_trace(x);
        let logits = pre.last().expect("at least one layer");

        let mut loss = 0.0;
        let mut correct = 0;
        let mut delta = Array2::zeros(logits.raw_dim());
        for (i, &label) in y.iter().enumerate() {
            let z = logits.row(i).to_vec();
            loss += logit_cross_entropy(&z, label);
            correct += usize::from(crate::argmax(&z) == label);
            let p = softmax(&z);
            for (k, pk) in p.into_iter().enumerate() {
                delta[[i, k]] = (pk - f64::from(u8::from(k == label))) / n;
            }
        }

        let layers = self.weights.len();
        let mut grads = vec![Vec::new(); 2 * layers];
        for l in (0..layers).rev() {
            let gw = acts[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&pre[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads[2 * l] = gw.as_standard_layout().iter().copied().collect();
            grads[2 * l + 1] = gb.to_vec();
        }
        Ok(BatchGradients {
            loss: loss / n,
            correct,
            grads,
        })
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let mut z = self.logits(x)?;
        for mut row in z.rows_mut() {
            let p = softmax(row.as_slice().expect("contiguous"));
            row.assign(&Array1::from(p));
        }
        Ok(z)
    }
}
