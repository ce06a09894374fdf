use super::fnn::he_bound;
use super::{logit_cross_entropy, shape_err, softmax, BatchGradients, Network, NnError};
use gaitlab_core::features::{IMAGE_BINS, IMAGE_FRAMES};
use gaitlab_core::seed::rng_from_seed;
use gaitlab_core::GaitLabel;
use ndarray::{Array1, Array2, Array3, Array4, ArrayView1, ArrayView2, ArrayView3, ArrayView4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples per parallel work unit when computing batch gradients. Fixed so
/// that the summation order, and therefore the result, does not depend on
/// the thread count.
const GRAD_CHUNK: usize = 4;

/// conv(same) → ReLU → pool → conv(same) → ReLU → pool → dense ReLU → dense softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub kernel: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub dense_units: usize,
    pub classes: usize,
}

impl Default for CnnSpec {
    fn default() -> Self {
        Self {
            input_h: IMAGE_FRAMES,
            input_w: IMAGE_BINS,
            kernel: 3,
            conv1_filters: 8,
            conv2_filters: 16,
            dense_units: 64,
            classes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: &'static str,
    pub dims: Vec<usize>,
}

impl LayerShape {
    fn new(name: &'static str, dims: Vec<usize>) -> Self {
        Self { name, dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl CnnSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidSpec(m));
        if self.kernel % 2 == 0 {
            return bad(format!("kernel size {} must be odd", self.kernel));
        }
        if [self.conv1_filters, self.conv2_filters, self.dense_units, self.classes].contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if self.input_h < 4 || self.input_w < 4 {
            return bad(format!("input {}x{} too small for two 2x2 pools", self.input_h, self.input_w));
        }
        Ok(())
    }

    fn pooled(&self) -> ((usize, usize), (usize, usize)) {
        let p1 = (self.input_h / 2, self.input_w / 2);
        (p1, (p1.0 / 2, p1.1 / 2))
    }

    pub fn flat_len(&self) -> usize {
        let (_, p2) = self.pooled();
        self.conv2_filters * p2.0 * p2.1
    }

    pub fn input_len(&self) -> usize {
        self.input_h * self.input_w
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let (h, w) = (self.input_h, self.input_w);
        let (p1, p2) = self.pooled();
        vec![
            LayerShape::new("input", vec![1, h, w]),
            LayerShape::new("conv1", vec![self.conv1_filters, h, w]),
            LayerShape::new("pool1", vec![self.conv1_filters, p1.0, p1.1]),
            LayerShape::new("conv2", vec![self.conv2_filters, p1.0, p1.1]),
            LayerShape::new("pool2", vec![self.conv2_filters, p2.0, p2.1]),
            LayerShape::new("flatten", vec![self.flat_len()]),
            LayerShape::new("dense1", vec![self.dense_units]),
            LayerShape::new("output", vec![self.classes]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    pub spec: CnnSpec,
    pub seed: u64,
    /// `(filters, channels, k, k)`.
    pub conv1_w: Array4<f64>,
    pub conv1_b: Array1<f64>,
    pub conv2_w: Array4<f64>,
    pub conv2_b: Array1<f64>,
    /// `(fan_in, fan_out)`, like the feedforward net.
    pub dense1_w: Array2<f64>,
    pub dense1_b: Array1<f64>,
    pub dense2_w: Array2<f64>,
    pub dense2_b: Array1<f64>,
}

fn uniform4(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Array4<f64> {
    let b = he_bound(shape.1 * shape.2 * shape.3);
    Array4::from_shape_fn(shape, |_| rng.gen_range(-b..=b))
}

fn uniform2(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    let b = he_bound(shape.0);
    Array2::from_shape_fn(shape, |_| rng.gen_range(-b..=b))
}

/// "Same" convolution (cross-correlation) with zero padding, on flat
/// channel-major buffers.
fn conv_same(input: &[f64], c: usize, h: usize, w: usize, weights: &[f64], bias: &[f64], k: usize) -> Vec<f64> {
    let f = bias.len();
    let pad = k / 2;
    let mut out = vec![0.0; f * h * w];
    for fo in 0..f {
        for y in 0..h {
            for x in 0..w {
                let mut s = bias[fo];
                for ci in 0..c {
                    let ibase = ci * h * w;
                    let wbase = (fo * c + ci) * k * k;
                    for ky in 0..k {
                        let iy = y + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let row = ibase + (iy - pad) * w;
                        for kx in 0..k {
                            let ix = x + kx;
                            if ix < pad || ix - pad >= w {
                                continue;
                            }
                            s += input[row + ix - pad] * weights[wbase + ky * k + kx];
                        }
                    }
                }
                out[(fo * h + y) * w + x] = s;
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients of [`conv_same`], and the input
/// gradient when `din` is given.
#[allow(clippy::too_many_arguments)]
fn conv_same_backward(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    k: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let f = db.len();
    let pad = k / 2;
    for fo in 0..f {
        for y in 0..h {
            for x in 0..w {
                let g = dout[(fo * h + y) * w + x];
                if g == 0.0 {
                    continue;
                }
                db[fo] += g;
                for ci in 0..c {
                    let ibase = ci * h * w;
                    let wbase = (fo * c + ci) * k * k;
                    for ky in 0..k {
                        let iy = y + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let row = ibase + (iy - pad) * w;
                        for kx in 0..k {
                            let ix = x + kx;
                            if ix < pad || ix - pad >= w {
                                continue;
                            }
                            let at = row + ix - pad;
                            dw[wbase + ky * k + kx] += g * input[at];
                            if let Some(din) = din.as_deref_mut() {
                                din[at] += g * weights[wbase + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled values and the input index each was taken from.
fn pool2(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let base = ci * h * w + 2 * y * w + 2 * x;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if input[cand] > input[best] {
                        best = cand;
                    }
                }
                out.push(input[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// `out[j] = b[j] + Σᵢ x[i]·w[i, j]` for row-major `w` of shape `(x.len(), b.len())`.
fn dense(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * m..(i + 1) * m];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

/// Public convolution over `(channels, h, w)` with `(filters, channels, k, k)`
/// weights and same padding.
pub fn conv2d(input: ArrayView3<f64>, weights: ArrayView4<f64>, bias: ArrayView1<f64>) -> Result<Array3<f64>, NnError> {
    let (c, h, w) = input.dim();
    let (f, wc, kh, kw) = weights.dim();
    if wc != c {
        return Err(shape_err(format!("{c} kernel channels"), wc));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(shape_err("odd square kernel", format!("{kh}x{kw}")));
    }
    if bias.len() != f {
        return Err(shape_err(format!("{f} biases"), bias.len()));
    }
    let input = input.as_standard_layout();
    let weights = weights.as_standard_layout();
    let out = conv_same(
        input.as_slice().expect("standard layout"),
        c,
        h,
        w,
        weights.as_slice().expect("standard layout"),
        &bias.to_vec(),
        kh,
    );
    Ok(Array3::from_shape_vec((f, h, w), out).expect("conv output shape"))
}

pub fn maxpool2x2(input: ArrayView3<f64>) -> Array3<f64> {
    let (c, h, w) = input.dim();
    let input = input.as_standard_layout();
    let (out, _) = pool2(input.as_slice().expect("standard layout"), c, h, w);
    Array3::from_shape_vec((c, h / 2, w / 2), out).expect("pool output shape")
}

/// Every intermediate buffer of one forward pass.
struct Trace {
    z1: Vec<f64>,
    p1: Vec<f64>,
    idx1: Vec<usize>,
    z2: Vec<f64>,
    idx2: Vec<usize>,
    flat: Vec<f64>,
    z3: Vec<f64>,
    a3: Vec<f64>,
    logits: Vec<f64>,
}

impl Cnn {
    pub fn new(spec: CnnSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = rng_from_seed(seed);
        let k = spec.kernel;
        let conv1_w = uniform4(&mut rng, (spec.conv1_filters, 1, k, k));
        let conv2_w = uniform4(&mut rng, (spec.conv2_filters, spec.conv1_filters, k, k));
        let dense1_w = uniform2(&mut rng, (spec.flat_len(), spec.dense_units));
        let dense2_w = uniform2(&mut rng, (spec.dense_units, spec.classes));
        Ok(Self {
            conv1_b: Array1::zeros(spec.conv1_filters),
            conv2_b: Array1::zeros(spec.conv2_filters),
            dense1_b: Array1::zeros(spec.dense_units),
            dense2_b: Array1::zeros(spec.classes),
            conv1_w,
            conv2_w,
            dense1_w,
            dense2_w,
            spec,
            seed,
        })
    }

    fn sl<'a, D: ndarray::Dimension>(a: &'a ndarray::Array<f64, D>) -> &'a [f64] {
        a.as_slice().expect("standard layout")
    }

    fn trace(&self, image: &[f64]) -> Trace {
        let s = &self.spec;
        let (h, w, k) = (s.input_h, s.input_w, s.kernel);
        let ((h1, w1), _) = s.pooled();
        let z1 = conv_same(image, 1, h, w, Self::sl(&self.conv1_w), Self::sl(&self.conv1_b), k);
        let mut a1 = z1.clone();
        relu(&mut a1);
        let (p1, idx1) = pool2(&a1, s.conv1_filters, h, w);
        let z2 = conv_same(&p1, s.conv1_filters, h1, w1, Self::sl(&self.conv2_w), Self::sl(&self.conv2_b), k);
        let mut a2 = z2.clone();
        relu(&mut a2);
        let (flat, idx2) = pool2(&a2, s.conv2_filters, h1, w1);
        let z3 = dense(&flat, Self::sl(&self.dense1_w), Self::sl(&self.dense1_b));
        let mut a3 = z3.clone();
        relu(&mut a3);
        let logits = dense(&a3, Self::sl(&self.dense2_w), Self::sl(&self.dense2_b));
        Trace { z1, p1, idx1, z2, idx2, flat, z3, a3, logits }
    }

    /// Adds this sample's loss gradient (unscaled) into `g`; returns the loss
    /// and whether the prediction was correct.
    fn backprop(&self, image: &[f64], label: usize, g: &mut [Vec<f64>]) -> (f64, bool) {
        let s = &self.spec;
        let (h, w, k) = (s.input_h, s.input_w, s.kernel);
        let ((h1, w1), _) = s.pooled();
        let t = self.trace(image);
        let loss = logit_cross_entropy(&t.logits, label);
        let correct = crate::argmax(&t.logits) == label;

        let mut dz4 = softmax(&t.logits);
        dz4[label] -= 1.0;
        let m = s.classes;
        for (i, &a) in t.a3.iter().enumerate() {
            for j in 0..m {
                g[6][i * m + j] += a * dz4[j];
            }
        }
        for j in 0..m {
            g[7][j] += dz4[j];
        }
        let w2 = Self::sl(&self.dense2_w);
        let mut dz3: Vec<f64> = (0..s.dense_units)
            .map(|i| (0..m).map(|j| w2[i * m + j] * dz4[j]).sum())
            .collect();
        for (d, &z) in dz3.iter_mut().zip(&t.z3) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }

        let u = s.dense_units;
        let w1d = Self::sl(&self.dense1_w);
        let mut dflat = vec![0.0; t.flat.len()];
        for (i, &x) in t.flat.iter().enumerate() {
            let row = &w1d[i * u..(i + 1) * u];
            let grow = &mut g[4][i * u..(i + 1) * u];
            let mut acc = 0.0;
            for j in 0..u {
                grow[j] += x * dz3[j];
                acc += row[j] * dz3[j];
            }
            dflat[i] = acc;
        }
        for j in 0..u {
            g[5][j] += dz3[j];
        }

        let mut dz2 = vec![0.0; t.z2.len()];
        for (&src, &d) in t.idx2.iter().zip(&dflat) {
            if t.z2[src] > 0.0 {
                dz2[src] += d;
            }
        }
        let mut dp1 = vec![0.0; t.p1.len()];
        {
            let (gw, rest) = g[2..].split_at_mut(1);
            conv_same_backward(
                &t.p1,
                s.conv1_filters,
                h1,
                w1,
                Self::sl(&self.conv2_w),
                k,
                &dz2,
                &mut gw[0],
                &mut rest[0],
                Some(&mut dp1),
            );
        }

        let mut dz1 = vec![0.0; t.z1.len()];
        for (&src, &d) in t.idx1.iter().zip(&dp1) {
            if t.z1[src] > 0.0 {
                dz1[src] += d;
            }
        }
        let (gw, rest) = g.split_at_mut(1);
        conv_same_backward(image, 1, h, w, Self::sl(&self.conv1_w), k, &dz1, &mut gw[0], &mut rest[0], None);
        (loss, correct)
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.spec.input_len() {
            return Err(shape_err(format!("{} pixels per row", self.spec.input_len()), x.ncols()));
        }
        Ok(())
    }

    fn row_logits(&self, row: ndarray::ArrayView1<f64>) -> Vec<f64> {
        match row.as_slice() {
            Some(s) => self.trace(s).logits,
            None => self.trace(&row.to_vec()).logits,
        }
    }

    /// Probabilities for one `input_h × input_w` image.
    pub fn forward(&self, image: ArrayView2<f64>) -> Result<Vec<f64>, NnError> {
        if image.dim() != (self.spec.input_h, self.spec.input_w) {
            return Err(shape_err(
                format!("{}x{} image", self.spec.input_h, self.spec.input_w),
                format!("{}x{}", image.nrows(), image.ncols()),
            ));
        }
        let flat = image.as_standard_layout();
        Ok(softmax(&self.trace(flat.as_slice().expect("standard layout")).logits))
    }

    pub fn predict(&self, image: ArrayView2<f64>) -> Result<GaitLabel, NnError> {
        Ok(crate::label_of(crate::argmax(&self.forward(image)?)))
    }

    /// Predicts each row of flattened images.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<GaitLabel>, NnError> {
        self.check_input(x)?;
        Ok(x.rows()
            .into_iter()
            .map(|r| crate::label_of(crate::argmax(&self.row_logits(r))))
            .collect())
    }
}

/// Stacks images into one flattened row each.
pub fn image_matrix(images: &[Array2<f64>]) -> Array2<f64> {
    let len = images.first().map_or(0, |i| i.len());
    let mut out = Array2::zeros((images.len(), len));
    for (mut row, img) in out.rows_mut().into_iter().zip(images) {
        row.assign(&Array1::from_iter(img.iter().copied()));
    }
    out
}

impl Network for Cnn {
    fn input_dim(&self) -> usize {
        self.spec.input_len()
    }

    fn n_classes(&self) -> usize {
        self.spec.classes
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![
            Self::sl(&self.conv1_w),
            Self::sl(&self.conv1_b),
            Self::sl(&self.conv2_w),
            Self::sl(&self.conv2_b),
            Self::sl(&self.dense1_w),
            Self::sl(&self.dense1_b),
            Self::sl(&self.dense2_w),
            Self::sl(&self.dense2_b),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.conv1_w.as_slice_mut().expect("standard layout"),
            self.conv1_b.as_slice_mut().expect("standard layout"),
            self.conv2_w.as_slice_mut().expect("standard layout"),
            self.conv2_b.as_slice_mut().expect("standard layout"),
            self.dense1_w.as_slice_mut().expect("standard layout"),
            self.dense1_b.as_slice_mut().expect("standard layout"),
            self.dense2_w.as_slice_mut().expect("standard layout"),
            self.dense2_b.as_slice_mut().expect("standard layout"),
        ]
    }

    fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<BatchGradients, NnError> {
        self.check_input(x)?;
        if x.nrows() != y.len() {
            return Err(shape_err(format!("{} labels", x.nrows()), y.len()));
        }
        if y.is_empty() {
            return Err(NnError::EmptyData);
        }
        let x = x.as_standard_layout();
        let zeros: Vec<Vec<f64>> = self.params().iter().map(|p| vec![0.0; p.len()]).collect();
        let rows: Vec<usize> = (0..y.len()).collect();
        let partials: Vec<(f64, usize, Vec<Vec<f64>>)> = rows
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut g = zeros.clone();
                let mut loss = 0.0;
                let mut correct = 0;
                for &i in chunk {
                    let img = x.row(i);
                    let (l, ok) = self.backprop(img.as_slice().expect("contiguous row"), y[i], &mut g);
                    loss += l;
                    correct += usize::from(ok);
                }
                (loss, correct, g)
            })
            .collect();

        let n = y.len() as f64;
        let mut grads = zeros;
        let mut loss = 0.0;
        let mut correct = 0;
        for (l, c, g) in partials {
            loss += l;
            correct += c;
            for (acc, part) in grads.iter_mut().zip(g) {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
            }
        }
        for v in grads.iter_mut().flatten() {
            *v /= n;
        }
        Ok(BatchGradients { loss: loss / n, correct, grads })
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x)?;
        let mut out = Array2::zeros((x.nrows(), self.spec.classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let p = softmax(&self.row_logits(row));
            out.row_mut(i).assign(&Array1::from(p));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{max_relative_error, numeric_gradients, train, TrainConfig};
    use super::*;
    use ndarray::s;

    fn small_spec() -> CnnSpec {
        CnnSpec {
            input_h: 8,
            input_w: 9,
            kernel: 3,
            conv1_filters: 2,
            conv2_filters: 3,
            dense_units: 5,
            classes: 4,
        }
    }

    fn random_images(n: usize, len: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, len), |_| rng.gen_range(0.0..1.0))
    }

    /// Explicit zero-padded cross-correlation, one output value at a time.
    fn naive_conv(input: &Array3<f64>, weights: &Array4<f64>, bias: &Array1<f64>) -> Array3<f64> {
        let (c, h, w) = input.dim();
        let (f, _, k, _) = weights.dim();
        let p = k / 2;
        let mut padded = Array3::zeros((c, h + 2 * p, w + 2 * p));
        padded.slice_mut(s![.., p..p + h, p..p + w]).assign(input);
        let mut out = Array3::zeros((f, h, w));
        for fo in 0..f {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[fo];
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                acc += padded[[ci, y + ky, x + kx]] * weights[[fo, ci, ky, kx]];
                            }
                        }
                    }
                    out[[fo, y, x]] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = rng_from_seed(1);
        let x = Array3::from_shape_fn((1, 22, 129), |_| rng.gen_range(-1.0..1.0));
        let mut k = Array4::zeros((1, 1, 3, 3));
        k[[0, 0, 1, 1]] = 1.0;
        let y = conv2d(x.view(), k.view(), Array1::zeros(1).view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let mut rng = rng_from_seed(2);
        let x = Array3::from_shape_fn((3, 5, 5), |_| rng.gen_range(-1.0..1.0));
        let w = Array4::from_shape_fn((2, 3, 3, 3), |_| rng.gen_range(-1.0..1.0));
        let b = Array1::from(vec![0.3, -0.7]);
        let fast = conv2d(x.view(), w.view(), b.view()).unwrap();
        let slow = naive_conv(&x, &w, &b);
        let diff = (&fast - &slow).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn conv_rejects_mismatched_channels() {
        let x = Array3::zeros((2, 4, 4));
        let w = Array4::zeros((1, 3, 3, 3));
        assert!(conv2d(x.view(), w.view(), Array1::zeros(1).view()).is_err());
    }

    #[test]
    fn maxpool_floors_odd_dims() {
        let x = Array3::from_shape_fn((2, 22, 129), |(c, y, x)| (c * 1000 + y * 129 + x) as f64);
        let p = maxpool2x2(x.view());
        assert_eq!(p.dim(), (2, 11, 64));
        // Values increase along both axes, so the bottom-right cell wins.
        assert_eq!(p[[0, 0, 0]], x[[0, 1, 1]]);
        assert_eq!(p[[1, 10, 63]], x[[1, 21, 127]]);
    }

    #[test]
    fn default_layer_shapes() {
        let shapes = CnnSpec::default().layer_shapes();
        let dims: Vec<Vec<usize>> = shapes.iter().map(|s| s.dims.clone()).collect();
        assert_eq!(
            dims,
            vec![
                vec![1, 22, 129],
                vec![8, 22, 129],
                vec![8, 11, 64],
                vec![16, 11, 64],
                vec![16, 5, 32],
                vec![2560],
                vec![64],
                vec![4],
            ]
        );
    }

    #[test]
    fn computed_shapes_match_declared() {
        for spec in [CnnSpec::default(), small_spec()] {
            let net = Cnn::new(spec.clone(), 0).unwrap();
            let img = random_images(1, spec.input_len(), 3);
            let t = net.trace(img.row(0).as_slice().unwrap());
            let declared: Vec<usize> = spec.layer_shapes().iter().map(LayerShape::len).collect();
            let computed = [
                spec.input_len(),
                t.z1.len(),
                t.p1.len(),
                t.z2.len(),
                t.idx2.len(),
                t.flat.len(),
                t.z3.len(),
                t.logits.len(),
            ];
            assert_eq!(declared, computed);
            assert_eq!(t.a3.len(), spec.dense_units);
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = Cnn::new(CnnSpec::default(), 5).unwrap();
        assert_eq!(a, Cnn::new(CnnSpec::default(), 5).unwrap());
        assert!(a.conv1_w.iter().all(|v| v.abs() <= he_bound(9)));
        assert!(a.dense1_w.iter().all(|v| v.abs() <= he_bound(2560)));
        for b in [&a.conv1_b, &a.conv2_b, &a.dense1_b, &a.dense2_b] {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_is_probability_vector() {
        let net = Cnn::new(CnnSpec::default(), 1).unwrap();
        let img = random_images(1, 22 * 129, 4).into_shape_with_order((22, 129)).unwrap();
        let p = net.forward(img.view()).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(net.forward(Array2::zeros((21, 129)).view()).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let net = Cnn::new(small_spec(), 7).unwrap();
        let x = random_images(5, small_spec().input_len(), 8);
        let y = [0, 1, 2, 3, 1];
        let analytic = net.loss_and_gradients(x.view(), &y).unwrap().grads;
        let numeric = numeric_gradients(&net, x.view(), &y, 1e-5);
        // Every layer type receives gradient signal.
        for g in &analytic {
            assert!(g.iter().any(|&v| v != 0.0));
        }
        let err = max_relative_error(&analytic, &numeric, 1e-6);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gradients_do_not_depend_on_chunking() {
        let net = Cnn::new(small_spec(), 3).unwrap();
        let x = random_images(9, small_spec().input_len(), 1);
        let y = [0, 1, 2, 3, 0, 1, 2, 3, 0];
        let a = net.loss_and_gradients(x.view(), &y).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| net.loss_and_gradients(x.view(), &y).unwrap());
        assert_eq!(a.grads, b.grads);
        assert_eq!(a.loss, b.loss);
    }

    #[test]
    fn small_cnn_learns_separable_images() {
        // Class k lights up row band k.
        let spec = small_spec();
        let mut rng = rng_from_seed(5);
        let mut x = Array2::zeros((32, spec.input_len()));
        let mut y = Vec::new();
        for i in 0..32 {
            let class = i % 4;
            for r in 0..spec.input_h {
                for c in 0..spec.input_w {
                    let band = r / 2 == class;
                    x[[i, r * spec.input_w + c]] = f64::from(u8::from(band)) + 0.1 * rng.gen_range(0.0..1.0);
                }
            }
            y.push(GaitLabel::from_index(class).unwrap());
        }
        let net = Cnn::new(spec, 2).unwrap();
        let cfg = TrainConfig { epochs: 150, batch_size: 8, learning_rate: 1e-2, ..Default::default() };
        let (net, h) = train(net, x.view(), &y, None, &cfg).unwrap();
        assert!(h.train_loss[0] > *h.train_loss.last().unwrap());
        assert_eq!(net.predict_batch(x.view()).unwrap(), y);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let net = Cnn::new(small_spec(), 4).unwrap();
        let x = random_images(4, small_spec().input_len(), 2);
        let y = vec![GaitLabel::Limping; 4];
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let (trained, h) = train(net.clone(), x.view(), &y, None, &cfg).unwrap();
        assert_eq!(trained, net);
        assert_eq!(h.epochs(), 0);
    }

    #[test]
    fn image_matrix_flattens_row_major() {
        let a = Array2::from_shape_fn((2, 3), |(r, c)| (r * 3 + c) as f64);
        let m = image_matrix(&[a.clone(), a]);
        assert_eq!(m.dim(), (2, 6));
        assert_eq!(m.row(1).to_vec(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
