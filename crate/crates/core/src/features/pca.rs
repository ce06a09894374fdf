use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureLayout, FeatureVector};

/// Fitted principal axes. `components` rows are orthonormal and ordered by
/// decreasing `explained_variance` (eigenvalues of the sample covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
}

/// Relative eigenvalue floor below which a direction counts as absent.
const RANK_TOL: f64 = 1e-12;

/// Top-`k` principal components of the rows of `x`.
///
/// Eigendecomposes whichever of the `d × d` covariance or the `n × n` Gram
/// matrix of the centred data is smaller. Each component is signed so that
/// its largest-magnitude entry is positive.
pub fn fit_pca(x: &Array2<f64>, k: usize) -> Result<PcaModel, FeatureError> {
    let (n, d) = x.dim();
    if k == 0 {
        return Err(FeatureError::InvalidConfig("k must be >= 1".into()));
    }
    if n <= k {
        return Err(FeatureError::TooFewSamples { needed: k + 1, got: n });
    }
    if k > d {
        return Err(FeatureError::RankDeficient { k, rank: d });
    }
    let mean = x.mean_axis(Axis(0)).expect("n > 0");
    let centered = x - &mean;
    let denom = (n - 1) as f64;

    let (mut components, values) = if d <= n {
        let cov = centered.t().dot(&centered) / denom;
        let (vals, vecs) = top_eigenpairs(&cov, k);
        check_rank(&vals, k)?;
        (vecs.reversed_axes(), vals)
    } else {
        let gram = centered.dot(&centered.t()) / denom;
        let (vals, vecs) = top_eigenpairs(&gram, k);
        check_rank(&vals, k)?;
        // v = Xcᵀ u / sqrt((n-1) λ)
        let mut comps = vecs.t().dot(&centered);
        for (mut row, &lambda) in comps.rows_mut().into_iter().zip(&vals) {
            row /= (denom * lambda).sqrt();
        }
        reorthonormalize(&mut comps);
        (comps, vals)
    };

    for mut row in components.rows_mut() {
        let pivot = row
            .iter()
            .copied()
            .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: values.into_iter().map(|v| v.max(0.0)).collect(),
    })
}

fn check_rank(values: &[f64], k: usize) -> Result<(), FeatureError> {
    let top = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().filter(|&&v| top > 0.0 && v > RANK_TOL * top).count();
    if rank < k {
        Err(FeatureError::RankDeficient { k, rank })
    } else {
        Ok(())
    }
}

/// Largest `k` eigenvalues (descending) and their eigenvectors as columns.
fn top_eigenpairs(sym: &Array2<f64>, k: usize) -> (Vec<f64>, Array2<f64>) {
    let m = sym.nrows();
    let mat = DMatrix::from_fn(m, m, |i, j| 0.5 * (sym[[i, j]] + sym[[j, i]]));
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((m, k), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// One modified Gram-Schmidt sweep over the rows.
fn reorthonormalize(rows: &mut Array2<f64>) {
    for i in 0..rows.nrows() {
        for j in 0..i {
            let proj = rows.row(i).dot(&rows.row(j));
            let prev = rows.row(j).to_owned();
            rows.row_mut(i).scaled_add(-proj, &prev);
        }
        let norm = rows.row(i).dot(&rows.row(i)).sqrt();
        rows.row_mut(i).mapv_inplace(|v| v / norm);
    }
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dims(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
        Ok(FeatureVector {
            values: self.transform_slice(&v.values)?,
            layout: FeatureLayout::Pca,
        })
    }

    pub fn transform_slice(&self, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if v.len() != self.input_dims() {
            return Err(FeatureError::LengthMismatch {
                expected: self.input_dims(),
                got: v.len(),
            });
        }
        let centered = Array1::from_iter(v.iter().zip(&self.mean).map(|(x, m)| x - m));
        Ok(self.components.dot(&centered).to_vec())
    }

    pub fn transform_matrix(&self, x: &Array2<f64>) -> Result<Array2<f64>, FeatureError> {
        if x.ncols() != self.input_dims() {
            return Err(FeatureError::LengthMismatch {
                expected: self.input_dims(),
                got: x.ncols(),
            });
        }
        Ok((x - &self.mean).dot(&self.components.t()))
    }

    /// `mean + Cᵀ·scores` using only the first `k` components.
    pub fn reconstruct(&self, scores: &[f64], k: usize) -> Array1<f64> {
        let k = k.min(self.k());
        let mut out = self.mean.clone();
        for (i, &s) in scores.iter().take(k).enumerate() {
            out.scaled_add(s, &self.components.row(i));
        }
        out
    }
}
