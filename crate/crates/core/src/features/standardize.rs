use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Per-column z-scoring with population standard deviation.
/// Zero-variance columns get `std = 1`, so they map to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_standardizer(x: &Array2<f64>) -> Result<Standardizer, FeatureError> {
    let n = x.nrows();
    if n < 2 {
        return Err(FeatureError::TooFewSamples { needed: 2, got: n });
    }
    let mean: Array1<f64> = x.mean_axis(Axis(0)).expect("non-empty");
    let std: Vec<f64> = x
        .axis_iter(Axis(1))
        .zip(mean.iter())
        .map(|(col, &m)| {
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            if s <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(Standardizer {
        mean: mean.to_vec(),
        std,
    })
}

impl Standardizer {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn standardize(&self, x: &Array2<f64>) -> Result<Array2<f64>, FeatureError> {
        if x.ncols() != self.dims() {
            return Err(FeatureError::LengthMismatch {
                expected: self.dims(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn standardize_row(&self, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if v.len() != self.dims() {
            return Err(FeatureError::LengthMismatch {
                expected: self.dims(),
                got: v.len(),
            });
        }
        Ok(v
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn needs_two_rows() {
        assert_eq!(
            fit_standardizer(&array![[1.0, 2.0]]).unwrap_err(),
            FeatureError::TooFewSamples { needed: 2, got: 1 }
        );
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = array![[0.1, 1.0], [0.1, 2.0], [0.1, 3.0]];
        let s = fit_standardizer(&x).unwrap();
        assert_eq!(s.std[0], 1.0);
        let z = s.standardize(&x).unwrap();
        assert!(z.column(0).iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn two_point_column_is_symmetric() {
        let x = array![[0.0], [2.0]];
        let z = fit_standardizer(&x).unwrap().standardize(&x).unwrap();
        assert_eq!(z, array![[-1.0], [1.0]]);
    }

    #[test]
    fn recomputed_moments_are_zero_and_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((40, 25), |(_, j)| rng.gen_range(-5.0..5.0) * (j + 1) as f64 + j as f64);
        let z = fit_standardizer(&x).unwrap().standardize(&x).unwrap();
        for col in z.columns() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((std - 1.0).abs() < 1e-9, "std {std}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let s = fit_standardizer(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(s.standardize(&array![[1.0]]).is_err());
        assert!(s.standardize_row(&[1.0, 2.0, 3.0]).is_err());
    }
}
