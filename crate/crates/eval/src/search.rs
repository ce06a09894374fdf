use crate::metrics::accuracy;
use crate::split::{complement, stratified_folds};
use crate::{Classifier, EvalError};
use gaitlab_core::seed::{derive_seed, rng_from_seed};
use gaitlab_core::GaitLabel;
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type FitResult = Result<Box<dyn Classifier>, EvalError>;

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn select(x: ArrayView2<f64>, y: &[GaitLabel], idx: &[usize]) -> (ndarray::Array2<f64>, Vec<GaitLabel>) {
    (x.select(Axis(0), idx), idx.iter().map(|&i| y[i]).collect())
}

/// Fits on `train` rows and returns (accuracy on `val` rows, model complexity).
fn fit_and_score<F>(x: ArrayView2<f64>, y: &[GaitLabel], train: &[usize], val: &[usize], fit: F) -> Result<(f64, usize), EvalError>
where
    F: FnOnce(ArrayView2<f64>, &[GaitLabel]) -> FitResult,
{
    let (tx, ty) = select(x, y, train);
    let (vx, vy) = select(x, y, val);
    let model = fit(tx.view(), &ty)?;
    let pred = model.predict_rows(vx.view());
    Ok((accuracy(&vy, &pred)?, model.complexity()))
}

fn check(x: ArrayView2<f64>, y: &[GaitLabel]) -> Result<(), EvalError> {
    if x.nrows() != y.len() {
        return Err(EvalError::LengthMismatch(x.nrows(), y.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Stratified k-fold validation accuracies, one per fold.
pub fn cross_val_accuracy<F>(x: ArrayView2<f64>, y: &[GaitLabel], folds: usize, seed: u64, fit: F) -> Result<Vec<f64>, EvalError>
where
    F: Fn(ArrayView2<f64>, &[GaitLabel]) -> FitResult + Sync,
{
    check(x, y)?;
    let assignment = stratified_folds(y, folds, seed)?;
    (0..folds)
        .into_par_iter()
        .map(|f| fit_and_score(x, y, &complement(&assignment, f), &assignment[f], &fit).map(|(a, _)| a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow<P> {
    pub params: P,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Mean over folds of [`Classifier::complexity`].
    pub complexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult<P> {
    pub rows: Vec<GridRow<P>>,
    pub best: usize,
}

impl<P> GridResult<P> {
    pub fn best_params(&self) -> &P {
        &self.rows[self.best].params
    }
}

/// Evaluates every grid point with the same stratified folds. The best row
/// has the highest mean accuracy; ties go to lower complexity, then to the
/// earlier grid point.
pub fn grid_search<P, F>(grid: &[P], x: ArrayView2<f64>, y: &[GaitLabel], folds: usize, seed: u64, fit: F) -> Result<GridResult<P>, EvalError>
where
    P: Clone + Sync,
    F: Fn(&P, ArrayView2<f64>, &[GaitLabel]) -> FitResult + Sync,
{
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    check(x, y)?;
    let assignment = stratified_folds(y, folds, seed)?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let scores: Vec<(f64, usize)> = jobs
        .par_iter()
        .map(|&(g, f)| fit_and_score(x, y, &complement(&assignment, f), &assignment[f], |tx, ty| fit(&grid[g], tx, ty)))
        .collect::<Result<_, _>>()?;

    let rows: Vec<GridRow<P>> = grid
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let part = &scores[g * folds..(g + 1) * folds];
            let acc: Vec<f64> = part.iter().map(|s| s.0).collect();
            let (mean, std) = mean_std(&acc);
            GridRow {
                params: p.clone(),
                fold_accuracy: acc,
                mean_accuracy: mean,
                std_accuracy: std,
                complexity: part.iter().map(|s| s.1 as f64).sum::<f64>() / folds as f64,
            }
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        if r.mean_accuracy > b.mean_accuracy || (r.mean_accuracy == b.mean_accuracy && r.complexity < b.complexity) {
            best = i;
        }
    }
    Ok(GridResult { rows, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    /// Mean training-set size across folds.
    pub train_size: f64,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

pub fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// Keeps `round(fraction · count)` training indices per class; the whole
/// fold when `fraction == 1`.
fn subsample(train: &[usize], y: &[GaitLabel], fraction: f64, seed: u64) -> Result<Vec<usize>, EvalError> {
    if fraction == 1.0 {
        return Ok(train.to_vec());
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    for label in GaitLabel::ALL {
        let mut idx: Vec<usize> = train.iter().copied().filter(|&i| y[i] == label).collect();
        if idx.is_empty() {
            continue;
        }
        let keep = (fraction * idx.len() as f64).round() as usize;
        if keep == 0 {
            return Err(EvalError::InfeasibleFraction { fraction, label });
        }
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..keep]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Cross-validated accuracy as a function of training-set size. Every point
/// uses the same folds; validation folds are never subsampled.
pub fn learning_curve<F>(
    x: ArrayView2<f64>,
    y: &[GaitLabel],
    fractions: &[f64],
    folds: usize,
    seed: u64,
    fit: F,
) -> Result<Vec<CurvePoint>, EvalError>
where
    F: Fn(ArrayView2<f64>, &[GaitLabel]) -> FitResult + Sync,
{
    check(x, y)?;
    if let Some(&bad) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(EvalError::InvalidFraction(bad));
    }
    let assignment = stratified_folds(y, folds, seed)?;
    let mut jobs = Vec::new();
    for (fi, &fraction) in fractions.iter().enumerate() {
        for f in 0..folds {
            let train = subsample(&complement(&assignment, f), y, fraction, derive_seed(seed, (fi * folds + f) as u64))?;
            jobs.push((train, f));
        }
    }
    let scores: Vec<(f64, usize)> = jobs
        .par_iter()
        .map(|(train, f)| Ok((fit_and_score(x, y, train, &assignment[*f], &fit)?.0, train.len())))
        .collect::<Result<_, EvalError>>()?;
    Ok(fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            let part = &scores[fi * folds..(fi + 1) * folds];
            let acc: Vec<f64> = part.iter().map(|s| s.0).collect();
            let (mean, std) = mean_std(&acc);
            CurvePoint {
                fraction,
                train_size: part.iter().map(|s| s.1 as f64).sum::<f64>() / folds as f64,
                fold_accuracy: acc,
                mean_accuracy: mean,
                std_accuracy: std,
            }
        })
        .collect())
}
