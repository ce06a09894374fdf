use crate::EvalError;
use gaitlab_core::seed::rng_from_seed;
use gaitlab_core::{Dataset, GaitLabel};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Disjoint, exhaustive index sets, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(labels: &[GaitLabel]) -> [Vec<usize>; GaitLabel::COUNT] {
    let mut out: [Vec<usize>; GaitLabel::COUNT] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        out[l.index()].push(i);
    }
    out
}

/// Per class, `round(test_frac · count)` indices go to the test set. Classes
/// are shuffled in label order from a single RNG seeded with `seed`.
pub fn stratified_split_labels(labels: &[GaitLabel], test_frac: f64, seed: u64) -> Result<Split, EvalError> {
    if !(0.0..=1.0).contains(&test_frac) {
        return Err(EvalError::InvalidFraction(test_frac));
    }
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut idx) in class_indices(labels).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(EvalError::ClassTooSmall {
                label: GaitLabel::from_index(c).expect("class index"),
                count: idx.len(),
                needed: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_test = (test_frac * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn stratified_split(ds: &Dataset, test_frac: f64, seed: u64) -> Result<Split, EvalError> {
    stratified_split_labels(&ds.labels(), test_frac, seed)
}

/// Stratified k-fold assignment: returns `k` validation index sets. Within
/// each class, shuffled indices are dealt to folds round-robin.
pub fn stratified_folds(labels: &[GaitLabel], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    for (c, mut idx) in class_indices(labels).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(EvalError::ClassTooSmall {
                label: GaitLabel::from_index(c).expect("class index"),
                count: idx.len(),
                needed: k,
            });
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Training indices for validation fold `fold`.
pub(crate) fn complement(folds: &[Vec<usize>], fold: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != fold)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    out.sort_unstable();
    out
}
