use gaitlab_core::GaitLabel;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{rbf_gram, solve_smo, to_machine, BinarySvm};
use super::{rbf_unchecked, SvmError, SvmParams};
use std::collections::HashMap;

/// Pairwise machine for classes `(positive, negative)`, `positive < negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub positive: GaitLabel,
    pub negative: GaitLabel,
    pub svm: BinarySvm,
}

/// One-vs-one ensemble over the four gait classes: C(4,2) = 6 machines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoSvm {
    pub classes: Vec<GaitLabel>,
    pub pairwise: Vec<PairMachine>,
    pub params: SvmParams,
}

pub fn train_ovo(x: ArrayView2<f64>, labels: &[GaitLabel], params: &SvmParams) -> Result<OvoSvm, SvmError> {
    if x.nrows() != labels.len() {
        return Err(SvmError::LengthMismatch(x.nrows(), labels.len()));
    }
    params.validate()?;
    for class in GaitLabel::ALL {
        if labels.iter().filter(|&&l| l == class).count() < 2 {
            return Err(SvmError::MissingClass(class.code().to_string()));
        }
    }
    let pairs: Vec<(GaitLabel, GaitLabel)> = GaitLabel::ALL
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| GaitLabel::ALL[i + 1..].iter().map(move |&b| (a, b)))
        .collect();

    let pairwise = pairs
        .par_iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let sub = Array2::from_shape_fn((idx.len(), x.ncols()), |(r, c)| x[[idx[r], c]]);
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let k = rbf_gram(sub.view(), params.gamma);
            let sub_params = SvmParams {
                seed: params.seed.wrapping_add(p as u64),
                ..params.clone()
            };
            let sol = solve_smo(&k, &y, &sub_params, None)?;
            Ok(PairMachine {
                positive: a,
                negative: b,
                svm: to_machine(sub.view(), &y, &sol, params.gamma),
            })
        })
        .collect::<Result<Vec<_>, SvmError>>()?;

    Ok(OvoSvm {
        classes: GaitLabel::ALL.to_vec(),
        pairwise,
        params: params.clone(),
    })
}

impl OvoSvm {
    /// Majority vote over the pairwise decisions. Ties go to the tied class
    /// with the largest sum of `|f|` over the machines it won, then to the
    /// lowest label code.
    pub fn predict(&self, x: &[f64]) -> GaitLabel {
        let decisions: Vec<f64> = self.pairwise.iter().map(|m| m.svm.decision(x)).collect();
        self.vote(&decisions)
    }

    fn vote(&self, decisions: &[f64]) -> GaitLabel {
        let mut votes = [0usize; GaitLabel::COUNT];
        let mut confidence = [0.0f64; GaitLabel::COUNT];
        for (m, &f) in self.pairwise.iter().zip(decisions) {
            let winner = if f >= 0.0 { m.positive } else { m.negative };
            votes[winner.index()] += 1;
            confidence[winner.index()] += f.abs();
        }
        let top = *votes.iter().max().expect("four classes");
        let mut best: Option<usize> = None;
        for c in 0..GaitLabel::COUNT {
            if votes[c] == top && best.is_none_or(|b| confidence[c] > confidence[b]) {
                best = Some(c);
            }
        }
        crate::label_of(best.expect("some class has the top vote"))
    }

    /// Same result as [`OvoSvm::predict`] per row. A training point is
    /// usually a support vector of several machines, so each distinct
    /// support vector's kernel value is computed once per row and shared.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        let mut unique: Vec<(&[f64], f64)> = Vec::new();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let index: Vec<Vec<usize>> = self
            .pairwise
            .iter()
            .map(|m| {
                m.svm
                    .support_vectors
                    .rows()
                    .into_iter()
                    .map(|row| {
                        let row = row.to_slice().expect("standard layout");
                        let mut key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
                        key.push(m.svm.gamma.to_bits());
                        *seen.entry(key).or_insert_with(|| {
                            unique.push((row, m.svm.gamma));
                            unique.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let mut k = vec![0.0; unique.len()];
        x.rows()
            .into_iter()
            .map(|r| {
                let r = r.to_vec();
                for (kv, (sv, gamma)) in k.iter_mut().zip(&unique) {
                    *kv = rbf_unchecked(sv, &r, *gamma);
                }
                let decisions: Vec<f64> = self
                    .pairwise
                    .iter()
                    .zip(&index)
                    .map(|(m, idx)| {
                        let mut f = m.svm.bias;
                        for (coef, &i) in m.svm.alphas_times_labels.iter().zip(idx) {
                            f += coef * k[i];
                        }
                        f
                    })
                    .collect();
                self.vote(&decisions)
            })
            .collect()
    }

    /// Support vectors summed over machines.
    pub fn n_support(&self) -> usize {
        self.pairwise.iter().map(|m| m.svm.n_support()).sum()
    }
}
