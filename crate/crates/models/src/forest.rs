//! Random forest of Gini CART trees.

use gaitlab_core::seed::{derive_seed, rng_from_seed};
use gaitlab_core::GaitLabel;
use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const CLASSES: usize = GaitLabel::COUNT;
/// Gains at or below this are treated as zero.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("length mismatch: {0} rows vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty node: class counts sum to zero")]
    EmptyNode,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

/// `1 − Σ pᵢ²`.
pub fn gini_impurity(counts: &[usize]) -> Result<f64, ForestError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(ForestError::EmptyNode);
    }
    let t = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

fn gini(counts: &[usize; CLASSES], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: [usize; CLASSES] },
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[usize; CLASSES] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf, ties to the lowest code.
    pub fn predict(&self, x: &[f64]) -> GaitLabel {
        let counts = self.leaf_counts(x);
        let votes: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        crate::label_of(crate::argmax(&votes))
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a, 'x> {
    x: ArrayView2<'x, f64>,
    y: &'a [usize],
    params: &'a ForestParams,
    max_features: usize,
}

impl Builder<'_, '_> {
    fn counts(&self, samples: &[usize]) -> [usize; CLASSES] {
        let mut c = [0; CLASSES];
        for &s in samples {
            c[self.y[s]] += 1;
        }
        c
    }

    /// Exhaustive threshold search over a random feature subset. Candidate
    /// thresholds are midpoints of consecutive distinct values.
    fn best_split(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let n = samples.len();
        let parent_counts = self.counts(samples);
        let parent = gini(&parent_counts, n);
        let d = self.x.ncols();
        let features = sample(rng, d, self.max_features);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        for feature in features.iter() {
            order.clear();
            order.extend(samples.iter().map(|&s| (self.x[[s, feature]], self.y[s])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; CLASSES];
            for split in 1..n {
                left[order[split - 1].1] += 1;
                let (lo, hi) = (order[split - 1].0, order[split].0);
                if lo == hi || split < min_leaf || n - split < min_leaf {
                    continue;
                }
                let mut right = parent_counts;
                for c in 0..CLASSES {
                    right[c] -= left[c];
                }
                let weighted = (split as f64 * gini(&left, split)
                    + (n - split) as f64 * gini(&right, n - split))
                    / n as f64;
                let gain = parent - weighted;
                if best.is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    // Midpoint can round up to `hi` for adjacent floats.
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best.filter(|b| b.gain > MIN_GAIN)
    }

    fn build(&self, root: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::Leaf { counts: [0; CLASSES] }];
        let mut stack = vec![(0usize, root)];
        while let Some((slot, samples)) = stack.pop() {
            let counts = self.counts(&samples);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure || samples.len() < self.params.min_samples_split {
                None
            } else {
                self.best_split(&samples, rng)
            };
            match split {
                None => nodes[slot] = Node::Leaf { counts },
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = samples
                        .iter()
                        .partition(|&&i| self.x[[i, s.feature]] <= s.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { counts: [0; CLASSES] });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { counts: [0; CLASSES] });
                    nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    stack.push((right, r));
                    stack.push((left, l));
                }
            }
        }
        Tree { nodes }
    }
}

fn check_inputs(x: ArrayView2<f64>, y: &[GaitLabel]) -> Result<(), ForestError> {
    if x.nrows() != y.len() {
        return Err(ForestError::LengthMismatch(x.nrows(), y.len()));
    }
    if y.len() < 2 {
        return Err(ForestError::TooFewSamples(y.len()));
    }
    Ok(())
}

/// Grows one tree on `samples` (row indices, repeats allowed).
pub fn train_tree(
    x: ArrayView2<f64>,
    y: &[GaitLabel],
    samples: Vec<usize>,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<Tree, ForestError> {
    check_inputs(x, y)?;
    if params.min_samples_leaf == 0 {
        return Err(ForestError::InvalidParams("min_samples_leaf must be >= 1".into()));
    }
    let y_idx: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let builder = Builder {
        x,
        y: &y_idx,
        params,
        max_features: params.max_features.resolve(x.ncols()),
    };
    Ok(builder.build(samples, rng))
}

/// Bootstrap indices of size `n` drawn with replacement.
pub fn bootstrap_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

/// Tree `t` is grown with RNG seed `derive_seed(seed, t)`; the bootstrap
/// draw comes first from that stream.
pub fn train_forest(
    x: ArrayView2<f64>,
    y: &[GaitLabel],
    params: &ForestParams,
    seed: u64,
) -> Result<Forest, ForestError> {
    check_inputs(x, y)?;
    if params.n_trees == 0 {
        return Err(ForestError::InvalidParams("n_trees must be >= 1".into()));
    }
    let n = y.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let samples = if params.bootstrap {
                bootstrap_sample(n, &mut rng)
            } else {
                (0..n).collect()
            };
            train_tree(x, y, samples, params, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest {
        params: params.clone(),
        seed,
        trees,
    })
}

/// Plurality over per-tree votes; ties to the lowest label code.
pub fn forest_predict(forest: &Forest, x: &[f64]) -> GaitLabel {
    let mut votes = [0.0; CLASSES];
    for tree in &forest.trees {
        votes[tree.predict(x).index()] += 1.0;
    }
    crate::label_of(crate::argmax(&votes))
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> GaitLabel {
        forest_predict(self, x)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
        x.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
