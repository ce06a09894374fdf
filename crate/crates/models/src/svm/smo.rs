//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! max  W(α) = Σ αᵢ − ½ Σᵢⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ, xⱼ)
//! s.t. 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! Working pairs are the maximal KKT-violating pair (Keerthi et al.). When
//! that pair cannot make progress (flat or non-convex direction) a random
//! violator is tried as second choice. Training stops once the largest
//! violation falls below `tol`, at which point every sample satisfies the
//! margin conditions on `y·f(x)` to within `tol / 2`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rbf_unchecked, SvmError, SvmParams};

/// Trained binary classifier, `f(x) = Σ coefᵢ K(svᵢ, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Array2<f64>,
    /// `αᵢ yᵢ` for each support vector.
    pub alphas_times_labels: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for (sv, coef) in self.support_vectors.rows().into_iter().zip(&self.alphas_times_labels) {
            f += coef * rbf_unchecked(sv.as_slice().expect("standard layout"), x, self.gamma);
        }
        f
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn n_support(&self) -> usize {
        self.alphas_times_labels.len()
    }
}

/// Dual solution over the full training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub steps: usize,
    pub converged: bool,
}

/// One analytic two-variable update, reported to an optional observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoStep {
    pub step: usize,
    pub i: usize,
    pub j: usize,
    pub objective_before: f64,
    pub objective_after: f64,
}

pub fn rbf_gram(x: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    let rows: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let v = rbf_unchecked(rows[i], rows[j], gamma);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Index sets of the maximal-violating-pair rule. With `Fᵢ = uᵢ − yᵢ`
/// (`uᵢ` the kernel expansion without bias), optimality requires
/// `min_{up} F ≥ max_{low} F`.
fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y < 0.0 && a < c) || (y > 0.0 && a > 0.0)
}

struct Solver<'a> {
    k: &'a Array2<f64>,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    f: Vec<f64>,
    objective: f64,
}

impl Solver<'_> {
    fn select_pair(&self) -> Option<(usize, usize, f64)> {
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for i in 0..self.y.len() {
            let (y, a) = (self.y[i], self.alpha[i]);
            if in_up(y, a, self.c) && up.is_none_or(|u| self.f[i] < self.f[u]) {
                up = Some(i);
            }
            if in_low(y, a, self.c) && low.is_none_or(|l| self.f[i] > self.f[l]) {
                low = Some(i);
            }
        }
        match (up, low) {
            (Some(u), Some(l)) => Some((u, l, self.f[l] - self.f[u])),
            _ => None,
        }
    }

    fn bias(&self) -> f64 {
        let mut b_up = f64::INFINITY;
        let mut b_low = f64::NEG_INFINITY;
        for i in 0..self.y.len() {
            let (y, a) = (self.y[i], self.alpha[i]);
            if in_up(y, a, self.c) {
                b_up = b_up.min(self.f[i]);
            }
            if in_low(y, a, self.c) {
                b_low = b_low.max(self.f[i]);
            }
        }
        let beta = match (b_up.is_finite(), b_low.is_finite()) {
            (true, true) => 0.5 * (b_up + b_low),
            (true, false) => b_up,
            (false, true) => b_low,
            (false, false) => 0.0,
        };
        -beta
    }

    /// Jointly optimizes `(α_i, α_j)`; returns whether anything moved.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let c = self.c;
        let s = yi * yj;
        let (lo, hi) = if s < 0.0 {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        if hi - lo <= 1e-12 * c {
            return false;
        }
        let kii = self.k[[i, i]];
        let kjj = self.k[[j, j]];
        let kij = self.k[[i, j]];
        let eta = kii + kjj - 2.0 * kij;
        let fdiff = self.f[i] - self.f[j];

        let new_aj = if eta > 1e-12 {
            (aj + yj * fdiff / eta).clamp(lo, hi)
        } else {
            // Objective is linear (or concave-up) along the segment: pick the
            // better endpoint.
            let gain = |t: f64| self.pair_gain(i, j, s * (aj - t), t - aj);
            let (g_lo, g_hi) = (gain(lo), gain(hi));
            if g_lo > g_hi + 1e-12 {
                lo
            } else if g_hi > g_lo + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        let new_aj = snap(new_aj, c);
        let delta_j = new_aj - aj;
        if delta_j.abs() < 1e-12 * (aj + new_aj + 1e-12) {
            return false;
        }
        let new_ai = snap(ai + s * (aj - new_aj), c);
        let delta_i = new_ai - ai;

        self.objective += self.pair_gain(i, j, delta_i, delta_j);
        self.alpha[i] = new_ai;
        self.alpha[j] = new_aj;
        let (ci, cj) = (yi * delta_i, yj * delta_j);
        let (ki, kj) = (self.k.row(i), self.k.row(j));
        for (t, f) in self.f.iter_mut().enumerate() {
            *f += ci * ki[t] + cj * kj[t];
        }
        true
    }

    /// Exact change of the dual objective for a move `(δᵢ, δⱼ)`.
    fn pair_gain(&self, i: usize, j: usize, di: f64, dj: f64) -> f64 {
        // ∇W_t = 1 − y_t u_t = −y_t F_t
        let gi = -self.y[i] * self.f[i];
        let gj = -self.y[j] * self.f[j];
        let (yi, yj) = (self.y[i], self.y[j]);
        let quad = di * di * self.k[[i, i]]
            + dj * dj * self.k[[j, j]]
            + 2.0 * di * dj * yi * yj * self.k[[i, j]];
        gi * di + gj * dj - 0.5 * quad
    }
}

fn snap(a: f64, c: f64) -> f64 {
    if a < 1e-12 * c {
        0.0
    } else if a > c * (1.0 - 1e-12) {
        c
    } else {
        a
    }
}

/// Solves the dual for a precomputed kernel matrix.
pub fn solve_smo(
    k: &Array2<f64>,
    y: &[f64],
    params: &SvmParams,
    mut observer: Option<&mut dyn FnMut(&SmoStep)>,
) -> Result<SmoSolution, SvmError> {
    params.validate()?;
    let n = y.len();
    if k.dim() != (n, n) {
        return Err(SvmError::LengthMismatch(k.nrows(), n));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidLabel(bad));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(SvmError::SingleClass);
    }

    let mut solver = Solver {
        k,
        y,
        c: params.c,
        alpha: vec![0.0; n],
        f: y.iter().map(|v| -v).collect(),
        objective: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let max_steps = params.max_passes.saturating_mul(n).max(1);
    let mut steps = 0;
    let mut converged = false;

    while steps < max_steps {
        let Some((up, low, gap)) = solver.select_pair() else {
            converged = true;
            break;
        };
        if gap <= params.tol {
            converged = true;
            break;
        }
        let before = solver.objective;
        let mut pair = (up, low);
        let mut moved = solver.take_step(up, low);
        if !moved {
            // Second choice: random violators paired with the worst one.
            let mut candidates: Vec<usize> = (0..n)
                .filter(|&t| {
                    t != up
                        && in_low(y[t], solver.alpha[t], params.c)
                        && solver.f[t] - solver.f[up] > params.tol
                })
                .collect();
            candidates.shuffle(&mut rng);
            for t in candidates {
                if solver.take_step(up, t) {
                    pair = (up, t);
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            break;
        }
        steps += 1;
        if let Some(obs) = observer.as_deref_mut() {
            obs(&SmoStep {
                step: steps,
                i: pair.0,
                j: pair.1,
                objective_before: before,
                objective_after: solver.objective,
            });
        }
    }

    let bias = solver.bias();
    Ok(SmoSolution {
        alpha: solver.alpha,
        bias,
        objective: solver.objective,
        steps,
        converged,
    })
}

/// Dual objective `Σα − ½ Σ αᵢαⱼyᵢyⱼKᵢⱼ` evaluated from scratch.
pub fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let ay = Array1::from_iter(alpha.iter().zip(y).map(|(a, y)| a * y));
    alpha.iter().sum::<f64>() - 0.5 * ay.dot(&k.dot(&ay))
}

pub fn train_binary_svm(
    x: ArrayView2<f64>,
    y: &[f64],
    params: &SvmParams,
) -> Result<BinarySvm, SvmError> {
    if x.nrows() != y.len() {
        return Err(SvmError::LengthMismatch(x.nrows(), y.len()));
    }
    params.validate()?;
    let x = x.as_standard_layout();
    let k = rbf_gram(x.view(), params.gamma);
    let sol = solve_smo(&k, y, params, None)?;
    Ok(to_machine(x.view(), y, &sol, params.gamma))
}

pub(crate) fn to_machine(x: ArrayView2<f64>, y: &[f64], sol: &SmoSolution, gamma: f64) -> BinarySvm {
    let sv: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let d = x.ncols();
    let mut support_vectors = Array2::zeros((sv.len(), d));
    for (r, &i) in sv.iter().enumerate() {
        support_vectors.row_mut(r).assign(&x.row(i));
    }
    BinarySvm {
        support_vectors,
        alphas_times_labels: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        bias: sol.bias,
        gamma,
    }
}
