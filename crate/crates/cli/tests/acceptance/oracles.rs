//! Reference implementations that share no code with the library.

use ndarray::Array2;
use std::f64::consts::TAU;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: eigenvalues
/// descending, eigenvectors as columns.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[[b, b]].total_cmp(&m[[a, a]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (values, vectors)
}

/// Sample covariance with the `n - 1` divisor.
pub fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..n).map(|i| (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b])).sum::<f64>() / (n - 1) as f64
    })
}

pub fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Accelerated projected gradient ascent on the SVM dual; projection onto
/// `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the equality multiplier.
pub fn projected_gradient_dual(k: &Array2<f64>, y: &[f64], c: f64, iters: usize) -> f64 {
    let n = y.len();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * k[[i, j]]);
    let step = 1.0 / q.iter().map(|v| v.abs()).sum::<f64>().max(1e-12);
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = at(mid).iter().zip(y).map(|(a, yi)| a * yi).sum();
            if s > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        at(0.5 * (lo + hi))
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[[i, j]] * z[j]).sum::<f64>()).collect();
        let moved: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi + step * g).collect();
        let next = project(&moved);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(nx, ax)| nx + (nx - ax) * ((t - 1.0) / t_next)).collect();
        a = next;
        t = t_next;
    }
    dual_objective(k, y, &a)
}

/// `|X_k|` for `k = 0..=n/2` by direct summation.
pub fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let angle = -TAU * ((k * t) % n) as f64 / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Symmetric Hann window.
/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Per-class precision, recall and F1 plus accuracy by direct counting.
pub struct Counted {
    pub counts: [[usize; 4]; 4],
    pub precision: [f64; 4],
    pub recall: [f64; 4],
    pub f1: [f64; 4],
    pub accuracy: f64,
}

pub fn count_metrics(y_true: &[usize], y_pred: &[usize]) -> Counted {
    let mut counts = [[0usize; 4]; 4];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[t][p] += 1;
    }
    let mut precision = [0.0; 4];
    let mut recall = [0.0; 4];
    let mut f1 = [0.0; 4];
    for c in 0..4 {
        let tp = y_true.iter().zip(y_pred).filter(|(&t, &p)| t == c && p == c).count() as f64;
        let predicted = y_pred.iter().filter(|&&p| p == c).count() as f64;
        let actual = y_true.iter().filter(|&&t| t == c).count() as f64;
        precision[c] = if predicted > 0.0 { tp / predicted } else { 0.0 };
        recall[c] = if actual > 0.0 { tp / actual } else { 0.0 };
        let s = precision[c] + recall[c];
        f1[c] = if s > 0.0 { 2.0 * precision[c] * recall[c] / s } else { 0.0 };
    }
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Counted {
        counts,
        precision,
        recall,
        f1,
        accuracy: correct as f64 / y_true.len() as f64,
    }
}

/// Central differences of `loss` with respect to every coordinate of `params`.
pub fn central_differences(params: &mut [f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + h;
            let plus = loss(params);
            params[i] = orig - h;
            let minus = loss(params);
            params[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}
