use crate::{Classifier, EvalError};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::hint::black_box;
use std::time::Instant;

pub const DEFAULT_REPEATS: usize = 20;
pub const DEFAULT_WARMUP: usize = 3;

pub struct BenchEntry<'a> {
    pub name: String,
    pub model: &'a dyn Classifier,
    /// Test set in the model's own input form.
    pub x: ArrayView2<'a, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLatency {
    pub name: String,
    pub mean_ms: f64,
    /// Sample standard deviation over the timed runs.
    pub std_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub test_size: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub models: Vec<ModelLatency>,
}

impl LatencyReport {
    pub fn get(&self, name: &str) -> Option<&ModelLatency> {
        self.models.iter().find(|m| m.name == name)
    }
}

/// Wall-clock time to predict each entry's full test set, `repeats` timed
/// runs after `warmup` untimed ones. Runs inside a one-thread rayon pool so
/// prediction cannot fan out.
pub fn latency_bench(entries: &[BenchEntry], repeats: usize, warmup: usize) -> Result<LatencyReport, EvalError> {
    if entries.is_empty() || repeats == 0 {
        return Err(EvalError::Empty);
    }
    let test_size = entries[0].x.nrows();
    for e in entries {
        if e.x.nrows() == 0 {
            return Err(EvalError::Empty);
        }
        if e.x.nrows() != test_size {
            return Err(EvalError::LengthMismatch(test_size, e.x.nrows()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let models = pool.install(|| {
        entries
            .iter()
            .map(|e| {
                for _ in 0..warmup {
                    black_box(e.model.predict_rows(black_box(e.x)));
                }
                let samples_ms: Vec<f64> = (0..repeats)
                    .map(|_| {
                        let start = Instant::now();
                        black_box(e.model.predict_rows(black_box(e.x)));
                        start.elapsed().as_secs_f64() * 1e3
                    })
                    .collect();
                let n = samples_ms.len() as f64;
                let mean_ms = samples_ms.iter().sum::<f64>() / n;
                let std_ms = if samples_ms.len() > 1 {
                    (samples_ms.iter().map(|s| (s - mean_ms).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                ModelLatency {
                    name: e.name.clone(),
                    mean_ms,
                    std_ms,
                    samples_ms,
                }
            })
            .collect()
    });
    Ok(LatencyReport {
        test_size,
        repeats,
        warmup,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaitlab_core::GaitLabel;
    use ndarray::Array2;

    struct Busy(usize);

    impl Classifier for Busy {
        fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<GaitLabel> {
            x.rows()
                .into_iter()
                .map(|r| {
                    let mut acc = 0.0;
                    for i in 0..self.0 {
                        acc += (r[0] + i as f64).sqrt();
                    }
                    GaitLabel::from_index(usize::from(acc < 0.0)).unwrap()
                })
                .collect()
        }
    }

    #[test]
    fn exact_sample_count_and_stability() {
        let x = Array2::from_elem((168, 2), 1.5);
        let m = Busy(2000);
        let entries = [
            BenchEntry { name: "a".into(), model: &m, x: x.view() },
            BenchEntry { name: "b".into(), model: &m, x: x.view() },
        ];
        let r = latency_bench(&entries, 20, 3).unwrap();
        assert_eq!(r.test_size, 168);
        let (a, b) = (r.get("a").unwrap(), r.get("b").unwrap());
        assert_eq!(a.samples_ms.len(), 20);
        assert!(a.mean_ms > 0.0 && a.std_ms >= 0.0);
        let combined = (a.std_ms.powi(2) + b.std_ms.powi(2)).sqrt();
        // Floor for timer granularity on very quiet machines.
        assert!((a.mean_ms - b.mean_ms).abs() <= 3.0 * combined.max(0.05 * a.mean_ms));
    }

    #[test]
    fn heavier_model_is_slower() {
        let x = Array2::from_elem((50, 1), 2.0);
        let (light, heavy) = (Busy(100), Busy(20000));
        let entries = [
            BenchEntry { name: "light".into(), model: &light, x: x.view() },
            BenchEntry { name: "heavy".into(), model: &heavy, x: x.view() },
        ];
        let r = latency_bench(&entries, 5, 1).unwrap();
        assert!(r.get("light").unwrap().mean_ms < r.get("heavy").unwrap().mean_ms);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let x = Array2::<f64>::zeros((0, 1));
        let m = Busy(1);
        let entries = [BenchEntry { name: "a".into(), model: &m, x: x.view() }];
        assert!(matches!(latency_bench(&entries, 20, 3), Err(EvalError::Empty)));
        assert!(matches!(latency_bench(&[], 20, 3), Err(EvalError::Empty)));
    }
}
