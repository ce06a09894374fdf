//! JSON, plain-text and CSV renderings of evaluation results.

use crate::latency::LatencyReport;
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::search::{CurvePoint, GridResult};
use gaitlab_core::GaitLabel;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

pub fn metrics_text(m: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support").unwrap();
    for c in &m.per_class {
        writeln!(
            out,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            c.label.code(),
            c.precision,
            c.recall,
            c.f1,
            c.support
        )
        .unwrap();
    }
    writeln!(
        out,
        "{:<10} {:>9.4} {:>9.4} {:>9.4}",
        "macro", m.macro_precision, m.macro_recall, m.macro_f1
    )
    .unwrap();
    writeln!(out, "accuracy   {:.4}", m.accuracy).unwrap();
    out
}

pub fn confusion_text(cm: &ConfusionMatrix) -> String {
    let mut out = format!("{:<8}", "true\\pred");
    for l in GaitLabel::ALL {
        write!(out, " {:>5}", l.code()).unwrap();
    }
    out.push('\n');
    for t in GaitLabel::ALL {
        write!(out, "{:<9}", t.code()).unwrap();
        for p in GaitLabel::ALL {
            write!(out, " {:>5}", cm.get(t, p)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Header `true,MN,MS,MM,MF`, one row per true label.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("true");
    for l in GaitLabel::ALL {
        write!(out, ",{}", l.code()).unwrap();
    }
    out.push('\n');
    for t in GaitLabel::ALL {
        out.push_str(t.code());
        for p in GaitLabel::ALL {
            write!(out, ",{}", cm.get(t, p)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn eval_text(r: &EvalReport) -> String {
    format!(
        "model {} on {} recordings\n\n{}\n{}",
        r.model,
        r.n,
        metrics_text(&r.metrics),
        confusion_text(&r.confusion)
    )
}

pub fn latency_text(r: &LatencyReport) -> String {
    let mut out = format!(
        "prediction time for {} instances, {} runs after {} warm-up\n",
        r.test_size, r.repeats, r.warmup
    );
    writeln!(out, "{:<8} {:>12} {:>10}", "model", "mean ms", "std ms").unwrap();
    for m in &r.models {
        writeln!(out, "{:<8} {:>12.3} {:>10.3}", m.name, m.mean_ms, m.std_ms).unwrap();
    }
    out
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("fraction,train_size,mean_accuracy,std_accuracy\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.fraction, p.train_size, p.mean_accuracy, p.std_accuracy).unwrap();
    }
    out
}

pub fn grid_text<P: std::fmt::Debug>(g: &GridResult<P>) -> String {
    let mut out = String::new();
    for (i, r) in g.rows.iter().enumerate() {
        let mark = if i == g.best { '*' } else { ' ' };
        writeln!(
            out,
            "{mark} {:?}  mean {:.4}  std {:.4}  complexity {:.1}",
            r.params, r.mean_accuracy, r.std_accuracy, r.complexity
        )
        .unwrap();
    }
    out
}
