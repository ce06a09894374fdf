//! Trains all four models on a synthetic dataset and prints test metrics
//! and prediction latency.
//!
//! `cargo run --release -p gaitlab-eval --example benchmark -- [n_per_class] [seed] [cnn_epochs]`

use gaitlab_core::synth::{generate_dataset, GaitSignalParams};
use gaitlab_core::GaitRecording;
use gaitlab_eval::latency::{DEFAULT_REPEATS, DEFAULT_WARMUP};
use gaitlab_eval::report::latency_text;
use gaitlab_eval::{latency_bench, stratified_split, train_model, BenchEntry, Classifier, Hyperparams, ModelBundle, ModelKind, SplitRecord};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(210, |s| s.parse().expect("n_per_class"));
    let seed: u64 = args.get(1).map_or(42, |s| s.parse().expect("seed"));
    let mut hp = Hyperparams::default();
    if let Some(e) = args.get(2) {
        hp.cnn_train.epochs = e.parse().expect("cnn epochs");
    }

    let ds = generate_dataset(n, &GaitSignalParams::default(), seed);
    let split = stratified_split(&ds, 0.2, seed).expect("split");
    let recs = ds.recordings();
    let train: Vec<&GaitRecording> = split.train.iter().map(|&i| &recs[i]).collect();
    let test: Vec<&GaitRecording> = split.test.iter().map(|&i| &recs[i]).collect();

    let mut bundles = Vec::new();
    for kind in ModelKind::ALL {
        let out = train_model(kind, &hp, &train, None, seed).expect("training");
        let bundle = ModelBundle {
            format: gaitlab_eval::pipeline::BUNDLE_FORMAT.into(),
            kind,
            model: out.model,
            preprocessing: out.preprocessing,
            split: SplitRecord { test_fraction: 0.2, seed, train: vec![], test: vec![] },
            hyperparams: hp.clone(),
            history: out.history,
            report: None,
        };
        let r = bundle.evaluate(&test).expect("evaluation");
        println!(
            "{kind}: accuracy {:.4} macro-F1 {:.4} size {} trained in {:.1}s",
            r.metrics.accuracy,
            r.metrics.macro_f1,
            bundle.model.complexity(),
            out.train_seconds
        );
        bundles.push(bundle);
    }

    let inputs: Vec<_> = bundles.iter().map(|b| b.preprocessing.transform(&test).expect("transform")).collect();
    let entries: Vec<BenchEntry> = bundles
        .iter()
        .zip(&inputs)
        .map(|(b, x)| BenchEntry { name: b.kind.to_string(), model: &b.model as &dyn Classifier, x: x.view() })
        .collect();
    let report = latency_bench(&entries, DEFAULT_REPEATS, DEFAULT_WARMUP).expect("bench");
    print!("{}", latency_text(&report));
}
