//! Training, evaluation and latency benchmarking of saved model bundles.

use super::load;
use crate::error::{CliError, CliResult};
use crate::{print_json, Format};
use clap::{Args, ValueEnum};
use gaitlab_core::GaitRecording;
use gaitlab_eval::latency::{DEFAULT_REPEATS, DEFAULT_WARMUP};
use gaitlab_eval::pipeline::BUNDLE_FORMAT;
use gaitlab_eval::report::{confusion_csv, eval_text, latency_text};
use gaitlab_eval::{latency_bench, stratified_split, train_model, BenchEntry, Classifier, Hyperparams, ModelBundle, ModelKind, SplitRecord};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// svm, rf, fnn or cnn.
    pub model: ModelKind,
    #[arg(long, env = "GAITLAB_DATA_ROOT", default_value = "data")]
    pub data_root: PathBuf,
    /// Output bundle path; defaults to `<model>.json` in the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// SVM box constraint.
    #[arg(long = "C", alias = "c")]
    pub c: Option<f64>,
    /// RBF kernel width.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub pca_components: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Training epochs for fnn/cnn.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Record held-out loss/accuracy per epoch (networks only).
    #[arg(long)]
    pub track_validation: bool,
}

impl TrainArgs {
    fn hyperparams(&self) -> Hyperparams {
        let mut hp = Hyperparams::default();
        if let Some(c) = self.c {
            hp.svm.c = c;
        }
        if let Some(g) = self.gamma {
            hp.svm.gamma = g;
        }
        if let Some(k) = self.pca_components {
            hp.pca_components = k;
            hp.fnn.layers[0] = k;
        }
        if let Some(t) = self.trees {
            hp.forest.n_trees = t;
        }
        for cfg in [&mut hp.fnn_train, &mut hp.cnn_train] {
            if let Some(e) = self.epochs {
                cfg.epochs = e;
            }
            if let Some(b) = self.batch_size {
                cfg.batch_size = b;
            }
            if let Some(lr) = self.learning_rate {
                cfg.learning_rate = lr;
            }
        }
        hp
    }
}

pub fn train(a: TrainArgs, format: Format) -> CliResult {
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(CliError::Usage("--test-fraction must be in (0, 1)".into()));
    }
    let hp = a.hyperparams();
    let ds = load(&a.data_root)?;
    let split = stratified_split(&ds, a.test_fraction, a.seed)?;
    let recs = ds.recordings();
    let train: Vec<&GaitRecording> = split.train.iter().map(|&i| &recs[i]).collect();
    let test: Vec<&GaitRecording> = split.test.iter().map(|&i| &recs[i]).collect();
    let validation = a.track_validation.then_some(test.as_slice());
    let out = train_model(a.model, &hp, &train, validation, a.seed)?;

    let ids = |v: &[&GaitRecording]| v.iter().map(|r| r.session_id.to_string()).collect();
    let mut bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        kind: a.model,
        model: out.model,
        preprocessing: out.preprocessing,
        split: SplitRecord {
            test_fraction: a.test_fraction,
            seed: a.seed,
            train: ids(&train),
            test: ids(&test),
        },
        hyperparams: hp,
        history: out.history,
        report: None,
    };
    let report = bundle.evaluate(&test)?;
    bundle.report = Some(report.clone());
    let path = a.out.unwrap_or_else(|| PathBuf::from(format!("{}.json", a.model)));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Env(format!("{}: {e}", dir.display())))?;
    }
    bundle.save(&path).map_err(|e| CliError::Env(e.to_string()))?;
    match format {
        Format::Json => print_json(&json!({
            "model_path": path,
            "kind": a.model,
            "train_size": train.len(),
            "test_size": test.len(),
            "train_seconds": out.train_seconds,
            "report": report,
        })),
        Format::Text => {
            println!("trained {} on {} recordings in {:.1}s, saved to {}", a.model, train.len(), out.train_seconds, path.display());
            print!("{}", eval_text(&report));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, env = "GAITLAB_DATA_ROOT", default_value = "data")]
    pub data_root: PathBuf,
    /// Which recordings to evaluate on; `all` uses every loaded recording.
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    pub confusion_csv: Option<PathBuf>,
}

fn load_bundle(path: &std::path::Path) -> CliResult<ModelBundle> {
    ModelBundle::load(path).map_err(|e| CliError::Data(e.to_string()))
}

pub fn eval(a: EvalArgs, format: Format) -> CliResult {
    let bundle = load_bundle(&a.model)?;
    let ds = load(&a.data_root)?;
    let recs = ds.recordings();
    let selected = match a.split {
        SplitChoice::Train => ModelBundle::select(recs, &bundle.split.train)?,
        SplitChoice::Test => ModelBundle::select(recs, &bundle.split.test)?,
        SplitChoice::All => recs.iter().collect(),
    };
    let report = bundle.evaluate(&selected)?;
    if let Some(p) = &a.confusion_csv {
        std::fs::write(p, confusion_csv(&report.confusion)).map_err(|e| CliError::Env(format!("{}: {e}", p.display())))?;
    }
    match format {
        Format::Json => print_json(&report),
        Format::Text => print!("{}", eval_text(&report)),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model bundles to time, each on its own test split.
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, env = "GAITLAB_DATA_ROOT", default_value = "data")]
    pub data_root: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
}

pub fn bench(a: BenchArgs, format: Format) -> CliResult {
    if a.repeats < 2 {
        return Err(CliError::Usage("--repeats must be at least 2".into()));
    }
    let bundles = a.models.iter().map(|p| load_bundle(p)).collect::<CliResult<Vec<_>>>()?;
    let ds = load(&a.data_root)?;
    let recs = ds.recordings();
    // Transforms are applied up front: only model prediction is timed.
    let mut inputs = Vec::with_capacity(bundles.len());
    for b in &bundles {
        let test = ModelBundle::select(recs, &b.split.test)?;
        inputs.push(b.preprocessing.transform(&test)?);
    }
    if inputs.windows(2).any(|w| w[0].nrows() != w[1].nrows()) {
        tracing::warn!("models were trained on test splits of different sizes");
    }
    let names: Vec<String> = bundles
        .iter()
        .zip(&a.models)
        .map(|(b, p)| {
            let dup = bundles.iter().filter(|o| o.kind == b.kind).count() > 1;
            if dup {
                p.display().to_string()
            } else {
                b.kind.to_string()
            }
        })
        .collect();
    let entries: Vec<BenchEntry> = bundles
        .iter()
        .zip(&inputs)
        .zip(names)
        .map(|((b, x), name)| BenchEntry {
            name,
            model: &b.model as &dyn Classifier,
            x: x.view(),
        })
        .collect();
    let report = latency_bench(&entries, a.repeats, a.warmup)?;
    match format {
        Format::Json => print_json(&report),
        Format::Text => print!("{}", latency_text(&report)),
    }
    Ok(())
}
