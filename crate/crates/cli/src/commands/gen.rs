use crate::error::{CliError, CliResult};
use crate::{print_json, Format};
use clap::Args;
use gaitlab_core::synth::{generate_dataset, GaitSignalParams};
use gaitlab_core::{write_dataset, GaitLabel};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Recordings per class.
    #[arg(long, default_value_t = 210)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Dataset root; one directory per label is created below it.
    #[arg(long, env = "GAITLAB_DATA_ROOT", default_value = "data")]
    pub out: PathBuf,
    /// Measurement noise level (0 gives noiseless, perfectly separable classes).
    #[arg(long)]
    pub noise: Option<f64>,
}

pub fn run(a: GenArgs, format: Format) -> CliResult {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut params = GaitSignalParams::default();
    if let Some(noise) = a.noise {
        params.noise_sigma = noise;
    }
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = generate_dataset(a.n, &params, a.seed);
    let paths = write_dataset(&a.out, &ds).map_err(|e| CliError::Env(e.to_string()))?;
    let counts: serde_json::Map<String, serde_json::Value> =
        GaitLabel::ALL.iter().map(|&l| (l.code().to_string(), json!(ds.count(l)))).collect();
    match format {
        Format::Json => print_json(&json!({
            "out_dir": a.out,
            "files": paths.len(),
            "per_class": counts,
            "seed": a.seed,
        })),
        Format::Text => println!("wrote {} recordings ({} per class) to {}", paths.len(), a.n, a.out.display()),
    }
    Ok(())
}
