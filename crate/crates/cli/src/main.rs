mod commands;
mod error;

use clap::{Parser, Subcommand, ValueEnum};
use error::CliError;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "gaitlab", version, about = "Induced gait capture, training and evaluation")]
pub struct Cli {
    /// Output format for command results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset as per-label CSV files.
    Gen(commands::gen::GenArgs),
    /// Run an embedded MQTT broker.
    Broker(commands::run::BrokerArgs),
    /// Run a simulated IMU device.
    Device(commands::run::DeviceArgs),
    /// Run the ingestion service and its HTTP API.
    Serve(commands::run::ServeArgs),
    /// Train one model on a stratified split and save it with its split.
    Train(commands::train::TrainArgs),
    /// Evaluate a saved model on a split of a dataset.
    Eval(commands::train::EvalArgs),
    /// Benchmark prediction latency of saved models on their test splits.
    Bench(commands::train::BenchArgs),
    /// Render the CNN input image of one recording.
    Spectrogram(commands::spectrogram::SpectrogramArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let result = match cli.command {
        Command::Gen(a) => commands::gen::run(a, cli.format),
        Command::Broker(a) => commands::run::broker(a),
        Command::Device(a) => commands::run::device(a),
        Command::Serve(a) => commands::run::serve(a),
        Command::Train(a) => commands::train::train(a, cli.format),
        Command::Eval(a) => commands::train::eval(a, cli.format),
        Command::Bench(a) => commands::train::bench(a, cli.format),
        Command::Spectrogram(a) => commands::spectrogram::run(a, cli.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Env(e.to_string())
    }
}
