use crate::error::{CliError, CliResult};
use crate::{print_json, Format};
use clap::Args;
use gaitlab_core::dataset::read_recording;
use gaitlab_core::features::{concat_signal, normalize_signal, recording_image, write_wav, SpectrogramConfig};
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    /// Recording CSV.
    pub input: PathBuf,
    /// Output image: `.png` (frequency rising upwards, time to the right)
    /// or `.csv` (one row per frame, one column per frequency bin).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the concatenated, normalized signal as 16-bit WAV.
    #[arg(long)]
    pub wav: Option<PathBuf>,
}

pub fn run(a: SpectrogramArgs, format: Format) -> CliResult {
    let rec = read_recording(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let img = recording_image(&rec);
    let (frames, bins) = img.dim();
    let ext = a.out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let write_err = |e: &dyn std::fmt::Display| CliError::Env(format!("{}: {e}", a.out.display()));
    match ext.as_deref() {
        Some("csv") => {
            let mut s = String::new();
            for row in img.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(s, "{}", line.join(","));
            }
            std::fs::write(&a.out, s).map_err(|e| write_err(&e))?;
        }
        Some("png") => {
            let png = image::GrayImage::from_fn(frames as u32, bins as u32, |x, y| {
                let v = img[[x as usize, bins - 1 - y as usize]];
                image::Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8])
            });
            png.save(&a.out).map_err(|e| write_err(&e))?;
        }
        _ => return Err(CliError::Usage(format!("--out must end in .png or .csv, got {}", a.out.display()))),
    }
    if let Some(w) = &a.wav {
        let signal = normalize_signal(&concat_signal(&rec));
        std::fs::write(w, write_wav(&signal, SpectrogramConfig::default().sample_rate))
            .map_err(|e| CliError::Env(format!("{}: {e}", w.display())))?;
    }
    match format {
        Format::Json => print_json(&json!({ "out": a.out, "frames": frames, "bins": bins })),
        Format::Text => println!("{frames}x{bins} spectrogram written to {}", a.out.display()),
    }
    Ok(())
}
