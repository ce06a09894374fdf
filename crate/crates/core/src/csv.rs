//! Bit-exact CSV encoding of a single capture.
//!
//! ```text
//! # name,<name>
//! # age,<years>
//! # height_cm,<cm>
//! # weight_kg,<kg>
//! # label,<code>
//! t,ax,ay,az,gx,gy,gz
//! 0.00,<ax>,<ay>,<az>,<gx>,<gy>,<gz>
//! ... 500 rows, t = index / 100 with two decimals, samples with six decimals
//! ```
//!
//! The session id is not part of the file body; files are named
//! `<session_id>.csv` and the id is supplied back on parse.

use std::fmt::Write as _;

use crate::error::CsvError;
use crate::label::GaitLabel;
use crate::recording::{
    Channel, GaitRecording, SessionId, SubjectMeta, CHANNEL_COUNT, SAMPLES_PER_CHANNEL,
    SAMPLE_RATE_HZ,
};

pub const HEADER: &str = "t,ax,ay,az,gx,gy,gz";
const META_KEYS: [&str; 5] = ["name", "age", "height_cm", "weight_kg", "label"];

/// Formats a sample with the fixed six-decimal precision used on disk.
/// Negative zero is normalized so that re-serializing a parsed file is
/// byte-identical.
pub fn format_sample(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Rounds a value to what survives a write/parse cycle.
pub fn quantize_sample(v: f64) -> f64 {
    format_sample(v).parse().expect("formatted float parses")
}

pub fn write_recording_csv(rec: &GaitRecording) -> Vec<u8> {
    let mut out = String::with_capacity(64 * SAMPLES_PER_CHANNEL);
    let meta = &rec.meta;
    let _ = writeln!(out, "# name,{}", meta.name());
    let _ = writeln!(out, "# age,{}", meta.age());
    let _ = writeln!(out, "# height_cm,{}", meta.height_cm());
    let _ = writeln!(out, "# weight_kg,{}", meta.weight_kg());
    let _ = writeln!(out, "# label,{}", rec.label.code());
    out.push_str(HEADER);
    out.push('\n');
    let n = rec.channels[0].len();
    for i in 0..n {
        let _ = write!(out, "{:.2}", i as f64 / SAMPLE_RATE_HZ as f64);
        for ch in &rec.channels {
            out.push(',');
            out.push_str(&format_sample(ch[i]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_recording_csv(bytes: &[u8], session_id: SessionId) -> Result<GaitRecording, CsvError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CsvError::NotUtf8)?;
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));

    let mut meta_values = Vec::with_capacity(META_KEYS.len());
    for (i, key) in META_KEYS.iter().enumerate() {
        let line_no = i + 1;
        let line = lines.next().ok_or_else(|| CsvError::MalformedHeader {
            line: line_no,
            reason: "file ends before metadata".into(),
        })?;
        let value = line
            .strip_prefix("# ")
            .and_then(|rest| rest.split_once(','))
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| CsvError::MalformedHeader {
                line: line_no,
                reason: format!("expected `# {key},<value>`, found {line:?}"),
            })?;
        meta_values.push(value);
    }
    match lines.next() {
        Some(HEADER) => {}
        other => {
            return Err(CsvError::MalformedHeader {
                line: META_KEYS.len() + 1,
                reason: format!("expected column header {HEADER:?}, found {other:?}"),
            })
        }
    }

    let header_err = |line: usize, what: &str, v: &str| CsvError::MalformedHeader {
        line,
        reason: format!("{what} {v:?} is not a number"),
    };
    let age: u32 = meta_values[1]
        .parse()
        .map_err(|_| header_err(2, "age", meta_values[1]))?;
    let height: f64 = meta_values[2]
        .parse()
        .map_err(|_| header_err(3, "height", meta_values[2]))?;
    let weight: f64 = meta_values[3]
        .parse()
        .map_err(|_| header_err(4, "weight", meta_values[3]))?;
    let label = GaitLabel::from_code(meta_values[4])
        .ok_or_else(|| CsvError::UnknownLabel(meta_values[4].to_string()))?;
    let meta = SubjectMeta::new(meta_values[0], age, height, weight)?;

    let rows: Vec<&str> = lines.collect();
    // A single trailing newline leaves one empty tail element.
    let rows = match rows.split_last() {
        Some((last, rest)) if last.is_empty() => rest,
        _ => &rows[..],
    };
    if rows.len() != SAMPLES_PER_CHANNEL {
        return Err(CsvError::WrongRowCount(rows.len()));
    }

    let mut channels: [Vec<f64>; CHANNEL_COUNT] =
        std::array::from_fn(|_| Vec::with_capacity(SAMPLES_PER_CHANNEL));
    for (row, line) in rows.iter().enumerate() {
        let mut fields = line.split(',');
        let t = fields.next().unwrap_or_default();
        let t: f64 = t.parse().map_err(|_| CsvError::MalformedRow {
            row,
            reason: format!("time {t:?} is not a number"),
        })?;
        if (t - row as f64 / SAMPLE_RATE_HZ as f64).abs() > 1e-9 {
            return Err(CsvError::MalformedRow {
                row,
                reason: format!("time {t} does not match sample index"),
            });
        }
        for ch in Channel::ALL {
            let field = fields.next().ok_or_else(|| CsvError::MalformedRow {
                row,
                reason: format!("missing column {}", ch.name()),
            })?;
            let v: f64 = field.trim().parse().map_err(|_| CsvError::MalformedRow {
                row,
                reason: format!("{} value {field:?} is not a number", ch.name()),
            })?;
            if !v.is_finite() {
                return Err(CsvError::NonFiniteSample {
                    channel: ch.name(),
                    row,
                });
            }
            channels[ch.index()].push(v);
        }
        if fields.next().is_some() {
            return Err(CsvError::MalformedRow {
                row,
                reason: "too many columns".into(),
            });
        }
    }

    Ok(GaitRecording {
        session_id,
        meta,
        label,
        sample_rate_hz: SAMPLE_RATE_HZ,
        channels,
    })
}
