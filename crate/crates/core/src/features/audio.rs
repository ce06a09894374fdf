use crate::recording::GaitRecording;

use super::flatten;

pub const WAV_HEADER_LEN: usize = 44;

/// The six channels back to back, 3000 samples.
pub fn concat_signal(rec: &GaitRecording) -> Vec<f64> {
    flatten(rec).values
}

/// Max-abs normalization to [-1, 1]. An all-zero signal is returned unchanged.
pub fn normalize_signal(signal: &[f64]) -> Vec<f64> {
    let peak = signal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };
    signal.iter().map(|v| v / scale).collect()
}

/// Canonical 44-byte-header RIFF/WAVE, PCM 16-bit mono.
pub fn write_wav(signal: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (signal.len() * 2) as u32;
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for v in normalize_signal(signal) {
        let s = (v * 32767.0).round().clamp(-32767.0, 32767.0) as i16;
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
