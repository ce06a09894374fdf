//! Where a simulated device gets the samples it streams.

use gaitlab_core::dataset::load_dataset;
use gaitlab_core::synth::{generate_recording, GaitSignalParams};
use gaitlab_core::{DatasetError, GaitLabel, GaitRecording};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("no {0} recordings to replay")]
    NoRecordings(GaitLabel),
    #[error("invalid signal parameters: {0}")]
    Params(String),
}

pub trait RecordingSource: Send + Sync + 'static {
    /// One capture for the commanded label; `seed` selects which.
    fn recording(&self, label: GaitLabel, seed: u64) -> Result<GaitRecording, SourceError>;
}

/// Fresh synthetic captures, identical to `generate_recording(label, params, seed)`.
#[derive(Debug, Clone, Default)]
pub struct SynthSource {
    pub params: GaitSignalParams,
}

impl SynthSource {
    pub fn new(params: GaitSignalParams) -> Result<Self, SourceError> {
        params.validate().map_err(|e| SourceError::Params(e.to_string()))?;
        Ok(Self { params })
    }
}

impl RecordingSource for SynthSource {
    fn recording(&self, label: GaitLabel, seed: u64) -> Result<GaitRecording, SourceError> {
        Ok(generate_recording(label, &self.params, seed))
    }
}

/// Replays files from a dataset directory. The capture for `seed` is the
/// `seed mod n`-th file of the label in sorted path order.
#[derive(Debug, Clone)]
pub struct CsvReplaySource {
    by_label: [Vec<GaitRecording>; GaitLabel::COUNT],
}

impl CsvReplaySource {
    pub fn open(root: &Path) -> Result<Self, SourceError> {
        let load = load_dataset(root)?;
        for f in &load.failures {
            tracing::warn!(path = %f.path.display(), "skipping unreadable recording: {}", f.error);
        }
        let mut by_label: [Vec<GaitRecording>; GaitLabel::COUNT] = Default::default();
        for rec in load.dataset.into_recordings() {
            by_label[rec.label.index()].push(rec);
        }
        Ok(Self { by_label })
    }

    pub fn len(&self, label: GaitLabel) -> usize {
        self.by_label[label.index()].len()
    }
}

impl RecordingSource for CsvReplaySource {
    fn recording(&self, label: GaitLabel, seed: u64) -> Result<GaitRecording, SourceError> {
        let recs = &self.by_label[label.index()];
        if recs.is_empty() {
            return Err(SourceError::NoRecordings(label));
        }
        Ok(recs[(seed % recs.len() as u64) as usize].clone())
    }
}
