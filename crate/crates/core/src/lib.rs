//! Core data model and preprocessing for the gait classification workbench.
//!
//! A [`GaitRecording`] is one labeled five second capture of a six axis IMU
//! (3D accelerometer + 3D gyroscope) sampled at 100 Hz. Recordings are stored
//! one CSV file per capture under a directory per [`GaitLabel`].
//!
//! Besides the data model this crate hosts the seeded synthetic generator
//! ([`synth`]) used as the dataset oracle, and the preprocessing shared by all
//! classifiers ([`features`]).

pub mod csv;
pub mod dataset;
pub mod error;
pub mod features;
pub mod label;
pub mod recording;
pub mod seed;
pub mod synth;

pub use dataset::{load_dataset, write_dataset, Dataset, DatasetLoad, LoadFailure};
pub use error::{CsvError, DatasetError, MetaError};
pub use label::GaitLabel;
pub use recording::{
    validate_recording, Channel, GaitRecording, SessionId, SubjectMeta, CHANNEL_COUNT,
    SAMPLES_PER_CHANNEL, SAMPLE_RATE_HZ, TOTAL_SAMPLES,
};
