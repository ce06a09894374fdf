use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MetaError;
use crate::label::GaitLabel;

pub const SAMPLE_RATE_HZ: u32 = 100;
pub const CAPTURE_SECONDS: u32 = 5;
pub const SAMPLES_PER_CHANNEL: usize = (SAMPLE_RATE_HZ * CAPTURE_SECONDS) as usize;
pub const CHANNEL_COUNT: usize = 6;
pub const TOTAL_SAMPLES: usize = SAMPLES_PER_CHANNEL * CHANNEL_COUNT;

/// IMU axes in storage order. Accelerometer axes are in g, gyroscope axes in deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Ax,
    Ay,
    Az,
    Gx,
    Gy,
    Gz,
}

impl Channel {
    pub const ALL: [Channel; CHANNEL_COUNT] = [
        Channel::Ax,
        Channel::Ay,
        Channel::Az,
        Channel::Gx,
        Channel::Gy,
        Channel::Gz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Ax => "ax",
            Channel::Ay => "ay",
            Channel::Az => "az",
            Channel::Gx => "gx",
            Channel::Gy => "gy",
            Channel::Gz => "gz",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_gyro(self) -> bool {
        matches!(self, Channel::Gx | Channel::Gy | Channel::Gz)
    }
}

/// Opaque capture identifier, UUID-v4 formatted when generated here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn random() -> Self {
        Self(uuid::Uuid::new_v4().to_string())
    }

    /// UUID-v4 shaped id drawn from the given random bytes.
    pub fn from_random_bytes(bytes: [u8; 16]) -> Self {
        Self(uuid::Builder::from_random_bytes(bytes).into_uuid().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Volunteer metadata entered at labeling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSubjectMeta")]
pub struct SubjectMeta {
    name: String,
    age: u32,
    height_cm: f64,
    weight_kg: f64,
}

#[derive(Deserialize)]
struct RawSubjectMeta {
    name: String,
    age: u32,
    height_cm: f64,
    weight_kg: f64,
}

impl TryFrom<RawSubjectMeta> for SubjectMeta {
    type Error = MetaError;

    fn try_from(raw: RawSubjectMeta) -> Result<Self, Self::Error> {
        SubjectMeta::new(raw.name, raw.age, raw.height_cm, raw.weight_kg)
    }
}

impl SubjectMeta {
    pub const AGE_RANGE: (u32, u32) = (1, 120);
    pub const HEIGHT_RANGE_CM: (f64, f64) = (50.0, 250.0);
    pub const WEIGHT_RANGE_KG: (f64, f64) = (20.0, 300.0);

    pub fn new(
        name: impl Into<String>,
        age: u32,
        height_cm: f64,
        weight_kg: f64,
    ) -> Result<Self, MetaError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(MetaError::new("name", "must not be empty"));
        }
        // The CSV metadata lines cannot carry line breaks.
        if name.chars().any(char::is_control) {
            return Err(MetaError::new("name", "must not contain control characters"));
        }
        let (lo, hi) = Self::AGE_RANGE;
        if !(lo..=hi).contains(&age) {
            return Err(MetaError::new("age", format!("{age} outside {lo}..={hi}")));
        }
        check_range("height", height_cm, Self::HEIGHT_RANGE_CM)?;
        check_range("weight", weight_kg, Self::WEIGHT_RANGE_KG)?;
        Ok(Self {
            name,
            age,
            height_cm,
            weight_kg,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn age(&self) -> u32 {
        self.age
    }

    pub fn height_cm(&self) -> f64 {
        self.height_cm
    }

    pub fn weight_kg(&self) -> f64 {
        self.weight_kg
    }
}

fn check_range(field: &'static str, value: f64, (lo, hi): (f64, f64)) -> Result<(), MetaError> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(MetaError::new(field, format!("{value} outside {lo}..={hi}")));
    }
    Ok(())
}

/// One labeled capture: six channels of 500 samples each.
///
/// Fields are public so that partially-formed captures (e.g. while a frame
/// buffer is assembled) can be represented and checked with
/// [`validate_recording`]. Code that hands a recording to another module
/// should go through [`GaitRecording::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaitRecording {
    pub session_id: SessionId,
    pub meta: SubjectMeta,
    pub label: GaitLabel,
    pub sample_rate_hz: u32,
    pub channels: [Vec<f64>; CHANNEL_COUNT],
}

impl GaitRecording {
    /// Checked constructor; fails with the full violation list.
    pub fn new(
        session_id: SessionId,
        meta: SubjectMeta,
        label: GaitLabel,
        channels: [Vec<f64>; CHANNEL_COUNT],
    ) -> Result<Self, Vec<String>> {
        let rec = Self {
            session_id,
            meta,
            label,
            sample_rate_hz: SAMPLE_RATE_HZ,
            channels,
        };
        let violations = rec.validate();
        if violations.is_empty() {
            Ok(rec)
        } else {
            Err(violations)
        }
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn duration_s(&self) -> f64 {
        self.channels[0].len() as f64 / self.sample_rate_hz as f64
    }

    /// Row `i` across the six channels.
    pub fn row(&self, i: usize) -> [f64; CHANNEL_COUNT] {
        std::array::from_fn(|c| self.channels[c][i])
    }

    pub fn validate(&self) -> Vec<String> {
        validate_recording(self)
    }
}

/// Lists every invariant the recording violates; empty iff valid.
pub fn validate_recording(rec: &GaitRecording) -> Vec<String> {
    let mut violations = Vec::new();
    if rec.session_id.as_str().is_empty() {
        violations.push("session_id is empty".to_string());
    }
    if rec.sample_rate_hz != SAMPLE_RATE_HZ {
        violations.push(format!(
            "sample rate {} Hz != {SAMPLE_RATE_HZ} Hz",
            rec.sample_rate_hz
        ));
    }
    for ch in Channel::ALL {
        let samples = rec.channel(ch);
        if samples.len() != SAMPLES_PER_CHANNEL {
            violations.push(format!(
                "channel {} length {} != {SAMPLES_PER_CHANNEL}",
                ch.name(),
                samples.len()
            ));
        }
        for (i, v) in samples.iter().enumerate() {
            if !v.is_finite() {
                violations.push(format!("channel {} sample {i} is non-finite ({v})", ch.name()));
            }
        }
    }
    violations
}
