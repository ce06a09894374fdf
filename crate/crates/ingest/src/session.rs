//! Capture sessions and frame assembly.

use crate::protocol::{join_frames, DataFrame};
use gaitlab_core::recording::{CHANNEL_COUNT, SAMPLES_PER_CHANNEL};
use gaitlab_core::{GaitLabel, SubjectMeta};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::SystemTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Created,
    Capturing,
    Complete,
    Failed,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Complete | SessionState::Failed)
    }

    /// created → capturing → {complete | failed}, plus created → failed
    /// for sessions abandoned before their capture began.
    pub fn can_become(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!((self, next), (Created, Capturing) | (Capturing, Complete) | (Capturing, Failed) | (Created, Failed))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Created => "created",
            SessionState::Capturing => "capturing",
            SessionState::Complete => "complete",
            SessionState::Failed => "failed",
        }
    }
}

impl std::str::FromStr for SessionState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "created" => Ok(SessionState::Created),
            "capturing" => Ok(SessionState::Capturing),
            "complete" => Ok(SessionState::Complete),
            "failed" => Ok(SessionState::Failed),
            other => Err(format!("unknown session state {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub meta: SubjectMeta,
    pub label: GaitLabel,
    pub device_id: String,
    pub seed: u64,
    pub state: SessionState,
    #[serde(with = "timestamp")]
    pub created_at: SystemTime,
    #[serde(default, with = "opt_timestamp")]
    pub completed_at: Option<SystemTime>,
    #[serde(default)]
    pub file_path: Option<String>,
    /// Reason a session failed.
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub frames_received: usize,
    #[serde(default)]
    pub frames_expected: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionFilter {
    pub label: Option<GaitLabel>,
    pub state: Option<SessionState>,
    pub device_id: Option<String>,
}

impl SessionFilter {
    pub fn matches(&self, s: &Session) -> bool {
        self.label.is_none_or(|l| l == s.label)
            && self.state.is_none_or(|st| st == s.state)
            && self.device_id.as_ref().is_none_or(|d| *d == s.device_id)
    }
}

/// Outcome of offering a frame to an [`AssemblyBuffer`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Accept {
    New,
    Duplicate,
    Rejected(String),
}

/// Frames received so far for one capture, keyed by `seq`. The frame
/// count is fixed by the first accepted frame's length, since every frame
/// of a capture has the same size.
#[derive(Debug, Clone)]
pub struct AssemblyBuffer {
    received: BTreeMap<usize, DataFrame>,
    frame_size: Option<usize>,
    expected: usize,
}

impl AssemblyBuffer {
    /// `expected_hint` is reported until the first frame arrives.
    pub fn new(expected_hint: usize) -> Self {
        Self {
            received: BTreeMap::new(),
            frame_size: None,
            expected: expected_hint,
        }
    }

    pub fn expected(&self) -> usize {
        self.expected
    }

    pub fn received(&self) -> usize {
        self.received.len()
    }

    pub fn offer(&mut self, frame: DataFrame) -> Accept {
        let len = frame.samples.len();
        match self.frame_size {
            None => {
                if len == 0 || SAMPLES_PER_CHANNEL % len != 0 {
                    return Accept::Rejected(format!("frame of {len} samples does not divide the capture"));
                }
                self.frame_size = Some(len);
                self.expected = SAMPLES_PER_CHANNEL / len;
            }
            Some(size) if size != len => {
                return Accept::Rejected(format!("frame of {len} samples, expected {size}"));
            }
            Some(_) => {}
        }
        if frame.seq >= self.expected {
            return Accept::Rejected(format!("seq {} beyond last frame {}", frame.seq, self.expected - 1));
        }
        if frame.last != (frame.seq + 1 == self.expected) {
            return Accept::Rejected(format!("seq {} has inconsistent last flag", frame.seq));
        }
        if self.received.contains_key(&frame.seq) {
            return Accept::Duplicate;
        }
        self.received.insert(frame.seq, frame);
        Accept::New
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.expected).filter(|s| !self.received.contains_key(s)).collect()
    }

    /// Channel-major samples in seq order; meaningful once complete.
    pub fn assemble(&self) -> [Vec<f64>; CHANNEL_COUNT] {
        join_frames(self.received.values())
    }
}

mod timestamp {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::SystemTime;

    pub fn serialize<S: Serializer>(t: &SystemTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&humantime::format_rfc3339_millis(*t).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SystemTime, D::Error> {
        let s = String::deserialize(d)?;
        humantime::parse_rfc3339(&s).map_err(serde::de::Error::custom)
    }
}

mod opt_timestamp {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::SystemTime;

    pub fn serialize<S: Serializer>(t: &Option<SystemTime>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => super::timestamp::serialize(t, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SystemTime>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| humantime::parse_rfc3339(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
