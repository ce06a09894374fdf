//! Broker topics and JSON payloads shared by devices and the service.

use gaitlab_core::recording::{CHANNEL_COUNT, SAMPLES_PER_CHANNEL};
use gaitlab_core::GaitLabel;
use serde::{Deserialize, Serialize};

pub const TOPIC_ROOT: &str = "gaitlab/dev";
pub const DEFAULT_FRAME_SIZE: usize = 50;

pub fn status_topic(device_id: &str) -> String {
    format!("{TOPIC_ROOT}/{device_id}/status")
}

pub fn data_topic(device_id: &str) -> String {
    format!("{TOPIC_ROOT}/{device_id}/data")
}

pub fn cmd_topic(device_id: &str) -> String {
    format!("{TOPIC_ROOT}/{device_id}/cmd")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopicKind {
    Status,
    Data,
    Cmd,
}

/// Splits `gaitlab/dev/<id>/<kind>` into its device id and kind.
pub fn parse_topic(topic: &str) -> Option<(&str, TopicKind)> {
    let rest = topic.strip_prefix(TOPIC_ROOT)?.strip_prefix('/')?;
    let (id, kind) = rest.rsplit_once('/')?;
    if id.is_empty() || id.contains('/') {
        return None;
    }
    let kind = match kind {
        "status" => TopicKind::Status,
        "data" => TopicKind::Data,
        "cmd" => TopicKind::Cmd,
        _ => return None,
    };
    Some((id, kind))
}

/// Device ids become topic levels, so MQTT wildcards and separators are
/// not allowed.
pub fn valid_device_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['/', '+', '#']) && !id.chars().any(char::is_control)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Command {
    Start {
        session_id: String,
        label: GaitLabel,
        seed: u64,
    },
    Ping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceState {
    Idle,
    Capturing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMsg {
    pub device_id: String,
    pub state: DeviceState,
    /// Set when a command was rejected, e.g. `"busy"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

impl StatusMsg {
    pub fn new(device_id: &str, state: DeviceState) -> Self {
        Self {
            device_id: device_id.to_string(),
            state,
            error: None,
            session_id: None,
        }
    }
}

/// One chunk of a capture: `samples[i]` is `[ax, ay, az, gx, gy, gz]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFrame {
    pub session_id: String,
    pub seq: usize,
    pub last: bool,
    pub samples: Vec<[f64; CHANNEL_COUNT]>,
}

pub fn frame_count(frame_size: usize) -> Option<usize> {
    (frame_size > 0 && SAMPLES_PER_CHANNEL % frame_size == 0).then(|| SAMPLES_PER_CHANNEL / frame_size)
}

/// Splits channel-major samples into frames of `frame_size` rows.
pub fn split_frames(session_id: &str, channels: &[Vec<f64>; CHANNEL_COUNT], frame_size: usize) -> Vec<DataFrame> {
    let n = frame_count(frame_size).expect("frame_size divides the capture length");
    (0..n)
        .map(|seq| DataFrame {
            session_id: session_id.to_string(),
            seq,
            last: seq + 1 == n,
            samples: (seq * frame_size..(seq + 1) * frame_size)
                .map(|t| std::array::from_fn(|c| channels[c][t]))
                .collect(),
        })
        .collect()
}

/// Inverse of [`split_frames`] for a complete, ordered frame set.
pub fn join_frames<'a>(frames: impl IntoIterator<Item = &'a DataFrame>) -> [Vec<f64>; CHANNEL_COUNT] {
    let mut channels: [Vec<f64>; CHANNEL_COUNT] = Default::default();
    for f in frames {
        for row in &f.samples {
            for (c, &v) in row.iter().enumerate() {
                channels[c].push(v);
            }
        }
    }
    channels
}
