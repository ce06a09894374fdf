//! Software stand-in for the wearable: waits for a start command and streams
//! one capture as sequenced data frames.

use crate::bus::{Bus, BusError};
use crate::protocol::{cmd_topic, data_topic, frame_count, split_frames, status_topic, valid_device_id, Command, DeviceState, StatusMsg, DEFAULT_FRAME_SIZE};
use crate::source::RecordingSource;
use gaitlab_core::recording::SAMPLE_RATE_HZ;
use gaitlab_core::GaitLabel;
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;
use tokio::task::JoinHandle;
use tokio::time::Instant;

#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub device_id: String,
    /// Samples per frame; must divide the 500-sample capture.
    pub frame_size: usize,
    /// Pace frames at the sampling rate instead of sending them in a burst.
    pub realtime: bool,
}

impl DeviceConfig {
    pub fn new(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            frame_size: DEFAULT_FRAME_SIZE,
            realtime: false,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !valid_device_id(&self.device_id) {
            return Err(DeviceError::InvalidId(self.device_id.clone()));
        }
        if frame_count(self.frame_size).is_none() {
            return Err(DeviceError::FrameSize(self.frame_size));
        }
        Ok(())
    }

    fn frame_period(&self) -> Duration {
        Duration::from_secs_f64(self.frame_size as f64 / SAMPLE_RATE_HZ as f64)
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("invalid device id {0:?}")]
    InvalidId(String),
    #[error("frame size {0} does not divide the 500-sample capture")]
    FrameSize(usize),
    #[error(transparent)]
    Bus(#[from] BusError),
}

struct Shared {
    state: DeviceState,
    session_id: Option<String>,
    capture: Option<JoinHandle<()>>,
}

/// A running device. Dropping the handle leaves the device running;
/// [`DeviceHandle::stop`] takes it offline.
pub struct DeviceHandle {
    device_id: String,
    shared: Arc<Mutex<Shared>>,
    task: JoinHandle<()>,
}

impl DeviceHandle {
    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn state(&self) -> DeviceState {
        self.shared.lock().expect("device lock").state
    }

    /// Stops answering commands and abandons any capture in progress.
    pub fn stop(self) {
        self.task.abort();
        if let Some(c) = self.shared.lock().expect("device lock").capture.take() {
            c.abort();
        }
    }

    /// Resolves when the command loop ends (the bus closed).
    pub async fn join(self) {
        let _ = self.task.await;
    }
}

/// Subscribes to the device's command topic, announces it as idle and
/// serves commands on a background task.
pub async fn run_device<B, S>(cfg: DeviceConfig, bus: Arc<B>, source: Arc<S>) -> Result<DeviceHandle, DeviceError>
where
    B: Bus + ?Sized,
    S: RecordingSource + ?Sized,
{
    cfg.validate()?;
    let mut commands = bus.subscribe(&cmd_topic(&cfg.device_id)).await?;
    let shared = Arc::new(Mutex::new(Shared {
        state: DeviceState::Idle,
        session_id: None,
        capture: None,
    }));
    publish_status(&*bus, StatusMsg::new(&cfg.device_id, DeviceState::Idle)).await;
    tracing::info!(device = %cfg.device_id, "device online");

    let task = {
        let shared = shared.clone();
        let cfg = cfg.clone();
        tokio::spawn(async move {
            while let Some(msg) = commands.recv().await {
                let cmd: Command = match serde_json::from_slice(&msg.payload) {
                    Ok(c) => c,
                    Err(e) => {
                        tracing::warn!(device = %cfg.device_id, "ignoring malformed command: {e}");
                        continue;
                    }
                };
                handle_command(cmd, &cfg, &bus, &source, &shared).await;
            }
        })
    };
    Ok(DeviceHandle {
        device_id: cfg.device_id,
        shared,
        task,
    })
}

async fn handle_command<B, S>(cmd: Command, cfg: &DeviceConfig, bus: &Arc<B>, source: &Arc<S>, shared: &Arc<Mutex<Shared>>)
where
    B: Bus + ?Sized,
    S: RecordingSource + ?Sized,
{
    match cmd {
        Command::Ping => {
            let mut status = StatusMsg::new(&cfg.device_id, DeviceState::Idle);
            {
                let s = shared.lock().expect("device lock");
                status.state = s.state;
                status.session_id = s.session_id.clone();
            }
            publish_status(&**bus, status).await;
        }
        Command::Start { session_id, label, seed } => {
            let rejected = {
                let mut s = shared.lock().expect("device lock");
                if s.state == DeviceState::Capturing {
                    true
                } else {
                    s.state = DeviceState::Capturing;
                    s.session_id = Some(session_id.clone());
                    false
                }
            };
            if rejected {
                let mut status = StatusMsg::new(&cfg.device_id, DeviceState::Capturing);
                status.error = Some("busy".into());
                status.session_id = Some(session_id);
                publish_status(&**bus, status).await;
                return;
            }
            let mut capturing = StatusMsg::new(&cfg.device_id, DeviceState::Capturing);
            capturing.session_id = Some(session_id.clone());
            publish_status(&**bus, capturing).await;

            let handle = tokio::spawn(capture(cfg.clone(), bus.clone(), source.clone(), shared.clone(), session_id, label, seed));
            shared.lock().expect("device lock").capture = Some(handle);
        }
    }
}

async fn capture<B, S>(
    cfg: DeviceConfig,
    bus: Arc<B>,
    source: Arc<S>,
    shared: Arc<Mutex<Shared>>,
    session_id: String,
    label: GaitLabel,
    seed: u64,
) where
    B: Bus + ?Sized,
    S: RecordingSource + ?Sized,
{
    let t0 = Instant::now();
    let mut error = None;
    match source.recording(label, seed) {
        Ok(rec) => {
            let period = cfg.frame_period();
            for (k, frame) in split_frames(&session_id, &rec.channels, cfg.frame_size).into_iter().enumerate() {
                if cfg.realtime {
                    // A frame leaves the device once its last sample is taken.
                    tokio::time::sleep_until(t0 + period * (k as u32 + 1)).await;
                }
                let payload = serde_json::to_vec(&frame).expect("frame serializes");
                if let Err(e) = bus.publish(&data_topic(&cfg.device_id), payload).await {
                    tracing::warn!(device = %cfg.device_id, seq = frame.seq, "frame publish failed: {e}");
                }
            }
            tracing::info!(device = %cfg.device_id, session = %session_id, "capture sent in {:?}", t0.elapsed());
        }
        Err(e) => {
            tracing::error!(device = %cfg.device_id, "no recording for {label}: {e}");
            error = Some(e.to_string());
        }
    }
    {
        let mut s = shared.lock().expect("device lock");
        s.state = DeviceState::Idle;
        s.session_id = None;
        s.capture = None;
    }
    let mut idle = StatusMsg::new(&cfg.device_id, DeviceState::Idle);
    idle.error = error;
    idle.session_id = Some(session_id);
    publish_status(&*bus, idle).await;
}

async fn publish_status<B: Bus + ?Sized>(bus: &B, status: StatusMsg) {
    let topic = status_topic(&status.device_id);
    if let Err(e) = bus.publish(&topic, serde_json::to_vec(&status).expect("status serializes")).await {
        tracing::warn!(device = %status.device_id, "status publish failed: {e}");
    }
}
