//! Capture-session service: owns the session store, assembles frames coming
//! off the bus into recordings and persists completed captures as CSV.

use crate::bus::{Bus, BusError};
use crate::journal::{Journal, JournalError};
use crate::protocol::{cmd_topic, parse_topic, valid_device_id, Command, DataFrame, DeviceState, StatusMsg, TopicKind, TOPIC_ROOT};
use crate::session::{Accept, AssemblyBuffer, Session, SessionFilter, SessionState};
use gaitlab_core::csv::write_recording_csv;
use gaitlab_core::dataset::recording_path;
use gaitlab_core::recording::SAMPLE_RATE_HZ;
use gaitlab_core::{validate_recording, GaitLabel, GaitRecording, SessionId, SubjectMeta};
use serde::Serialize;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime};
use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

pub const DEFAULT_ASSEMBLY_DEADLINE: Duration = Duration::from_secs(15);
pub const DEFAULT_PING_TIMEOUT: Duration = Duration::from_secs(2);
/// Frame count reported before a capture's first frame reveals its size.
pub const DEFAULT_EXPECTED_FRAMES: usize = 10;
const EVENT_BUFFER: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_root: PathBuf,
    /// Defaults to `<data_root>/sessions.jsonl`.
    pub journal_path: Option<PathBuf>,
    pub assembly_deadline: Duration,
    pub ping_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self {
            data_root: data_root.into(),
            journal_path: None,
            assembly_deadline: DEFAULT_ASSEMBLY_DEADLINE,
            ping_timeout: DEFAULT_PING_TIMEOUT,
        }
    }

    pub fn journal_path(&self) -> PathBuf {
        self.journal_path.clone().unwrap_or_else(|| self.data_root.join("sessions.jsonl"))
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session {session_id} is {state}, expected created")]
    WrongState { session_id: String, state: &'static str },
    #[error("device {0} is busy")]
    DeviceBusy(String),
    #[error("device {0} did not answer ping")]
    DeviceOffline(String),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

impl ServiceError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ServiceError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CreateSession {
    pub meta: SubjectMeta,
    pub label: GaitLabel,
    pub device_id: String,
    /// Seed forwarded to the device; random when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PingReply {
    pub state: DeviceState,
    pub round_trip_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    State(Session),
    Progress { received: usize, expected: usize },
}

struct Entry {
    session: Session,
    buffer: Option<AssemblyBuffer>,
    /// A start request is waiting on the device ping.
    starting: bool,
    events: broadcast::Sender<SessionEvent>,
}

struct Store {
    order: Vec<String>,
    entries: HashMap<String, Entry>,
    journal: Journal,
}

pub struct IngestService {
    bus: Arc<dyn Bus>,
    cfg: ServiceConfig,
    store: Mutex<Store>,
    pings: Mutex<HashMap<String, Vec<oneshot::Sender<StatusMsg>>>>,
}

impl IngestService {
    /// Recovers the journal, subscribes to device traffic and starts
    /// processing it. Sessions that were capturing when the previous process
    /// stopped can no longer complete and are marked failed.
    pub async fn start(bus: Arc<dyn Bus>, cfg: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let (journal, replay) = Journal::open(&cfg.journal_path())?;
        let mut store = Store {
            order: Vec::new(),
            entries: HashMap::new(),
            journal,
        };
        for session in replay.sessions {
            let id = session.session_id.clone();
            store.order.push(id.clone());
            store.entries.insert(
                id,
                Entry {
                    session,
                    buffer: None,
                    starting: false,
                    events: broadcast::channel(EVENT_BUFFER).0,
                },
            );
        }
        let interrupted: Vec<String> = store
            .order
            .iter()
            .filter(|id| store.entries[*id].session.state == SessionState::Capturing)
            .cloned()
            .collect();
        for id in interrupted {
            let Store { entries, journal, .. } = &mut store;
            fail(entries.get_mut(&id).expect("listed"), journal, "interrupted by service restart".into());
        }
        if !store.order.is_empty() {
            tracing::info!(sessions = store.order.len(), "recovered session journal");
        }

        let data = bus.subscribe(&format!("{TOPIC_ROOT}/+/data")).await?;
        let status = bus.subscribe(&format!("{TOPIC_ROOT}/+/status")).await?;
        let svc = Arc::new(Self {
            bus,
            cfg,
            store: Mutex::new(store),
            pings: Mutex::new(HashMap::new()),
        });
        tokio::spawn(listen(Arc::downgrade(&svc), data));
        tokio::spawn(listen(Arc::downgrade(&svc), status));
        Ok(svc)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn data_root(&self) -> &Path {
        &self.cfg.data_root
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().expect("session store lock")
    }

    pub fn create_session(&self, req: CreateSession) -> Result<Session, ServiceError> {
        if !valid_device_id(&req.device_id) {
            return Err(ServiceError::validation("device_id", "must be non-empty without '/', '+' or '#'"));
        }
        let session = Session {
            session_id: SessionId::random().to_string(),
            meta: req.meta,
            label: req.label,
            device_id: req.device_id,
            seed: req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0),
            state: SessionState::Created,
            created_at: SystemTime::now(),
            completed_at: None,
            file_path: None,
            error: None,
            frames_received: 0,
            frames_expected: DEFAULT_EXPECTED_FRAMES,
        };
        let mut store = self.store();
        store.journal.append(&session)?;
        store.order.push(session.session_id.clone());
        store.entries.insert(
            session.session_id.clone(),
            Entry {
                session: session.clone(),
                buffer: None,
                starting: false,
                events: broadcast::channel(EVENT_BUFFER).0,
            },
        );
        tracing::info!(session = %session.session_id, label = %session.label, device = %session.device_id, "session created");
        Ok(session)
    }

    pub fn get_session(&self, id: &str) -> Result<Session, ServiceError> {
        self.store()
            .entries
            .get(id)
            .map(|e| e.session.clone())
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Matching sessions in creation order.
    pub fn list_sessions(&self, filter: &SessionFilter) -> Vec<Session> {
        let store = self.store();
        store
            .order
            .iter()
            .map(|id| &store.entries[id].session)
            .filter(|s| filter.matches(s))
            .cloned()
            .collect()
    }

    /// Current snapshot plus a receiver for every later event, taken
    /// atomically so no transition falls between the two.
    pub fn watch(&self, id: &str) -> Result<(Session, broadcast::Receiver<SessionEvent>), ServiceError> {
        let store = self.store();
        let e = store.entries.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        Ok((e.session.clone(), e.events.subscribe()))
    }

    /// Round trip of a ping command over the bus.
    pub async fn ping_device(&self, device_id: &str) -> Result<PingReply, ServiceError> {
        if !valid_device_id(device_id) {
            return Err(ServiceError::validation("device_id", "must be non-empty without '/', '+' or '#'"));
        }
        let (tx, rx) = oneshot::channel();
        {
            let mut pings = self.pings.lock().expect("ping lock");
            let waiters = pings.entry(device_id.to_string()).or_default();
            waiters.retain(|w| !w.is_closed());
            waiters.push(tx);
        }
        let sent = Instant::now();
        let payload = serde_json::to_vec(&Command::Ping).expect("command serializes");
        self.bus.publish(&cmd_topic(device_id), payload).await?;
        match tokio::time::timeout(self.cfg.ping_timeout, rx).await {
            Ok(Ok(status)) => Ok(PingReply {
                state: status.state,
                round_trip_ms: sent.elapsed().as_secs_f64() * 1e3,
            }),
            _ => Err(ServiceError::DeviceOffline(device_id.to_string())),
        }
    }

    /// Verifies the device is idle, sends it the start command and arms the
    /// assembly deadline.
    pub async fn start_capture(self: &Arc<Self>, id: &str) -> Result<Session, ServiceError> {
        let device_id = {
            let mut store = self.store();
            let device_busy = {
                let e = store.entries.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
                if e.session.state != SessionState::Created || e.starting {
                    return Err(ServiceError::WrongState {
                        session_id: id.to_string(),
                        state: if e.starting { "starting" } else { e.session.state.as_str() },
                    });
                }
                let device = &e.session.device_id;
                store.entries.values().any(|o| {
                    o.session.device_id == *device && (o.session.state == SessionState::Capturing || o.starting)
                })
            };
            let e = store.entries.get_mut(id).expect("checked");
            if device_busy {
                return Err(ServiceError::DeviceBusy(e.session.device_id.clone()));
            }
            e.starting = true;
            e.session.device_id.clone()
        };

        let ping = self.ping_device(&device_id).await;
        let (session, seed, label) = {
            let mut store = self.store();
            let Store { entries, journal, .. } = &mut *store;
            let e = entries.get_mut(id).expect("sessions are never removed");
            e.starting = false;
            match ping {
                Err(err) => return Err(err),
                Ok(r) if r.state == DeviceState::Capturing => return Err(ServiceError::DeviceBusy(device_id)),
                Ok(_) => {}
            }
            let buffer = AssemblyBuffer::new(DEFAULT_EXPECTED_FRAMES);
            e.session.frames_expected = buffer.expected();
            e.buffer = Some(buffer);
            transition(e, journal, SessionState::Capturing);
            (e.session.clone(), e.session.seed, e.session.label)
        };

        let cmd = Command::Start {
            session_id: id.to_string(),
            label,
            seed,
        };
        if let Err(err) = self.bus.publish(&cmd_topic(&device_id), serde_json::to_vec(&cmd).expect("command serializes")).await {
            let mut store = self.store();
            let Store { entries, journal, .. } = &mut *store;
            fail(entries.get_mut(id).expect("present"), journal, format!("start command not delivered: {err}"));
            return Err(err.into());
        }
        tracing::info!(session = %id, device = %device_id, "capture started");

        let weak = Arc::downgrade(self);
        let id_owned = id.to_string();
        let deadline = self.cfg.assembly_deadline;
        tokio::spawn(async move {
            tokio::time::sleep(deadline).await;
            if let Some(svc) = weak.upgrade() {
                svc.expire(&id_owned);
            }
        });
        Ok(session)
    }

    fn expire(&self, id: &str) {
        let mut store = self.store();
        let Store { entries, journal, .. } = &mut *store;
        let Some(e) = entries.get_mut(id) else { return };
        if e.session.state != SessionState::Capturing {
            return;
        }
        let missing = e.buffer.as_ref().map(|b| b.missing()).unwrap_or_default();
        tracing::warn!(session = %id, ?missing, "assembly deadline expired");
        fail(e, journal, format!("missing frames: {missing:?}"));
    }

    fn on_message(&self, topic: &str, payload: &[u8]) {
        let Some((device_id, kind)) = parse_topic(topic) else { return };
        match kind {
            TopicKind::Data => match serde_json::from_slice::<DataFrame>(payload) {
                Ok(frame) => self.on_frame(device_id, frame),
                Err(e) => tracing::warn!(device = device_id, "malformed data frame: {e}"),
            },
            TopicKind::Status => match serde_json::from_slice::<StatusMsg>(payload) {
                Ok(status) => self.on_status(device_id, status),
                Err(e) => tracing::warn!(device = device_id, "malformed status: {e}"),
            },
            TopicKind::Cmd => {}
        }
    }

    /// Idempotent per `(session_id, seq)`. Completes the session once every
    /// frame is present.
    pub fn on_frame(&self, device_id: &str, frame: DataFrame) {
        let mut store = self.store();
        let Store { entries, journal, .. } = &mut *store;
        let Some(e) = entries.get_mut(&frame.session_id) else {
            tracing::debug!(session = %frame.session_id, "frame for unknown session dropped");
            return;
        };
        if e.session.device_id != device_id || e.session.state != SessionState::Capturing {
            tracing::debug!(session = %frame.session_id, device = device_id, state = e.session.state.as_str(), "frame dropped");
            return;
        }
        let buffer = e.buffer.as_mut().expect("capturing sessions have a buffer");
        let seq = frame.seq;
        match buffer.offer(frame) {
            Accept::New => {}
            Accept::Duplicate => return,
            Accept::Rejected(reason) => {
                tracing::warn!(session = %e.session.session_id, seq, "frame rejected: {reason}");
                return;
            }
        }
        e.session.frames_received = buffer.received();
        e.session.frames_expected = buffer.expected();
        let _ = e.events.send(SessionEvent::Progress {
            received: buffer.received(),
            expected: buffer.expected(),
        });
        if !buffer.is_complete() {
            return;
        }
        let channels = buffer.assemble();
        let rec = GaitRecording {
            session_id: SessionId::new(e.session.session_id.clone()),
            meta: e.session.meta.clone(),
            label: e.session.label,
            sample_rate_hz: SAMPLE_RATE_HZ,
            channels,
        };
        let violations = validate_recording(&rec);
        if !violations.is_empty() {
            fail(e, journal, format!("invalid recording: {}", violations.join("; ")));
            return;
        }
        match persist(&self.cfg.data_root, &rec) {
            Ok(path) => {
                e.session.file_path = Some(path.to_string_lossy().into_owned());
                e.buffer = None;
                transition(e, journal, SessionState::Complete);
                tracing::info!(session = %rec.session_id, path = %path.display(), "capture complete");
            }
            Err(err) => fail(e, journal, format!("cannot write recording: {err}")),
        }
    }

    fn on_status(&self, device_id: &str, status: StatusMsg) {
        if let Some(waiters) = self.pings.lock().expect("ping lock").remove(device_id) {
            for w in waiters {
                let _ = w.send(status.clone());
            }
        }
        // A device may refuse a start or fail to produce a capture; both are
        // reported with the session id the command carried.
        let (Some(reason), Some(sid)) = (&status.error, &status.session_id) else { return };
        let mut store = self.store();
        let Store { entries, journal, .. } = &mut *store;
        if let Some(e) = entries.get_mut(sid) {
            if e.session.device_id == device_id && e.session.state == SessionState::Capturing {
                fail(e, journal, format!("device reported {reason}"));
            }
        }
    }
}

async fn listen(svc: std::sync::Weak<IngestService>, mut rx: crate::bus::Subscription) {
    while let Some(msg) = rx.recv().await {
        let Some(svc) = svc.upgrade() else { return };
        svc.on_message(&msg.topic, &msg.payload);
    }
}

fn transition(e: &mut Entry, journal: &mut Journal, next: SessionState) {
    assert!(
        e.session.state.can_become(next),
        "illegal session transition {:?} -> {:?}",
        e.session.state,
        next
    );
    e.session.state = next;
    if next.is_terminal() {
        e.session.completed_at = Some(SystemTime::now());
    }
    if let Err(err) = journal.append(&e.session) {
        tracing::error!(session = %e.session.session_id, "journal append failed: {err}");
    }
    let _ = e.events.send(SessionEvent::State(e.session.clone()));
}

fn fail(e: &mut Entry, journal: &mut Journal, reason: String) {
    tracing::warn!(session = %e.session.session_id, "session failed: {reason}");
    e.session.error = Some(reason);
    e.buffer = None;
    transition(e, journal, SessionState::Failed);
}

/// Writes `<root>/<label>/<session_id>.csv` via a temporary file so readers
/// never see a partial recording.
fn persist(root: &Path, rec: &GaitRecording) -> std::io::Result<PathBuf> {
    let path = recording_path(root, rec);
    let dir = path.parent().expect("recording path has a label directory");
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", rec.session_id));
    std::fs::write(&tmp, write_recording_csv(rec))?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}
