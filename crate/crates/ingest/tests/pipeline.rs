mod common;

use common::{csv_count, finished, request, service};
use gaitlab_core::dataset::read_recording;
use gaitlab_core::synth::{generate_recording, GaitSignalParams};
use gaitlab_core::GaitLabel;
use gaitlab_ingest::protocol::{cmd_topic, data_topic, split_frames, status_topic, Command, DeviceState, StatusMsg};
use gaitlab_ingest::service::ServiceError;
use gaitlab_ingest::source::SynthSource;
use gaitlab_ingest::{run_device, Bus, DeviceConfig, FaultyBus, MemoryBus, SessionState};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

fn synth() -> Arc<SynthSource> {
    Arc::new(SynthSource::default())
}

#[tokio::test]
async fn captured_file_reproduces_source() {
    let dir = tempfile::tempdir().unwrap();
    let bus = Arc::new(MemoryBus::new());
    let _dev = run_device(DeviceConfig::new("imu-1"), bus.clone(), synth()).await.unwrap();
    let svc = service(bus, dir.path(), Duration::from_secs(15)).await;

    let s = svc.create_session(request(GaitLabel::Limping, "imu-1", 11)).unwrap();
    assert_eq!(s.state, SessionState::Created);
    let started = svc.start_capture(&s.session_id).await.unwrap();
    assert_eq!(started.state, SessionState::Capturing);
    let done = finished(&svc, &s.session_id, Duration::from_secs(10)).await;
    assert_eq!(done.state, SessionState::Complete, "{:?}", done.error);
    assert_eq!((done.frames_received, done.frames_expected), (10, 10));

    let path = done.file_path.expect("complete sessions have a file");
    let rec = read_recording(Path::new(&path)).unwrap();
    let source = generate_recording(GaitLabel::Limping, &GaitSignalParams::default(), 11);
    assert_eq!(rec.label, GaitLabel::Limping);
    assert_eq!(rec.session_id.as_str(), s.session_id);
    assert_eq!(rec.meta, s.meta);
    for c in 0..6 {
        assert_eq!(rec.channels[c].len(), 500);
        assert!(rec.channels[c].iter().zip(&source.channels[c]).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert_eq!(csv_count(dir.path(), GaitLabel::Limping), 1);
    assert_eq!(svc.list_sessions(&Default::default()).len(), 1);
}

#[tokio::test]
async fn dropped_frame_fails_with_missing_seq() {
    let dir = tempfile::tempdir().unwrap();
    let mem = MemoryBus::new();
    let lossy = Arc::new(FaultyBus::dropping_frames(mem.clone(), vec![7]));
    let _dev = run_device(DeviceConfig::new("imu-1"), lossy, synth()).await.unwrap();
    let svc = service(Arc::new(mem), dir.path(), Duration::from_millis(800)).await;

    let s = svc.create_session(request(GaitLabel::Walking, "imu-1", 1)).unwrap();
    svc.start_capture(&s.session_id).await.unwrap();
    let done = finished(&svc, &s.session_id, Duration::from_secs(5)).await;
    assert_eq!(done.state, SessionState::Failed);
    assert_eq!(done.error.as_deref(), Some("missing frames: [7]"));
    assert_eq!(done.frames_received, 9);
    assert!(done.file_path.is_none());
    assert_eq!(csv_count(dir.path(), GaitLabel::Walking), 0);
}

/// Device stand-in that answers pings and, on start, sends the given seq
/// order (duplicates and reordering included).
async fn scripted_device(bus: Arc<MemoryBus>, id: &'static str, order: Vec<usize>) {
    let mut cmds = bus.subscribe(&cmd_topic(id)).await.unwrap();
    tokio::spawn(async move {
        while let Some(m) = cmds.recv().await {
            match serde_json::from_slice::<Command>(&m.payload).unwrap() {
                Command::Ping => {
                    let st = StatusMsg::new(id, DeviceState::Idle);
                    bus.publish(&status_topic(id), serde_json::to_vec(&st).unwrap()).await.unwrap();
                }
                Command::Start { session_id, label, seed } => {
                    let rec = generate_recording(label, &GaitSignalParams::default(), seed);
                    let frames = split_frames(&session_id, &rec.channels, 50);
                    for &k in &order {
                        bus.publish(&data_topic(id), serde_json::to_vec(&frames[k]).unwrap()).await.unwrap();
                    }
                }
            }
        }
    });
}

#[tokio::test]
async fn duplicates_and_reordering_are_tolerated() {
    let dir = tempfile::tempdir().unwrap();
    let bus = Arc::new(MemoryBus::new());
    scripted_device(bus.clone(), "dup", vec![3, 0, 9, 3, 1, 2, 4, 5, 3, 6, 8, 7]).await;
    let svc = service(bus, dir.path(), Duration::from_secs(5)).await;
    let s = svc.create_session(request(GaitLabel::Feint, "dup", 5)).unwrap();
    svc.start_capture(&s.session_id).await.unwrap();
    let done = finished(&svc, &s.session_id, Duration::from_secs(5)).await;
    assert_eq!(done.state, SessionState::Complete, "{:?}", done.error);
    let rec = read_recording(Path::new(done.file_path.as_deref().unwrap())).unwrap();
    assert_eq!(rec.channels, generate_recording(GaitLabel::Feint, &GaitSignalParams::default(), 5).channels);
}

#[tokio::test]
async fn frames_for_unknown_sessions_are_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let bus = Arc::new(MemoryBus::new());
    let svc = service(bus.clone(), dir.path(), Duration::from_secs(5)).await;
    let rec = generate_recording(GaitLabel::Walking, &GaitSignalParams::default(), 0);
    for f in split_frames("nobody", &rec.channels, 50) {
        bus.publish(&data_topic("x"), serde_json::to_vec(&f).unwrap()).await.unwrap();
    }
    bus.publish(&data_topic("x"), b"not json".to_vec()).await.unwrap();
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert!(svc.list_sessions(&Default::default()).is_empty());
    assert_eq!(csv_count(dir.path(), GaitLabel::Walking), 0);
}

#[tokio::test]
async fn start_rules() {
    let dir = tempfile::tempdir().unwrap();
    let bus = Arc::new(MemoryBus::new());
    let mut cfg = gaitlab_ingest::ServiceConfig::new(dir.path());
    cfg.ping_timeout = Duration::from_millis(300);
    let svc = gaitlab_ingest::IngestService::start(bus.clone(), cfg).await.unwrap();

    let offline = svc.create_session(request(GaitLabel::Walking, "ghost", 1)).unwrap();
    assert!(matches!(svc.start_capture(&offline.session_id).await, Err(ServiceError::DeviceOffline(_))));
    assert_eq!(svc.get_session(&offline.session_id).unwrap().state, SessionState::Created);
    assert!(matches!(svc.start_capture("missing").await, Err(ServiceError::NotFound(_))));

    let mut rt = DeviceConfig::new("rt");
    rt.realtime = true;
    let _dev = run_device(rt, bus.clone(), synth()).await.unwrap();
    let a = svc.create_session(request(GaitLabel::Marching, "rt", 2)).unwrap();
    svc.start_capture(&a.session_id).await.unwrap();
    assert!(matches!(svc.start_capture(&a.session_id).await, Err(ServiceError::WrongState { .. })));
    let b = svc.create_session(request(GaitLabel::Marching, "rt", 3)).unwrap();
    assert!(matches!(svc.start_capture(&b.session_id).await, Err(ServiceError::DeviceBusy(_))));
    assert_eq!(svc.get_session(&b.session_id).unwrap().state, SessionState::Created);
    let ids: std::collections::HashSet<_> = [&offline, &a, &b].iter().map(|s| s.session_id.clone()).collect();
    assert_eq!(ids.len(), 3);
}

#[tokio::test]
async fn ping_reports_device_state() {
    let dir = tempfile::tempdir().unwrap();
    let bus = Arc::new(MemoryBus::new());
    let mut cfg = DeviceConfig::new("imu-9");
    cfg.realtime = true;
    let dev = run_device(cfg, bus.clone(), synth()).await.unwrap();
    let svc = service(bus.clone(), dir.path(), Duration::from_secs(15)).await;

    let idle = svc.ping_device("imu-9").await.unwrap();
    assert_eq!(idle.state, DeviceState::Idle);
    assert!(idle.round_trip_ms < 100.0, "{}", idle.round_trip_ms);

    let s = svc.create_session(request(GaitLabel::Walking, "imu-9", 4)).unwrap();
    svc.start_capture(&s.session_id).await.unwrap();
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert_eq!(svc.ping_device("imu-9").await.unwrap().state, DeviceState::Capturing);

    dev.stop();
    let t = Instant::now();
    assert!(matches!(svc.ping_device("imu-9").await, Err(ServiceError::DeviceOffline(_))));
    let waited = t.elapsed();
    assert!(waited >= Duration::from_secs(2) && waited < Duration::from_millis(2500), "{waited:?}");
}

#[tokio::test]
async fn device_rejects_start_while_capturing() {
    let bus = Arc::new(MemoryBus::new());
    let mut cfg = DeviceConfig::new("busy");
    cfg.realtime = true;
    let _dev = run_device(cfg, bus.clone(), synth()).await.unwrap();
    let mut status = bus.subscribe(&status_topic("busy")).await.unwrap();
    let start = |sid: &str| {
        serde_json::to_vec(&Command::Start { session_id: sid.into(), label: GaitLabel::Walking, seed: 0 }).unwrap()
    };
    bus.publish(&cmd_topic("busy"), start("first")).await.unwrap();
    let st: StatusMsg = serde_json::from_slice(&status.recv().await.unwrap().payload).unwrap();
    assert_eq!((st.state, st.error.as_deref()), (DeviceState::Capturing, None));
    bus.publish(&cmd_topic("busy"), start("second")).await.unwrap();
    let st: StatusMsg = serde_json::from_slice(&status.recv().await.unwrap().payload).unwrap();
    assert_eq!(st.error.as_deref(), Some("busy"));
    assert_eq!(st.session_id.as_deref(), Some("second"));
    assert_eq!(st.state, DeviceState::Capturing);
}

#[tokio::test]
async fn realtime_capture_takes_five_seconds() {
    let bus = Arc::new(MemoryBus::new());
    let mut cfg = DeviceConfig::new("pace");
    cfg.realtime = true;
    let _dev = run_device(cfg, bus.clone(), synth()).await.unwrap();
    let mut data = bus.subscribe(&data_topic("pace")).await.unwrap();
    let cmd = Command::Start { session_id: "p".into(), label: GaitLabel::Walking, seed: 0 };
    let t0 = Instant::now();
    bus.publish(&cmd_topic("pace"), serde_json::to_vec(&cmd).unwrap()).await.unwrap();
    let mut arrivals = Vec::new();
    for _ in 0..10 {
        data.recv().await.unwrap();
        arrivals.push(t0.elapsed().as_secs_f64());
    }
    let total = arrivals[9];
    assert!((total - 5.0).abs() <= 0.1, "capture took {total} s");
    for w in arrivals.windows(2) {
        assert!((w[1] - w[0] - 0.5).abs() <= 0.01 + 0.03, "spacing {}", w[1] - w[0]);
    }
}

#[tokio::test]
async fn journal_recovers_sessions_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (created_id, capturing_id, complete_id);
    {
        let mem = MemoryBus::new();
        let silent = Arc::new(FaultyBus::new(mem.clone(), |t, _| t.ends_with("/data")));
        let _mute = run_device(DeviceConfig::new("mute"), silent, synth()).await.unwrap();
        let _ok = run_device(DeviceConfig::new("ok"), Arc::new(mem.clone()), synth()).await.unwrap();
        let svc = service(Arc::new(mem), dir.path(), Duration::from_secs(60)).await;
        created_id = svc.create_session(request(GaitLabel::Walking, "ok", 1)).unwrap().session_id;
        let c = svc.create_session(request(GaitLabel::Limping, "mute", 2)).unwrap();
        svc.start_capture(&c.session_id).await.unwrap();
        capturing_id = c.session_id;
        let d = svc.create_session(request(GaitLabel::Feint, "ok", 3)).unwrap();
        svc.start_capture(&d.session_id).await.unwrap();
        assert_eq!(finished(&svc, &d.session_id, Duration::from_secs(5)).await.state, SessionState::Complete);
        complete_id = d.session_id;
    }
    let svc = service(Arc::new(MemoryBus::new()), dir.path(), Duration::from_secs(15)).await;
    let all = svc.list_sessions(&Default::default());
    assert_eq!(all.iter().map(|s| s.session_id.clone()).collect::<Vec<_>>(), vec![created_id.clone(), capturing_id.clone(), complete_id.clone()]);
    assert_eq!(svc.get_session(&created_id).unwrap().state, SessionState::Created);
    let interrupted = svc.get_session(&capturing_id).unwrap();
    assert_eq!(interrupted.state, SessionState::Failed);
    assert!(interrupted.error.unwrap().contains("restart"));
    let complete = svc.get_session(&complete_id).unwrap();
    assert!(complete.file_path.is_some() && complete.completed_at.is_some());
    let filter = gaitlab_ingest::SessionFilter { label: Some(GaitLabel::Feint), ..Default::default() };
    assert_eq!(svc.list_sessions(&filter).len(), csv_count(dir.path(), GaitLabel::Feint));
}
