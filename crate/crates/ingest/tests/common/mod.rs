#![allow(dead_code)]

use gaitlab_core::synth::subject_meta;
use gaitlab_core::GaitLabel;
use gaitlab_ingest::service::SessionEvent;
use gaitlab_ingest::{Bus, CreateSession, IngestService, ServiceConfig, Session};
use std::sync::Arc;
use std::time::Duration;

pub fn request(label: GaitLabel, device: &str, seed: u64) -> CreateSession {
    CreateSession {
        meta: subject_meta(3),
        label,
        device_id: device.into(),
        seed: Some(seed),
    }
}

pub async fn service(bus: Arc<dyn Bus>, root: &std::path::Path, deadline: Duration) -> Arc<IngestService> {
    let mut cfg = ServiceConfig::new(root);
    cfg.assembly_deadline = deadline;
    IngestService::start(bus, cfg).await.unwrap()
}

/// Waits for the session to reach a terminal state.
pub async fn finished(svc: &IngestService, id: &str, within: Duration) -> Session {
    let (snap, mut rx) = svc.watch(id).unwrap();
    if snap.state.is_terminal() {
        return snap;
    }
    tokio::time::timeout(within, async {
        loop {
            if let Ok(SessionEvent::State(s)) = rx.recv().await {
                if s.state.is_terminal() {
                    return s;
                }
            }
        }
    })
    .await
    .expect("session did not finish in time")
}

pub fn csv_count(root: &std::path::Path, label: GaitLabel) -> usize {
    std::fs::read_dir(root.join(label.code()))
        .map(|d| d.filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count())
        .unwrap_or(0)
}
