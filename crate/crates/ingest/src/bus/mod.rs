//! Publish/subscribe transport. [`MqttBus`] talks to a real broker;
//! [`MemoryBus`] is an in-process stand-in with the same topic semantics.

mod mqtt;

pub use mqtt::{MqttBus, MqttConfig};

use async_trait::async_trait;
use std::sync::{Arc, Mutex};
use thiserror::Error;
use tokio::sync::mpsc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub topic: String,
    pub payload: Vec<u8>,
}

pub type Subscription = mpsc::UnboundedReceiver<Message>;

#[derive(Debug, Error)]
pub enum BusError {
    #[error("broker unreachable at {addr} after {attempts} attempts: {reason}")]
    Unreachable {
        addr: String,
        attempts: u32,
        reason: String,
    },
    #[error("invalid broker address {0:?}")]
    InvalidAddress(String),
    #[error("transport closed")]
    Closed,
    #[error("client error: {0}")]
    Client(String),
}

#[async_trait]
pub trait Bus: Send + Sync + 'static {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError>;
    /// Messages on topics matching `filter` (MQTT `+`/`#` wildcards) from
    /// the moment this returns.
    async fn subscribe(&self, filter: &str) -> Result<Subscription, BusError>;
}

/// MQTT topic filter matching: `+` matches one level, a trailing `#` any
/// number of remaining levels (including none).
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

/// Fan-out of incoming messages to local subscribers.
#[derive(Default)]
pub(crate) struct Dispatcher {
    subs: Mutex<Vec<(String, mpsc::UnboundedSender<Message>)>>,
}

impl Dispatcher {
    pub(crate) fn add(&self, filter: &str) -> Subscription {
        let (tx, rx) = mpsc::unbounded_channel();
        self.subs.lock().expect("dispatcher lock").push((filter.to_string(), tx));
        rx
    }

    pub(crate) fn dispatch(&self, msg: &Message) {
        let mut subs = self.subs.lock().expect("dispatcher lock");
        subs.retain(|(filter, tx)| !topic_matches(filter, &msg.topic) || tx.send(msg.clone()).is_ok());
    }

    pub(crate) fn filters(&self) -> Vec<String> {
        let mut subs = self.subs.lock().expect("dispatcher lock");
        subs.retain(|(_, tx)| !tx.is_closed());
        let mut out: Vec<String> = subs.iter().map(|(f, _)| f.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Default, Clone)]
pub struct MemoryBus {
    inner: Arc<Dispatcher>,
}

impl MemoryBus {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl Bus for MemoryBus {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        self.inner.dispatch(&Message {
            topic: topic.to_string(),
            payload,
        });
        Ok(())
    }

    async fn subscribe(&self, filter: &str) -> Result<Subscription, BusError> {
        Ok(self.inner.add(filter))
    }
}

type DropRule = dyn Fn(&str, &[u8]) -> bool + Send + Sync;

/// Fault injection: silently drops outgoing messages the rule selects.
pub struct FaultyBus<B> {
    inner: B,
    drop_if: Box<DropRule>,
}

impl<B: Bus> FaultyBus<B> {
    pub fn new(inner: B, drop_if: impl Fn(&str, &[u8]) -> bool + Send + Sync + 'static) -> Self {
        Self {
            inner,
            drop_if: Box::new(drop_if),
        }
    }

    /// Drops data frames whose `seq` is in `seqs`.
    pub fn dropping_frames(inner: B, seqs: Vec<usize>) -> Self {
        Self::new(inner, move |topic, payload| {
            topic.ends_with("/data")
                && serde_json::from_slice::<crate::protocol::DataFrame>(payload).is_ok_and(|f| seqs.contains(&f.seq))
        })
    }
}

#[async_trait]
impl<B: Bus> Bus for FaultyBus<B> {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        if (self.drop_if)(topic, &payload) {
            tracing::debug!(topic, "fault injection dropped message");
            return Ok(());
        }
        self.inner.publish(topic, payload).await
    }

    async fn subscribe(&self, filter: &str) -> Result<Subscription, BusError> {
        self.inner.subscribe(filter).await
    }
}

#[async_trait]
impl<B: Bus + ?Sized> Bus for Arc<B> {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        (**self).publish(topic, payload).await
    }

    async fn subscribe(&self, filter: &str) -> Result<Subscription, BusError> {
        (**self).subscribe(filter).await
    }
}
