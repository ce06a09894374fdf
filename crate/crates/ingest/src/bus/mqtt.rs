use super::{Bus, BusError, Dispatcher, Message, Subscription};
use async_trait::async_trait;
use rumqttc::{AsyncClient, Event, EventLoop, MqttOptions, Outgoing, Packet, QoS};
use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::sync::{oneshot, watch};

const MAX_PACKET: usize = 1 << 20;
const SUBACK_WAIT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct MqttConfig {
    /// `host:port`.
    pub addr: String,
    pub client_id: String,
    /// Failed connection attempts tolerated before the first `ConnAck`.
    pub connect_attempts: u32,
    pub backoff_initial: Duration,
    pub backoff_max: Duration,
    pub keep_alive: Duration,
}

impl MqttConfig {
    pub fn new(addr: impl Into<String>, client_id: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            client_id: client_id.into(),
            connect_attempts: 5,
            backoff_initial: Duration::from_millis(100),
            backoff_max: Duration::from_secs(5),
            keep_alive: Duration::from_secs(10),
        }
    }

    fn host_port(&self) -> Result<(String, u16), BusError> {
        let bad = || BusError::InvalidAddress(self.addr.clone());
        let (host, port) = self.addr.rsplit_once(':').ok_or_else(bad)?;
        let port = port.parse().map_err(|_| bad())?;
        if host.is_empty() {
            return Err(bad());
        }
        Ok((host.to_string(), port))
    }
}

/// Subscribe requests in flight. Waiters are queued in request order and
/// moved to `by_pkid` when the event loop reports the packet id it sent.
#[derive(Default)]
struct SubTracker {
    queued: VecDeque<Option<oneshot::Sender<()>>>,
    by_pkid: HashMap<u16, oneshot::Sender<()>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Link {
    Connecting,
    Up,
    Failed(String),
}

/// MQTT transport over rumqttc. A background task drives the event loop,
/// reconnects with bounded exponential backoff and restores subscriptions
/// after every reconnect.
pub struct MqttBus {
    client: AsyncClient,
    dispatcher: Arc<Dispatcher>,
    subs: Arc<Mutex<SubTracker>>,
    link: watch::Receiver<Link>,
}

impl MqttBus {
    /// Connects and waits for the broker's `ConnAck`.
    pub async fn connect(cfg: MqttConfig) -> Result<Arc<Self>, BusError> {
        let (host, port) = cfg.host_port()?;
        let mut opts = MqttOptions::new(cfg.client_id.clone(), host, port);
        opts.set_keep_alive(cfg.keep_alive);
        opts.set_max_packet_size(MAX_PACKET, MAX_PACKET);
        opts.set_clean_session(true);
        let (client, eventloop) = AsyncClient::new(opts, 256);
        let (link_tx, mut link_rx) = watch::channel(Link::Connecting);
        let bus = Arc::new(Self {
            client: client.clone(),
            dispatcher: Arc::new(Dispatcher::default()),
            subs: Arc::new(Mutex::new(SubTracker::default())),
            link: link_rx.clone(),
        });
        tokio::spawn(drive(eventloop, client, bus.dispatcher.clone(), bus.subs.clone(), link_tx, cfg.clone()));

        let state = link_rx
            .wait_for(|l| *l != Link::Connecting)
            .await
            .map_err(|_| BusError::Closed)?
            .clone();
        match state {
            Link::Up => Ok(bus),
            Link::Failed(reason) => Err(BusError::Unreachable {
                addr: cfg.addr,
                attempts: cfg.connect_attempts,
                reason,
            }),
            Link::Connecting => unreachable!(),
        }
    }

    pub fn is_connected(&self) -> bool {
        *self.link.borrow() == Link::Up
    }

    fn request_subscribe(&self, filter: &str, waiter: Option<oneshot::Sender<()>>) -> Result<(), BusError> {
        request_subscribe(&self.client, &self.subs, filter, waiter)
    }
}

fn request_subscribe(
    client: &AsyncClient,
    subs: &Mutex<SubTracker>,
    filter: &str,
    waiter: Option<oneshot::Sender<()>>,
) -> Result<(), BusError> {
    let mut t = subs.lock().expect("subscription lock");
    client
        .try_subscribe(filter, QoS::AtLeastOnce)
        .map_err(|e| BusError::Client(e.to_string()))?;
    t.queued.push_back(waiter);
    Ok(())
}

async fn drive(
    mut eventloop: EventLoop,
    client: AsyncClient,
    dispatcher: Arc<Dispatcher>,
    subs: Arc<Mutex<SubTracker>>,
    link: watch::Sender<Link>,
    cfg: MqttConfig,
) {
    let mut backoff = cfg.backoff_initial;
    let mut failures = 0u32;
    let mut ever_up = false;
    loop {
        match eventloop.poll().await {
            Ok(Event::Incoming(Packet::ConnAck(_))) => {
                tracing::debug!(client = %cfg.client_id, "connected to {}", cfg.addr);
                ever_up = true;
                failures = 0;
                backoff = cfg.backoff_initial;
                {
                    let mut t = subs.lock().expect("subscription lock");
                    // Requests queued before the drop never reached the broker.
                    t.queued.clear();
                    t.by_pkid.clear();
                }
                for filter in dispatcher.filters() {
                    if let Err(e) = request_subscribe(&client, &subs, &filter, None) {
                        tracing::warn!("resubscribe to {filter} failed: {e}");
                    }
                }
                link.send_replace(Link::Up);
            }
            Ok(Event::Incoming(Packet::Publish(p))) => {
                dispatcher.dispatch(&Message {
                    topic: p.topic.clone(),
                    payload: p.payload.to_vec(),
                });
            }
            Ok(Event::Outgoing(Outgoing::Subscribe(pkid))) => {
                let mut t = subs.lock().expect("subscription lock");
                if let Some(Some(w)) = t.queued.pop_front() {
                    t.by_pkid.insert(pkid, w);
                }
            }
            Ok(Event::Incoming(Packet::SubAck(ack))) => {
                if let Some(w) = subs.lock().expect("subscription lock").by_pkid.remove(&ack.pkid) {
                    let _ = w.send(());
                }
            }
            Ok(_) => {}
            Err(e) => {
                if link.is_closed() && ever_up {
                    // Every MqttBus handle is gone.
                    return;
                }
                failures += 1;
                if !ever_up && failures >= cfg.connect_attempts {
                    link.send_replace(Link::Failed(e.to_string()));
                    return;
                }
                if ever_up {
                    link.send_replace(Link::Connecting);
                }
                tracing::warn!(client = %cfg.client_id, "broker connection error: {e}; retrying in {backoff:?}");
                tokio::time::sleep(backoff).await;
                backoff = (backoff * 2).min(cfg.backoff_max);
            }
        }
    }
}

#[async_trait]
impl Bus for MqttBus {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        self.client
            .publish(topic, QoS::AtLeastOnce, false, payload)
            .await
            .map_err(|e| BusError::Client(e.to_string()))
    }

    async fn subscribe(&self, filter: &str) -> Result<Subscription, BusError> {
        let rx = self.dispatcher.add(filter);
        let (tx, ack) = oneshot::channel();
        self.request_subscribe(filter, Some(tx))?;
        if tokio::time::timeout(SUBACK_WAIT, ack).await.is_err() {
            tracing::warn!("no SubAck for {filter} within {SUBACK_WAIT:?}; will resubscribe on reconnect");
        }
        Ok(rx)
    }
}
