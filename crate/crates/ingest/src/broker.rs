//! Embedded MQTT broker for local runs and tests.

use rumqttd::{Broker, Config, ConnectionSettings, RouterConfig, ServerSettings};
use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Frames of 50 rows serialize to about 6 KiB; leave ample headroom for
/// larger frame sizes.
const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("broker at {0} did not start accepting connections")]
    NotListening(SocketAddr),
}

/// Handle to a broker running on background threads for the rest of the
/// process lifetime.
#[derive(Debug, Clone)]
pub struct EmbeddedBroker {
    addr: SocketAddr,
}

impl EmbeddedBroker {
    /// Starts a broker on `127.0.0.1` with an OS-assigned port.
    pub fn start_local() -> Result<Self, BrokerError> {
        let probe_addr: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
        let probe = TcpListener::bind(probe_addr).map_err(|source| BrokerError::Bind { addr: probe_addr, source })?;
        let addr = probe.local_addr().map_err(|source| BrokerError::Bind { addr: probe_addr, source })?;
        drop(probe);
        Self::start(addr)
    }

    pub fn start(addr: SocketAddr) -> Result<Self, BrokerError> {
        if addr.port() != 0 && TcpStream::connect_timeout(&addr, Duration::from_millis(200)).is_ok() {
            return Err(BrokerError::Bind {
                addr,
                source: std::io::Error::new(std::io::ErrorKind::AddrInUse, "address already in use"),
            });
        }
        let cfg = config(addr);
        std::thread::Builder::new()
            .name("mqtt-broker".into())
            .spawn(move || {
                if let Err(e) = Broker::new(cfg).start() {
                    tracing::error!("embedded broker stopped: {e}");
                }
            })
            .map_err(|source| BrokerError::Bind { addr, source })?;

        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            if TcpStream::connect_timeout(&addr, Duration::from_millis(200)).is_ok() {
                return Ok(Self { addr });
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        Err(BrokerError::NotListening(addr))
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `host:port` form accepted by [`crate::bus::MqttConfig`].
    pub fn addr_string(&self) -> String {
        self.addr.to_string()
    }
}

fn config(addr: SocketAddr) -> Config {
    let server = ServerSettings {
        name: "v4".into(),
        listen: addr,
        tls: None,
        next_connection_delay_ms: 1,
        connections: ConnectionSettings {
            connection_timeout_ms: 60_000,
            max_payload_size: MAX_PAYLOAD,
            max_inflight_count: 200,
            auth: None,
            external_auth: None,
            dynamic_filters: true,
        },
    };
    Config {
        id: 0,
        router: RouterConfig {
            max_connections: 1000,
            max_outgoing_packet_count: 200,
            max_segment_size: 16 << 20,
            max_segment_count: 10,
            custom_segment: None,
            initialized_filters: None,
            shared_subscriptions_strategy: Default::default(),
        },
        v4: Some(HashMap::from([("1".to_string(), server)])),
        ..Default::default()
    }
}
