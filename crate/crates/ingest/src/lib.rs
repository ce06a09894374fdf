//! Capture ingestion: simulated IMU devices stream framed recordings over a
//! publish/subscribe bus to a service that assembles, validates and stores
//! them, driven through an HTTP API.

pub mod broker;
pub mod bus;
pub mod device;
pub mod http;
pub mod journal;
pub mod protocol;
pub mod service;
pub mod session;
pub mod source;

pub use bus::{Bus, BusError, FaultyBus, MemoryBus, MqttBus, MqttConfig};
pub use device::{run_device, DeviceConfig, DeviceHandle};
pub use service::{CreateSession, IngestService, PingReply, ServiceConfig, ServiceError, SessionEvent};
pub use session::{Session, SessionFilter, SessionState};
