//! Long-running processes: broker, device and ingestion service.

use crate::error::{CliError, CliResult};
use clap::Args;
use gaitlab_ingest::broker::EmbeddedBroker;
use gaitlab_ingest::protocol::DEFAULT_FRAME_SIZE;
use gaitlab_ingest::source::{CsvReplaySource, RecordingSource, SynthSource};
use gaitlab_ingest::{run_device, Bus, BusError, DeviceConfig, IngestService, MqttBus, MqttConfig, ServiceConfig};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

#[derive(Debug, Args)]
pub struct BrokerArgs {
    #[arg(long, default_value = "127.0.0.1:1883")]
    pub listen: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    /// Broker address as host:port.
    #[arg(long, env = "GAITLAB_BROKER", default_value = "127.0.0.1:1883")]
    pub broker: String,
    /// Connection attempts before giving up at startup.
    #[arg(long, default_value_t = 8)]
    pub connect_attempts: u32,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    #[arg(long, default_value = "imu-1")]
    pub id: String,
    #[command(flatten)]
    pub connect: ConnectArgs,
    #[arg(long, default_value_t = DEFAULT_FRAME_SIZE)]
    pub frame_size: usize,
    /// Send frames as fast as possible instead of at the 100 Hz sampling pace.
    #[arg(long)]
    pub burst: bool,
    /// Replay CSV recordings from this dataset root instead of synthesizing.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub connect: ConnectArgs,
    #[arg(long, env = "GAITLAB_DATA_ROOT", default_value = "data")]
    pub data_root: PathBuf,
    #[arg(long, env = "GAITLAB_HTTP_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
    /// Seconds a capture may take before it fails with its missing frames.
    #[arg(long, default_value_t = 15.0)]
    pub deadline: f64,
    /// Start a broker inside this process on the --broker address.
    #[arg(long)]
    pub embedded_broker: bool,
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Env(format!("cannot start runtime: {e}")))
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler");
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
    tracing::info!("shutting down");
}

async fn connect(args: &ConnectArgs, client_id: String) -> CliResult<Arc<MqttBus>> {
    let mut cfg = MqttConfig::new(args.broker.clone(), client_id);
    cfg.connect_attempts = args.connect_attempts.max(1);
    MqttBus::connect(cfg).await.map_err(|e| match e {
        BusError::InvalidAddress(_) => CliError::Usage(e.to_string()),
        other => CliError::Env(other.to_string()),
    })
}

pub fn broker(a: BrokerArgs) -> CliResult {
    let b = EmbeddedBroker::start(a.listen).map_err(|e| CliError::Env(e.to_string()))?;
    eprintln!("broker listening on {}", b.addr());
    runtime()?.block_on(shutdown_signal());
    Ok(())
}

pub fn device(a: DeviceArgs) -> CliResult {
    let cfg = DeviceConfig {
        device_id: a.id.clone(),
        frame_size: a.frame_size,
        realtime: !a.burst,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let source: Arc<dyn RecordingSource> = match &a.replay {
        Some(root) => Arc::new(CsvReplaySource::open(root).map_err(|e| CliError::Data(e.to_string()))?),
        None => Arc::new(SynthSource::default()),
    };
    runtime()?.block_on(async move {
        let bus = connect(&a.connect, format!("device-{}", a.id)).await?;
        let dev = run_device(cfg, bus, source).await.map_err(|e| CliError::Env(e.to_string()))?;
        shutdown_signal().await;
        dev.stop();
        Ok(())
    })
}

pub fn serve(a: ServeArgs) -> CliResult {
    if !(a.deadline > 0.0 && a.deadline.is_finite()) {
        return Err(CliError::Usage("--deadline must be positive".into()));
    }
    std::fs::create_dir_all(&a.data_root).map_err(|e| CliError::Env(format!("{}: {e}", a.data_root.display())))?;
    if a.embedded_broker {
        let addr: SocketAddr = a
            .connect
            .broker
            .parse()
            .map_err(|_| CliError::Usage(format!("--embedded-broker needs an ip:port broker address, got {}", a.connect.broker)))?;
        let b = EmbeddedBroker::start(addr).map_err(|e| CliError::Env(e.to_string()))?;
        tracing::info!("embedded broker on {}", b.addr());
    }
    runtime()?.block_on(async move {
        let bus: Arc<dyn Bus> = connect(&a.connect, format!("ingest-{}", std::process::id())).await?;
        let mut cfg = ServiceConfig::new(&a.data_root);
        cfg.assembly_deadline = Duration::from_secs_f64(a.deadline);
        let svc = IngestService::start(bus, cfg).await.map_err(|e| CliError::Env(e.to_string()))?;
        let addr = SocketAddr::new(a.bind, a.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Env(format!("cannot bind {addr}: {e}")))?;
        eprintln!("ingest API on http://{}", listener.local_addr()?);
        // Journal appends are synced as they happen, so stopping between
        // requests leaves it consistent.
        gaitlab_ingest::http::serve_until(listener, svc, shutdown_signal()).await?;
        Ok(())
    })
}
