use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use dronelight_core::forest::{load_model, RandomForestModel};
use dronelight_core::Label;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::{JoinHandle, JoinSet};
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use crate::config::{ImageMode, ServiceConfig};
use crate::flight::{paint_letter, telemetry_stride};
use crate::session::{Effect, Session};
use crate::wire::{parse_client, ClientMessage, ErrorCode, ServerMessage};
use crate::ServiceError;

struct Shared {
    config: ServiceConfig,
    model: Arc<RandomForestModel>,
    next_session: AtomicU64,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

enum Outgoing {
    Message(ServerMessage),
    Close,
}

type Outbox = mpsc::UnboundedSender<Outgoing>;

impl Server {
    /// Validates the config, loads the model, and binds the listening socket.
    pub async fn bind(config: ServiceConfig) -> Result<Server, ServiceError> {
        config.validate()?;
        if !config.model_path.is_file() {
            return Err(ServiceError::ModelMissing(config.model_path.clone()));
        }
        let model = Arc::new(load_model(&config.model_path)?);
        let listener = TcpListener::bind((config.host.as_str(), config.port)).await.map_err(|e| {
            if e.kind() == io::ErrorKind::AddrInUse {
                ServiceError::PortInUse { port: config.port }
            } else {
                ServiceError::Io(e)
            }
        })?;
        Ok(Server { listener, shared: Arc::new(Shared { config, model, next_session: AtomicU64::new(1) }) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then lets running flights finish
    /// without pacing, tells clients, and closes every connection.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<(), ServiceError> {
        let (stop_tx, stop_rx) = watch::channel(false);
        let mut connections = JoinSet::new();
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let n = self.shared.next_session.fetch_add(1, Ordering::Relaxed);
                        let id = format!("s{n}");
                        info!(%peer, session = %id, "connected");
                        connections.spawn(serve_connection(stream, id, self.shared.clone(), stop_rx.clone()));
                    }
                    Err(e) => warn!("accept failed: {e}"),
                },
                Some(_) = connections.join_next(), if !connections.is_empty() => {}
            }
        }
        info!("shutting down");
        let _ = stop_tx.send(true);
        while connections.join_next().await.is_some() {}
        Ok(())
    }
}

/// Binds per `config` and serves until Ctrl-C.
pub async fn run_server(config: ServiceConfig) -> Result<(), ServiceError> {
    let server = Server::bind(config).await?;
    info!("listening on ws://{}", server.local_addr()?);
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn stopped(stop: &mut watch::Receiver<bool>) {
    let _ = stop.wait_for(|&s| s).await;
}

async fn serve_connection(stream: TcpStream, id: String, shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!(session = %id, "handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Outgoing>();
    let writer = tokio::spawn(async move {
        while let Some(out) = rx.recv().await {
            let sent = match out {
                Outgoing::Message(m) => sink.send(Message::text(m.to_json())).await,
                Outgoing::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            };
            if sent.is_err() {
                break;
            }
        }
    });

    let mut session = Session::new(id.clone(), shared.config.session_settings(), shared.model.clone());
    let (done_tx, mut done_rx) = mpsc::unbounded_channel::<()>();
    let mut flight: Option<JoinHandle<()>> = None;
    let mut flights = 0u64;
    let mut shutting_down = false;

    loop {
        let effects = tokio::select! {
            incoming = source.next() => match incoming {
                Some(Ok(Message::Text(text))) => match parse_client(text.as_str()) {
                    Ok(ClientMessage::Imu(m)) => session.on_imu(m.into()),
                    Ok(ClientMessage::Config(c)) => session.on_config(&c),
                    Err(e) => vec![Effect::Send(e.into())],
                },
                Some(Ok(Message::Binary(_))) => {
                    vec![Effect::Send(ServerMessage::error(ErrorCode::BadFrame, "binary frames are not accepted"))]
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
            Some(()) = done_rx.recv() => {
                flight = None;
                session.finish_flight()
            }
            _ = stopped(&mut stop), if !shutting_down => {
                shutting_down = true;
                break;
            }
        };
        for effect in effects {
            match effect {
                Effect::Send(m) => {
                    let _ = tx.send(Outgoing::Message(m));
                }
                Effect::StartFlight(label) => {
                    flights += 1;
                    let name = format!("{id}-{flights}-{label}");
                    let job = run_flight(label, name, session.settings.time_scale, shared.clone(), tx.clone(), stop.clone());
                    let done = done_tx.clone();
                    flight = Some(tokio::spawn(async move {
                        job.await;
                        let _ = done.send(());
                    }));
                }
            }
        }
    }

    if shutting_down {
        if let Some(job) = flight.take() {
            let _ = job.await;
            for effect in session.finish_flight() {
                if let Effect::Send(m) = effect {
                    let _ = tx.send(Outgoing::Message(m));
                }
            }
        }
        let _ = tx.send(Outgoing::Message(ServerMessage::error(ErrorCode::Shutdown, "server is shutting down")));
        let _ = tx.send(Outgoing::Close);
    } else if let Some(job) = flight.take() {
        job.abort();
    }
    drop(tx);
    let _ = writer.await;
    info!(session = %id, "closed");
}

/// Paints off the async threads, then paces telemetry by `time_scale`
/// unless the server is stopping.
async fn run_flight(
    label: Label,
    name: String,
    time_scale: f64,
    shared: Arc<Shared>,
    tx: Outbox,
    mut stop: watch::Receiver<bool>,
) {
    let config = shared.config.clone();
    let job = tokio::task::spawn_blocking(move || -> Result<_, String> {
        let painting = paint_letter(label, &config.flight_settings()).map_err(|e| e.to_string())?;
        let ppm = painting.image.to_ppm();
        let done = match config.image_mode {
            ImageMode::Inline => ServerMessage::PaintDone {
                encoding: "ppm-base64".into(),
                data: base64::engine::general_purpose::STANDARD.encode(ppm.as_bytes()),
            },
            ImageMode::Path => {
                std::fs::create_dir_all(&config.image_dir).map_err(|e| e.to_string())?;
                let path = config.image_dir.join(format!("{name}.ppm"));
                std::fs::write(&path, ppm).map_err(|e| e.to_string())?;
                ServerMessage::PaintDone { encoding: "ppm-path".into(), data: path.display().to_string() }
            }
        };
        Ok((painting.trace, done))
    });
    let (trace, done) = match job.await {
        Ok(Ok(result)) => result,
        Ok(Err(detail)) => {
            let _ = tx.send(Outgoing::Message(ServerMessage::error(ErrorCode::FlightFailed, detail)));
            return;
        }
        Err(e) => {
            let _ = tx.send(Outgoing::Message(ServerMessage::error(ErrorCode::FlightFailed, e.to_string())));
            return;
        }
    };
    let stride = telemetry_stride(trace.dt);
    let delay = Duration::from_secs_f64(stride as f64 * trace.dt / time_scale);
    for state in trace.states.iter().step_by(stride) {
        if tx.send(Outgoing::Message(state.into())).is_err() {
            return;
        }
        if !*stop.borrow() {
            tokio::select! {
                _ = tokio::time::sleep(delay) => {}
                _ = stopped(&mut stop) => {}
            }
        }
    }
    let _ = tx.send(Outgoing::Message(done));
}
