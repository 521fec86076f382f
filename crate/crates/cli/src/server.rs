//! Live service: a tick thread owns the session; HTTP, WebSocket and TCP
//! clients talk to it through channels only.

use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use alphasoft::orchestrator::{RunConfig, TICK_MS};
use alphasoft::service::{LiveSession, OperatorCommand, ServerMessage, StateSnapshot};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;

/// Falling further behind the wall clock than this drops the backlog
/// instead of bursting ticks.
const MAX_LAG: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: IpAddr,
    pub port: u16,
    pub tcp_port: Option<u16>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: 8787,
            tcp_port: None,
        }
    }
}

struct Request {
    cmd: OperatorCommand,
    reply: oneshot::Sender<Result<(), String>>,
}

#[derive(Clone)]
struct Shared {
    snapshots: watch::Receiver<Arc<StateSnapshot>>,
    config: watch::Receiver<Arc<RunConfig>>,
    commands: mpsc::UnboundedSender<Request>,
}

impl Shared {
    async fn dispatch(&self, text: &str) -> ServerMessage {
        let cmd = match serde_json::from_str::<OperatorCommand>(text) {
            Ok(cmd) => cmd,
            Err(e) => {
                let command = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_owned))
                    .unwrap_or_else(|| "unknown".into());
                return ServerMessage::Rejection {
                    command,
                    reason: format!("malformed command: {e}"),
                };
            }
        };
        let command = cmd.kind().to_string();
        let (reply, rx) = oneshot::channel();
        let shutting_down = || ServerMessage::Rejection {
            command: command.clone(),
            reason: "service shutting down".into(),
        };
        if self.commands.send(Request { cmd, reply }).is_err() {
            return shutting_down();
        }
        match rx.await {
            Ok(Ok(())) => ServerMessage::Ack { command },
            Ok(Err(reason)) => ServerMessage::Rejection { command, reason },
            Err(_) => shutting_down(),
        }
    }
}

fn encode(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages serialise")
}

fn tick_loop(
    mut session: LiveSession,
    mut commands: mpsc::UnboundedReceiver<Request>,
    snapshots: watch::Sender<Arc<StateSnapshot>>,
    config: watch::Sender<Arc<RunConfig>>,
    stop: Arc<AtomicBool>,
) {
    let period = Duration::from_millis(TICK_MS);
    let mut next = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        let mut accepted = false;
        while let Ok(req) = commands.try_recv() {
            let r = session.submit(req.cmd);
            accepted |= r.is_ok();
            let _ = req.reply.send(r);
        }
        match session.tick() {
            Ok(t) => {
                if let Some(snap) = t.snapshot {
                    snapshots.send_replace(Arc::new(snap));
                }
            }
            Err(e) => {
                log::error!("run aborted: {e}");
                let _ = session.submit(OperatorCommand::Stop);
            }
        }
        if accepted {
            config.send_replace(Arc::new(session.config().clone()));
        }

        next += period;
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        } else if now - next > MAX_LAG {
            log::warn!("tick loop {:?} behind the wall clock, skipping ahead", now - next);
            next = now;
        }
    }
}

/// A running service. Dropping it without [`Server::shutdown`] leaves the
/// tick thread running until the process exits.
pub struct Server {
    pub http_addr: SocketAddr,
    pub tcp_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
    tick: Option<thread::JoinHandle<()>>,
}

impl Server {
    /// Binds the listeners and starts ticking. Port 0 picks a free port.
    pub async fn start(session: LiveSession, opts: &ServeOptions) -> io::Result<Self> {
        let http = TcpListener::bind((opts.bind, opts.port)).await?;
        let tcp = match opts.tcp_port {
            Some(port) => Some(TcpListener::bind((opts.bind, port)).await?),
            None => None,
        };

        let (snap_tx, snap_rx) = watch::channel(Arc::new(session.snapshot()));
        let (config_tx, config_rx) = watch::channel(Arc::new(session.config().clone()));
        let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
        let (shutdown, _) = watch::channel(false);
        let stop = Arc::new(AtomicBool::new(false));
        let shared = Shared {
            snapshots: snap_rx,
            config: config_rx,
            commands: cmd_tx,
        };

        let tick = {
            let stop = stop.clone();
            thread::Builder::new()
                .name("tick".into())
                .spawn(move || tick_loop(session, cmd_rx, snap_tx, config_tx, stop))?
        };

        let http_addr = http.local_addr()?;
        let app = Router::new()
            .route("/ws", get(ws_upgrade))
            .route("/health", get(health))
            .route("/config", get(config))
            .with_state(shared.clone());
        let mut on_shutdown = shutdown.subscribe();
        let mut tasks = vec![tokio::spawn(async move {
            let graceful = async move {
                let _ = on_shutdown.wait_for(|s| *s).await;
            };
            if let Err(e) = axum::serve(http, app).with_graceful_shutdown(graceful).await {
                log::error!("http server: {e}");
            }
        })];

        let tcp_addr = match tcp {
            Some(listener) => {
                let addr = listener.local_addr()?;
                tasks.push(tokio::spawn(accept_tcp(listener, shared, shutdown.subscribe())));
                Some(addr)
            }
            None => None,
        };

        Ok(Self {
            http_addr,
            tcp_addr,
            stop,
            shutdown,
            tasks,
            tick: Some(tick),
        })
    }

    /// Stops ticking, closes every client, and waits for the listeners.
    pub async fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.tick.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
        let _ = self.shutdown.send(true);
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
    }
}

async fn health(State(s): State<Shared>) -> impl IntoResponse {
    let snap = s.snapshots.borrow().clone();
    Json(serde_json::json!({ "status": "ok", "running": snap.running, "t_s": snap.t_s }))
}

async fn config(State(s): State<Shared>) -> impl IntoResponse {
    let cfg = s.config.borrow().clone();
    Json(cfg.as_ref().clone())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(s): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| ws_client(socket, s))
}

/// One subscriber: latest snapshot out whenever a new one is published,
/// commands in, one reply per command.
async fn ws_client(mut socket: WebSocket, shared: Shared) {
    let mut snaps = shared.snapshots.clone();
    snaps.mark_changed();
    loop {
        tokio::select! {
            changed = snaps.changed() => {
                if changed.is_err() {
                    break;
                }
                let snap = snaps.borrow_and_update().clone();
                let text = encode(&ServerMessage::Snapshot(snap.as_ref().clone()));
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => {
                    for line in text.lines().filter(|l| !l.trim().is_empty()) {
                        let reply = encode(&shared.dispatch(line).await);
                        if socket.send(Message::Text(reply.into())).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    log::debug!("websocket subscriber left");
}

async fn accept_tcp(listener: TcpListener, shared: Shared, mut shutdown: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            conn = listener.accept() => match conn {
                Ok((stream, peer)) => {
                    log::debug!("tcp subscriber {peer}");
                    tokio::spawn(tcp_client(stream, shared.clone()));
                }
                Err(e) => log::warn!("tcp accept: {e}"),
            },
            _ = shutdown.wait_for(|s| *s) => break,
        }
    }
}

/// Same payloads as the WebSocket, one JSON object per line.
async fn tcp_client(stream: TcpStream, shared: Shared) {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let mut snaps = shared.snapshots.clone();
    snaps.mark_changed();
    loop {
        let out = tokio::select! {
            changed = snaps.changed() => {
                if changed.is_err() {
                    break;
                }
                let snap = snaps.borrow_and_update().clone();
                encode(&ServerMessage::Snapshot(snap.as_ref().clone()))
            }
            line = lines.next_line() => match line {
                Ok(Some(line)) if line.trim().is_empty() => continue,
                Ok(Some(line)) => encode(&shared.dispatch(&line).await),
                _ => break,
            },
        };
        if write.write_all(format!("{out}\n").as_bytes()).await.is_err() {
            break;
        }
    }
}
