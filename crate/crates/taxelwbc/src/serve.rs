//! Live session: one simulator thread paced to the wall clock, and a
//! WebSocket endpoint at `/ws` that streams snapshots and forwards commands.
//!
//! The simulator owns all state. Connections talk to it only through a
//! command queue, drained at control-step boundaries, and a broadcast
//! channel of pre-serialized snapshot frames. The broadcast has a small
//! fixed capacity, so a slow client loses frames instead of holding up
//! the control loop.

use std::net::SocketAddr;
use std::sync::mpsc as std_mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use nalgebra::Vector3;
use taxelwbc_core::control::ImpedanceGains;
use taxelwbc_core::sim::{ControllerKind, ForceTarget, Plant, Scenario, SimConfig, SimError, Simulator, StepRecord};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};

use crate::config::TargetSpec;
use crate::logs::JsonRow;
use crate::protocol::{parse_client, ClientMessage, ServerEnvelope, ServerMessage, Snapshot, TaxelInfo};

/// Catch-up cap: at most this many control steps per wall-clock tick.
pub const MAX_STEPS_PER_TICK: usize = 10;
const SNAPSHOT_BUFFER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second.
    pub rate: f64,
    pub snapshot_hz: f64,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions { rate: 1.0, snapshot_hz: 30.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub plant: Plant,
    pub gains: ImpedanceGains,
    pub config: SimConfig,
    pub scenario: Scenario,
}

impl SessionSetup {
    /// An open-ended session with no scripted events.
    pub fn idle(plant: Plant, gains: ImpedanceGains, controller: ControllerKind, seed: u64) -> Self {
        SessionSetup {
            plant,
            gains,
            config: SimConfig { seed, ..SimConfig::default() },
            scenario: Scenario::new("session", controller),
        }
    }
}

struct Command {
    id: Option<u64>,
    message: ClientMessage,
    reply: mpsc::UnboundedSender<String>,
}

/// Shared by all connections.
#[derive(Clone)]
pub struct SessionHandle {
    commands: std_mpsc::Sender<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
    hello: Arc<str>,
}

fn hello(setup: &SessionSetup, opts: &ServeOptions) -> String {
    let fp = setup.plant.model.footprint();
    ServerEnvelope::new(ServerMessage::Hello {
        scenario: setup.scenario.name.clone(),
        controller: setup.scenario.controller.into(),
        dt: setup.config.dt,
        snapshot_hz: opts.snapshot_hz,
        footprint: [fp.length, fp.width],
        taxels: setup
            .plant
            .layout
            .taxels()
            .iter()
            .map(|t| TaxelInfo { index: t.index, x: t.position.x, y: t.position.y, phi: t.phi })
            .collect(),
        max_taxel_force: setup.plant.calibration.max_force,
    })
    .to_json()
}

fn snapshot_frame(record: &StepRecord, controller: ControllerKind) -> Arc<str> {
    ServerEnvelope::new(ServerMessage::Snapshot(Snapshot {
        controller: controller.into(),
        tracking_error: record.tracking_error(),
        row: JsonRow::from(record),
    }))
    .to_json()
    .into()
}

fn error_frame(id: Option<u64>, message: impl Into<String>) -> String {
    ServerEnvelope::new(ServerMessage::Error { id, message: message.into() }).to_json()
}

fn open_ended(setup: &SessionSetup) -> Result<Simulator, SimError> {
    // the run length only bounds scripted events here; the session steps
    // until it is shut down
    let config = SimConfig { duration: setup.config.duration.max(1e9), ..setup.config };
    Simulator::new(setup.plant.clone(), setup.gains, config, setup.scenario.clone())
}

fn apply(sim: &mut Simulator, message: &ClientMessage) -> Result<(), String> {
    match message {
        ClientMessage::ApplyForce { target, magnitude, direction, duration } => {
            let target = match target {
                TargetSpec::Taxel(k) => ForceTarget::Taxel(*k),
                TargetSpec::Named(n) if n == "ee" || n == "end_effector" => ForceTarget::EndEffector,
                TargetSpec::Named(n) => return Err(format!("unknown target `{n}`")),
            };
            if !(duration.is_finite() && *duration > 0.0) {
                return Err("duration must be positive".into());
            }
            let dir = direction.map_or(Vector3::zeros(), Vector3::from);
            sim.apply_force(target, *magnitude, dir, *duration).map_err(|e| e.to_string())
        }
        ClientMessage::SetController { controller } => {
            sim.set_controller((*controller).into());
            Ok(())
        }
        ClientMessage::SetGains { gains } => {
            let next = gains.apply("set_gains", *sim.gains()).map_err(|e| e.to_string())?;
            sim.set_gains(next).map_err(|e| e.to_string())
        }
    }
}

fn run_session(
    setup: SessionSetup,
    opts: ServeOptions,
    commands: std_mpsc::Receiver<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
) {
    let mut sim = match open_ended(&setup) {
        Ok(s) => s,
        Err(e) => {
            let _ = snapshots.send(error_frame(None, e.to_string()).into());
            return;
        }
    };
    let dt = setup.config.dt;
    let wall_per_step = Duration::from_secs_f64(dt / opts.rate);
    let snapshot_period = Duration::from_secs_f64(1.0 / opts.snapshot_hz);
    let start = Instant::now();
    let mut steps_done: u64 = 0;
    let mut next_snapshot = start;
    loop {
        let elapsed = start.elapsed();
        let due = (elapsed.as_secs_f64() * opts.rate / dt) as u64;
        // when far behind, drop the backlog rather than sprint
        let batch = due.saturating_sub(steps_done).min(MAX_STEPS_PER_TICK as u64);
        if due > steps_done + batch {
            steps_done = due - batch;
        }
        for _ in 0..batch {
            loop {
                match commands.try_recv() {
                    Ok(cmd) => {
                        let reply = match apply(&mut sim, &cmd.message) {
                            Ok(()) => ServerEnvelope::new(ServerMessage::Ack {
                                id: cmd.id,
                                command: cmd.message.kind().into(),
                                t: sim.time(),
                            })
                            .to_json(),
                            Err(e) => error_frame(cmd.id, e),
                        };
                        let _ = cmd.reply.send(reply);
                    }
                    Err(std_mpsc::TryRecvError::Empty) => break,
                    Err(std_mpsc::TryRecvError::Disconnected) => return,
                }
            }
            if let Err(e) = sim.step() {
                let _ = snapshots.send(error_frame(None, format!("{e}; session reset")).into());
                match open_ended(&setup) {
                    Ok(s) => sim = s,
                    Err(_) => return,
                }
            }
            steps_done += 1;
        }
        let now = Instant::now();
        if now >= next_snapshot {
            // no receivers is fine
            let _ = snapshots.send(snapshot_frame(sim.last_record(), sim.controller()));
            next_snapshot += snapshot_period;
            if next_snapshot < now {
                next_snapshot = now + snapshot_period;
            }
        }
        let next_step = start + wall_per_step.mul_f64((steps_done + 1) as f64);
        let wake = next_step.min(next_snapshot);
        let now = Instant::now();
        if wake > now {
            thread::sleep(wake - now);
        }
    }
}

/// Starts the simulator thread. It stops once every `SessionHandle` clone
/// is dropped.
pub fn spawn_session(
    setup: SessionSetup,
    opts: ServeOptions,
) -> Result<(SessionHandle, thread::JoinHandle<()>), SimError> {
    // surface config errors before any socket is opened
    open_ended(&setup)?;
    let (cmd_tx, cmd_rx) = std_mpsc::channel();
    let (snap_tx, _) = broadcast::channel(SNAPSHOT_BUFFER);
    let handle = SessionHandle { commands: cmd_tx, snapshots: snap_tx.clone(), hello: hello(&setup, &opts).into() };
    let join = thread::Builder::new()
        .name("taxelwbc-sim".into())
        .spawn(move || run_session(setup, opts, cmd_rx, snap_tx))
        .expect("spawn simulator thread");
    Ok((handle, join))
}

pub fn router(handle: SessionHandle) -> Router {
    Router::new().route("/ws", get(ws_upgrade)).route("/health", get(|| async { "ok" })).with_state(handle)
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(handle): State<SessionHandle>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, handle))
}

async fn connection(socket: WebSocket, handle: SessionHandle) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = handle.snapshots.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();

    if sink.send(Message::Text(handle.hello.as_ref().into())).await.is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        loop {
            let frame: String = tokio::select! {
                r = reply_rx.recv() => match r {
                    Some(f) => f,
                    None => break,
                },
                s = snapshots.recv() => match s {
                    Ok(f) => f.as_ref().to_string(),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(frame.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(_) => {
                let _ = reply_tx.send(error_frame(None, "binary frames are not supported"));
                continue;
            }
            Message::Close(_) => break,
            _ => continue,
        };
        match parse_client(&text) {
            Ok(env) => {
                let cmd = Command { id: env.id, message: env.message, reply: reply_tx.clone() };
                if handle.commands.send(cmd).is_err() {
                    let _ = reply_tx.send(error_frame(env.id, "simulator stopped"));
                }
            }
            Err((id, message)) => {
                let _ = reply_tx.send(error_frame(id, message));
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}

/// Serves `/ws` on `listener` until the future is dropped.
pub async fn serve_on(listener: TcpListener, setup: SessionSetup, opts: ServeOptions) -> std::io::Result<()> {
    let (handle, _join) = spawn_session(setup, opts).map_err(|e| std::io::Error::other(e.to_string()))?;
    axum::serve(listener, router(handle)).await
}

pub async fn serve(addr: SocketAddr, setup: SessionSetup, opts: ServeOptions) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    eprintln!("listening on ws://{}/ws", listener.local_addr()?);
    serve_on(listener, setup, opts).await
}
