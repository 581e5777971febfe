//! Live gateway: one running scenario, driven in real time by operator
//! clients over WebSocket or newline-delimited JSON.
//!
//! [`GatewayCore`] owns the simulation and is clock-agnostic, so tests can
//! step it in sim time. [`spawn`] wraps it in a thread that follows the
//! wall clock (1 sim ms per wall ms) and fans messages out to sessions.
//! The gateway holds only the `panel` app identity; acks reach clients
//! only after the app's protocol-level verification.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tungstenite::Message;

use lumen_core::forwarder::sim::NodeId;

use crate::actors::{AppActor, Notice, NoticeKind, Scheduled, T_CMD};
use crate::config::{ConfigError, Scenario};
use crate::runner::{build, World};

pub const SCHEMA_VERSION: u64 = 1;
pub const PANEL_APP: &str = "panel";
/// Fade commands per fixture per second.
pub const FADE_RATE_HZ: u64 = 44;
/// Smallest spacing between fade steps to one fixture, `ceil(1000 / 44)`.
pub const MIN_STEP_GAP_MS: u64 = 1000_u64.div_ceil(FADE_RATE_HZ);

const OPS: &[&str] = &["on", "off", "status", "level", "intensity", "rgb", "config"];

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario has no app named \"panel\"")]
    NoPanel,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMsg {
    Hello {
        #[serde(default)]
        token: Option<String>,
    },
    Cmd {
        fixture: String,
        op: String,
        #[serde(default)]
        args: Vec<Value>,
    },
    Fade {
        fixture: String,
        target: u8,
        duration_ms: u64,
    },
    State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureView {
    pub name: String,
    pub on: bool,
    pub intensity: u8,
    /// `RRGGBB`.
    pub rgb: String,
    /// Sim time of the last verified ack from this fixture.
    pub last_ack_ms: Option<u64>,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ServerMsg {
    State {
        fixtures: Vec<FixtureView>,
    },
    Ack {
        fixture: String,
        cmd: String,
        /// `acked`, `failed`, or the fixture's reject reason.
        status: String,
        latency_ms: Option<u64>,
    },
    Err {
        msg: String,
    },
}

#[derive(Serialize)]
struct Versioned<'a> {
    v: u64,
    #[serde(flatten)]
    msg: &'a ServerMsg,
}

impl ServerMsg {
    pub fn err(msg: impl Into<String>) -> Self {
        ServerMsg::Err { msg: msg.into() }
    }

    /// One JSON line with the schema version.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Versioned {
            v: SCHEMA_VERSION,
            msg: self,
        })
        .expect("server messages serialize")
    }
}

/// Parses one client line, checking the schema version.
pub fn parse_client(line: &str) -> Result<ClientMsg, String> {
    let mut v: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = v.as_object_mut().ok_or("message must be a JSON object")?;
    match obj.remove("v").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(format!("unsupported schema version {other}")),
        None => return Err("missing schema version \"v\"".into()),
    }
    serde_json::from_value(v).map_err(|e| format!("bad message: {e}"))
}

/// Builds the command component string for `op` and its arguments.
pub fn command_string(op: &str, args: &[Value]) -> Result<String, String> {
    if !OPS.contains(&op) {
        return Err(format!("unknown op {op:?}"));
    }
    let mut cmd = op.to_string();
    for a in args {
        let part = match a {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            other => return Err(format!("argument {other} must be a string or number")),
        };
        if part.is_empty() || part.contains('/') {
            return Err(format!("bad argument {part:?}"));
        }
        cmd.push('/');
        cmd += &part;
    }
    Ok(cmd)
}

#[derive(Debug, Clone)]
struct Step {
    fixture: String,
    cmd: String,
    fade: bool,
}

/// The scenario plus the panel's pending steps, stepped explicitly.
pub struct GatewayCore {
    world: World,
    panel: NodeId,
    fixtures: Vec<String>,
    steps: BTreeMap<(u64, u64), Step>,
    step_seq: u64,
    /// When the last fade step went out, per fixture.
    last_fade_sent: BTreeMap<String, u64>,
    last_ack: BTreeMap<String, u64>,
    last_view: Vec<FixtureView>,
}

impl GatewayCore {
    pub fn new(s: &Scenario) -> Result<Self, GatewayError> {
        if s.app(PANEL_APP).is_none() {
            return Err(GatewayError::NoPanel);
        }
        let mut world = build(s)?;
        let panel = world.node(PANEL_APP);
        let fixtures: Vec<String> = world.app(PANEL_APP).fixture_labels().map(str::to_string).collect();
        world.app_mut(PANEL_APP).notices = Some(Vec::new());
        world.sim.start();
        let mut core = Self {
            world,
            panel,
            fixtures,
            steps: BTreeMap::new(),
            step_seq: 0,
            last_fade_sent: BTreeMap::new(),
            last_ack: BTreeMap::new(),
            last_view: Vec::new(),
        };
        core.last_view = core.views();
        Ok(core)
    }

    pub fn now(&self) -> u64 {
        self.world.sim.now()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn fixtures(&self) -> &[String] {
        &self.fixtures
    }

    pub fn views(&self) -> Vec<FixtureView> {
        self.fixtures
            .iter()
            .map(|f| {
                let l = self.world.fixture(f).light;
                FixtureView {
                    name: f.clone(),
                    on: l.on,
                    intensity: l.intensity,
                    rgb: hex::encode_upper(l.rgb),
                    last_ack_ms: self.last_ack.get(f).copied(),
                }
            })
            .collect()
    }

    pub fn state(&self) -> ServerMsg {
        ServerMsg::State { fixtures: self.views() }
    }

    fn push_step(&mut self, at: u64, step: Step) {
        self.step_seq += 1;
        self.steps.insert((at, self.step_seq), step);
    }

    /// Accepts a client message. Returns replies meant for that client
    /// only; protocol outcomes arrive later from [`Self::advance`].
    pub fn handle(&mut self, msg: ClientMsg) -> Vec<ServerMsg> {
        let now = self.now();
        match msg {
            ClientMsg::Hello { .. } => Vec::new(),
            ClientMsg::State => vec![self.state()],
            ClientMsg::Cmd { fixture, op, args } => {
                if !self.fixtures.contains(&fixture) {
                    return vec![ServerMsg::err(format!("unknown fixture {fixture:?}"))];
                }
                match command_string(&op, &args) {
                    Ok(cmd) => {
                        self.push_step(now, Step { fixture, cmd, fade: false });
                        Vec::new()
                    }
                    Err(e) => vec![ServerMsg::err(e)],
                }
            }
            ClientMsg::Fade {
                fixture,
                target,
                duration_ms,
            } => {
                if !self.fixtures.contains(&fixture) {
                    return vec![ServerMsg::err(format!("unknown fixture {fixture:?}"))];
                }
                // A new fade supersedes the unsent part of the previous one.
                self.steps.retain(|_, s| !(s.fade && s.fixture == fixture));
                let from = i64::from(self.world.fixture(&fixture).light.intensity);
                let diff = i64::from(target) - from;
                let by_rate = (duration_ms * FADE_RATE_HZ / 1000).max(1);
                let n = by_rate.min(diff.unsigned_abs().max(1));
                let mut slot = self.last_fade_sent.get(&fixture).map_or(0, |t| t + MIN_STEP_GAP_MS);
                for k in 1..=n {
                    let at = (now + (k - 1) * duration_ms / n).max(slot);
                    slot = at + MIN_STEP_GAP_MS;
                    let level = from + diff * k as i64 / n as i64;
                    self.push_step(
                        at,
                        Step {
                            fixture: fixture.clone(),
                            cmd: format!("level/{level}"),
                            fade: true,
                        },
                    );
                }
                Vec::new()
            }
        }
    }

    fn inject(&mut self, step: Step) {
        if step.fade {
            self.last_fade_sent.insert(step.fixture.clone(), self.world.sim.now());
        }
        let app = self.world.sim.app_mut::<AppActor>(self.panel).expect("panel actor");
        let idx = app.schedule.len() as u64;
        app.schedule.push(Scheduled {
            fixture: step.fixture,
            cmd: step.cmd.into_bytes(),
        });
        let now = self.world.sim.now();
        self.world.sim.schedule_timer(self.panel, now, T_CMD | idx);
    }

    /// Runs the simulation to `to_ms`, releasing due steps on the way.
    /// Returns acks and, if anything changed, a fresh state snapshot.
    pub fn advance(&mut self, to_ms: u64) -> Vec<ServerMsg> {
        while let Some(entry) = self.steps.first_entry() {
            let (at, _) = *entry.key();
            if at > to_ms {
                break;
            }
            let step = entry.remove();
            self.world.sim.run_until(at.max(self.now()));
            self.inject(step);
        }
        self.world.sim.run_until(to_ms.max(self.now()));

        let notices = self
            .world
            .sim
            .app_mut::<AppActor>(self.panel)
            .and_then(|a| a.notices.as_mut())
            .map(std::mem::take)
            .unwrap_or_default();
        let now = self.now();
        let mut out: Vec<ServerMsg> = notices.into_iter().map(|n| self.ack_msg(n, now)).collect();
        let views = self.views();
        if views != self.last_view {
            self.last_view = views.clone();
            out.push(ServerMsg::State { fixtures: views });
        }
        out
    }

    fn ack_msg(&mut self, n: Notice, now: u64) -> ServerMsg {
        let (status, latency_ms) = match n.kind {
            NoticeKind::Acked { latency_ms } => {
                self.last_ack.insert(n.fixture.clone(), now);
                ("acked".to_string(), Some(latency_ms))
            }
            NoticeKind::Rejected { reason, latency_ms } => (reason.as_str().to_string(), Some(latency_ms)),
            NoticeKind::Failed => ("failed".to_string(), None),
            NoticeKind::Error(e) => return ServerMsg::err(format!("{} {}: {e}", n.fixture, n.cmd)),
        };
        ServerMsg::Ack {
            fixture: n.fixture,
            cmd: n.cmd,
            status,
            latency_ms,
        }
    }
}

// ---------------------------------------------------------------------------
// Real-time service

#[derive(Debug, Clone, Default)]
pub struct GatewayOptions {
    /// When set, clients must send `hello` with this token first.
    pub token: Option<String>,
}

enum ToSim {
    Join(u64, Sender<String>),
    Leave(u64),
    Client(u64, ClientMsg),
}

/// A running gateway. Dropping it does not stop it; call [`Self::shutdown`].
pub struct GatewayHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    threads: Vec<JoinHandle<()>>,
}

impl GatewayHandle {
    /// Blocks until the service stops.
    pub fn join(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in self.streams.lock().expect("not poisoned").iter() {
            let _ = s.shutdown(Shutdown::Both);
        }
        self.join();
    }
}

/// Binds `addr` and serves until the process exits.
pub fn serve(s: &Scenario, addr: impl ToSocketAddrs, opts: GatewayOptions) -> Result<(), GatewayError> {
    let listener = TcpListener::bind(addr)?;
    spawn(s, listener, opts)?.join();
    Ok(())
}

/// Starts the simulation thread and the accept loop on `listener`.
pub fn spawn(s: &Scenario, listener: TcpListener, opts: GatewayOptions) -> Result<GatewayHandle, GatewayError> {
    // The simulation is not Send, so it is built on its own thread.
    let (ready_tx, ready_rx) = mpsc::channel();
    let (to_sim, from_clients) = mpsc::channel();
    let sim_stop = Arc::new(AtomicBool::new(false));
    let stop = sim_stop.clone();
    let scenario = s.clone();
    let sim = std::thread::Builder::new().name("gateway-sim".into()).spawn(move || {
        match GatewayCore::new(&scenario) {
            Ok(core) => {
                let _ = ready_tx.send(Ok(()));
                sim_loop(core, from_clients, sim_stop);
            }
            Err(e) => {
                let _ = ready_tx.send(Err(e));
            }
        }
    })?;
    if let Err(e) = ready_rx.recv().expect("sim thread reports readiness") {
        let _ = sim.join();
        return Err(e);
    }
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let streams = Arc::new(Mutex::new(Vec::new()));

    let accept_stop = stop.clone();
    let accept_streams = streams.clone();
    let accept = std::thread::Builder::new().name("gateway-accept".into()).spawn(move || {
        let mut next_id = 0;
        while !accept_stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    next_id += 1;
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    if let Ok(c) = stream.try_clone() {
                        accept_streams.lock().expect("not poisoned").push(c);
                    }
                    let (to_sim, opts, id) = (to_sim.clone(), opts.clone(), next_id);
                    let _ = std::thread::Builder::new()
                        .name(format!("gateway-session-{id}"))
                        .spawn(move || session(id, stream, to_sim, opts));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
                Err(_) => std::thread::sleep(Duration::from_millis(5)),
            }
        }
    })?;

    Ok(GatewayHandle {
        addr,
        stop,
        streams,
        threads: vec![accept, sim],
    })
}

fn sim_loop(mut core: GatewayCore, rx: Receiver<ToSim>, stop: Arc<AtomicBool>) {
    let start = Instant::now();
    let mut clients: BTreeMap<u64, Sender<String>> = BTreeMap::new();
    let broadcast = |clients: &mut BTreeMap<u64, Sender<String>>, msgs: &[ServerMsg]| {
        for m in msgs {
            let line = m.to_json();
            clients.retain(|_, tx| tx.send(line.clone()).is_ok());
        }
    };
    while !stop.load(Ordering::SeqCst) {
        match rx.recv_timeout(Duration::from_millis(2)) {
            Ok(ToSim::Join(id, tx)) => {
                if tx.send(core.state().to_json()).is_ok() {
                    clients.insert(id, tx);
                }
            }
            Ok(ToSim::Leave(id)) => {
                clients.remove(&id);
            }
            Ok(ToSim::Client(id, msg)) => {
                for reply in core.handle(msg) {
                    if let Some(tx) = clients.get(&id) {
                        let _ = tx.send(reply.to_json());
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        let out = core.advance(start.elapsed().as_millis() as u64);
        broadcast(&mut clients, &out);
    }
}

/// Per-session gatekeeping shared by both transports.
struct Gate {
    id: u64,
    to_sim: Sender<ToSim>,
    token: Option<String>,
    authed: bool,
    joined: Option<Receiver<String>>,
}

impl Gate {
    fn new(id: u64, to_sim: Sender<ToSim>, token: Option<String>) -> Self {
        let mut g = Self {
            id,
            to_sim,
            authed: token.is_none(),
            token,
            joined: None,
        };
        if g.authed {
            g.join();
        }
        g
    }

    fn join(&mut self) {
        let (tx, rx) = mpsc::channel();
        let _ = self.to_sim.send(ToSim::Join(self.id, tx));
        self.joined = Some(rx);
    }

    /// Handles one inbound line; returns an error line for the client.
    fn line(&mut self, line: &str) -> Option<String> {
        if line.trim().is_empty() {
            return None;
        }
        let msg = match parse_client(line) {
            Ok(m) => m,
            Err(e) => return Some(ServerMsg::err(e).to_json()),
        };
        if !self.authed {
            return match msg {
                ClientMsg::Hello { token } if token == self.token => {
                    self.authed = true;
                    self.join();
                    None
                }
                _ => Some(ServerMsg::err("unauthorized: send hello with the gateway token").to_json()),
            };
        }
        let _ = self.to_sim.send(ToSim::Client(self.id, msg));
        None
    }
}

impl Drop for Gate {
    fn drop(&mut self) {
        let _ = self.to_sim.send(ToSim::Leave(self.id));
    }
}

fn session(id: u64, stream: TcpStream, to_sim: Sender<ToSim>, opts: GatewayOptions) {
    // WebSocket clients speak first; NDJSON clients may wait for state.
    let mut head = [0u8; 4];
    let _ = stream.set_read_timeout(Some(Duration::from_millis(250)));
    let is_ws = matches!(stream.peek(&mut head), Ok(4) if &head == b"GET ");
    let _ = stream.set_read_timeout(None);
    let gate = Gate::new(id, to_sim, opts.token);
    let _ = if is_ws { ws_session(stream, gate) } else { ndjson_session(stream, gate) };
}

fn ndjson_session(stream: TcpStream, mut gate: Gate) -> SessionResult {
    let writer = Arc::new(Mutex::new(stream.try_clone()?));
    let mut forward: Option<JoinHandle<()>> = None;
    let mut reader = BufReader::new(stream);
    let mut buf = String::new();
    let write = |w: &Arc<Mutex<TcpStream>>, line: &str| -> std::io::Result<()> {
        let mut s = w.lock().expect("not poisoned");
        s.write_all(line.as_bytes())?;
        s.write_all(b"\n")
    };
    loop {
        if forward.is_none() {
            if let Some(rx) = gate.joined.take() {
                let w = writer.clone();
                forward = Some(std::thread::spawn(move || {
                    for line in rx {
                        if write(&w, &line).is_err() {
                            break;
                        }
                    }
                }));
            }
        }
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        if let Some(err) = gate.line(&buf) {
            write(&writer, &err)?;
        }
    }
    drop(gate);
    if let Some(f) = forward {
        let _ = f.join();
    }
    Ok(())
}

type SessionResult = Result<(), Box<dyn std::error::Error>>;

fn ws_session(stream: TcpStream, mut gate: Gate) -> SessionResult {
    stream.set_read_timeout(Some(Duration::from_millis(10)))?;
    let mut ws = tungstenite::accept(stream)?;
    let mut outbox: VecDeque<String> = VecDeque::new();
    loop {
        match ws.read() {
            Ok(Message::Text(t)) => {
                if let Some(err) = gate.line(&t) {
                    outbox.push_back(err);
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(e.into()),
        }
        if let Some(rx) = &gate.joined {
            loop {
                match rx.try_recv() {
                    Ok(line) => outbox.push_back(line),
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return Ok(()),
                }
            }
        }
        while let Some(line) = outbox.pop_front() {
            ws.send(Message::Text(line))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn version_is_required() {
        assert!(parse_client(r#"{"t":"state"}"#).unwrap_err().contains("version"));
        assert!(parse_client(r#"{"v":2,"t":"state"}"#).unwrap_err().contains("unsupported"));
        assert_eq!(parse_client(r#"{"v":1,"t":"state"}"#).unwrap(), ClientMsg::State);
        assert!(parse_client(r#"{"v":1,"t":"cmd","fixture":"f1"}"#).is_err());
        assert!(parse_client("not json").unwrap_err().contains("malformed"));
    }

    #[test]
    fn command_strings() {
        assert_eq!(command_string("on", &[]).unwrap(), "on");
        assert_eq!(command_string("level", &[json!(128)]).unwrap(), "level/128");
        assert_eq!(command_string("rgb", &[json!("FF8800")]).unwrap(), "rgb/FF8800");
        assert!(command_string("reboot", &[]).is_err());
        assert!(command_string("level", &[json!("1/2")]).is_err());
        assert!(command_string("level", &[json!(null)]).is_err());
    }

    #[test]
    fn server_messages_carry_version() {
        let line = ServerMsg::err("x").to_json();
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v, json!({"v": 1, "t": "err", "msg": "x"}));
    }

    #[test]
    fn step_gap_bounds_rate() {
        assert_eq!(MIN_STEP_GAP_MS, 23);
        const { assert!(1000 / MIN_STEP_GAP_MS < FADE_RATE_HZ) };
    }
}
