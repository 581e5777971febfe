//! Discrete-event network simulator.
//!
//! One global virtual clock in milliseconds. Nodes own a [`Forwarder`] and
//! optionally an [`Application`] attached at [`LOCAL_FACE`]. Links carry
//! encoded bytes with a fixed latency, an optional loss probability and one
//! adversary script per direction. Everything random is drawn from streams
//! derived from the simulation seed, so equal seeds give byte-identical logs.

use std::any::Any;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{Map, Value};

use crate::crypto::seed_from_label;
use crate::name::Name;
use crate::packet::{decode_packet, encode_packet, ContentObject, Interest, Packet};

use super::adversary::AdversaryScript;
use super::log::{wire_digest, Dir, EventLog, LogRecord};
use super::{AckGuard, Effect, FaceId, Forwarder, LOCAL_FACE};

pub type NodeId = usize;
pub type LinkId = usize;

/// Endpoint logic running on a node. All interaction with the network goes
/// through [`Ctx`].
pub trait Application: Any {
    fn start(&mut self, _ctx: &mut Ctx<'_>) {}
    fn on_interest(&mut self, ctx: &mut Ctx<'_>, interest: Interest);
    fn on_content(&mut self, ctx: &mut Ctx<'_>, content: ContentObject);
    fn on_timer(&mut self, _ctx: &mut Ctx<'_>, _token: u64) {}
}

enum AppAction {
    Express(Interest),
    Reply(ContentObject),
    Timer { at: u64, token: u64 },
    Evict(Name),
}

/// Handle an application uses to act during a callback.
pub struct Ctx<'a> {
    now: u64,
    node: NodeId,
    node_name: &'a str,
    rng: &'a mut ChaCha20Rng,
    log: &'a mut EventLog,
    actions: Vec<AppAction>,
}

impl Ctx<'_> {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn node_name(&self) -> &str {
        self.node_name
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        self.rng
    }

    pub fn express(&mut self, interest: Interest) {
        self.actions.push(AppAction::Express(interest));
    }

    pub fn reply(&mut self, content: ContentObject) {
        self.actions.push(AppAction::Reply(content));
    }

    pub fn timer(&mut self, delay_ms: u64, token: u64) {
        self.actions.push(AppAction::Timer {
            at: self.now + delay_ms,
            token,
        });
    }

    /// Removes content the application found invalid from this node's
    /// content store so a retransmitted interest reaches the network.
    pub fn evict(&mut self, name: &Name) {
        self.actions.push(AppAction::Evict(name.clone()));
    }

    /// Appends an application record; `event` lands in `detail.event`.
    pub fn event(&mut self, event: &str, name: &Name, fields: impl IntoIterator<Item = (&'static str, Value)>) {
        let mut detail = Map::new();
        detail.insert("event".into(), event.into());
        for (k, v) in fields {
            detail.insert(k.into(), v);
        }
        self.log.push(LogRecord {
            time_ms: self.now,
            node: self.node_name.to_string(),
            face: None,
            dir: Dir::App,
            pkt_type: None,
            name: name.to_uri(),
            digest: None,
            size: None,
            detail,
        });
    }
}

struct Node {
    name: String,
    fwd: Forwarder,
    app: Option<Box<dyn Application>>,
    /// Index = face id; face 0 is the local application face.
    faces: Vec<Option<(LinkId, usize)>>,
    rng: ChaCha20Rng,
}

struct Link {
    ends: [(NodeId, FaceId); 2],
    latency_ms: u64,
    loss: f64,
    scripts: [AdversaryScript; 2],
    rng: ChaCha20Rng,
}

enum EventKind {
    Arrive { node: NodeId, face: FaceId, bytes: Vec<u8> },
    ToApp { node: NodeId, packet: Packet },
    Timer { node: NodeId, token: u64 },
    Start { node: NodeId },
}

struct Scheduled {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed so BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

pub struct Sim {
    seed: u64,
    now: u64,
    seq: u64,
    nodes: Vec<Node>,
    links: Vec<Link>,
    queue: BinaryHeap<Scheduled>,
    log: EventLog,
}

impl std::fmt::Debug for Sim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sim")
            .field("seed", &self.seed)
            .field("now", &self.now)
            .field("nodes", &self.nodes.len())
            .field("links", &self.links.len())
            .field("pending", &self.queue.len())
            .finish()
    }
}

impl Sim {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            now: 0,
            seq: 0,
            nodes: Vec::new(),
            links: Vec::new(),
            queue: BinaryHeap::new(),
            log: EventLog::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn add_node(&mut self, name: &str, cs_capacity: usize) -> NodeId {
        self.nodes.push(Node {
            name: name.to_string(),
            fwd: Forwarder::new(cs_capacity),
            app: None,
            faces: vec![None],
            rng: ChaCha20Rng::seed_from_u64(seed_from_label(self.seed, &format!("node/{name}"))),
        });
        self.nodes.len() - 1
    }

    pub fn set_app(&mut self, node: NodeId, app: Box<dyn Application>) {
        self.nodes[node].app = Some(app);
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.nodes[node].name
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Connects two nodes; returns the link and the new face on each side.
    pub fn connect(&mut self, a: NodeId, b: NodeId, latency_ms: u64, loss: f64) -> (LinkId, FaceId, FaceId) {
        assert!((0.0..=1.0).contains(&loss), "loss probability out of range");
        let id = self.links.len();
        let fa = self.nodes[a].faces.len() as FaceId;
        self.nodes[a].faces.push(Some((id, 0)));
        let fb = self.nodes[b].faces.len() as FaceId;
        self.nodes[b].faces.push(Some((id, 1)));
        self.links.push(Link {
            ends: [(a, fa), (b, fb)],
            latency_ms,
            loss,
            scripts: [AdversaryScript::default(), AdversaryScript::default()],
            rng: ChaCha20Rng::seed_from_u64(seed_from_label(self.seed, &format!("link/{id}"))),
        });
        (id, fa, fb)
    }

    /// Installs the script acting on packets `from` sends over `link`.
    pub fn set_script(&mut self, link: LinkId, from: NodeId, script: AdversaryScript) {
        let l = &mut self.links[link];
        let end = if l.ends[0].0 == from {
            0
        } else {
            assert_eq!(l.ends[1].0, from, "node is not on this link");
            1
        };
        l.scripts[end] = script;
    }

    pub fn script(&self, link: LinkId, from: NodeId) -> &AdversaryScript {
        let l = &self.links[link];
        &l.scripts[usize::from(l.ends[0].0 != from)]
    }

    /// The link joining `a` and `b`, if any.
    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.links.iter().position(|l| {
            let (x, y) = (l.ends[0].0, l.ends[1].0);
            (x, y) == (a, b) || (x, y) == (b, a)
        })
    }

    /// Face on `node` leading to `peer`.
    pub fn face_to(&self, node: NodeId, peer: NodeId) -> Option<FaceId> {
        let link = self.link_between(node, peer)?;
        let l = &self.links[link];
        Some(if l.ends[0].0 == node { l.ends[0].1 } else { l.ends[1].1 })
    }

    pub fn route(&mut self, node: NodeId, prefix: Name, face: FaceId) {
        self.nodes[node].fwd.fib.add(prefix, face);
    }

    pub fn set_guard(&mut self, node: NodeId, guard: Arc<dyn AckGuard>) {
        self.nodes[node].fwd.set_guard(guard);
    }

    pub fn forwarder(&self, node: NodeId) -> &Forwarder {
        &self.nodes[node].fwd
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    pub fn app<T: Application>(&self, node: NodeId) -> Option<&T> {
        let app: &dyn Any = self.nodes[node].app.as_deref()?;
        app.downcast_ref::<T>()
    }

    pub fn app_mut<T: Application>(&mut self, node: NodeId) -> Option<&mut T> {
        let app: &mut dyn Any = self.nodes[node].app.as_deref_mut()?;
        app.downcast_mut::<T>()
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            kind,
        });
    }

    pub fn schedule_timer(&mut self, node: NodeId, at: u64, token: u64) {
        self.schedule(at.max(self.now), EventKind::Timer { node, token });
    }

    /// Queues `start` for every node with an application, at the current time.
    pub fn start(&mut self) {
        for node in 0..self.nodes.len() {
            if self.nodes[node].app.is_some() {
                self.schedule(self.now, EventKind::Start { node });
            }
        }
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn next_event_time(&self) -> Option<u64> {
        self.queue.peek().map(|e| e.time)
    }

    /// Processes one event; false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(ev) = self.queue.pop() else {
            return false;
        };
        self.now = self.now.max(ev.time);
        match ev.kind {
            EventKind::Arrive { node, face, bytes } => self.arrive(node, face, &bytes),
            EventKind::ToApp { node, packet } => self.with_app(node, |app, ctx| match packet {
                Packet::Interest(i) => app.on_interest(ctx, i),
                Packet::Content(c) => app.on_content(ctx, c),
            }),
            EventKind::Timer { node, token } => self.with_app(node, |app, ctx| app.on_timer(ctx, token)),
            EventKind::Start { node } => self.with_app(node, |app, ctx| app.start(ctx)),
        }
        true
    }

    /// Runs every event scheduled at or before `t`, then advances the clock to `t`.
    pub fn run_until(&mut self, t: u64) {
        while self.next_event_time().is_some_and(|et| et <= t) {
            self.step();
        }
        self.now = self.now.max(t);
    }

    /// Runs until the queue drains or the next event lies beyond `limit`.
    pub fn run(&mut self, limit: u64) {
        self.run_until(limit);
    }

    /// Invokes `f` on the node's application as if it were a callback.
    pub fn call_app<R>(&mut self, node: NodeId, f: impl FnOnce(&mut dyn Application, &mut Ctx<'_>) -> R) -> Option<R> {
        let mut out = None;
        self.with_app(node, |app, ctx| out = Some(f(app, ctx)));
        out
    }

    fn with_app(&mut self, node: NodeId, f: impl FnOnce(&mut dyn Application, &mut Ctx<'_>)) {
        let Some(mut app) = self.nodes[node].app.take() else {
            return;
        };
        let actions = {
            let n = &mut self.nodes[node];
            let mut ctx = Ctx {
                now: self.now,
                node,
                node_name: &n.name,
                rng: &mut n.rng,
                log: &mut self.log,
                actions: Vec::new(),
            };
            f(app.as_mut(), &mut ctx);
            ctx.actions
        };
        self.nodes[node].app = Some(app);
        for a in actions {
            match a {
                AppAction::Express(i) => {
                    let effects = self.nodes[node].fwd.on_interest(LOCAL_FACE, &i, self.now);
                    self.apply_effects(node, LOCAL_FACE, &Packet::Interest(i), effects);
                }
                AppAction::Reply(c) => {
                    let effects = self.nodes[node].fwd.on_content(LOCAL_FACE, &c, self.now);
                    self.apply_effects(node, LOCAL_FACE, &Packet::Content(c), effects);
                }
                AppAction::Timer { at, token } => self.schedule(at, EventKind::Timer { node, token }),
                AppAction::Evict(name) => {
                    self.nodes[node].fwd.cs.remove(&name);
                }
            }
        }
    }

    fn packet_record(&self, node: NodeId, face: FaceId, dir: Dir, packet: &Packet, wire: Option<&[u8]>) -> LogRecord {
        LogRecord {
            time_ms: self.now,
            node: self.nodes[node].name.clone(),
            face: Some(face),
            dir,
            pkt_type: Some(packet.kind()),
            name: packet.name().to_uri(),
            digest: wire.map(wire_digest),
            size: wire.map(<[u8]>::len),
            detail: Map::new(),
        }
    }

    fn arrive(&mut self, node: NodeId, face: FaceId, bytes: &[u8]) {
        let packet = match decode_packet(bytes) {
            Ok(p) => p,
            Err(e) => {
                let mut detail = Map::new();
                detail.insert("reason".into(), "malformed".into());
                detail.insert("error".into(), e.to_string().into());
                self.log.push(LogRecord {
                    time_ms: self.now,
                    node: self.nodes[node].name.clone(),
                    face: Some(face),
                    dir: Dir::Drop,
                    pkt_type: None,
                    name: String::new(),
                    digest: Some(wire_digest(bytes)),
                    size: Some(bytes.len()),
                    detail,
                });
                return;
            }
        };
        let rec = self.packet_record(node, face, Dir::Rx, &packet, Some(bytes));
        self.log.push(rec);
        let now = self.now;
        let effects = match &packet {
            Packet::Interest(i) => self.nodes[node].fwd.on_interest(face, i, now),
            Packet::Content(c) => self.nodes[node].fwd.on_content(face, c, now),
        };
        self.apply_effects(node, face, &packet, effects);
    }

    fn apply_effects(&mut self, node: NodeId, in_face: FaceId, cause: &Packet, effects: Vec<Effect>) {
        for e in effects {
            match e {
                Effect::Send { face, packet } if face == LOCAL_FACE => {
                    self.schedule(self.now, EventKind::ToApp { node, packet });
                }
                Effect::Send { face, packet } => self.transmit(node, face, &packet),
                Effect::Drop { reason } => {
                    let mut rec = self.packet_record(node, in_face, Dir::Drop, cause, None);
                    rec.detail.insert("reason".into(), reason.as_str().into());
                    self.log.push(rec);
                }
            }
        }
    }

    fn transmit(&mut self, node: NodeId, face: FaceId, packet: &Packet) {
        let (link_id, end) = self.nodes[node].faces[face as usize].expect("non-local face has a link");
        let wire = encode_packet(packet);
        let rec = self.packet_record(node, face, Dir::Tx, packet, Some(&wire));
        self.log.push(rec);
        let link = &mut self.links[link_id];
        if link.loss > 0.0 && link.rng.gen_bool(link.loss) {
            let mut rec = self.packet_record(node, face, Dir::Drop, packet, Some(&wire));
            rec.detail.insert("reason".into(), "link_loss".into());
            self.log.push(rec);
            return;
        }
        let link = &mut self.links[link_id];
        let latency = link.latency_ms;
        let (far_node, far_face) = link.ends[1 - end];
        let emissions = link.scripts[end].apply(packet, &wire);
        if emissions.is_empty() || emissions.iter().all(|e| e.reverse) {
            let mut rec = self.packet_record(node, face, Dir::Adv, packet, Some(&wire));
            rec.detail.insert("action".into(), "drop".into());
            self.log.push(rec);
        }
        for em in emissions {
            if let Some(label) = em.tampered {
                let shown = decode_packet(&em.bytes).ok();
                let mut rec = LogRecord {
                    time_ms: self.now,
                    node: self.nodes[node].name.clone(),
                    face: Some(face),
                    dir: Dir::Adv,
                    pkt_type: shown.as_ref().map(Packet::kind),
                    name: shown.as_ref().map(|p| p.name().to_uri()).unwrap_or_default(),
                    digest: Some(wire_digest(&em.bytes)),
                    size: Some(em.bytes.len()),
                    detail: Map::new(),
                };
                rec.detail.insert("action".into(), label.into());
                rec.detail.insert("delay_ms".into(), em.delay_ms.into());
                self.log.push(rec);
            }
            let at = self.now + latency + em.delay_ms;
            let (to_node, to_face) = if em.reverse { (node, face) } else { (far_node, far_face) };
            self.schedule(
                at,
                EventKind::Arrive {
                    node: to_node,
                    face: to_face,
                    bytes: em.bytes,
                },
            );
        }
    }
}
