//! Endpoint applications that run on simulator nodes: lighting fixtures,
//! controlling apps and the authorization manager's publication point.
//!
//! Every protocol-relevant step is written to the event log as an `app`
//! record; [`crate::metrics`] folds those records back into counts.

use std::collections::{BTreeMap, VecDeque};

use serde_json::Value;

use lumen_core::ack_auth::AckBody;
use lumen_core::ack_auth::ack::{ack_signed, STATUS_EXECUTED};
use lumen_core::control::handoff::{handoff_name, open_handoff, ownership_reply, parse_handoff, HANDOFF_COMPONENT};
use lumen_core::control::{AckEvent, AppSession, FixtureState, IssueError, Outcome, RejectReason, TimeoutAction};
use lumen_core::crypto::verify_content;
use lumen_core::forwarder::sim::{Application, Ctx};
use lumen_core::packet::DEFAULT_LIFETIME_MS;
use lumen_core::trust::policy::Decision;
use lumen_core::trust::{evaluate_policy, parse_attributes, KeyRecord, Signer};
use lumen_core::{ContentObject, Interest, Name, PublicKey};

use crate::config::{PollingCfg, Protocol};
use crate::light::LightState;

/// Timer tokens carry their kind in the top byte.
pub const T_CMD: u64 = 1 << 56;
pub const T_ACK: u64 = 2 << 56;
pub const T_POLL: u64 = 3 << 56;
const KIND_MASK: u64 = 0xff << 56;

pub const NOTIFY_COMPONENT: &[u8] = b"notify";
pub const FETCH_COMPONENT: &[u8] = b"cmd";
pub const POLL_COMPONENT: &[u8] = b"poll";

fn uri(n: &Name) -> Value {
    n.to_uri().into()
}

fn text(b: &[u8]) -> Value {
    String::from_utf8_lossy(b).into_owned().into()
}

/// `prefix/tag/[count]/app.../last`, the layout shared by handoff and
/// baseline notifications.
pub fn tagged_name(prefix: &Name, tag: &[u8], app: &Name, last: &[u8]) -> Option<Name> {
    let mut n = prefix.child(tag).ok()?;
    n.push(vec![app.len() as u8]).ok()?;
    n = n.join(app).ok()?;
    n.push(last.to_vec()).ok()?;
    Some(n)
}

pub fn parse_tagged(name: &Name, prefix: &Name, tag: &[u8]) -> Option<(Name, Vec<u8>)> {
    if !prefix.is_prefix_of(name) || name.get(prefix.len())? != tag {
        return None;
    }
    let f = prefix.len();
    let count = usize::from(*name.get(f + 1)?.first()?);
    if count == 0 || name.len() != f + 2 + count + 1 {
        return None;
    }
    Some((name.slice(f + 2, f + 2 + count), name.last()?.to_vec()))
}

/// What an app reports to an embedding service (the gateway).
#[derive(Debug, Clone, PartialEq)]
pub struct Notice {
    pub cid: u64,
    pub fixture: String,
    pub cmd: String,
    pub kind: NoticeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoticeKind {
    Acked { latency_ms: u64 },
    Rejected { reason: RejectReason, latency_ms: u64 },
    Failed,
    Error(String),
}

// ---------------------------------------------------------------------------
// Authorization manager

/// Serves key records and the signed ACL by exact name.
#[derive(Debug, Default)]
pub struct AuthorityActor {
    pub objects: BTreeMap<Name, ContentObject>,
}

impl Application for AuthorityActor {
    fn on_interest(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        match self.objects.get(&interest.name) {
            Some(obj) => ctx.reply(obj.clone()),
            None => ctx.event("unknown_object", &interest.name, []),
        }
    }

    fn on_content(&mut self, _ctx: &mut Ctx<'_>, _content: ContentObject) {}
}

// ---------------------------------------------------------------------------
// Fixture

struct Fetch {
    notify: Name,
    app: Name,
}

pub struct FixtureActor {
    pub label: String,
    pub state: FixtureState,
    pub light: LightState,
    pub lights: usize,
    /// Bumped on every light change.
    pub version: u64,
    epoch_ms: u64,
    skew_ms: i64,
    acl_name: Option<Name>,
    awaiting_key: BTreeMap<Name, Vec<Interest>>,
    handoffs: BTreeMap<Name, (Name, Vec<u8>)>,
    fetches: BTreeMap<Name, Fetch>,
    /// Keys for the baseline protocol, installed from verified records.
    baseline_keys: BTreeMap<Name, PublicKey>,
    polling: Option<(PollingCfg, Vec<Name>)>,
    poll_round: u32,
}

impl FixtureActor {
    pub fn new(label: &str, state: FixtureState, lights: usize, epoch_ms: u64, skew_ms: i64) -> Self {
        Self {
            label: label.to_string(),
            state,
            light: LightState::default(),
            lights,
            version: 0,
            epoch_ms,
            skew_ms,
            acl_name: None,
            awaiting_key: BTreeMap::new(),
            handoffs: BTreeMap::new(),
            fetches: BTreeMap::new(),
            baseline_keys: BTreeMap::new(),
            polling: None,
            poll_round: 0,
        }
    }

    /// Fetch this ACL from the authorization manager at start.
    pub fn fetch_acl(&mut self, name: Name) {
        self.acl_name = Some(name);
    }

    /// Installs a key for baseline-protocol apps. The record must chain to
    /// the fixture's trust root.
    pub fn install_baseline_key(&mut self, record: &KeyRecord) -> bool {
        let ok = record.verify_under(&self.state.trusted_root.pk);
        if ok {
            self.baseline_keys.insert(record.namespace.clone(), record.pk.clone());
        }
        ok
    }

    pub fn poll(&mut self, cfg: PollingCfg, apps: Vec<Name>) {
        self.polling = Some((cfg, apps));
    }

    /// The fixture's own, uncorrected clock.
    pub fn local_ms(&self, now: u64) -> u64 {
        (self.epoch_ms as i64 + now as i64 + self.skew_ms).max(0) as u64
    }

    fn apply(&mut self, cmd: &[u8]) -> bool {
        let changed = self.light.apply(cmd);
        if changed {
            self.version += 1;
        }
        changed
    }

    fn command(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        let local = self.local_ms(ctx.now());
        match self.state.handle_command(&interest, local) {
            Outcome::Executed { cmd, app, seq, ack } => {
                let changed = self.apply(&cmd);
                let preimage = match AckBody::decode(&ack.payload) {
                    Ok(AckBody::ChainAnswer { preimage, .. }) => Value::from(hex::encode(preimage)),
                    _ => Value::Null,
                };
                ctx.event(
                    "exec",
                    &interest.name,
                    [
                        ("app", uri(&app)),
                        ("seq", seq.into()),
                        ("cmd", text(&cmd)),
                        ("preimage", preimage),
                        ("changed", changed.into()),
                    ],
                );
                ctx.reply(ack);
            }
            Outcome::Resent { ack } => {
                ctx.event("resent", &interest.name, []);
                ctx.reply(ack);
            }
            Outcome::Rejected { reason, ack } => {
                ctx.event("reject", &interest.name, [("reason", reason.as_str().into())]);
                ctx.reply(ack);
            }
            Outcome::NeedKey { key_name } => {
                ctx.event("need_key", &interest.name, [("key", uri(&key_name))]);
                let waiting = self.awaiting_key.entry(key_name.clone()).or_default();
                if waiting.is_empty() {
                    let i = Interest::new(key_name, DEFAULT_LIFETIME_MS, ctx.rng());
                    ctx.express(i);
                }
                waiting.push(interest);
            }
        }
    }

    fn handoff(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        let Some(app) = parse_handoff(&interest.name, &self.state.name_fix) else {
            ctx.event("reject", &interest.name, [("reason", "malformed_handoff".into())]);
            return;
        };
        let mut nonce = [0u8; 16];
        rand::RngCore::fill_bytes(ctx.rng(), &mut nonce);
        let Ok(challenge) = app.child(nonce.to_vec()) else {
            return;
        };
        self.handoffs.insert(challenge.clone(), (interest.name, nonce.to_vec()));
        let i = Interest::new(challenge, DEFAULT_LIFETIME_MS, ctx.rng());
        ctx.express(i);
    }

    fn notify(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        let Some((app, id)) = parse_tagged(&interest.name, &self.state.name_fix, NOTIFY_COMPONENT) else {
            return;
        };
        let Some(fetch) = app.child(FETCH_COMPONENT).and_then(|n| n.child(id)).ok() else {
            return;
        };
        self.fetches.insert(
            fetch.clone(),
            Fetch {
                notify: interest.name,
                app,
            },
        );
        let i = Interest::new(fetch, DEFAULT_LIFETIME_MS, ctx.rng());
        ctx.express(i);
    }

    /// Baseline: the fetched command arrived signed by the app.
    fn fetched(&mut self, ctx: &mut Ctx<'_>, f: Fetch, content: ContentObject) {
        let now = self.state.clock(self.local_ms(ctx.now()));
        let cmd = content.payload.clone();
        let verdict = match self.baseline_keys.get(&f.app) {
            None => Err(RejectReason::BadAuthenticator),
            Some(pk) => {
                self.state.stats.sig_verifies += 1;
                if !verify_content(pk, &content).unwrap_or(false) {
                    Err(RejectReason::BadAuthenticator)
                } else {
                    match self.state.cfg.registry.classify(&cmd) {
                        None => Err(RejectReason::Malformed),
                        Some(class) => {
                            let decision = parse_attributes(&f.app).map(|attrs| {
                                evaluate_policy(
                                    &attrs,
                                    self.state.acl(),
                                    &f.app,
                                    &cmd,
                                    class,
                                    self.state.cfg.domain.as_deref(),
                                    (now / 1000) as i64,
                                )
                            });
                            match decision {
                                Ok(Decision::Allow) => Ok(()),
                                _ => Err(RejectReason::PolicyDenied),
                            }
                        }
                    }
                }
            }
        };
        match verdict {
            Ok(()) => {
                self.state.stats.accepted += 1;
                self.state.stats.signatures += 1;
                let changed = self.apply(&cmd);
                ctx.event(
                    "exec",
                    &f.notify,
                    [
                        ("app", uri(&f.app)),
                        ("cmd", text(&cmd)),
                        ("preimage", Value::Null),
                        ("changed", changed.into()),
                    ],
                );
                let body = AckBody::Signed {
                    status: STATUS_EXECUTED,
                    sync: None,
                };
                let ack = ack_signed(self.state.signer(), f.notify, &body, now);
                ctx.reply(ack);
            }
            Err(reason) => {
                *self.state.stats.rejected.entry(reason).or_default() += 1;
                ctx.event("reject", &f.notify, [("reason", reason.as_str().into())]);
                let ack = self.state.reject_ack(f.notify, reason, 0, now);
                ctx.reply(ack);
            }
        }
    }
}

impl Application for FixtureActor {
    fn start(&mut self, ctx: &mut Ctx<'_>) {
        if let Some(acl) = self.acl_name.clone() {
            let i = Interest::new(acl, DEFAULT_LIFETIME_MS, ctx.rng());
            ctx.express(i);
        }
        if let Some((cfg, _)) = &self.polling {
            ctx.timer(cfg.start_ms, T_POLL);
        }
    }

    fn on_interest(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        let fix = &self.state.name_fix;
        match interest.name.get(fix.len()) {
            Some(c) if c == HANDOFF_COMPONENT => self.handoff(ctx, interest),
            Some(c) if c == NOTIFY_COMPONENT => self.notify(ctx, interest),
            _ => self.command(ctx, interest),
        }
    }

    fn on_content(&mut self, ctx: &mut Ctx<'_>, content: ContentObject) {
        let local = self.local_ms(ctx.now());
        if let Some((request, nonce)) = self.handoffs.remove(&content.name) {
            let app = parse_handoff(&request, &self.state.name_fix).map(|a| uri(&a)).unwrap_or(Value::Null);
            match self.state.complete_handoff(&request, &nonce, &content, local, ctx.rng()) {
                Ok(r) => {
                    let status = match r.result {
                        Ok(()) => "ok".to_string(),
                        Err(e) => e.to_string(),
                    };
                    ctx.event("handoff", &request, [("app", app), ("status", status.into())]);
                    ctx.reply(r.content);
                }
                Err(e) => ctx.event("handoff", &request, [("app", app), ("status", e.to_string().into())]),
            }
            return;
        }
        if let Some(waiting) = self.awaiting_key.remove(&content.name) {
            let installed = self.state.install_app_key(std::slice::from_ref(&content));
            ctx.event("key", &content.name, [("installed", installed.is_some().into())]);
            if installed.is_some() {
                for i in waiting {
                    self.command(ctx, i);
                }
            }
            return;
        }
        if self.acl_name.as_ref() == Some(&content.name) {
            let ok = self.state.install_acl(content.clone());
            ctx.event("acl", &content.name, [("installed", ok.into())]);
            return;
        }
        if let Some(f) = self.fetches.remove(&content.name) {
            self.fetched(ctx, f, content);
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) {
        if token & KIND_MASK != T_POLL {
            return;
        }
        let Some((cfg, apps)) = &self.polling else {
            return;
        };
        if self.poll_round >= cfg.periods {
            return;
        }
        let round = self.poll_round.to_be_bytes().to_vec();
        for app in apps.clone() {
            let name = app
                .child(POLL_COMPONENT)
                .and_then(|n| n.child(self.label.as_bytes()))
                .and_then(|n| n.child(round.clone()));
            if let Ok(name) = name {
                let i = Interest::new(name, cfg.period_ms.min(u64::from(u32::MAX)) as u32, ctx.rng());
                ctx.express(i);
            }
        }
        self.poll_round += 1;
        let period = cfg.period_ms;
        if self.poll_round < cfg.periods {
            ctx.timer(period, T_POLL);
        }
    }
}

// ---------------------------------------------------------------------------
// App

struct BaselinePending {
    cid: u64,
    fixture: Name,
    cmd: Vec<u8>,
    issued_at: u64,
}

/// A command scheduled by the scenario.
#[derive(Debug, Clone)]
pub struct Scheduled {
    pub fixture: String,
    pub cmd: Vec<u8>,
}

pub struct AppActor {
    pub label: String,
    pub protocol: Protocol,
    name_app: Name,
    keypair: lumen_core::KeyPair,
    record: KeyRecord,
    signer: Signer,
    /// One session per fixture: `k_App` differs per fixture.
    sessions: BTreeMap<Name, AppSession>,
    fixtures: BTreeMap<String, (Name, PublicKey)>,
    labels: BTreeMap<Name, String>,
    handoff: bool,
    handoffs: BTreeMap<Name, Name>,
    pub schedule: Vec<Scheduled>,
    timers: BTreeMap<u64, Name>,
    next_timer: u64,
    cids: BTreeMap<Name, u64>,
    queued: BTreeMap<Name, VecDeque<(u64, Vec<u8>)>>,
    baseline: BTreeMap<Name, BaselinePending>,
    baseline_cmds: BTreeMap<Name, Vec<u8>>,
    next_cid: u64,
    epoch_ms: u64,
    lag_ms: u64,
    /// Collected for an embedding service when enabled.
    pub notices: Option<Vec<Notice>>,
    baseline_signatures: u64,
    baseline_verifies: u64,
}

impl AppActor {
    pub fn new(label: &str, protocol: Protocol, keypair: lumen_core::KeyPair, record: KeyRecord, epoch_ms: u64) -> Self {
        let signer = Signer::owner(keypair.clone(), &record).expect("record matches keypair");
        Self {
            label: label.to_string(),
            protocol,
            name_app: record.namespace.clone(),
            keypair,
            record,
            signer,
            sessions: BTreeMap::new(),
            fixtures: BTreeMap::new(),
            labels: BTreeMap::new(),
            handoff: true,
            handoffs: BTreeMap::new(),
            schedule: Vec::new(),
            timers: BTreeMap::new(),
            next_timer: 0,
            cids: BTreeMap::new(),
            queued: BTreeMap::new(),
            baseline: BTreeMap::new(),
            baseline_cmds: BTreeMap::new(),
            next_cid: 0,
            epoch_ms,
            lag_ms: 0,
            notices: None,
            baseline_signatures: 0,
            baseline_verifies: 0,
        }
    }

    pub fn name_app(&self) -> &Name {
        &self.name_app
    }

    pub fn record(&self) -> &KeyRecord {
        &self.record
    }

    pub fn set_handoff(&mut self, on: bool) {
        self.handoff = on;
    }

    pub fn set_clock_lag(&mut self, lag_ms: u64) {
        self.lag_ms = lag_ms;
    }

    /// Registers a fixture. `session` is `None` for the baseline protocol.
    pub fn add_fixture(&mut self, label: &str, name_fix: Name, pk: PublicKey, session: Option<AppSession>) {
        self.fixtures.insert(label.to_string(), (name_fix.clone(), pk));
        self.labels.insert(name_fix.clone(), label.to_string());
        if let Some(s) = session {
            self.sessions.insert(name_fix, s);
        }
    }

    pub fn session(&self, name_fix: &Name) -> Option<&AppSession> {
        self.sessions.get(name_fix)
    }

    /// Fixture labels this app was configured to talk to.
    pub fn fixture_labels(&self) -> impl Iterator<Item = &str> {
        self.fixtures.keys().map(String::as_str)
    }

    pub fn has_key_for(&self, fixture: &str) -> bool {
        self.fixtures
            .get(fixture)
            .and_then(|(n, _)| self.sessions.get(n))
            .is_some_and(|s| s.creds.k_app.is_some())
    }

    pub fn stats(&self) -> lumen_core::control::app::AppStats {
        let mut t = lumen_core::control::app::AppStats::default();
        for s in self.sessions.values() {
            t.signatures += s.stats.signatures;
            t.macs += s.stats.macs;
            t.sig_verifies += s.stats.sig_verifies;
            t.mac_verifies += s.stats.mac_verifies;
            t.hashes += s.stats.hashes;
        }
        t.signatures += self.baseline_signatures;
        t.sig_verifies += self.baseline_verifies;
        t
    }

    fn wall(&self, now: u64) -> u64 {
        (self.epoch_ms + now).saturating_sub(self.lag_ms)
    }

    fn notice(&mut self, cid: u64, name_fix: &Name, cmd: &[u8], kind: NoticeKind) {
        if let Some(n) = &mut self.notices {
            n.push(Notice {
                cid,
                fixture: self.labels.get(name_fix).cloned().unwrap_or_default(),
                cmd: String::from_utf8_lossy(cmd).into_owned(),
                kind,
            });
        }
    }

    fn arm(&mut self, ctx: &mut Ctx<'_>, delay: u64, name: Name) {
        let id = self.next_timer;
        self.next_timer += 1;
        self.timers.insert(id, name);
        ctx.timer(delay, T_ACK | id);
    }

    /// Issues `cmd` to the fixture with scenario label `fixture`. Returns
    /// the command id used in log records.
    pub fn submit(&mut self, ctx: &mut Ctx<'_>, fixture: &str, cmd: &[u8]) -> Result<u64, String> {
        let Some((name_fix, _)) = self.fixtures.get(fixture).cloned() else {
            return Err(format!("unknown fixture {fixture:?}"));
        };
        let cid = self.next_cid;
        self.next_cid += 1;
        if self.protocol == Protocol::Baseline {
            self.submit_baseline(ctx, cid, &name_fix, cmd)?;
        } else {
            self.issue(ctx, cid, &name_fix, cmd.to_vec());
        }
        Ok(cid)
    }

    fn submit_baseline(&mut self, ctx: &mut Ctx<'_>, cid: u64, name_fix: &Name, cmd: &[u8]) -> Result<(), String> {
        let id = cid.to_be_bytes();
        let notify = tagged_name(name_fix, NOTIFY_COMPONENT, &self.name_app, &id).ok_or("name too long")?;
        let fetch = self
            .name_app
            .child(FETCH_COMPONENT)
            .and_then(|n| n.child(id.to_vec()))
            .map_err(|e| e.to_string())?;
        ctx.event(
            "issue",
            &notify,
            [
                ("cid", cid.into()),
                ("fixture", self.labels[name_fix].clone().into()),
                ("cmd", text(cmd)),
                ("mode", "baseline".into()),
                ("fetch", uri(&fetch)),
            ],
        );
        self.baseline_cmds.insert(fetch, cmd.to_vec());
        self.baseline.insert(
            notify.clone(),
            BaselinePending {
                cid,
                fixture: name_fix.clone(),
                cmd: cmd.to_vec(),
                issued_at: ctx.now(),
            },
        );
        let i = Interest::new(notify, DEFAULT_LIFETIME_MS, ctx.rng());
        ctx.express(i);
        Ok(())
    }

    fn issue(&mut self, ctx: &mut Ctx<'_>, cid: u64, name_fix: &Name, cmd: Vec<u8>) {
        let wall = self.wall(ctx.now());
        let fixture = self.labels[name_fix].clone();
        let Some(session) = self.sessions.get_mut(name_fix) else {
            return;
        };
        match session.issue(name_fix, &cmd, wall, ctx.rng()) {
            Ok((interest, next_check)) => {
                let cfg = session.link_config(name_fix).expect("registered");
                let (mode, ack) = (format!("{:?}", cfg.mode).to_lowercase(), cfg.ack.as_str());
                let seq = session.get_pending(&interest.name).map(|p| p.seq).unwrap_or_default();
                ctx.event(
                    "issue",
                    &interest.name,
                    [
                        ("cid", cid.into()),
                        ("fixture", fixture.into()),
                        ("cmd", text(&cmd)),
                        ("seq", seq.into()),
                        ("mode", mode.into()),
                        ("ack", ack.into()),
                    ],
                );
                self.cids.insert(interest.name.clone(), cid);
                self.arm(ctx, next_check.saturating_sub(wall), interest.name.clone());
                ctx.express(interest);
            }
            Err(IssueError::Busy) => {
                ctx.event("queued", name_fix, [("cid", cid.into()), ("fixture", fixture.into())]);
                self.queued.entry(name_fix.clone()).or_default().push_back((cid, cmd));
            }
            Err(e) => {
                ctx.event(
                    "error",
                    name_fix,
                    [("cid", cid.into()), ("fixture", fixture.into()), ("error", e.to_string().into())],
                );
                self.notice(cid, name_fix, &cmd, NoticeKind::Error(e.to_string()));
            }
        }
    }

    fn drain_queue(&mut self, ctx: &mut Ctx<'_>, name_fix: &Name) {
        let idle = self.sessions.get(name_fix).is_some_and(|s| s.pending_for(name_fix) == 0);
        if !idle {
            return;
        }
        if let Some((cid, cmd)) = self.queued.get_mut(name_fix).and_then(VecDeque::pop_front) {
            self.issue(ctx, cid, name_fix, cmd);
        }
    }

    fn fixture_of(&self, name: &Name) -> Option<Name> {
        self.sessions.keys().find(|f| f.is_prefix_of(name)).cloned()
    }

    fn baseline_ack(&mut self, ctx: &mut Ctx<'_>, content: ContentObject) {
        let Some(p) = self.baseline.remove(&content.name) else {
            return;
        };
        let pk = self.fixtures[&self.labels[&p.fixture]].1.clone();
        self.baseline_verifies += 1;
        if !verify_content(&pk, &content).unwrap_or(false) {
            ctx.evict(&content.name);
            ctx.event("ignored", &content.name, [("reason", "unverified".into())]);
            self.baseline.insert(content.name.clone(), p);
            return;
        }
        let latency_ms = ctx.now() - p.issued_at;
        let fixture = self.labels[&p.fixture].clone();
        match AckBody::decode(&content.payload) {
            Ok(AckBody::Reject { reason, .. }) => {
                let reason = RejectReason::from_code(reason).unwrap_or(RejectReason::Malformed);
                ctx.event(
                    "rejected",
                    &content.name,
                    [
                        ("cid", p.cid.into()),
                        ("fixture", fixture.into()),
                        ("reason", reason.as_str().into()),
                        ("latency_ms", latency_ms.into()),
                    ],
                );
                self.notice(p.cid, &p.fixture, &p.cmd, NoticeKind::Rejected { reason, latency_ms });
            }
            _ => {
                ctx.event(
                    "ack",
                    &content.name,
                    [
                        ("cid", p.cid.into()),
                        ("fixture", fixture.into()),
                        ("cmd", text(&p.cmd)),
                        ("latency_ms", latency_ms.into()),
                        ("preimage", Value::Null),
                    ],
                );
                self.notice(p.cid, &p.fixture, &p.cmd, NoticeKind::Acked { latency_ms });
            }
        }
    }
}

impl Application for AppActor {
    fn start(&mut self, ctx: &mut Ctx<'_>) {
        if !self.handoff || self.protocol == Protocol::Baseline {
            return;
        }
        for name_fix in self.sessions.keys().cloned().collect::<Vec<_>>() {
            let mut nonce = [0u8; 8];
            rand::RngCore::fill_bytes(ctx.rng(), &mut nonce);
            if let Ok(req) = handoff_name(&name_fix, &self.name_app, &nonce) {
                self.handoffs.insert(req.clone(), name_fix);
                let i = Interest::new(req, DEFAULT_LIFETIME_MS, ctx.rng());
                ctx.express(i);
            }
        }
    }

    fn on_interest(&mut self, ctx: &mut Ctx<'_>, interest: Interest) {
        let base = self.name_app.len();
        let wall = self.wall(ctx.now());
        match interest.name.get(base) {
            Some(c) if c == POLL_COMPONENT => {
                self.baseline_signatures += 1;
                ctx.reply(self.signer.sign(interest.name, Vec::new(), wall));
            }
            Some(c) if c == FETCH_COMPONENT && interest.name.len() == base + 2 => {
                if let Some(cmd) = self.baseline_cmds.remove(&interest.name) {
                    self.baseline_signatures += 1;
                    ctx.reply(self.signer.sign(interest.name, cmd, wall));
                }
            }
            Some(_) if interest.name.len() == base + 1 => {
                // Ownership challenge from a fixture.
                self.baseline_signatures += 1;
                let reply = ownership_reply(&self.signer, std::slice::from_ref(&self.record), interest.name, wall);
                ctx.reply(reply);
            }
            _ => {}
        }
    }

    fn on_content(&mut self, ctx: &mut Ctx<'_>, content: ContentObject) {
        if let Some(name_fix) = self.handoffs.remove(&content.name) {
            let pk = self.fixtures[&self.labels[&name_fix]].1.clone();
            let status = match open_handoff(&self.keypair, &pk, &content) {
                Ok(k) => {
                    if let Some(s) = self.sessions.get_mut(&name_fix) {
                        s.set_k_app(k);
                    }
                    "ok".to_string()
                }
                Err(e) => e.to_string(),
            };
            ctx.event(
                "handoff",
                &content.name,
                [("fixture", self.labels[&name_fix].clone().into()), ("status", status.into())],
            );
            return;
        }
        if self.baseline.contains_key(&content.name) {
            self.baseline_ack(ctx, content);
            return;
        }
        let Some(name_fix) = self.fixture_of(&content.name) else {
            return;
        };
        let wall = self.wall(ctx.now());
        let session = self.sessions.get_mut(&name_fix).expect("found");
        let event = session.on_content(&content, wall);
        let fixture = self.labels[&name_fix].clone();
        match event {
            AckEvent::Acked {
                cmd,
                seq,
                latency_ms,
                outcome,
                preimage,
                interest,
                ..
            } => {
                let cid = self.cids.remove(&interest).unwrap_or(u64::MAX);
                ctx.event(
                    "ack",
                    &interest,
                    [
                        ("cid", cid.into()),
                        ("fixture", fixture.into()),
                        ("cmd", text(&cmd)),
                        ("seq", seq.into()),
                        ("latency_ms", latency_ms.into()),
                        ("outcome", outcome.as_str().into()),
                        ("preimage", preimage.map(hex::encode).map(Value::from).unwrap_or(Value::Null)),
                    ],
                );
                self.notice(cid, &name_fix, &cmd, NoticeKind::Acked { latency_ms });
                self.drain_queue(ctx, &name_fix);
            }
            AckEvent::Rejected {
                cmd,
                reason,
                detail,
                latency_ms,
                interest,
                ..
            } => {
                let cid = self.cids.remove(&interest).unwrap_or(u64::MAX);
                ctx.event(
                    "rejected",
                    &interest,
                    [
                        ("cid", cid.into()),
                        ("fixture", fixture.into()),
                        ("reason", reason.as_str().into()),
                        ("detail", detail.into()),
                        ("latency_ms", latency_ms.into()),
                    ],
                );
                self.notice(cid, &name_fix, &cmd, NoticeKind::Rejected { reason, latency_ms });
                self.drain_queue(ctx, &name_fix);
            }
            AckEvent::Ignored { reason } => {
                ctx.evict(&content.name);
                ctx.event("ignored", &content.name, [("reason", reason.into())]);
            }
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) {
        let id = token & !KIND_MASK;
        match token & KIND_MASK {
            T_CMD => {
                let Some(s) = self.schedule.get(id as usize).cloned() else {
                    return;
                };
                if let Err(e) = self.submit(ctx, &s.fixture, &s.cmd) {
                    ctx.event("error", &self.name_app.clone(), [("error", e.into())]);
                }
            }
            T_ACK => {
                let Some(name) = self.timers.remove(&id) else {
                    return;
                };
                let Some(name_fix) = self.fixture_of(&name) else {
                    return;
                };
                let wall = self.wall(ctx.now());
                let session = self.sessions.get_mut(&name_fix).expect("found");
                let timeout = session.link_config(&name_fix).map(|c| c.retransmit.timeout_ms).unwrap_or(200);
                let action = session.on_timeout(&name, wall, ctx.rng());
                let cid = self.cids.get(&name).copied().unwrap_or(u64::MAX);
                match action {
                    TimeoutAction::Resend(i) => {
                        ctx.event("retx", &name, [("cid", cid.into())]);
                        self.arm(ctx, timeout, name);
                        ctx.express(i);
                    }
                    TimeoutAction::Fallback { old, interest } => {
                        self.cids.remove(&old);
                        self.cids.insert(interest.name.clone(), cid);
                        ctx.event("fallback", &interest.name, [("cid", cid.into()), ("old", uri(&old))]);
                        self.arm(ctx, timeout, interest.name.clone());
                        ctx.express(interest);
                    }
                    TimeoutAction::Failed { cmd, interest, .. } => {
                        self.cids.remove(&interest);
                        ctx.event("fail", &interest, [("cid", cid.into()), ("fixture", self.labels[&name_fix].clone().into())]);
                        self.notice(cid, &name_fix, &cmd, NoticeKind::Failed);
                        self.drain_queue(ctx, &name_fix);
                    }
                    TimeoutAction::Nothing => {}
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_round_trip() {
        let fix = Name::parse("/l/fixture/f1").unwrap();
        let app = Name::parse("/l/domain/d/appname/a").unwrap();
        let n = tagged_name(&fix, NOTIFY_COMPONENT, &app, b"\x00\x07").unwrap();
        assert_eq!(parse_tagged(&n, &fix, NOTIFY_COMPONENT), Some((app.clone(), b"\x00\x07".to_vec())));
        assert_eq!(parse_tagged(&n, &fix, b"other"), None);
        assert_eq!(parse_tagged(&n.prefix(n.len() - 1), &fix, NOTIFY_COMPONENT), None);
    }
}
