//! Builds a simulation from a [`Scenario`] and runs it.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::json;

use lumen_core::ack_auth::{HashAckGuard, RetransmitPolicy};
use lumen_core::control::app::AppStats;
use lumen_core::control::fixture::FixtureStats;
use lumen_core::control::{
    authorize_app, bootstrap, AckScheme, AppCredentials, AppSession, AuthMode, BootstrapOffer, Device, FixtureConfig,
    FixtureState, Grant, LinkConfig,
};
use lumen_core::crypto::seed_from_label;
use lumen_core::forwarder::log::EventLog;
use lumen_core::forwarder::sim::{Application, NodeId, Sim};
use lumen_core::forwarder::LOCAL_FACE;
use lumen_core::trust::attributes::parse_generalized_time;
use lumen_core::trust::policy::{AclBody, AclEntry, CommandPattern, CommandRegistry};
use lumen_core::trust::{key_name, Access, Acl, Signer};
use lumen_core::{KeyPair, Name, SchemeTag};

use crate::actors::{AppActor, AuthorityActor, FixtureActor, Scheduled, T_CMD};
use crate::adversary::script_from;
use crate::config::{ConfigError, Protocol, Scenario};
use crate::light::LightState;
use crate::metrics::{Metrics, Roles};

pub const SCHEME: SchemeTag = SchemeTag::Rsa1024E3Sha256;

/// A built, not yet started, simulation.
pub struct World {
    pub sim: Sim,
    pub nodes: BTreeMap<String, NodeId>,
    pub roles: Roles,
    pub am: Signer,
}

impl World {
    pub fn node(&self, name: &str) -> NodeId {
        self.nodes[name]
    }

    pub fn fixture(&self, name: &str) -> &FixtureActor {
        self.sim.app::<FixtureActor>(self.node(name)).expect("fixture actor")
    }

    pub fn app(&self, name: &str) -> &AppActor {
        self.sim.app::<AppActor>(self.node(name)).expect("app actor")
    }

    pub fn app_mut(&mut self, name: &str) -> &mut AppActor {
        let id = self.node(name);
        self.sim.app_mut::<AppActor>(id).expect("app actor")
    }

    /// Live counters read straight from the actors.
    pub fn live(&self) -> Live {
        let mut live = Live::default();
        for f in &self.roles.fixtures {
            let a = self.fixture(f);
            live.fixtures.insert(f.clone(), a.state.stats.clone());
            live.lights.insert(f.clone(), a.light);
        }
        for a in &self.roles.apps {
            live.apps.insert(a.clone(), self.app(a).stats());
        }
        live
    }

    /// Appends one `stats` record per endpoint with its crypto counters.
    pub fn log_stats(&mut self) {
        let live = self.live();
        for (name, s) in &live.fixtures {
            let id = self.node(name);
            let fields = [
                ("signatures", json!(s.signatures)),
                ("sig_verifies", json!(s.sig_verifies)),
                ("macs", json!(s.macs)),
                ("mac_verifies", json!(s.mac_verifies)),
                ("hashes", json!(s.hashes)),
            ];
            self.sim.call_app(id, |_, ctx| ctx.event("stats", &Name::new(), fields));
        }
        for (name, s) in &live.apps {
            let id = self.node(name);
            let fields = [
                ("signatures", json!(s.signatures)),
                ("sig_verifies", json!(s.sig_verifies)),
                ("macs", json!(s.macs)),
                ("mac_verifies", json!(s.mac_verifies)),
                ("hashes", json!(s.hashes)),
            ];
            self.sim.call_app(id, |_, ctx| ctx.event("stats", &Name::new(), fields));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Live {
    pub fixtures: BTreeMap<String, FixtureStats>,
    pub apps: BTreeMap<String, AppStats>,
    pub lights: BTreeMap<String, LightState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub metrics: Metrics,
    /// Unmet `expect` entries; empty means the scenario passed.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub log: EventLog,
    #[serde(skip)]
    pub live: Live,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn grant_for(a: &crate::config::AppCfg) -> Grant {
    Grant {
        domain: a.domain.as_ref().map(|d| d.as_bytes().to_vec()),
        appname: a.appname.clone().unwrap_or_else(|| a.name.clone()).into_bytes(),
        access: Access::parse(a.access.as_bytes()).expect("validated"),
        expires: a.expires.as_ref().and_then(|e| parse_generalized_time(e.as_bytes())),
    }
}

fn acl_name(s: &Scenario) -> Name {
    s.domain_prefix().child(&b"acl"[..]).expect("short prefix")
}

/// Expands repeated commands and fades into per-app schedules, in time order.
pub fn expand_workload(s: &Scenario) -> BTreeMap<String, Vec<(u64, Scheduled)>> {
    let mut out: BTreeMap<String, Vec<(u64, Scheduled)>> = BTreeMap::new();
    for c in &s.commands {
        for k in 0..u64::from(c.count) {
            out.entry(c.app.clone()).or_default().push((
                c.at_ms + k * c.every_ms,
                Scheduled {
                    fixture: c.fixture.clone(),
                    cmd: c.cmd.clone().into_bytes(),
                },
            ));
        }
    }
    for f in &s.fades {
        let n = (f.duration_ms * u64::from(f.rate_hz) / 1000).max(1);
        for k in 1..=n {
            let level = i64::from(f.from) + (i64::from(f.to) - i64::from(f.from)) * k as i64 / n as i64;
            out.entry(f.app.clone()).or_default().push((
                f.at_ms + (k - 1) * f.duration_ms / n,
                Scheduled {
                    fixture: f.fixture.clone(),
                    cmd: format!("level/{level}").into_bytes(),
                },
            ));
        }
    }
    for v in out.values_mut() {
        v.sort_by_key(|(t, _)| *t);
    }
    out
}

pub fn build(s: &Scenario) -> Result<World, ConfigError> {
    s.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed_from_label(s.seed, "setup"));
    let domain = s.domain_prefix();
    let am = Signer::root(
        KeyPair::from_seed(SCHEME, seed_from_label(s.seed, "am")),
        key_name(&domain),
    );

    let mut sim = Sim::new(s.seed);
    let mut nodes = BTreeMap::new();
    for n in s.node_names() {
        nodes.insert(n.clone(), sim.add_node(&n, s.cs_capacity));
    }
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for l in &s.links {
        let (a, b) = (nodes[&l.a], nodes[&l.b]);
        sim.connect(a, b, l.latency_ms, l.loss);
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }

    let mut authority = AuthorityActor::default();
    let mut served: Vec<(Name, NodeId)> = Vec::new();
    let acl = acl_name(s);
    served.push((acl.clone(), nodes["am"]));

    // Fixtures: paired with the configuration manager out of band.
    let mut fixtures: BTreeMap<String, FixtureActor> = BTreeMap::new();
    for f in &s.fixtures {
        let name_fix = s.fixture_prefix(f);
        let offer = BootstrapOffer {
            name_fix: name_fix.clone(),
            root: am.trust_root(),
            acl_names: vec![acl.clone()],
            cm_time_ms: s.epoch_ms,
        };
        let mut pairing = [0u8; 16];
        rng.fill_bytes(&mut pairing);
        let mut device = Device::new(pairing, SCHEME);
        let local = (s.epoch_ms as i64 + f.clock_skew_ms).max(0) as u64;
        let (record, _) = bootstrap(pairing, &offer, &mut device, local, &mut rng).map_err(|e| ConfigError::Invalid {
            at: format!("fixtures.{}", f.name),
            msg: format!("bootstrap failed: {e}"),
        })?;
        let cfg = FixtureConfig {
            registry: CommandRegistry::lighting(),
            domain: f.domain.as_ref().map(|d| d.as_bytes().to_vec()),
            staleness_ms: f.staleness_ms,
            seq_window: f.seq_window,
            chain_len: f.chain_len,
            chain_stride: f.chain_stride,
            ..FixtureConfig::default()
        };
        let state = FixtureState::from_bootstrap(&record, cfg);
        let mut actor = FixtureActor::new(&f.name, state, f.lights, s.epoch_ms, f.clock_skew_ms);
        if let Some(acl_cfg) = &s.acl {
            actor.fetch_acl(acl.clone().child(acl_cfg.name.as_bytes()).expect("short"));
        }
        served.push((name_fix, nodes[&f.name]));
        fixtures.insert(f.name.clone(), actor);
    }

    // Apps: authorized by the AM, which also publishes their key records.
    let schedules = expand_workload(s);
    let mut app_names = BTreeMap::new();
    let mut apps: BTreeMap<String, AppActor> = BTreeMap::new();
    for a in &s.apps {
        let keypair = KeyPair::from_seed(SCHEME, seed_from_label(s.seed, &format!("app/{}", a.name)));
        let record = authorize_app(&am, &domain, keypair.public(), &grant_for(a), s.epoch_ms).map_err(|e| {
            ConfigError::Invalid {
                at: format!("apps.{}", a.name),
                msg: e.to_string(),
            }
        })?;
        let name_app = record.namespace.clone();
        authority.objects.insert(record.carrier.name.clone(), record.carrier.clone());
        served.push((record.carrier.name.clone(), nodes["am"]));
        served.push((name_app.clone(), nodes[&a.name]));
        let mut actor = AppActor::new(&a.name, a.protocol, keypair.clone(), record.clone(), s.epoch_ms);
        actor.set_handoff(a.handoff);
        actor.set_clock_lag(a.clock_lag_ms);
        for f in s.app_fixtures(a) {
            let fa = fixtures.get_mut(&f.name).expect("validated");
            let name_fix = fa.state.name_fix.clone();
            let pk = fa.state.public_key().clone();
            let session = match a.protocol {
                Protocol::Baseline => {
                    fa.install_baseline_key(&record);
                    None
                }
                Protocol::Sig | Protocol::Mac => {
                    let mode = if a.protocol == Protocol::Sig { AuthMode::Sig } else { AuthMode::Mac };
                    let ack = a.ack.unwrap_or(if mode == AuthMode::Sig { AckScheme::Signed } else { AckScheme::Mac });
                    let mut link = LinkConfig::new(name_fix.clone(), pk.clone(), mode, ack);
                    link.encrypt = a.encrypt;
                    if let Some(r) = a.retransmit {
                        link.retransmit = RetransmitPolicy {
                            timeout_ms: r.timeout_ms,
                            deadline_ms: r.deadline_ms,
                            fallback_deadline_ms: r.fallback_deadline_ms,
                        };
                    }
                    let mut session = AppSession::new(AppCredentials {
                        name_app: name_app.clone(),
                        keypair: Some(keypair.clone()),
                        k_app: None,
                    });
                    session.add_fixture(link);
                    Some(session)
                }
            };
            actor.add_fixture(&f.name, name_fix, pk, session);
        }
        if let Some(items) = schedules.get(&a.name) {
            actor.schedule = items.iter().map(|(_, c)| c.clone()).collect();
        }
        app_names.insert(a.name.clone(), name_app);
        apps.insert(a.name.clone(), actor);
    }

    if let Some(cfg) = &s.acl {
        let entries = cfg
            .entries
            .iter()
            .map(|e| AclEntry {
                prefix: if e.app.starts_with('/') {
                    e.app.clone()
                } else {
                    app_names[&e.app].to_uri()
                },
                commands: e.commands.iter().map(|c| CommandPattern(c.clone())).collect(),
            })
            .collect();
        let name = acl.child(cfg.name.as_bytes()).map_err(|e| ConfigError::Invalid {
            at: "acl.name".into(),
            msg: e.to_string(),
        })?;
        let signed = Acl::sign(&am, name.clone(), AclBody { entries }, s.epoch_ms);
        authority.objects.insert(name, signed.carrier);
    }

    if let Some(p) = s.polling {
        let targets: Vec<Name> = app_names.values().cloned().collect();
        for f in fixtures.values_mut() {
            f.poll(p, targets.clone());
        }
    }

    for (i, adv) in s.adversaries.iter().enumerate() {
        let (from, to) = (nodes[&adv.from], nodes[&adv.to]);
        let link = sim.link_between(from, to).expect("validated");
        sim.set_script(link, from, script_from(&adv.rules, seed_from_label(s.seed, &format!("adversary/{i}"))));
    }
    if s.ack_guard {
        for &id in nodes.values() {
            sim.set_guard(id, Arc::new(HashAckGuard));
        }
    }

    // Routes: every served prefix points along a shortest path to its owner.
    for (prefix, owner) in &served {
        sim.route(*owner, prefix.clone(), LOCAL_FACE);
        let mut toward: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut queue = VecDeque::from([*owner]);
        toward.insert(*owner, *owner);
        while let Some(v) = queue.pop_front() {
            for &w in adj.get(&v).map(Vec::as_slice).unwrap_or_default() {
                if let std::collections::btree_map::Entry::Vacant(e) = toward.entry(w) {
                    e.insert(v);
                    queue.push_back(w);
                }
            }
        }
        for (&v, &next) in &toward {
            if v != *owner {
                let face = sim.face_to(v, next).expect("adjacent");
                sim.route(v, prefix.clone(), face);
            }
        }
    }

    sim.set_app(nodes["am"], Box::new(authority));
    for (name, f) in fixtures {
        sim.set_app(nodes[&name], Box::new(f));
    }
    for (name, a) in apps {
        let id = nodes[&name];
        if let Some(items) = schedules.get(&name) {
            for (idx, (at, _)) in items.iter().enumerate() {
                sim.schedule_timer(id, *at, T_CMD | idx as u64);
            }
        }
        sim.set_app(id, Box::new(a) as Box<dyn Application>);
    }

    Ok(World {
        sim,
        nodes,
        roles: Roles::of(s),
        am,
    })
}

pub fn run_scenario(s: &Scenario) -> Result<RunReport, ConfigError> {
    let mut w = build(s)?;
    w.sim.start();
    w.sim.run_until(s.duration_ms);
    w.log_stats();
    let live = w.live();
    let since = s.workload_start().unwrap_or(0);
    let metrics = Metrics::from_log(w.sim.log().records(), &w.roles, since);
    let failures = check_expect(s, &metrics);
    Ok(RunReport {
        scenario: s.name.clone(),
        seed: s.seed,
        metrics,
        failures,
        log: w.sim.log().clone(),
        live,
    })
}

/// Runs independent scenarios, in parallel when the feature is enabled.
/// Reports come back in input order.
pub fn run_many(scenarios: Vec<Scenario>) -> Vec<Result<RunReport, ConfigError>> {
    lumen_core::parallel::map(scenarios, |s| run_scenario(&s))
}

pub fn check_expect(s: &Scenario, m: &Metrics) -> Vec<String> {
    let e = &s.expect;
    let mut out = Vec::new();
    let mut eq = |what: &str, want: Option<u64>, got: u64| {
        if let Some(w) = want {
            if w != got {
                out.push(format!("{what}: expected {w}, got {got}"));
            }
        }
    };
    eq("messages", e.messages, m.messages);
    eq("executed", e.executed, m.executed);
    eq("acked", e.acked, m.acked);
    eq("failed", e.failed, m.failed);
    eq("poll_interests", e.poll_interests, m.poll_interests);
    for (reason, want) in &e.rejected {
        eq(&format!("rejected.{reason}"), Some(*want), m.rejected.get(reason).copied().unwrap_or(0));
    }
    if let Some(max) = e.max_latency_ms {
        if m.latency.max_ms > max {
            out.push(format!("max_latency_ms: {} exceeds {max}", m.latency.max_ms));
        }
    }
    if e.no_duplicate_executions && m.duplicate_executions > 0 {
        out.push(format!("duplicate executions: {}", m.duplicate_executions));
    }
    if e.lock_step && m.max_chain_in_flight > 1 {
        out.push(format!("lock-step violated: {} chain commands in flight", m.max_chain_in_flight));
    }
    if e.one_time_preimages && m.preimage_reuse > 0 {
        out.push(format!("preimages reused: {}", m.preimage_reuse));
    }
    if e.no_fake_acks && m.unbacked_acks > 0 {
        out.push(format!("acks without execution: {}", m.unbacked_acks));
    }
    out
}
