//! Metrics as a pure fold over the event log.
//!
//! Nothing here reads simulator or actor state; the runner keeps live
//! counters separately so the two can be cross-checked.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;

use lumen_core::forwarder::log::{Dir, LogRecord};
use lumen_core::PacketKind;

use crate::config::Scenario;

/// (app node, sequence number).
type CmdKey = (String, u64);

/// Which simulator nodes are protocol endpoints.
#[derive(Debug, Clone, Default)]
pub struct Roles {
    pub apps: BTreeSet<String>,
    pub fixtures: BTreeSet<String>,
}

impl Roles {
    pub fn of(s: &Scenario) -> Self {
        Self {
            apps: s.apps.iter().map(|a| a.name.clone()).collect(),
            fixtures: s.fixtures.iter().map(|f| f.name.clone()).collect(),
        }
    }

    fn is_endpoint(&self, node: &str) -> bool {
        self.apps.contains(node) || self.fixtures.contains(node)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CommandTrace {
    pub app: String,
    pub cid: u64,
    pub fixture: String,
    pub cmd: String,
    /// Link transmissions of any packet carrying one of this command's names.
    pub messages: u64,
    /// Distinct one-way legs sent by an endpoint; retransmissions of the
    /// same packet do not add a leg.
    pub rounds: u64,
    pub latency_ms: Option<u64>,
    /// `acked`, `rejected:<reason>`, `failed` or `pending`.
    pub outcome: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Latency {
    pub count: u64,
    pub min_ms: u64,
    pub max_ms: u64,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CryptoCounters {
    pub signatures: u64,
    pub sig_verifies: u64,
    pub macs: u64,
    pub mac_verifies: u64,
    pub hashes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    /// Link transmissions at or after the workload start.
    pub messages: u64,
    pub interests: u64,
    pub contents: u64,
    pub commands: u64,
    pub executed: u64,
    /// Executions of an interest name, or of an (fixture, app, seq) triple,
    /// already executed before.
    pub duplicate_executions: u64,
    pub acked: u64,
    pub failed: u64,
    pub fallbacks: u64,
    pub retransmissions: u64,
    pub resent: u64,
    /// Fixture-side rejections by reason.
    pub rejected: BTreeMap<String, u64>,
    /// Rejections reported to apps by reason.
    pub app_rejected: BTreeMap<String, u64>,
    /// Content the apps discarded, by reason.
    pub ignored: BTreeMap<String, u64>,
    pub drops: BTreeMap<String, u64>,
    pub adversary: BTreeMap<String, u64>,
    pub latency: Latency,
    pub poll_interests: u64,
    /// Most chain-mode commands in flight at once for one app-fixture pair.
    pub max_chain_in_flight: u64,
    /// Preimages that acknowledged more than one distinct command.
    pub preimage_reuse: u64,
    /// Acks reported by an app for an interest the fixture never executed.
    pub unbacked_acks: u64,
    pub crypto: BTreeMap<String, CryptoCounters>,
    pub per_command: Vec<CommandTrace>,
}

fn u(r: &LogRecord, k: &str) -> u64 {
    r.detail_u64(k).unwrap_or_default()
}

impl Metrics {
    pub fn from_log(records: &[LogRecord], roles: &Roles, since: u64) -> Self {
        let mut m = Metrics::default();
        let mut traces: BTreeMap<(String, u64), CommandTrace> = BTreeMap::new();
        let mut name_to_cmd: BTreeMap<String, (String, u64)> = BTreeMap::new();
        // (app, seq) -> distinct (sender, is_interest, name) legs
        let mut legs: BTreeMap<CmdKey, BTreeSet<(String, bool, String)>> = BTreeMap::new();
        let mut exec_names = BTreeSet::new();
        let mut exec_seqs = BTreeSet::new();
        let mut preimages: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut in_flight: BTreeMap<(String, String), BTreeSet<u64>> = BTreeMap::new();
        let mut chain_cids: BTreeMap<(String, u64), String> = BTreeMap::new();
        let mut latencies = Vec::new();
        let mut acked_names = Vec::new();

        // Application events first: they define which names belong to
        // which command.
        for r in records.iter().filter(|r| r.dir == Dir::App) {
            let Some(ev) = r.event() else { continue };
            let cid = u(r, "cid");
            let key = (r.node.clone(), cid);
            match ev {
                "issue" => {
                    m.commands += 1;
                    let t = traces.entry(key.clone()).or_default();
                    t.app = r.node.clone();
                    t.cid = cid;
                    t.fixture = r.detail_str("fixture").unwrap_or_default().to_string();
                    t.cmd = r.detail_str("cmd").unwrap_or_default().to_string();
                    t.outcome = "pending".into();
                    name_to_cmd.insert(r.name.clone(), key.clone());
                    if let Some(f) = r.detail_str("fetch") {
                        name_to_cmd.insert(f.to_string(), key.clone());
                    }
                    if r.detail_str("ack") == Some("chain") {
                        let fixture = t.fixture.clone();
                        let set = in_flight.entry((r.node.clone(), fixture.clone())).or_default();
                        set.insert(cid);
                        m.max_chain_in_flight = m.max_chain_in_flight.max(set.len() as u64);
                        chain_cids.insert(key, fixture);
                    }
                }
                "fallback" => {
                    m.fallbacks += 1;
                    name_to_cmd.insert(r.name.clone(), key);
                }
                "retx" => m.retransmissions += 1,
                "ack" | "rejected" | "fail" => {
                    if let Some(fixture) = chain_cids.remove(&key) {
                        if let Some(set) = in_flight.get_mut(&(r.node.clone(), fixture)) {
                            set.remove(&cid);
                        }
                    }
                    let t = traces.entry(key).or_default();
                    match ev {
                        "ack" => {
                            m.acked += 1;
                            let l = u(r, "latency_ms");
                            latencies.push(l);
                            t.latency_ms = Some(l);
                            t.outcome = "acked".into();
                            acked_names.push(r.name.clone());
                            if let Some(p) = r.detail_str("preimage") {
                                preimages.entry(p.to_string()).or_default().insert(r.name.clone());
                            }
                        }
                        "rejected" => {
                            let reason = r.detail_str("reason").unwrap_or("unknown").to_string();
                            t.latency_ms = Some(u(r, "latency_ms"));
                            t.outcome = format!("rejected:{reason}");
                            *m.app_rejected.entry(reason).or_default() += 1;
                        }
                        _ => {
                            m.failed += 1;
                            t.outcome = "failed".into();
                        }
                    }
                }
                "ignored" => {
                    let reason = r.detail_str("reason").unwrap_or("unknown").to_string();
                    *m.ignored.entry(reason).or_default() += 1;
                }
                "exec" => {
                    m.executed += 1;
                    let by_name = !exec_names.insert(r.name.clone());
                    let by_seq = match r.detail.get("seq").and_then(Value::as_u64) {
                        Some(seq) => {
                            let app = r.detail_str("app").unwrap_or_default().to_string();
                            !exec_seqs.insert((r.node.clone(), app, seq))
                        }
                        None => false,
                    };
                    if by_name || by_seq {
                        m.duplicate_executions += 1;
                    }
                    if let Some(p) = r.detail_str("preimage") {
                        preimages.entry(p.to_string()).or_default().insert(r.name.clone());
                    }
                }
                "reject" => {
                    let reason = r.detail_str("reason").unwrap_or("unknown").to_string();
                    *m.rejected.entry(reason).or_default() += 1;
                }
                "resent" => m.resent += 1,
                "stats" => {
                    m.crypto.insert(
                        r.node.clone(),
                        CryptoCounters {
                            signatures: u(r, "signatures"),
                            sig_verifies: u(r, "sig_verifies"),
                            macs: u(r, "macs"),
                            mac_verifies: u(r, "mac_verifies"),
                            hashes: u(r, "hashes"),
                        },
                    );
                }
                _ => {}
            }
        }
        m.unbacked_acks = acked_names.iter().filter(|n| !exec_names.contains(*n)).count() as u64;
        m.preimage_reuse = preimages.values().filter(|names| names.len() > 1).count() as u64;

        for r in records {
            match r.dir {
                Dir::Tx if r.time_ms >= since => {
                    m.messages += 1;
                    match r.pkt_type {
                        Some(PacketKind::Interest) => {
                            m.interests += 1;
                            if roles.fixtures.contains(&r.node) && r.name.contains("/poll/") {
                                m.poll_interests += 1;
                            }
                        }
                        Some(PacketKind::Content) => m.contents += 1,
                        None => {}
                    }
                    if let Some(key) = name_to_cmd.get(&r.name) {
                        if let Some(t) = traces.get_mut(key) {
                            t.messages += 1;
                        }
                        if roles.is_endpoint(&r.node) {
                            let leg = (r.node.clone(), r.pkt_type == Some(PacketKind::Interest), r.name.clone());
                            legs.entry(key.clone()).or_default().insert(leg);
                        }
                    }
                }
                Dir::Drop => {
                    let reason = r.detail_str("reason").unwrap_or("unknown").to_string();
                    *m.drops.entry(reason).or_default() += 1;
                }
                Dir::Adv => {
                    let action = r.detail_str("action").unwrap_or("unknown").to_string();
                    *m.adversary.entry(action).or_default() += 1;
                }
                _ => {}
            }
        }
        for (key, t) in &mut traces {
            t.rounds = legs.get(key).map_or(0, |l| l.len() as u64);
        }
        m.per_command = traces.into_values().collect();

        if !latencies.is_empty() {
            m.latency = Latency {
                count: latencies.len() as u64,
                min_ms: *latencies.iter().min().expect("non-empty"),
                max_ms: *latencies.iter().max().expect("non-empty"),
                mean_ms: latencies.iter().sum::<u64>() as f64 / latencies.len() as f64,
            };
        }
        m
    }

    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }
}
