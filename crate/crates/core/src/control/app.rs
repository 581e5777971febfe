//! Application-side session state: sequence numbers, RTT estimate, the
//! current hash-chain challenge per fixture, outstanding commands, and ack
//! verification.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ack_auth::ack::{verify_mac_ack, AckBody, ChainSync};
use crate::ack_auth::chain::{chain_verify, ChainCert, Link};
use crate::ack_auth::enc::{enc_challenge_create, enc_key, router_verify_enc_ack};
use crate::ack_auth::retransmit::{LoopOutcome, RetransmitPolicy, RetransmitState, Tick};
use crate::crypto::{verify_content, PublicKey};
use crate::name::Name;
use crate::packet::{ContentObject, Interest, DEFAULT_LIFETIME_MS};

use super::command::{build_command, AppCredentials, AuthMode, CommandError};
use super::fixture::RejectReason;
use super::privacy::{encrypt_command_mac, encrypt_command_sig};
use super::token::{AckRequest, ReplayState};

pub const INITIAL_RTT_MS: f64 = 100.0;
const RTT_GAIN: f64 = 0.125;

/// The ack scheme an application asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckScheme {
    Signed,
    Mac,
    Enc,
    Chain,
}

impl AckScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            AckScheme::Signed => "signed",
            AckScheme::Mac => "mac",
            AckScheme::Enc => "enc",
            AckScheme::Chain => "chain",
        }
    }
}

/// Exponentially weighted RTT average, fed only by unambiguous samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttEstimator {
    srtt: f64,
}

impl Default for RttEstimator {
    fn default() -> Self {
        Self { srtt: INITIAL_RTT_MS }
    }
}

impl RttEstimator {
    pub fn sample(&mut self, ms: u64) {
        self.srtt += RTT_GAIN * (ms as f64 - self.srtt);
    }

    pub fn value_ms(&self) -> u32 {
        self.srtt.round() as u32
    }
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub name_fix: Name,
    pub fixture_pk: PublicKey,
    pub mode: AuthMode,
    pub ack: AckScheme,
    pub encrypt: bool,
    pub lifetime_ms: u32,
    pub retransmit: RetransmitPolicy,
}

impl LinkConfig {
    pub fn new(name_fix: Name, fixture_pk: PublicKey, mode: AuthMode, ack: AckScheme) -> Self {
        Self {
            name_fix,
            fixture_pk,
            mode,
            ack,
            encrypt: false,
            lifetime_ms: DEFAULT_LIFETIME_MS,
            retransmit: RetransmitPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Signed,
    Mac,
    Enc { x: [u8; 16], z: [u8; 32] },
    Chain { challenge: Link },
    ChainSync,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pending {
    pub interest: Interest,
    pub name_fix: Name,
    pub cmd: Vec<u8>,
    pub seq: u64,
    /// When the command was first issued (before any fallback).
    pub issued_at: u64,
    pub retx: RetransmitState,
    expect: Expect,
}

impl Pending {
    pub fn is_chain(&self) -> bool {
        matches!(self.expect, Expect::Chain { .. } | Expect::ChainSync)
    }

    /// The chain challenge this command presents, if any.
    pub fn challenge(&self) -> Option<Link> {
        match self.expect {
            Expect::Chain { challenge } => Some(challenge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct ChainView {
    cert: ChainCert,
    challenge: Link,
}

#[derive(Debug, Clone)]
struct FixtureLink {
    cfg: LinkConfig,
    next_seq: u64,
    rtt: RttEstimator,
    chain: Option<ChainView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IssueError {
    #[error("unknown fixture")]
    UnknownFixture,
    #[error("a chain-mode command is already outstanding")]
    Busy,
    #[error("missing key for the configured mode")]
    NoKey,
    #[error("command encryption failed")]
    Encrypt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AckEvent {
    Acked {
        name_fix: Name,
        cmd: Vec<u8>,
        seq: u64,
        latency_ms: u64,
        outcome: LoopOutcome,
        /// The chain preimage that authenticated this ack.
        preimage: Option<Link>,
        interest: Name,
    },
    Rejected {
        name_fix: Name,
        cmd: Vec<u8>,
        seq: u64,
        reason: RejectReason,
        detail: u8,
        latency_ms: u64,
        interest: Name,
    },
    /// Content that is not a valid ack for anything outstanding.
    Ignored { reason: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeoutAction {
    Resend(Interest),
    /// The chain-mode deadline passed; send this signed-ack command instead.
    Fallback { old: Name, interest: Interest },
    Failed { name_fix: Name, cmd: Vec<u8>, interest: Name },
    /// The command was already resolved.
    Nothing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AppStats {
    pub signatures: u64,
    pub macs: u64,
    pub sig_verifies: u64,
    pub mac_verifies: u64,
    pub hashes: u64,
}

#[derive(Debug, Clone)]
pub struct AppSession {
    pub creds: AppCredentials,
    links: BTreeMap<Name, FixtureLink>,
    pending: BTreeMap<Name, Pending>,
    pub stats: AppStats,
}

impl AppSession {
    pub fn new(creds: AppCredentials) -> Self {
        Self {
            creds,
            links: BTreeMap::new(),
            pending: BTreeMap::new(),
            stats: AppStats::default(),
        }
    }

    pub fn name(&self) -> &Name {
        &self.creds.name_app
    }

    pub fn add_fixture(&mut self, cfg: LinkConfig) {
        self.links.insert(
            cfg.name_fix.clone(),
            FixtureLink {
                cfg,
                next_seq: 1,
                rtt: RttEstimator::default(),
                chain: None,
            },
        );
    }

    pub fn fixtures(&self) -> impl Iterator<Item = &Name> {
        self.links.keys()
    }

    pub fn link_config(&self, name_fix: &Name) -> Option<&LinkConfig> {
        self.links.get(name_fix).map(|l| &l.cfg)
    }

    pub fn set_k_app(&mut self, k_app: [u8; 32]) {
        self.creds.k_app = Some(k_app);
    }

    pub fn rtt_ms(&self, name_fix: &Name) -> Option<u32> {
        self.links.get(name_fix).map(|l| l.rtt.value_ms())
    }

    pub fn next_seq(&self, name_fix: &Name) -> Option<u64> {
        self.links.get(name_fix).map(|l| l.next_seq)
    }

    /// Current chain challenge for `name_fix`, once synchronized.
    pub fn chain_challenge(&self, name_fix: &Name) -> Option<Link> {
        self.links.get(name_fix)?.chain.as_ref().map(|c| c.challenge)
    }

    pub fn pending(&self) -> impl Iterator<Item = &Pending> {
        self.pending.values()
    }

    pub fn pending_for(&self, name_fix: &Name) -> usize {
        self.pending.values().filter(|p| &p.name_fix == name_fix).count()
    }

    pub fn get_pending(&self, interest: &Name) -> Option<&Pending> {
        self.pending.get(interest)
    }

    fn build<R: RngCore + CryptoRng>(
        &mut self,
        name_fix: &Name,
        cmd: &[u8],
        ack: AckScheme,
        now: u64,
        rng: &mut R,
    ) -> Result<(Interest, Expect, u64), IssueError> {
        let link = self.links.get(name_fix).ok_or(IssueError::UnknownFixture)?;
        let cfg = &link.cfg;
        let (req, expect) = match ack {
            AckScheme::Signed => (AckRequest::Sig, Expect::Signed),
            AckScheme::Mac => (AckRequest::Mac, Expect::Mac),
            AckScheme::Enc => {
                let k = enc_key(self.creds.k_app.as_ref().ok_or(IssueError::NoKey)?);
                let c = enc_challenge_create(&k, rng);
                self.stats.hashes += 1;
                (AckRequest::Enc { z: c.z, y: c.y }, Expect::Enc { x: c.x, z: c.z })
            }
            AckScheme::Chain => match &link.chain {
                Some(v) => (AckRequest::Chain { challenge: v.challenge }, Expect::Chain { challenge: v.challenge }),
                None => (AckRequest::ChainSync, Expect::ChainSync),
            },
        };
        let wire_cmd = if cfg.encrypt {
            match cfg.mode {
                AuthMode::Mac => encrypt_command_mac(self.creds.k_app.as_ref().ok_or(IssueError::NoKey)?, cmd, rng),
                AuthMode::Sig => encrypt_command_sig(&cfg.fixture_pk, cmd, rng).map_err(|_| IssueError::Encrypt)?,
            }
        } else {
            cmd.to_vec()
        };
        let seq = link.next_seq;
        let state = ReplayState::at(seq, now, link.rtt.value_ms());
        let interest = build_command(
            &self.creds,
            name_fix,
            &wire_cmd,
            cfg.encrypt,
            cfg.mode,
            state,
            req,
            cfg.lifetime_ms,
            rng,
        )
        .map_err(|e| match e {
            CommandError::NoKeyForMode(_) => IssueError::NoKey,
            CommandError::Name(_) => IssueError::Encrypt,
        })?;
        match cfg.mode {
            AuthMode::Sig => self.stats.signatures += 1,
            AuthMode::Mac => self.stats.macs += 1,
        }
        self.links.get_mut(name_fix).expect("checked").next_seq += 1;
        Ok((interest, expect, seq))
    }

    /// Builds the next command for `name_fix`. Chain mode is lock-step: at
    /// most one outstanding command per fixture.
    pub fn issue<R: RngCore + CryptoRng>(
        &mut self,
        name_fix: &Name,
        cmd: &[u8],
        now: u64,
        rng: &mut R,
    ) -> Result<(Interest, u64), IssueError> {
        let cfg = self.links.get(name_fix).ok_or(IssueError::UnknownFixture)?.cfg.clone();
        if cfg.ack == AckScheme::Chain && self.pending_for(name_fix) > 0 {
            return Err(IssueError::Busy);
        }
        let (interest, expect, seq) = self.build(name_fix, cmd, cfg.ack, now, rng)?;
        let (retx, next_check) = RetransmitState::start(cfg.retransmit, cfg.ack == AckScheme::Chain, now);
        self.pending.insert(
            interest.name.clone(),
            Pending {
                interest: interest.clone(),
                name_fix: name_fix.clone(),
                cmd: cmd.to_vec(),
                seq,
                issued_at: now,
                retx,
                expect,
            },
        );
        Ok((interest, next_check))
    }

    /// Ack timer for `interest` fired. The caller re-arms the timer at
    /// `now + timeout` after `Resend` or `Fallback`.
    pub fn on_timeout<R: RngCore + CryptoRng>(&mut self, interest: &Name, now: u64, rng: &mut R) -> TimeoutAction {
        let Some(p) = self.pending.get_mut(interest) else {
            return TimeoutAction::Nothing;
        };
        match p.retx.on_timeout(now) {
            Tick::Resend { .. } => TimeoutAction::Resend(p.interest.clone()),
            Tick::Failed => {
                let p = self.pending.remove(interest).expect("present");
                TimeoutAction::Failed {
                    name_fix: p.name_fix,
                    cmd: p.cmd,
                    interest: interest.clone(),
                }
            }
            Tick::FallBack => {
                let mut p = self.pending.remove(interest).expect("present");
                // The unanswered challenge is abandoned; resynchronize.
                if let Some(l) = self.links.get_mut(&p.name_fix) {
                    l.chain = None;
                }
                match self.build(&p.name_fix, &p.cmd, AckScheme::Chain, now, rng) {
                    Ok((new, expect, seq)) => {
                        p.retx.enter_fallback(now);
                        p.interest = new.clone();
                        p.expect = expect;
                        p.seq = seq;
                        self.pending.insert(new.name.clone(), p);
                        TimeoutAction::Fallback {
                            old: interest.clone(),
                            interest: new,
                        }
                    }
                    Err(_) => TimeoutAction::Failed {
                        name_fix: p.name_fix,
                        cmd: p.cmd,
                        interest: interest.clone(),
                    },
                }
            }
        }
    }

    /// Abandons an outstanding command without an outcome.
    pub fn cancel(&mut self, interest: &Name) -> Option<Pending> {
        self.pending.remove(interest)
    }

    fn accept_sync(&mut self, name_fix: &Name, fixture_pk: &PublicKey, sync: &ChainSync) -> bool {
        self.stats.sig_verifies += 1;
        let Ok(cert) = ChainCert::verify(sync.cert.clone(), fixture_pk) else {
            return false;
        };
        if &cert.name_app != self.name() || &cert.name_fix != name_fix {
            return false;
        }
        if let Some(l) = self.links.get_mut(name_fix) {
            l.chain = Some(ChainView {
                cert,
                challenge: sync.challenge,
            });
        }
        true
    }

    /// Checks content arriving for an outstanding command.
    pub fn on_content(&mut self, content: &ContentObject, now: u64) -> AckEvent {
        let Some(p) = self.pending.get(&content.name) else {
            return AckEvent::Ignored { reason: "unsolicited" };
        };
        let name_fix = p.name_fix.clone();
        let Some(link) = self.links.get(&name_fix) else {
            return AckEvent::Ignored { reason: "unknown_fixture" };
        };
        let fixture_pk = link.cfg.fixture_pk.clone();
        let Ok(body) = AckBody::decode(&content.payload) else {
            return AckEvent::Ignored { reason: "malformed" };
        };
        let expect = p.expect;

        let mut preimage = None;
        let verified = match (&body, expect) {
            (AckBody::Reject { .. }, _) | (AckBody::Signed { .. }, Expect::Signed | Expect::ChainSync) => {
                self.stats.sig_verifies += 1;
                verify_content(&fixture_pk, content).unwrap_or(false)
            }
            (AckBody::Mac { .. }, Expect::Mac) => {
                self.stats.mac_verifies += 1;
                self.creds.k_app.as_ref().is_some_and(|k| verify_mac_ack(k, content))
            }
            (AckBody::EncAnswer, Expect::Enc { x, z }) => {
                self.stats.hashes += 1;
                content.signature == x && router_verify_enc_ack(&z, &content.signature)
            }
            (AckBody::ChainAnswer { anchor, preimage: pre, .. }, Expect::Chain { challenge }) => {
                let view = link.chain.as_ref();
                let ok = view.is_some_and(|v| {
                    &v.cert.anchor == anchor
                        && content.signature == v.cert.sigma()
                        && chain_verify(&v.cert, &challenge, pre)
                });
                self.stats.hashes += 1;
                preimage = Some(*pre);
                ok
            }
            _ => false,
        };
        if !verified {
            return AckEvent::Ignored { reason: "unverified" };
        }

        let p = self.pending.remove(&content.name).expect("present");
        let latency_ms = now.saturating_sub(p.issued_at);
        if p.retx.attempts == 1 {
            if let Some(l) = self.links.get_mut(&name_fix) {
                l.rtt.sample(latency_ms);
            }
        }
        let acked = |preimage| AckEvent::Acked {
            name_fix: name_fix.clone(),
            cmd: p.cmd.clone(),
            seq: p.seq,
            latency_ms,
            outcome: p.retx.outcome_on_ack(),
            preimage,
            interest: content.name.clone(),
        };
        match body {
            AckBody::Reject { reason, detail } => {
                let reason = RejectReason::from_code(reason).unwrap_or(RejectReason::Malformed);
                // Our own interest arriving twice: the first copy executed.
                if reason == RejectReason::SeqReplay && !p.is_chain() {
                    return acked(None);
                }
                if p.is_chain() {
                    if let Some(l) = self.links.get_mut(&name_fix) {
                        l.chain = None;
                    }
                }
                AckEvent::Rejected {
                    name_fix: name_fix.clone(),
                    cmd: p.cmd.clone(),
                    seq: p.seq,
                    reason,
                    detail,
                    latency_ms,
                    interest: content.name.clone(),
                }
            }
            AckBody::Signed { sync, .. } => {
                if expect == Expect::ChainSync {
                    match &sync {
                        Some(s) if self.accept_sync(&name_fix, &fixture_pk, s) => {}
                        _ => {
                            self.pending.insert(content.name.clone(), p);
                            return AckEvent::Ignored { reason: "bad_sync" };
                        }
                    }
                }
                acked(None)
            }
            AckBody::ChainAnswer { preimage: pre, refill, .. } => {
                if let Some(v) = self.links.get_mut(&name_fix).and_then(|l| l.chain.as_mut()) {
                    v.challenge = pre;
                }
                if let Some(r) = &refill {
                    if !self.accept_sync(&name_fix, &fixture_pk, r) {
                        if let Some(l) = self.links.get_mut(&name_fix) {
                            l.chain = None;
                        }
                    }
                }
                acked(preimage)
            }
            _ => acked(None),
        }
    }
}
