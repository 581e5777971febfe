//! Fixture-side command verification and ack generation.
//!
//! Checks run in a fixed order and the first failure decides the reject
//! reason: well-formedness, attribute policy, ACL, freshness and sequence,
//! authenticator, then the ack challenge. A sequence number is recorded
//! only once every check has passed.

use std::collections::BTreeMap;


use crate::ack_auth::ack::{ack_chain, ack_enc, ack_mac, ack_signed, AckBody, ChainSync, STATUS_EXECUTED};
use crate::ack_auth::chain::{ChainCert, HashChain, DEFAULT_CHAIN_LEN, DEFAULT_STRIDE};
use crate::ack_auth::enc::{enc_challenge_answer, enc_key};
use crate::crypto::{hmac_sha256, PublicKey};
use crate::name::Name;
use crate::packet::{ContentObject, Interest};
use crate::trust::attributes::parse_attributes;
use crate::trust::ownership::verify_key_path;
use crate::trust::policy::{evaluate_policy, Acl, CommandRegistry, Decision, DenyReason, PermissionClass};
use crate::trust::{key_name, Signer, TrustRoot};

use super::bootstrap::BootstrapRecord;
use super::command::{derive_app_key, parse_command, AuthMode, ParsedCommand};
use super::privacy::{decrypt_command_mac, decrypt_command_sig};
use super::replay::{ReplayTable, DEFAULT_STALENESS_MS};
use super::token::AckRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    Malformed = 1,
    PolicyDenied = 2,
    AclDenied = 3,
    Stale = 4,
    SeqReplay = 5,
    BadAuthenticator = 6,
    ChallengeMismatch = 7,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::Malformed,
        RejectReason::PolicyDenied,
        RejectReason::AclDenied,
        RejectReason::Stale,
        RejectReason::SeqReplay,
        RejectReason::BadAuthenticator,
        RejectReason::ChallengeMismatch,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == c)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Malformed => "Malformed",
            RejectReason::PolicyDenied => "PolicyDenied",
            RejectReason::AclDenied => "AclDenied",
            RejectReason::Stale => "Stale",
            RejectReason::SeqReplay => "SeqReplay",
            RejectReason::BadAuthenticator => "BadAuthenticator",
            RejectReason::ChallengeMismatch => "ChallengeMismatch",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detail byte for `PolicyDenied` rejects.
pub fn deny_detail(d: DenyReason) -> u8 {
    match d {
        DenyReason::Expired => 1,
        DenyReason::AccessMissing => 2,
        DenyReason::AccessInsufficient => 3,
        DenyReason::AttributeConflict => 4,
        DenyReason::BadAttribute => 5,
        DenyReason::DomainMismatch => 6,
        DenyReason::AclDenied => 7,
    }
}

#[derive(Debug, Clone)]
pub struct FixtureConfig {
    pub registry: CommandRegistry,
    /// The fixture's own lighting domain, if it enforces one.
    pub domain: Option<Vec<u8>>,
    pub staleness_ms: u64,
    pub seq_window: u32,
    pub freshness_slack_ms: u64,
    pub freshness_floor_ms: u64,
    pub chain_len: u32,
    pub chain_stride: u32,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            registry: CommandRegistry::lighting(),
            domain: None,
            staleness_ms: DEFAULT_STALENESS_MS,
            seq_window: 1,
            freshness_slack_ms: 500,
            freshness_floor_ms: 1000,
            chain_len: DEFAULT_CHAIN_LEN,
            chain_stride: DEFAULT_STRIDE,
        }
    }
}

impl FixtureConfig {
    /// Accepted clock skew for a command that reports `rtt_ms`.
    pub fn freshness_window(&self, rtt_ms: u32) -> u64 {
        (2 * u64::from(rtt_ms) + self.freshness_slack_ms).max(self.freshness_floor_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub parsed: ParsedCommand,
    /// Plaintext command.
    pub cmd: Vec<u8>,
    pub class: PermissionClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept(Box<Accepted>),
    Reject { reason: RejectReason, detail: u8 },
    /// Sig mode and the app's key is not cached yet: fetch this name and retry.
    NeedKey(Name),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureStats {
    pub accepted: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    pub sig_verifies: u64,
    pub mac_verifies: u64,
    pub signatures: u64,
    pub macs: u64,
    pub hashes: u64,
    pub resent: u64,
}

#[derive(Debug, Clone)]
struct ChainSession {
    chain: HashChain,
    cert: ChainCert,
    generation: u32,
    /// Last chain-related ack, served again for a byte-identical resend.
    cache: Option<(Name, ContentObject)>,
}

/// What the fixture does with one command interest.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Executed { cmd: Vec<u8>, app: Name, seq: u64, ack: ContentObject },
    /// Byte-identical resend of a chain-mode command; no second execution.
    Resent { ack: ContentObject },
    Rejected { reason: RejectReason, ack: ContentObject },
    NeedKey { key_name: Name },
}

#[derive(Debug, Clone)]
pub struct FixtureState {
    pub name_fix: Name,
    pub cfg: FixtureConfig,
    k_fix: [u8; 32],
    signer: Signer,
    pub trusted_root: TrustRoot,
    pub acl_names: Vec<Name>,
    acl: Option<Acl>,
    replay: ReplayTable,
    pub clock_offset_ms: i64,
    app_keys: BTreeMap<Name, PublicKey>,
    chains: BTreeMap<Name, ChainSession>,
    pub stats: FixtureStats,
}

impl FixtureState {
    pub fn from_bootstrap(rec: &BootstrapRecord, cfg: FixtureConfig) -> Self {
        let signer = Signer {
            keypair: rec.keypair.clone(),
            key_name: key_name(&rec.name_fix),
            namespace: Some(rec.name_fix.clone()),
        };
        Self {
            name_fix: rec.name_fix.clone(),
            replay: ReplayTable::new(cfg.staleness_ms, cfg.seq_window),
            cfg,
            k_fix: rec.k_fix,
            signer,
            trusted_root: rec.root.clone(),
            acl_names: rec.acl_names.clone(),
            acl: None,
            clock_offset_ms: rec.clock_offset_ms,
            app_keys: BTreeMap::new(),
            chains: BTreeMap::new(),
            stats: FixtureStats::default(),
        }
    }

    /// Local clock corrected by the bootstrap offset.
    pub fn clock(&self, local_ms: u64) -> u64 {
        (local_ms as i64 + self.clock_offset_ms).max(0) as u64
    }

    pub fn signer(&self) -> &Signer {
        &self.signer
    }

    pub fn public_key(&self) -> &PublicKey {
        self.signer.keypair.public()
    }

    pub fn k_fix(&self) -> &[u8; 32] {
        &self.k_fix
    }

    pub fn app_key(&self, name_app: &Name) -> [u8; 32] {
        derive_app_key(&self.k_fix, name_app)
    }

    pub fn replay(&self) -> &ReplayTable {
        &self.replay
    }

    pub fn acl(&self) -> Option<&Acl> {
        self.acl.as_ref()
    }

    /// Installs a root-signed ACL published under one of the configured names.
    pub fn install_acl(&mut self, carrier: ContentObject) -> bool {
        if !self.acl_names.iter().any(|n| n.is_prefix_of(&carrier.name)) {
            return false;
        }
        match Acl::from_content(&self.trusted_root.pk, carrier) {
            Some(acl) => {
                self.acl = Some(acl);
                true
            }
            None => false,
        }
    }

    /// Caches an application key after checking its path to the root.
    /// Returns the namespace the key was installed for.
    pub fn install_app_key(&mut self, path: &[ContentObject]) -> Option<Name> {
        let rec = verify_key_path(&self.trusted_root, path)?;
        self.app_keys.insert(rec.namespace.clone(), rec.pk);
        Some(rec.namespace)
    }

    pub(crate) fn cache_app_key(&mut self, name_app: Name, pk: PublicKey) {
        self.app_keys.insert(name_app, pk);
    }

    pub fn has_app_key(&self, name_app: &Name) -> bool {
        self.app_keys.contains_key(name_app)
    }

    pub fn evict_stale(&mut self, now: u64) -> usize {
        self.replay.evict_stale(now)
    }

    pub fn chain_sessions(&self) -> impl Iterator<Item = (&Name, &HashChain)> {
        self.chains.iter().map(|(n, s)| (n, &s.chain))
    }

    pub fn chain_cert(&self, name_app: &Name) -> Option<&ChainCert> {
        self.chains.get(name_app).map(|s| &s.cert)
    }

    fn reject(reason: RejectReason) -> Verdict {
        Verdict::Reject { reason, detail: 0 }
    }

    fn decrypt(&mut self, p: &ParsedCommand) -> Option<Vec<u8>> {
        if !p.encrypted {
            return Some(p.cmd.clone());
        }
        match p.mode() {
            AuthMode::Mac => decrypt_command_mac(&self.app_key(&p.name_app), &p.cmd).ok(),
            AuthMode::Sig => decrypt_command_sig(&self.signer.keypair, &p.cmd).ok(),
        }
    }

    /// Runs the checks without side effects other than counters, then
    /// records the sequence number on success. `now` is the corrected clock.
    pub fn verify_command(&mut self, interest: &Interest, now: u64) -> Verdict {
        self.replay.evict_stale(now);

        // 1. well-formedness
        let Ok(p) = parse_command(&interest.name, &self.name_fix) else {
            return Self::reject(RejectReason::Malformed);
        };
        let Some(cmd) = self.decrypt(&p) else {
            return Self::reject(RejectReason::Malformed);
        };
        let Some(class) = self.cfg.registry.classify(&cmd) else {
            return Self::reject(RejectReason::Malformed);
        };

        // 2-3. attributes, then ACL
        let now_unix = (now / 1000) as i64;
        let decision = match parse_attributes(&p.name_app) {
            Err(_) => Decision::Deny(DenyReason::BadAttribute),
            Ok(attrs) => evaluate_policy(
                &attrs,
                self.acl.as_ref(),
                &p.name_app,
                &cmd,
                class,
                self.cfg.domain.as_deref(),
                now_unix,
            ),
        };
        match decision {
            Decision::Allow => {}
            Decision::Deny(DenyReason::AclDenied) => return Self::reject(RejectReason::AclDenied),
            Decision::Deny(d) => {
                return Verdict::Reject {
                    reason: RejectReason::PolicyDenied,
                    detail: deny_detail(d),
                }
            }
        }

        // 4. freshness and sequence
        let st = p.token.state;
        if now.abs_diff(st.time_ms()) > self.cfg.freshness_window(st.rtt_ms) {
            return Self::reject(RejectReason::Stale);
        }
        if !self.replay.check(&p.name_app, st.seq) {
            return Self::reject(RejectReason::SeqReplay);
        }

        // 5. authenticator
        let ok = match p.mode() {
            AuthMode::Sig => {
                let Some(pk) = self.app_keys.get(&p.name_app) else {
                    return Verdict::NeedKey(key_name(&p.name_app));
                };
                self.stats.sig_verifies += 1;
                p.verify_sig(pk)
            }
            AuthMode::Mac => {
                self.stats.mac_verifies += 1;
                p.verify_mac(&self.app_key(&p.name_app))
            }
        };
        if !ok {
            return Self::reject(RejectReason::BadAuthenticator);
        }

        // ack challenge
        match &p.token.ack {
            AckRequest::Enc { z, y } => {
                self.stats.hashes += 1;
                if enc_challenge_answer(&enc_key(&self.app_key(&p.name_app)), y, z).is_err() {
                    return Self::reject(RejectReason::ChallengeMismatch);
                }
            }
            AckRequest::Chain { challenge } => {
                let current = self.chains.get(&p.name_app).map(|s| s.chain.current_challenge());
                if current.as_ref() != Some(challenge) {
                    return Self::reject(RejectReason::ChallengeMismatch);
                }
            }
            _ => {}
        }

        self.replay.commit(&p.name_app, st.seq, now);
        Verdict::Accept(Box::new(Accepted { parsed: p, cmd, class }))
    }

    fn chain_seed(&self, name_app: &Name, generation: u32) -> [u8; 32] {
        let mut label = b"hash-chain".to_vec();
        name_app.encode_into(&mut label);
        label.extend_from_slice(&generation.to_be_bytes());
        hmac_sha256(&self.k_fix, &label)
    }

    fn new_chain(&mut self, name_app: &Name, generation: u32, now: u64) -> ChainSession {
        let chain = HashChain::create(self.chain_seed(name_app, generation), self.cfg.chain_len, self.cfg.chain_stride);
        self.stats.hashes += u64::from(self.cfg.chain_len);
        self.stats.signatures += 1;
        let cert = ChainCert::issue(&self.signer, &self.name_fix, name_app, generation, chain.anchor(), chain.len(), now);
        ChainSession {
            chain,
            cert,
            generation,
            cache: None,
        }
    }

    fn sign_ack(&mut self, name: Name, body: &AckBody, now: u64) -> ContentObject {
        self.stats.signatures += 1;
        ack_signed(&self.signer, name, body, now)
    }

    /// Signed reject for `name`.
    pub fn reject_ack(&mut self, name: Name, reason: RejectReason, detail: u8, now: u64) -> ContentObject {
        self.sign_ack(
            name,
            &AckBody::Reject {
                reason: reason.code(),
                detail,
            },
            now,
        )
    }

    /// Verifies a command and produces the ack to send back. `local_ms` is
    /// the fixture's uncorrected clock.
    pub fn handle_command(&mut self, interest: &Interest, local_ms: u64) -> Outcome {
        let now = self.clock(local_ms);
        if let Ok(p) = parse_command(&interest.name, &self.name_fix) {
            if let Some(s) = self.chains.get(&p.name_app) {
                if let Some((n, ack)) = &s.cache {
                    if n == &interest.name {
                        self.stats.resent += 1;
                        return Outcome::Resent { ack: ack.clone() };
                    }
                }
            }
        }
        match self.verify_command(interest, now) {
            Verdict::NeedKey(key_name) => Outcome::NeedKey { key_name },
            Verdict::Reject { reason, detail } => {
                *self.stats.rejected.entry(reason).or_default() += 1;
                let ack = self.reject_ack(interest.name.clone(), reason, detail, now);
                Outcome::Rejected { reason, ack }
            }
            Verdict::Accept(a) => {
                self.stats.accepted += 1;
                let app = a.parsed.name_app.clone();
                let seq = a.parsed.token.state.seq;
                let ack = self.accepted_ack(&a.parsed, interest.name.clone(), now);
                Outcome::Executed { cmd: a.cmd, app, seq, ack }
            }
        }
    }

    fn accepted_ack(&mut self, p: &ParsedCommand, name: Name, now: u64) -> ContentObject {
        let app = &p.name_app;
        match &p.token.ack {
            AckRequest::Sig => self.sign_ack(
                name,
                &AckBody::Signed {
                    status: STATUS_EXECUTED,
                    sync: None,
                },
                now,
            ),
            AckRequest::Mac => {
                self.stats.macs += 1;
                ack_mac(&self.app_key(app), self.signer.key_name.clone(), name, STATUS_EXECUTED, now)
            }
            AckRequest::Enc { y, z } => {
                let x = enc_challenge_answer(&enc_key(&self.app_key(app)), y, z).expect("checked during verification");
                ack_enc(name, self.signer.key_name.clone(), x, now)
            }
            AckRequest::ChainSync => {
                let mut s = match self.chains.remove(app) {
                    Some(s) if !s.chain.is_exhausted() => s,
                    Some(s) => self.new_chain(app, s.generation + 1, now),
                    None => self.new_chain(app, 0, now),
                };
                let before = s.chain.hash_count();
                let challenge = match s.chain.burn() {
                    Ok(c) => c,
                    Err(_) => {
                        s = self.new_chain(app, s.generation + 1, now);
                        s.chain.burn().expect("fresh chain")
                    }
                };
                self.stats.hashes += s.chain.hash_count() - before;
                let ack = self.sign_ack(
                    name.clone(),
                    &AckBody::Signed {
                        status: STATUS_EXECUTED,
                        sync: Some(ChainSync {
                            cert: s.cert.carrier.clone(),
                            challenge,
                        }),
                    },
                    now,
                );
                s.cache = Some((name, ack.clone()));
                self.chains.insert(app.clone(), s);
                ack
            }
            AckRequest::Chain { challenge } => {
                let mut s = self.chains.remove(app).expect("checked during verification");
                let ans = s.chain.answer(challenge).expect("checked during verification");
                self.stats.hashes += u64::from(ans.hashes);
                let mut refill = None;
                let cert = s.cert.clone();
                if s.chain.cursor() == 0 {
                    let mut next = self.new_chain(app, s.generation + 1, now);
                    refill = Some(ChainSync {
                        cert: next.cert.carrier.clone(),
                        challenge: next.chain.current_challenge(),
                    });
                    next.cache = None;
                    s = next;
                }
                let ack = ack_chain(name.clone(), &cert, ans.preimage, refill, now);
                s.cache = Some((name, ack));
                let ack = s.cache.as_ref().expect("just set").1.clone();
                self.chains.insert(app.clone(), s);
                ack
            }
        }
    }
}
