//! Scenario files (TOML).
//!
//! A scenario names its nodes, wires them with links, lists fixtures and
//! applications, and schedules a workload. Routes are computed from the
//! topology unless given. See `docs/scenario.md`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use lumen_core::control::AckScheme;
use lumen_core::packet::PacketKind;
use lumen_core::trust::Access;
use lumen_core::Name;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{at}: {msg}")]
    Invalid { at: String, msg: String },
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

fn invalid(at: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        at: at.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Notify, fetch, signed content, ack: four messages per command.
    Baseline,
    Sig,
    Mac,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock time (unix ms) that simulation time 0 corresponds to.
    #[serde(default = "default_epoch")]
    pub epoch_ms: u64,
    /// Stop the simulation at this time even if events remain.
    #[serde(default = "default_duration")]
    pub duration_ms: u64,
    /// Domain prefix under which apps are authorized and keys live.
    #[serde(default = "default_domain_prefix")]
    pub domain_prefix: String,
    #[serde(default)]
    pub routers: Vec<RouterCfg>,
    #[serde(default)]
    pub fixtures: Vec<FixtureCfg>,
    #[serde(default)]
    pub apps: Vec<AppCfg>,
    #[serde(default)]
    pub links: Vec<LinkCfg>,
    #[serde(default)]
    pub acl: Option<AclCfg>,
    #[serde(default)]
    pub commands: Vec<CommandCfg>,
    #[serde(default)]
    pub fades: Vec<FadeCfg>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryCfg>,
    #[serde(default)]
    pub polling: Option<PollingCfg>,
    /// Router-side ack checks on every node.
    #[serde(default)]
    pub ack_guard: bool,
    #[serde(default = "default_cs")]
    pub cs_capacity: usize,
    #[serde(default)]
    pub expect: Expect,
}

fn default_epoch() -> u64 {
    1_700_000_000_000
}

fn default_duration() -> u64 {
    60_000
}

fn default_domain_prefix() -> String {
    "/lumen".into()
}

fn default_cs() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterCfg {
    pub name: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureCfg {
    pub name: String,
    /// Defaults to `<domain_prefix>/fixture/<name>`.
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default = "one")]
    pub lights: usize,
    /// Domain the fixture enforces; apps naming another domain are denied.
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default = "one_u32")]
    pub seq_window: u32,
    #[serde(default = "default_staleness")]
    pub staleness_ms: u64,
    #[serde(default = "default_chain_len")]
    pub chain_len: u32,
    #[serde(default = "default_stride")]
    pub chain_stride: u32,
    /// Fixture clock runs ahead of simulation time by this much before
    /// bootstrap corrects it.
    #[serde(default)]
    pub clock_skew_ms: i64,
}

fn one() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn default_staleness() -> u64 {
    60_000
}
fn default_chain_len() -> u32 {
    10_000
}
fn default_stride() -> u32 {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppCfg {
    pub name: String,
    #[serde(default)]
    pub appname: Option<String>,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default = "default_access")]
    pub access: String,
    /// `YYYYMMDDhhmmssZ`.
    #[serde(default)]
    pub expires: Option<String>,
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default)]
    pub ack: Option<AckScheme>,
    #[serde(default)]
    pub encrypt: bool,
    /// Fixtures this app controls; all when empty.
    #[serde(default)]
    pub fixtures: Vec<String>,
    #[serde(default)]
    pub retransmit: Option<RetransmitCfg>,
    /// The app's clock runs this far behind simulation time.
    #[serde(default)]
    pub clock_lag_ms: u64,
    /// Obtain `k_App` from each fixture at start. Without it, MAC-based
    /// modes are unavailable and Sig-mode fixtures fetch the app's key
    /// record on first contact.
    #[serde(default = "yes")]
    pub handoff: bool,
}

fn yes() -> bool {
    true
}

fn default_access() -> String {
    "full-access".into()
}

fn default_protocol() -> Protocol {
    Protocol::Mac
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetransmitCfg {
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_deadline")]
    pub deadline_ms: u64,
    #[serde(default = "default_deadline")]
    pub fallback_deadline_ms: u64,
}

fn default_timeout() -> u64 {
    200
}
fn default_deadline() -> u64 {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCfg {
    pub a: String,
    pub b: String,
    #[serde(default = "default_latency")]
    pub latency_ms: u64,
    #[serde(default)]
    pub loss: f64,
}

fn default_latency() -> u64 {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AclCfg {
    /// Published as `<domain_prefix>/acl/<name>`.
    #[serde(default = "default_acl_name")]
    pub name: String,
    pub entries: Vec<AclEntryCfg>,
}

fn default_acl_name() -> String {
    "main".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AclEntryCfg {
    /// App node name, or a name prefix starting with `/`.
    pub app: String,
    pub commands: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandCfg {
    pub at_ms: u64,
    pub app: String,
    pub fixture: String,
    pub cmd: String,
    #[serde(default = "one_u32")]
    pub count: u32,
    #[serde(default)]
    pub every_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadeCfg {
    pub at_ms: u64,
    pub app: String,
    pub fixture: String,
    #[serde(default)]
    pub from: u8,
    pub to: u8,
    pub duration_ms: u64,
    #[serde(default = "default_rate")]
    pub rate_hz: u32,
}

fn default_rate() -> u32 {
    44
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryCfg {
    /// Transmitting end of the link direction the script watches.
    pub from: String,
    pub to: String,
    pub rules: Vec<RuleCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleCfg {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default)]
    pub probability: Option<f64>,
    #[serde(default)]
    pub skip: u32,
    #[serde(default)]
    pub limit: Option<u32>,
    pub action: ActionCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionCfg {
    Pass,
    Drop,
    Delay { ms: u64 },
    Duplicate { gap_ms: u64 },
    Replay { after_ms: u64 },
    /// Flip a byte of the command component, skipping its first `from` bytes.
    ModifyCmd {
        #[serde(default)]
        from: usize,
    },
    /// Flip a random byte of the auth token.
    ModifyToken,
    FlipWire {
        #[serde(default)]
        offset: Option<usize>,
    },
    /// Answer command interests with fabricated acks of every kind.
    ForgeAck {
        #[serde(default)]
        drop_original: bool,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollingCfg {
    pub period_ms: u64,
    pub periods: u32,
    #[serde(default)]
    pub start_ms: u64,
}

/// Assertions checked after the run; absent fields are not checked.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub messages: Option<u64>,
    pub executed: Option<u64>,
    pub acked: Option<u64>,
    pub failed: Option<u64>,
    #[serde(default)]
    pub rejected: std::collections::BTreeMap<String, u64>,
    /// Upper bound on any single command's round trip.
    pub max_latency_ms: Option<u64>,
    pub poll_interests: Option<u64>,
    #[serde(default)]
    pub no_duplicate_executions: bool,
    #[serde(default)]
    pub lock_step: bool,
    #[serde(default)]
    pub one_time_preimages: bool,
    #[serde(default)]
    pub no_fake_acks: bool,
}

impl Scenario {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            msg: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn domain_prefix(&self) -> Name {
        Name::parse(&self.domain_prefix).expect("validated")
    }

    pub fn fixture_prefix(&self, f: &FixtureCfg) -> Name {
        match &f.prefix {
            Some(p) => Name::parse(p).expect("validated"),
            None => self
                .domain_prefix()
                .child(&b"fixture"[..])
                .and_then(|n| n.child(f.name.as_bytes()))
                .expect("short prefix"),
        }
    }

    pub fn fixture(&self, name: &str) -> Option<&FixtureCfg> {
        self.fixtures.iter().find(|f| f.name == name)
    }

    pub fn app(&self, name: &str) -> Option<&AppCfg> {
        self.apps.iter().find(|a| a.name == name)
    }

    pub fn node_names(&self) -> Vec<String> {
        let mut v = vec!["cm".to_string(), "am".to_string()];
        v.extend(self.routers.iter().map(|r| r.name.clone()));
        v.extend(self.fixtures.iter().map(|f| f.name.clone()));
        v.extend(self.apps.iter().map(|a| a.name.clone()));
        v
    }

    /// Fixtures an app talks to.
    pub fn app_fixtures<'a>(&'a self, a: &'a AppCfg) -> impl Iterator<Item = &'a FixtureCfg> + 'a {
        self.fixtures
            .iter()
            .filter(move |f| a.fixtures.is_empty() || a.fixtures.contains(&f.name))
    }

    /// Earliest scheduled command or fade; traffic before it is setup.
    pub fn workload_start(&self) -> Option<u64> {
        let c = self.commands.iter().map(|c| c.at_ms);
        let f = self.fades.iter().map(|f| f.at_ms);
        c.chain(f).min()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        Name::parse(&self.domain_prefix).map_err(|e| invalid("domain_prefix", e.to_string()))?;
        let mut seen = BTreeSet::new();
        for n in self.node_names() {
            if n.is_empty() {
                return Err(invalid("nodes", "empty node name"));
            }
            if !seen.insert(n.clone()) {
                return Err(invalid("nodes", format!("duplicate node name {n:?}")));
            }
        }
        for (i, f) in self.fixtures.iter().enumerate() {
            let at = format!("fixtures[{i}]");
            if let Some(p) = &f.prefix {
                Name::parse(p).map_err(|e| invalid(format!("{at}.prefix"), e.to_string()))?;
            }
            if !(1..=64).contains(&f.seq_window) {
                return Err(invalid(format!("{at}.seq_window"), "must be 1..=64"));
            }
            if f.chain_len == 0 || f.chain_stride == 0 {
                return Err(invalid(format!("{at}.chain_len"), "chain length and stride must be positive"));
            }
            if f.lights == 0 {
                return Err(invalid(format!("{at}.lights"), "at least one light"));
            }
        }
        for (i, a) in self.apps.iter().enumerate() {
            let at = format!("apps[{i}]");
            if Access::parse(a.access.as_bytes()).is_none() {
                return Err(invalid(format!("{at}.access"), format!("unknown access level {:?}", a.access)));
            }
            if let Some(e) = &a.expires {
                if lumen_core::trust::attributes::parse_generalized_time(e.as_bytes()).is_none() {
                    return Err(invalid(format!("{at}.expires"), "expected YYYYMMDDhhmmssZ"));
                }
            }
            for f in &a.fixtures {
                if self.fixture(f).is_none() {
                    return Err(invalid(format!("{at}.fixtures"), format!("unknown fixture {f:?}")));
                }
            }
            if a.protocol == Protocol::Baseline && a.ack.is_some() {
                return Err(invalid(format!("{at}.ack"), "baseline apps use the fixture's signed reply"));
            }
            if a.protocol == Protocol::Baseline && a.encrypt {
                return Err(invalid(format!("{at}.encrypt"), "not supported for baseline apps"));
            }
            let needs_key = a.protocol == Protocol::Mac
                || matches!(a.ack, Some(AckScheme::Mac | AckScheme::Enc))
                || (a.protocol == Protocol::Mac && a.encrypt);
            if needs_key && !a.handoff {
                return Err(invalid(format!("{at}.handoff"), "MAC mode and MAC/enc acks need the key handoff"));
            }
        }
        let is_node = |n: &str| seen.contains(n);
        for (i, l) in self.links.iter().enumerate() {
            let at = format!("links[{i}]");
            if !is_node(&l.a) || !is_node(&l.b) {
                return Err(invalid(at, format!("unknown node in link {:?} - {:?}", l.a, l.b)));
            }
            if l.a == l.b {
                return Err(invalid(at, "self link"));
            }
            if !(0.0..1.0).contains(&l.loss) {
                return Err(invalid(format!("{at}.loss"), "must be in [0, 1)"));
            }
        }
        let check_app_fix = |at: String, app: &str, fix: &str| -> Result<(), ConfigError> {
            let a = self.app(app).ok_or_else(|| invalid(&at, format!("unknown app {app:?}")))?;
            if self.fixture(fix).is_none() {
                return Err(invalid(&at, format!("unknown fixture {fix:?}")));
            }
            if !a.fixtures.is_empty() && !a.fixtures.iter().any(|f| f == fix) {
                return Err(invalid(&at, format!("app {app:?} is not configured for fixture {fix:?}")));
            }
            Ok(())
        };
        for (i, c) in self.commands.iter().enumerate() {
            let at = format!("commands[{i}]");
            check_app_fix(at.clone(), &c.app, &c.fixture)?;
            if c.count > 1 && c.every_ms == 0 {
                return Err(invalid(format!("{at}.every_ms"), "repeated commands need a spacing"));
            }
        }
        for (i, f) in self.fades.iter().enumerate() {
            let at = format!("fades[{i}]");
            check_app_fix(at.clone(), &f.app, &f.fixture)?;
            if f.rate_hz == 0 || f.rate_hz > 44 {
                return Err(invalid(format!("{at}.rate_hz"), "must be 1..=44"));
            }
        }
        for (i, adv) in self.adversaries.iter().enumerate() {
            let at = format!("adversaries[{i}]");
            let linked = self
                .links
                .iter()
                .any(|l| (l.a == adv.from && l.b == adv.to) || (l.a == adv.to && l.b == adv.from));
            if !linked {
                return Err(invalid(at, format!("no link between {:?} and {:?}", adv.from, adv.to)));
            }
            for (j, r) in adv.rules.iter().enumerate() {
                let at = format!("adversaries[{i}].rules[{j}]");
                if let Some(k) = &r.kind {
                    parse_kind(k).ok_or_else(|| invalid(format!("{at}.kind"), format!("unknown packet kind {k:?}")))?;
                }
                if let Some(p) = &r.prefix {
                    Name::parse(p).map_err(|e| invalid(format!("{at}.prefix"), e.to_string()))?;
                }
                if r.probability.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
                    return Err(invalid(format!("{at}.probability"), "must be in [0, 1]"));
                }
            }
        }
        if let Some(acl) = &self.acl {
            for (i, e) in acl.entries.iter().enumerate() {
                if !e.app.starts_with('/') && self.app(&e.app).is_none() {
                    return Err(invalid(format!("acl.entries[{i}].app"), format!("unknown app {:?}", e.app)));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_kind(k: &str) -> Option<PacketKind> {
    match k {
        "interest" | "I" => Some(PacketKind::Interest),
        "content" | "data" | "D" => Some(PacketKind::Content),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal() {
        let s = Scenario::from_toml(
            r#"
            seed = 3
            [[fixtures]]
            name = "f1"
            [[apps]]
            name = "a1"
            [[links]]
            a = "a1"
            b = "f1"
            "#,
            "t.toml",
        )
        .unwrap();
        assert_eq!(s.fixture_prefix(&s.fixtures[0]).to_uri(), "/lumen/fixture/f1");
        assert_eq!(s.apps[0].protocol, Protocol::Mac);
    }

    #[test]
    fn errors_have_locations() {
        let err = Scenario::from_toml(
            r#"
            [[fixtures]]
            name = "f1"
            [[apps]]
            name = "a1"
            access = "everything"
            "#,
            "t.toml",
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "apps[0].access: unknown access level \"everything\"");

        let err = Scenario::from_toml("seed = \"x\"", "bad.toml").unwrap_err();
        assert!(err.to_string().starts_with("bad.toml: "), "{err}");

        let err = Scenario::from_toml(
            r#"
            [[links]]
            a = "x"
            b = "am"
            "#,
            "t.toml",
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("links[0]: unknown node"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(Scenario::from_toml("sede = 1", "t.toml").is_err());
    }
}
