//! Command classification, ACLs and the attribute policy decision.

use serde::{Deserialize, Serialize};

use crate::crypto::{self, PublicKey};
use crate::name::Name;
use crate::packet::ContentObject;

use super::attributes::{Access, Agreement, AttributeSet};
use super::keys::Signer;

/// What a command needs from the caller's access level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermissionClass {
    Read,
    Actuate,
    Configure,
}

impl PermissionClass {
    /// Least access level that covers this class.
    pub fn required(self) -> Access {
        match self {
            PermissionClass::Read => Access::ReadOnly,
            PermissionClass::Actuate => Access::Actuate,
            PermissionClass::Configure => Access::FullAccess,
        }
    }
}

/// Exact command bytes, or a prefix when written with a trailing `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandPattern(pub String);

impl CommandPattern {
    pub fn matches(&self, cmd: &[u8]) -> bool {
        match self.0.strip_suffix('*') {
            Some(prefix) => cmd.starts_with(prefix.as_bytes()),
            None => cmd == self.0.as_bytes(),
        }
    }
}

/// Maps command byte patterns to permission classes; first match wins.
/// Commands matching nothing are malformed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRegistry {
    pub entries: Vec<(CommandPattern, PermissionClass)>,
}

impl CommandRegistry {
    pub fn new(entries: impl IntoIterator<Item = (&'static str, PermissionClass)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(p, c)| (CommandPattern(p.to_string()), c))
                .collect(),
        }
    }

    /// The default lighting registry.
    pub fn lighting() -> Self {
        Self::new([
            ("status", PermissionClass::Read),
            ("on", PermissionClass::Actuate),
            ("off", PermissionClass::Actuate),
            ("level/*", PermissionClass::Actuate),
            ("intensity/*", PermissionClass::Actuate),
            ("rgb/*", PermissionClass::Actuate),
            ("config/*", PermissionClass::Configure),
        ])
    }

    pub fn classify(&self, cmd: &[u8]) -> Option<PermissionClass> {
        self.entries.iter().find(|(p, _)| p.matches(cmd)).map(|(_, c)| *c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclEntry {
    /// Application namespaces under this prefix are covered.
    pub prefix: String,
    /// Permitted command patterns; empty permits nothing.
    pub commands: Vec<CommandPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclBody {
    pub entries: Vec<AclEntry>,
}

/// A signed access-control list published by the authorization manager.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acl {
    pub name: Name,
    pub body: AclBody,
    pub carrier: ContentObject,
}

impl Acl {
    pub fn sign(am: &Signer, name: Name, body: AclBody, timestamp_ms: u64) -> Self {
        let payload = serde_json::to_vec(&body).expect("ACL body serializes");
        let carrier = am.sign(name.clone(), payload, timestamp_ms);
        Self { name, body, carrier }
    }

    /// Parses and verifies an ACL carrier against the root key.
    pub fn from_content(root_pk: &PublicKey, carrier: ContentObject) -> Option<Self> {
        if !crypto::verify_content(root_pk, &carrier).unwrap_or(false) {
            return None;
        }
        let body: AclBody = serde_json::from_slice(&carrier.payload).ok()?;
        Some(Self {
            name: carrier.name.clone(),
            body,
            carrier,
        })
    }

    pub fn permits(&self, app_ns: &Name, cmd: &[u8]) -> bool {
        self.body.entries.iter().any(|e| {
            Name::parse(&e.prefix).is_ok_and(|p| p.is_prefix_of(app_ns)) && e.commands.iter().any(|c| c.matches(cmd))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenyReason {
    Expired,
    AccessMissing,
    AccessInsufficient,
    AttributeConflict,
    BadAttribute,
    DomainMismatch,
    AclDenied,
}

impl DenyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenyReason::Expired => "expired",
            DenyReason::AccessMissing => "access-missing",
            DenyReason::AccessInsufficient => "access-insufficient",
            DenyReason::AttributeConflict => "attribute-conflict",
            DenyReason::BadAttribute => "bad-attribute",
            DenyReason::DomainMismatch => "domain-mismatch",
            DenyReason::AclDenied => "acl-denied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

/// Attribute check, then the ACL (if any). `domain` is the fixture's own
/// lighting domain; when set, a key naming another domain is denied.
pub fn evaluate_policy(
    attrs: &AttributeSet,
    acl: Option<&Acl>,
    app_ns: &Name,
    cmd: &[u8],
    class: PermissionClass,
    domain: Option<&[u8]>,
    now_unix: i64,
) -> Decision {
    let Ok(eff) = attrs.effective() else {
        return Decision::Deny(DenyReason::BadAttribute);
    };
    if eff.domain == Agreement::Conflict || eff.appname == Agreement::Conflict {
        return Decision::Deny(DenyReason::AttributeConflict);
    }
    if let (Some(want), Agreement::Value(have)) = (domain, &eff.domain) {
        if want != have.as_slice() {
            return Decision::Deny(DenyReason::DomainMismatch);
        }
    }
    if eff.expires.is_some_and(|t| now_unix > t) {
        return Decision::Deny(DenyReason::Expired);
    }
    match eff.access {
        None => return Decision::Deny(DenyReason::AccessMissing),
        Some(a) if a < class.required() => return Decision::Deny(DenyReason::AccessInsufficient),
        Some(_) => {}
    }
    if acl.is_some_and(|acl| !acl.permits(app_ns, cmd)) {
        return Decision::Deny(DenyReason::AclDenied);
    }
    Decision::Allow
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{KeyPair, SchemeTag};
    use crate::trust::attributes::parse_attributes;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    #[test]
    fn full_access_allows() {
        let ns = n("/dom/access/full-access/expires/20301231235959Z");
        let attrs = parse_attributes(&ns).unwrap();
        assert_eq!(
            evaluate_policy(&attrs, None, &ns, b"on", PermissionClass::Actuate, None, 0),
            Decision::Allow
        );
    }

    #[test]
    fn expired_denied() {
        let ns = n("/dom/access/full-access/expires/20151231235959Z");
        let attrs = parse_attributes(&ns).unwrap();
        let now = 1_451_606_400;
        assert_eq!(
            evaluate_policy(&attrs, None, &ns, b"on", PermissionClass::Actuate, None, now),
            Decision::Deny(DenyReason::Expired)
        );
        assert_eq!(
            evaluate_policy(&attrs, None, &ns, b"on", PermissionClass::Actuate, None, now - 1),
            Decision::Allow
        );
    }

    #[test]
    fn registry_patterns() {
        let r = CommandRegistry::lighting();
        assert_eq!(r.classify(b"on"), Some(PermissionClass::Actuate));
        assert_eq!(r.classify(b"intensity/+10/rgb-8bit-color/F0FF39"), Some(PermissionClass::Actuate));
        assert_eq!(r.classify(b"status"), Some(PermissionClass::Read));
        assert_eq!(r.classify(b"onn"), None);
    }

    #[test]
    fn acl_sign_and_check() {
        let am = Signer::root(KeyPair::from_seed(SchemeTag::NullTest, 9), n("/dom/root/key"));
        let acl = Acl::sign(
            &am,
            n("/dom/acl/fix1"),
            AclBody {
                entries: vec![AclEntry {
                    prefix: "/dom/app1".into(),
                    commands: vec![CommandPattern("on".into())],
                }],
            },
            0,
        );
        let back = Acl::from_content(am.keypair.public(), acl.carrier.clone()).unwrap();
        assert!(back.permits(&n("/dom/app1/access/actuate"), b"on"));
        assert!(!back.permits(&n("/dom/app1"), b"off"));
        assert!(!back.permits(&n("/dom/app2"), b"on"));
        let other = KeyPair::from_seed(SchemeTag::NullTest, 10);
        assert!(Acl::from_content(other.public(), acl.carrier).is_none());
    }
}
