//! Key attributes encoded in namespaces as `attribute-name/value` pairs,
//! e.g. `/org/site/domain/lighting-1/appname/board-1/access/full-access/expires/20151231235959Z/key`.
//!
//! Repeated attributes combine by intersection: `expires` keeps the earliest
//! instant, `access` the least privilege, `domain` and `appname` must agree.

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::name::Name;

use super::keys::KEY_COMPONENT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Domain,
    AppName,
    Access,
    Expires,
}

impl Attr {
    pub const ALL: [Attr; 4] = [Attr::Domain, Attr::AppName, Attr::Access, Attr::Expires];

    pub fn as_bytes(self) -> &'static [u8] {
        match self {
            Attr::Domain => b"domain",
            Attr::AppName => b"appname",
            Attr::Access => b"access",
            Attr::Expires => b"expires",
        }
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        Attr::ALL.into_iter().find(|a| a.as_bytes() == b)
    }
}

/// Access levels, ordered by privilege.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Access {
    ReadOnly,
    Actuate,
    FullAccess,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::ReadOnly => "read-only",
            Access::Actuate => "actuate",
            Access::FullAccess => "full-access",
        }
    }

    pub fn parse(b: &[u8]) -> Option<Self> {
        match b {
            b"read-only" => Some(Access::ReadOnly),
            b"actuate" => Some(Access::Actuate),
            b"full-access" => Some(Access::FullAccess),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttrError {
    #[error("attribute name without a value")]
    DanglingAttributeName,
    #[error("namespace is not under the configured domain prefix")]
    OutsidePrefix,
    #[error("expires value {0:?} is not YYYYMMDDHHMMSSZ")]
    BadExpires(String),
    #[error("unknown access value {0:?}")]
    BadAccess(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeSet {
    /// All pairs in name order, recognized or not.
    pub pairs: Vec<(Vec<u8>, Vec<u8>)>,
}

/// Result of combining every instance of a single-valued attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Agreement {
    Absent,
    Value(Vec<u8>),
    /// Instances disagree; the intersection is empty.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effective {
    pub domain: Agreement,
    pub appname: Agreement,
    pub access: Option<Access>,
    /// Unix seconds; `None` means no expiry.
    pub expires: Option<i64>,
}

/// Parses strict generalized time (`YYYYMMDDHHMMSSZ`) to Unix seconds.
pub fn parse_generalized_time(b: &[u8]) -> Option<i64> {
    if b.len() != 15 || b[14] != b'Z' || !b[..14].iter().all(u8::is_ascii_digit) {
        return None;
    }
    let s = std::str::from_utf8(&b[..14]).ok()?;
    NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M%S")
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_generalized_time(unix: i64) -> String {
    chrono::DateTime::from_timestamp(unix, 0)
        .expect("timestamp in range")
        .format("%Y%m%d%H%M%SZ")
        .to_string()
}

fn pairs_of(region: &[Vec<u8>]) -> Result<AttributeSet, AttrError> {
    let region = match region.last() {
        Some(last) if last == KEY_COMPONENT => &region[..region.len() - 1],
        _ => region,
    };
    if region.len() % 2 != 0 {
        return Err(AttrError::DanglingAttributeName);
    }
    Ok(AttributeSet {
        pairs: region.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect(),
    })
}

/// Attribute region starts at the first recognized attribute name.
pub fn parse_attributes(namespace: &Name) -> Result<AttributeSet, AttrError> {
    let comps = namespace.components();
    match comps.iter().position(|c| Attr::from_bytes(c).is_some()) {
        Some(start) => pairs_of(&comps[start..]),
        None => Ok(AttributeSet::default()),
    }
}

/// Attribute region is everything after `domain_prefix`.
pub fn parse_attributes_under(domain_prefix: &Name, namespace: &Name) -> Result<AttributeSet, AttrError> {
    if !domain_prefix.is_prefix_of(namespace) {
        return Err(AttrError::OutsidePrefix);
    }
    pairs_of(&namespace.components()[domain_prefix.len()..])
}

impl AttributeSet {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn values(&self, attr: Attr) -> impl Iterator<Item = &[u8]> {
        self.pairs
            .iter()
            .filter(move |(k, _)| k.as_slice() == attr.as_bytes())
            .map(|(_, v)| v.as_slice())
    }

    fn agree(&self, attr: Attr) -> Agreement {
        let mut vals = self.values(attr);
        let Some(first) = vals.next() else {
            return Agreement::Absent;
        };
        if vals.all(|v| v == first) {
            Agreement::Value(first.to_vec())
        } else {
            Agreement::Conflict
        }
    }

    pub fn effective(&self) -> Result<Effective, AttrError> {
        let mut access = None::<Access>;
        for v in self.values(Attr::Access) {
            let a = Access::parse(v).ok_or_else(|| AttrError::BadAccess(String::from_utf8_lossy(v).into_owned()))?;
            access = Some(access.map_or(a, |cur| cur.min(a)));
        }
        let mut expires = None::<i64>;
        for v in self.values(Attr::Expires) {
            let t = parse_generalized_time(v)
                .ok_or_else(|| AttrError::BadExpires(String::from_utf8_lossy(v).into_owned()))?;
            expires = Some(expires.map_or(t, |cur| cur.min(t)));
        }
        Ok(Effective {
            domain: self.agree(Attr::Domain),
            appname: self.agree(Attr::AppName),
            access,
            expires,
        })
    }
}

/// Appends `attr/value` pairs to `base`.
pub fn with_attributes(base: &Name, attrs: &[(Attr, &[u8])]) -> Result<Name, crate::name::NameError> {
    let mut n = base.clone();
    for (a, v) in attrs {
        n.push(a.as_bytes())?;
        n.push(v.to_vec())?;
    }
    Ok(n)
}
