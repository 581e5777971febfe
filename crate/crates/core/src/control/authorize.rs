//! Application authorization by the authorization manager: the app's key
//! is published under a namespace that spells out its permissions.

use crate::crypto::PublicKey;
use crate::trust::attributes::{format_generalized_time, with_attributes, Access, Attr};
use crate::trust::{publish_key, KeyRecord, Signer, TrustError};
use crate::name::Name;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub domain: Option<Vec<u8>>,
    pub appname: Vec<u8>,
    pub access: Access,
    /// Unix seconds.
    pub expires: Option<i64>,
}

/// `base/domain/D/appname/A/access/P[/expires/T]`.
pub fn grant_namespace(base: &Name, grant: &Grant) -> Result<Name, TrustError> {
    let expires = grant.expires.map(format_generalized_time);
    let mut attrs: Vec<(Attr, &[u8])> = Vec::new();
    if let Some(d) = &grant.domain {
        attrs.push((Attr::Domain, d));
    }
    attrs.push((Attr::AppName, &grant.appname));
    attrs.push((Attr::Access, grant.access.as_str().as_bytes()));
    if let Some(t) = &expires {
        attrs.push((Attr::Expires, t.as_bytes()));
    }
    with_attributes(base, &attrs).map_err(|_| TrustError::NotAuthorized(base.clone()))
}

/// Publishes `app_pk` under the attribute-bearing namespace for `grant`.
pub fn authorize_app(am: &Signer, base: &Name, app_pk: &PublicKey, grant: &Grant, ts: u64) -> Result<KeyRecord, TrustError> {
    let ns = grant_namespace(base, grant)?;
    publish_key(am, &ns, app_pk, ts)
}
