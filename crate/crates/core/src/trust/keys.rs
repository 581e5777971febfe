//! Key records: a public key published as a content object at
//! `namespace/key`, signed by the trust root or by the owner of an
//! ancestor namespace.

use thiserror::Error;

use crate::crypto::{self, CryptoError, KeyPair, PublicKey};
use crate::name::Name;
use crate::packet::ContentObject;

pub const KEY_COMPONENT: &[u8] = b"key";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("signer may not publish keys under {0}")]
    NotAuthorized(Name),
    #[error("no key usable for {0}")]
    NoUsableKey(Name),
    #[error("content object {0} is not a key record")]
    NotAKeyRecord(Name),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// The trust anchor: the root public key and the name it is published under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustRoot {
    pub pk: PublicKey,
    pub key_name: Name,
}

/// A signing identity: a key pair plus the record that certifies it.
/// `namespace` is `None` for the root, which may sign anything.
#[derive(Debug, Clone)]
pub struct Signer {
    pub keypair: KeyPair,
    pub key_name: Name,
    pub namespace: Option<Name>,
}

impl Signer {
    pub fn root(keypair: KeyPair, key_name: Name) -> Self {
        Self {
            keypair,
            key_name,
            namespace: None,
        }
    }

    /// The identity holding the private half of `record`.
    pub fn owner(keypair: KeyPair, record: &KeyRecord) -> Result<Self, TrustError> {
        if keypair.public() != &record.pk {
            return Err(TrustError::NoUsableKey(record.namespace.clone()));
        }
        Ok(Self {
            keypair,
            key_name: record.carrier.name.clone(),
            namespace: Some(record.namespace.clone()),
        })
    }

    pub fn trust_root(&self) -> TrustRoot {
        TrustRoot {
            pk: self.keypair.public().clone(),
            key_name: self.key_name.clone(),
        }
    }

    pub fn may_sign_under(&self, namespace: &Name) -> bool {
        self.namespace.as_ref().is_none_or(|own| own.is_prefix_of(namespace))
    }

    /// Signs an arbitrary object with this identity's key locator.
    pub fn sign(&self, name: Name, payload: Vec<u8>, timestamp_ms: u64) -> ContentObject {
        let obj = ContentObject::unsigned(name, payload, self.key_name.clone(), timestamp_ms);
        crypto::sign_content(&self.keypair, obj).expect("fresh object is unsigned")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRecord {
    pub namespace: Name,
    pub pk: PublicKey,
    pub carrier: ContentObject,
}

impl KeyRecord {
    /// Reads a record back from its carrier without checking the signature.
    pub fn from_carrier(carrier: ContentObject) -> Result<Self, TrustError> {
        let name = &carrier.name;
        if name.last() != Some(KEY_COMPONENT) {
            return Err(TrustError::NotAKeyRecord(name.clone()));
        }
        let pk = PublicKey::decode(&carrier.payload).map_err(|_| TrustError::NotAKeyRecord(name.clone()))?;
        Ok(Self {
            namespace: name.prefix(name.len() - 1),
            pk,
            carrier,
        })
    }

    pub fn verify_under(&self, signer_pk: &PublicKey) -> bool {
        crypto::verify_content(signer_pk, &self.carrier).unwrap_or(false)
    }
}

/// `namespace/key`.
pub fn key_name(namespace: &Name) -> Name {
    namespace.child(KEY_COMPONENT).expect("namespace has room for the key component")
}

pub fn publish_key(signer: &Signer, namespace: &Name, pk: &PublicKey, timestamp_ms: u64) -> Result<KeyRecord, TrustError> {
    if !signer.may_sign_under(namespace) {
        return Err(TrustError::NotAuthorized(namespace.clone()));
    }
    let carrier = signer.sign(key_name(namespace), pk.encode(), timestamp_ms);
    Ok(KeyRecord {
        namespace: namespace.clone(),
        pk: pk.clone(),
        carrier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SchemeTag;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    #[test]
    fn root_and_delegation() {
        let root = Signer::root(KeyPair::from_seed(SchemeTag::NullTest, 0), n("/dom/root/key"));
        let app_kp = KeyPair::from_seed(SchemeTag::NullTest, 1);
        let rec = publish_key(&root, &n("/dom/app1"), app_kp.public(), 0).unwrap();
        assert_eq!(rec.carrier.name, n("/dom/app1/key"));
        assert!(rec.verify_under(root.keypair.public()));
        assert_eq!(KeyRecord::from_carrier(rec.carrier.clone()).unwrap(), rec);

        let owner = Signer::owner(app_kp, &rec).unwrap();
        let sub = KeyPair::from_seed(SchemeTag::NullTest, 2);
        let sub_rec = publish_key(&owner, &n("/dom/app1/sub"), sub.public(), 0).unwrap();
        assert_eq!(sub_rec.carrier.key_locator, n("/dom/app1/key"));
        assert_eq!(
            publish_key(&owner, &n("/dom/app2"), sub.public(), 0).unwrap_err(),
            TrustError::NotAuthorized(n("/dom/app2"))
        );
    }
}
