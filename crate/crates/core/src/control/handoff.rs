//! Delivery of `k_App` to an application that has proven it owns its
//! namespace.
//!
//! ```text
//! App -> Fix  interest name_fix/handoff/count/name_app/nonce
//! Fix -> App  interest name_app/challenge
//! App -> Fix  content  name_app/challenge, payload = key path, signed by App
//! Fix -> App  content  (handoff name), payload = 0x00 RSA-OAEP(pk_App, k_App) | 0x01, signed by Fix
//! ```

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{self, KeyPair, PublicKey};
use crate::name::{Name, NameError};
use crate::packet::ContentObject;
use crate::trust::ownership::{check_ownership, decode_path, encode_path, OwnershipProof};
use crate::trust::{KeyRecord, Signer};

use super::fixture::FixtureState;

pub const HANDOFF_COMPONENT: &[u8] = b"handoff";
const STATUS_OK: u8 = 0;
const STATUS_OWNERSHIP_FAILED: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HandoffError {
    #[error("ownership verification failed")]
    OwnershipFailed,
    #[error("handoff reply signature does not verify")]
    BadSignature,
    #[error("cannot decrypt the delivered key")]
    DecryptFailed,
    #[error("malformed handoff message")]
    Malformed,
}

pub fn handoff_name(name_fix: &Name, name_app: &Name, nonce: &[u8]) -> Result<Name, NameError> {
    let mut n = name_fix.child(HANDOFF_COMPONENT)?;
    n.push(vec![name_app.len() as u8])?;
    n = n.join(name_app)?;
    n.push(nonce.to_vec())?;
    Ok(n)
}

/// The application named in a handoff request.
pub fn parse_handoff(name: &Name, name_fix: &Name) -> Option<Name> {
    if !name_fix.is_prefix_of(name) {
        return None;
    }
    let f = name_fix.len();
    if name.get(f)? != HANDOFF_COMPONENT {
        return None;
    }
    let [count] = name.get(f + 1)? else {
        return None;
    };
    let count = usize::from(*count);
    if name.len() != f + 2 + count + 1 || count == 0 {
        return None;
    }
    Some(name.slice(f + 2, f + 2 + count))
}

/// App side: the signed answer to an ownership challenge.
pub fn ownership_reply(signer: &Signer, path: &[KeyRecord], challenge: Name, ts: u64) -> ContentObject {
    let wires: Vec<ContentObject> = path.iter().map(|r| r.carrier.clone()).collect();
    signer.sign(challenge, encode_path(&wires), ts)
}

pub fn proof_from_reply(nonce: &[u8], reply: &ContentObject) -> Option<OwnershipProof> {
    Some(OwnershipProof {
        nonce: nonce.to_vec(),
        response: reply.clone(),
        path: decode_path(&reply.payload)?,
    })
}

/// App side: check the fixture's signature and recover `k_App`.
pub fn open_handoff(app: &KeyPair, fixture_pk: &PublicKey, reply: &ContentObject) -> Result<[u8; 32], HandoffError> {
    if !crypto::verify_content(fixture_pk, reply).unwrap_or(false) {
        return Err(HandoffError::BadSignature);
    }
    match reply.payload.split_first() {
        Some((&STATUS_OK, ct)) => {
            let pt = app.decrypt(ct).map_err(|_| HandoffError::DecryptFailed)?;
            pt.try_into().map_err(|_| HandoffError::Malformed)
        }
        Some((&STATUS_OWNERSHIP_FAILED, _)) => Err(HandoffError::OwnershipFailed),
        _ => Err(HandoffError::Malformed),
    }
}

/// The fixture's signed answer to a handoff request and whether the
/// key was delivered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandoffReply {
    pub content: ContentObject,
    pub result: Result<(), HandoffError>,
}

impl FixtureState {
    /// Checks the application's ownership reply and answers `request`. On
    /// success the app's key is also cached for Sig-mode commands.
    pub fn complete_handoff<R: RngCore + CryptoRng>(
        &mut self,
        request: &Name,
        nonce: &[u8],
        reply: &ContentObject,
        local_ms: u64,
        rng: &mut R,
    ) -> Result<HandoffReply, HandoffError> {
        let now = self.clock(local_ms);
        let name_app = parse_handoff(request, &self.name_fix).ok_or(HandoffError::Malformed)?;
        self.stats.sig_verifies += 1;
        let app_pk = proof_from_reply(nonce, reply)
            .filter(|p| check_ownership(&self.trusted_root, &name_app, nonce, p).is_ok())
            .and_then(|p| KeyRecord::from_carrier(p.path.last()?.clone()).ok())
            .map(|r| r.pk);
        self.stats.signatures += 1;
        let Some(app_pk) = app_pk else {
            return Ok(HandoffReply {
                content: self.signer().sign(request.clone(), vec![STATUS_OWNERSHIP_FAILED], now),
                result: Err(HandoffError::OwnershipFailed),
            });
        };
        let k_app = self.app_key(&name_app);
        let ct = app_pk.encrypt(rng, &k_app).map_err(|_| HandoffError::Malformed)?;
        self.cache_app_key(name_app, app_pk);
        let mut payload = vec![STATUS_OK];
        payload.extend_from_slice(&ct);
        Ok(HandoffReply {
            content: self.signer().sign(request.clone(), payload, now),
            result: Ok(()),
        })
    }
}
