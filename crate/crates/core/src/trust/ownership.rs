//! Namespace ownership: challenge nonces and certificate-path proofs.
//!
//! A proof is a response object named `namespace/nonce` plus the chain of
//! key records from a root-signed record down to the key that signed the
//! response. Each record after the first must be signed by the previous
//! record's key and live strictly inside the previous record's namespace.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::crypto;
use crate::name::Name;
use crate::packet::ContentObject;

use super::keys::{KeyRecord, Signer, TrustError, TrustRoot};

pub const NONCE_LEN: usize = 16;
pub const NONCE_TTL_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnershipProof {
    pub nonce: Vec<u8>,
    pub response: ContentObject,
    /// Root-signed record first, signer's record last.
    pub path: Vec<ContentObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProofFailure {
    NonceMismatch,
    ResponseName,
    EmptyPath,
    NotAKeyRecord(usize),
    BadSignature(usize),
    /// Record `i` is not inside the namespace of record `i - 1`.
    PrefixViolation(usize),
    KeyLocator(usize),
    ResponseOutsideNamespace,
    BadResponseSignature,
}

/// Builds a proof for `namespace` answering `nonce`. `path` runs from the
/// root-signed record to the record of `signer`.
pub fn prove_ownership(
    signer: &Signer,
    path: &[KeyRecord],
    namespace: &Name,
    nonce: &[u8],
    timestamp_ms: u64,
) -> Result<OwnershipProof, TrustError> {
    let last = path.last().ok_or_else(|| TrustError::NoUsableKey(namespace.clone()))?;
    if &last.pk != signer.keypair.public() || !last.namespace.is_prefix_of(namespace) {
        return Err(TrustError::NoUsableKey(namespace.clone()));
    }
    let response_name = namespace
        .child(nonce.to_vec())
        .map_err(|_| TrustError::NoUsableKey(namespace.clone()))?;
    let response = signer.sign(response_name, Vec::new(), timestamp_ms);
    Ok(OwnershipProof {
        nonce: nonce.to_vec(),
        response,
        path: path.iter().map(|r| r.carrier.clone()).collect(),
    })
}

/// Full check with a reason on failure.
pub fn check_ownership(root: &TrustRoot, namespace: &Name, nonce: &[u8], proof: &OwnershipProof) -> Result<(), ProofFailure> {
    if proof.nonce != nonce {
        return Err(ProofFailure::NonceMismatch);
    }
    if namespace.child(nonce.to_vec()).ok().as_ref() != Some(&proof.response.name) {
        return Err(ProofFailure::ResponseName);
    }
    if proof.path.is_empty() {
        return Err(ProofFailure::EmptyPath);
    }
    let mut signer_pk = root.pk.clone();
    let mut parent: Option<KeyRecord> = None;
    for (i, carrier) in proof.path.iter().enumerate() {
        let rec = KeyRecord::from_carrier(carrier.clone()).map_err(|_| ProofFailure::NotAKeyRecord(i))?;
        if let Some(p) = &parent {
            if carrier.key_locator != p.carrier.name {
                return Err(ProofFailure::KeyLocator(i));
            }
            if !p.namespace.is_prefix_of(&rec.namespace) {
                return Err(ProofFailure::PrefixViolation(i));
            }
        }
        if !crypto::verify_content(&signer_pk, carrier).unwrap_or(false) {
            return Err(ProofFailure::BadSignature(i));
        }
        signer_pk = rec.pk.clone();
        parent = Some(rec);
    }
    let last = parent.expect("path is non-empty");
    if proof.response.key_locator != last.carrier.name {
        return Err(ProofFailure::KeyLocator(proof.path.len()));
    }
    if !last.namespace.is_prefix_of(namespace) {
        return Err(ProofFailure::ResponseOutsideNamespace);
    }
    if !crypto::verify_content(&last.pk, &proof.response).unwrap_or(false) {
        return Err(ProofFailure::BadResponseSignature);
    }
    Ok(())
}

pub fn verify_ownership(root: &TrustRoot, namespace: &Name, nonce: &[u8], proof: &OwnershipProof) -> bool {
    check_ownership(root, namespace, nonce, proof).is_ok()
}

/// Verifies a single key record against the root by walking `path`, which
/// must end with `record` itself.
pub fn verify_key_path(root: &TrustRoot, path: &[ContentObject]) -> Option<KeyRecord> {
    let mut signer_pk = root.pk.clone();
    let mut parent: Option<KeyRecord> = None;
    for carrier in path {
        let rec = KeyRecord::from_carrier(carrier.clone()).ok()?;
        if let Some(p) = &parent {
            if carrier.key_locator != p.carrier.name || !p.namespace.is_prefix_of(&rec.namespace) {
                return None;
            }
        }
        if !crypto::verify_content(&signer_pk, carrier).unwrap_or(false) {
            return None;
        }
        signer_pk = rec.pk.clone();
        parent = Some(rec);
    }
    parent
}

const TLV_PATH_ENTRY: u8 = 0x30;

/// Serializes a key path for carrying inside a response payload.
pub fn encode_path(path: &[ContentObject]) -> Vec<u8> {
    let mut out = Vec::new();
    for c in path {
        crate::tlv::put_tlv(&mut out, TLV_PATH_ENTRY, &crate::packet::encode_content(c));
    }
    out
}

pub fn decode_path(buf: &[u8]) -> Option<Vec<ContentObject>> {
    let mut r = crate::tlv::Reader::new(buf);
    let mut path = Vec::new();
    while !r.is_empty() {
        let wire = r.expect(TLV_PATH_ENTRY).ok()?;
        path.push(crate::packet::decode_content(wire).ok()?);
    }
    Some(path)
}

/// Outstanding challenge nonces, each redeemable once before it expires.
#[derive(Debug, Clone, Default)]
pub struct NonceBook {
    outstanding: BTreeMap<Vec<u8>, u64>,
    ttl_ms: u64,
}

impl NonceBook {
    pub fn new(ttl_ms: u64) -> Self {
        Self {
            outstanding: BTreeMap::new(),
            ttl_ms,
        }
    }

    pub fn issue<R: RngCore + ?Sized>(&mut self, rng: &mut R, now: u64) -> Vec<u8> {
        self.evict(now);
        let mut nonce = vec![0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        self.outstanding.insert(nonce.clone(), now + self.ttl_ms);
        nonce
    }

    pub fn is_outstanding(&self, nonce: &[u8], now: u64) -> bool {
        self.outstanding.get(nonce).is_some_and(|&exp| now < exp)
    }

    /// Consumes `nonce`; false if it was never issued, already used or expired.
    pub fn redeem(&mut self, nonce: &[u8], now: u64) -> bool {
        match self.outstanding.remove(nonce) {
            Some(exp) => now < exp,
            None => false,
        }
    }

    pub fn evict(&mut self, now: u64) {
        self.outstanding.retain(|_, exp| now < *exp);
    }

    pub fn len(&self) -> usize {
        self.outstanding.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outstanding.is_empty()
    }
}
