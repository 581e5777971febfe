//! Hash-chain acks with fixed-stride pebbling.
//!
//! `H^0(x) = x`, `H^i(x) = H(H^{i-1}(x))`, anchor `H^ℓ(x)`. The fixture
//! hands out links from the anchor toward the seed: an app presenting
//! challenge `H^i(x)` is answered with `H^{i-1}(x)`. Links at every
//! `stride`-th index are stored so an answer costs at most `stride - 1`
//! hash evaluations.

use thiserror::Error;

use crate::crypto::{self, sha256, PublicKey};
use crate::name::Name;
use crate::packet::ContentObject;
use crate::trust::Signer;

pub const DEFAULT_CHAIN_LEN: u32 = 10_000;
pub const DEFAULT_STRIDE: u32 = 100;
pub type Link = [u8; 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("challenge is not the current link")]
    NotCurrent,
    #[error("chain exhausted")]
    Exhausted,
    #[error("anchor certificate invalid")]
    BadCertificate,
}

/// `H^n(x)`.
pub fn iterate(x: &Link, n: u32) -> Link {
    let mut v = *x;
    for _ in 0..n {
        v = sha256(&v);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Answer {
    pub preimage: Link,
    /// Hash evaluations this answer cost.
    pub hashes: u32,
    /// Served from the retransmission cache.
    pub cached: bool,
}

#[derive(Debug, Clone)]
pub struct HashChain {
    len: u32,
    stride: u32,
    /// `pebbles[k] = H^{k·stride}(seed)`.
    pebbles: Vec<Link>,
    anchor: Link,
    cursor: u32,
    current: Link,
    last: Option<(Link, Link)>,
    hashes: u64,
}

impl HashChain {
    pub fn create(seed: Link, len: u32, stride: u32) -> Self {
        assert!(len >= 1 && stride >= 1, "chain length and stride must be positive");
        let mut pebbles = Vec::with_capacity((len / stride) as usize + 1);
        let mut v = seed;
        for i in 0..=len {
            if i % stride == 0 {
                pebbles.push(v);
            }
            if i < len {
                v = sha256(&v);
            }
        }
        Self {
            len,
            stride,
            pebbles,
            anchor: v,
            cursor: len,
            current: v,
            last: None,
            hashes: u64::from(len),
        }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn pebble_count(&self) -> usize {
        self.pebbles.len()
    }

    pub fn anchor(&self) -> Link {
        self.anchor
    }

    /// Index of the current challenge.
    pub fn cursor(&self) -> u32 {
        self.cursor
    }

    pub fn current_challenge(&self) -> Link {
        self.current
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor == 0
    }

    /// Total hash evaluations, including creation.
    pub fn hash_count(&self) -> u64 {
        self.hashes
    }

    /// `H^i(seed)` from the nearest pebble at or below `i`.
    pub fn link(&self, i: u32) -> (Link, u32) {
        assert!(i <= self.len);
        let k = i / self.stride;
        let steps = i - k * self.stride;
        (iterate(&self.pebbles[k as usize], steps), steps)
    }

    /// `H^i(seed)` recomputed from the seed with no pebbles.
    pub fn link_from_seed(&self, i: u32) -> Link {
        iterate(&self.pebbles[0], i)
    }

    fn step_down(&mut self) -> Result<(Link, u32), ChainError> {
        if self.cursor == 0 {
            return Err(ChainError::Exhausted);
        }
        let (p, steps) = self.link(self.cursor - 1);
        self.hashes += u64::from(steps);
        self.cursor -= 1;
        self.current = p;
        Ok((p, steps))
    }

    /// Answers `challenge` with its preimage. Repeating the last answered
    /// challenge returns the cached preimage at no cost.
    pub fn answer(&mut self, challenge: &Link) -> Result<Answer, ChainError> {
        if let Some((c, p)) = self.last {
            if &c == challenge {
                return Ok(Answer {
                    preimage: p,
                    hashes: 0,
                    cached: true,
                });
            }
        }
        if challenge != &self.current {
            return Err(ChainError::NotCurrent);
        }
        let (p, steps) = self.step_down()?;
        self.last = Some((*challenge, p));
        Ok(Answer {
            preimage: p,
            hashes: steps,
            cached: false,
        })
    }

    /// Skips one link so the next challenge has never been handed out,
    /// and returns it.
    pub fn burn(&mut self) -> Result<Link, ChainError> {
        self.step_down()?;
        self.last = None;
        Ok(self.current)
    }
}

/// Number of hash steps from `p` to `anchor`, if reached within `max`.
pub fn steps_to_anchor(p: &Link, anchor: &Link, max: u32) -> Option<u32> {
    let mut v = *p;
    for steps in 0..=max {
        if &v == anchor {
            return Some(steps);
        }
        v = sha256(&v);
    }
    None
}

/// Parsed anchor certificate: binds an anchor and length to a fixture and
/// the one application the chain serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCert {
    pub anchor: Link,
    pub len: u32,
    pub name_fix: Name,
    pub name_app: Name,
    pub carrier: ContentObject,
}

impl ChainCert {
    pub fn issue(signer: &Signer, name_fix: &Name, name_app: &Name, generation: u32, anchor: Link, len: u32, ts: u64) -> Self {
        let name = name_fix
            .child(&b"chain"[..])
            .and_then(|n| n.child(sha256(&name_app.encode())[..8].to_vec()))
            .and_then(|n| n.child(generation.to_be_bytes().to_vec()))
            .expect("fixture name has room for the certificate suffix");
        let mut payload = anchor.to_vec();
        payload.extend_from_slice(&len.to_be_bytes());
        name_fix.encode_into(&mut payload);
        name_app.encode_into(&mut payload);
        let carrier = signer.sign(name, payload, ts);
        Self {
            anchor,
            len,
            name_fix: name_fix.clone(),
            name_app: name_app.clone(),
            carrier,
        }
    }

    pub fn parse(carrier: ContentObject) -> Result<Self, ChainError> {
        let p = &carrier.payload;
        if p.len() < 36 {
            return Err(ChainError::BadCertificate);
        }
        let anchor: Link = p[..32].try_into().expect("32");
        let len = u32::from_be_bytes(p[32..36].try_into().expect("4"));
        let mut r = crate::tlv::Reader::new(&p[36..]);
        let name_fix = Name::read(&mut r).map_err(|_| ChainError::BadCertificate)?;
        let name_app = Name::read(&mut r).map_err(|_| ChainError::BadCertificate)?;
        r.finish().map_err(|_| ChainError::BadCertificate)?;
        Ok(Self {
            anchor,
            len,
            name_fix,
            name_app,
            carrier,
        })
    }

    /// Parses and checks the signature under the fixture's (or AM's) key.
    pub fn verify(carrier: ContentObject, signer_pk: &PublicKey) -> Result<Self, ChainError> {
        if !crypto::verify_content(signer_pk, &carrier).unwrap_or(false) {
            return Err(ChainError::BadCertificate);
        }
        Self::parse(carrier)
    }

    /// σ in the ack tuple.
    pub fn sigma(&self) -> &[u8] {
        &self.carrier.signature
    }
}

/// Full verification of a revealed link against a certified anchor.
pub fn chain_verify(cert: &ChainCert, challenge: &Link, preimage: &Link) -> bool {
    &sha256(preimage) == challenge && steps_to_anchor(preimage, &cert.anchor, cert.len).is_some()
}
