//! Ack bodies. An ack is a content object named exactly like the command
//! interest it answers; the first payload byte selects the body.
//!
//! ```text
//! 0x00 status sync?             signed by the fixture key
//! 0x01 status                   signature field = HMAC(k_App, signed portion)
//! 0x02                          signature field = x (16 bytes)
//! 0x03 anchor(32) preimage(32) sync?   signature field = σ (anchor cert signature)
//! 0x04 reason detail            signed by the fixture key
//! sync? := 0x00 | 0x01 len(u16) cert-wire challenge(32)
//! ```
//! See `docs/acks.md`.

use thiserror::Error;

use crate::crypto::{hmac_sha256, hmac_sha256_verify};
use crate::name::Name;
use crate::packet::{decode_content, encode_content, ContentObject};
use crate::trust::Signer;

use super::chain::{ChainCert, Link};

pub const STATUS_EXECUTED: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSync {
    pub cert: ContentObject,
    /// Next challenge the app must present.
    pub challenge: Link,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AckBody {
    Signed { status: u8, sync: Option<ChainSync> },
    Mac { status: u8 },
    EncAnswer,
    ChainAnswer { anchor: Link, preimage: Link, refill: Option<ChainSync> },
    Reject { reason: u8, detail: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed ack body")]
pub struct BadAck;

fn put_sync(out: &mut Vec<u8>, sync: &Option<ChainSync>) {
    match sync {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            let wire = encode_content(&s.cert);
            out.extend_from_slice(&(wire.len() as u16).to_be_bytes());
            out.extend_from_slice(&wire);
            out.extend_from_slice(&s.challenge);
        }
    }
}

fn get_sync(b: &[u8]) -> Result<Option<ChainSync>, BadAck> {
    match b.split_first() {
        Some((0, [])) => Ok(None),
        Some((1, rest)) if rest.len() >= 2 => {
            let n = usize::from(u16::from_be_bytes([rest[0], rest[1]]));
            let rest = &rest[2..];
            if rest.len() != n + 32 {
                return Err(BadAck);
            }
            let cert = decode_content(&rest[..n]).map_err(|_| BadAck)?;
            Ok(Some(ChainSync {
                cert,
                challenge: rest[n..].try_into().expect("32"),
            }))
        }
        _ => Err(BadAck),
    }
}

impl AckBody {
    pub fn tag(&self) -> u8 {
        match self {
            AckBody::Signed { .. } => 0x00,
            AckBody::Mac { .. } => 0x01,
            AckBody::EncAnswer => 0x02,
            AckBody::ChainAnswer { .. } => 0x03,
            AckBody::Reject { .. } => 0x04,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.tag()];
        match self {
            AckBody::Signed { status, sync } => {
                out.push(*status);
                put_sync(&mut out, sync);
            }
            AckBody::Mac { status } => out.push(*status),
            AckBody::EncAnswer => {}
            AckBody::ChainAnswer { anchor, preimage, refill } => {
                out.extend_from_slice(anchor);
                out.extend_from_slice(preimage);
                put_sync(&mut out, refill);
            }
            AckBody::Reject { reason, detail } => {
                out.push(*reason);
                out.push(*detail);
            }
        }
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, BadAck> {
        let (&tag, rest) = b.split_first().ok_or(BadAck)?;
        match (tag, rest) {
            (0x00, [status, sync @ ..]) => Ok(AckBody::Signed {
                status: *status,
                sync: get_sync(sync)?,
            }),
            (0x01, [status]) => Ok(AckBody::Mac { status: *status }),
            (0x02, []) => Ok(AckBody::EncAnswer),
            (0x03, r) if r.len() >= 65 => Ok(AckBody::ChainAnswer {
                anchor: r[..32].try_into().expect("32"),
                preimage: r[32..64].try_into().expect("32"),
                refill: get_sync(&r[64..])?,
            }),
            (0x04, [reason, detail]) => Ok(AckBody::Reject {
                reason: *reason,
                detail: *detail,
            }),
            _ => Err(BadAck),
        }
    }
}

pub fn ack_signed(signer: &Signer, name: Name, body: &AckBody, ts: u64) -> ContentObject {
    signer.sign(name, body.encode(), ts)
}

pub fn ack_mac(k_app: &[u8; 32], key_locator: Name, name: Name, status: u8, ts: u64) -> ContentObject {
    let mut obj = ContentObject::unsigned(name, AckBody::Mac { status }.encode(), key_locator, ts);
    obj.signature = hmac_sha256(k_app, &obj.signed_portion()).to_vec();
    obj
}

pub fn verify_mac_ack(k_app: &[u8; 32], obj: &ContentObject) -> bool {
    hmac_sha256_verify(k_app, &obj.signed_portion(), &obj.signature)
}

pub fn ack_enc(name: Name, key_locator: Name, x: [u8; 16], ts: u64) -> ContentObject {
    let mut obj = ContentObject::unsigned(name, AckBody::EncAnswer.encode(), key_locator, ts);
    obj.signature = x.to_vec();
    obj
}

pub fn ack_chain(name: Name, cert: &ChainCert, preimage: Link, refill: Option<ChainSync>, ts: u64) -> ContentObject {
    let body = AckBody::ChainAnswer {
        anchor: cert.anchor,
        preimage,
        refill,
    };
    let mut obj = ContentObject::unsigned(name, body.encode(), cert.carrier.name.clone(), ts);
    obj.signature = cert.sigma().to_vec();
    obj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bodies_round_trip() {
        let cert = ContentObject::unsigned(Name::parse("/f/chain").unwrap(), vec![1; 40], Name::new(), 3);
        let sync = Some(ChainSync {
            cert,
            challenge: [4; 32],
        });
        let bodies = [
            AckBody::Signed { status: 0, sync: None },
            AckBody::Signed {
                status: 0,
                sync: sync.clone(),
            },
            AckBody::Mac { status: 0 },
            AckBody::EncAnswer,
            AckBody::ChainAnswer {
                anchor: [1; 32],
                preimage: [2; 32],
                refill: None,
            },
            AckBody::ChainAnswer {
                anchor: [1; 32],
                preimage: [2; 32],
                refill: sync,
            },
            AckBody::Reject { reason: 5, detail: 0 },
        ];
        for b in bodies {
            assert_eq!(AckBody::decode(&b.encode()).unwrap(), b);
        }
        assert!(AckBody::decode(&[]).is_err());
        assert!(AckBody::decode(&[0x02, 0]).is_err());
        assert!(AckBody::decode(&[0x09]).is_err());
    }

    #[test]
    fn mac_ack_binds_name() {
        let k = [6u8; 32];
        let a = ack_mac(&k, Name::new(), Name::parse("/f/x").unwrap(), 0, 0);
        assert!(verify_mac_ack(&k, &a));
        let mut b = a.clone();
        b.name = Name::parse("/f/y").unwrap();
        assert!(!verify_mac_ack(&k, &b));
        assert!(!verify_mac_ack(&[7; 32], &a));
    }
}
