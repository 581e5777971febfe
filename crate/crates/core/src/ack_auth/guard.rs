//! Router-side ack check for the publicly verifiable schemes.

use crate::crypto::sha256;
use crate::forwarder::AckGuard;
use crate::name::Name;
use crate::packet::ContentObject;
use crate::control::token::{AckRequest, AuthToken};

use super::ack::AckBody;
use super::enc::router_verify_enc_ack;

/// Remembers `z` (encrypted challenge) or the chain challenge from a
/// command's token and admits only content that answers it. Signed
/// rejections pass; the app checks their signature.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashAckGuard;

impl AckGuard for HashAckGuard {
    fn tag(&self, interest_name: &Name) -> Option<Vec<u8>> {
        let token = AuthToken::decode(interest_name.last()?).ok()?;
        match token.ack {
            AckRequest::Enc { z, .. } => Some([&[0x02u8][..], &z].concat()),
            AckRequest::Chain { challenge } => Some([&[0x03u8][..], &challenge].concat()),
            _ => None,
        }
    }

    fn check(&self, tag: &[u8], content: &ContentObject) -> bool {
        let Some((&kind, expected)) = tag.split_first() else {
            return true;
        };
        let Ok(expected) = <[u8; 32]>::try_from(expected) else {
            return true;
        };
        match (kind, AckBody::decode(&content.payload)) {
            (_, Ok(AckBody::Reject { .. })) => true,
            (0x02, Ok(AckBody::EncAnswer)) => router_verify_enc_ack(&expected, &content.signature),
            (0x03, Ok(AckBody::ChainAnswer { preimage, .. })) => sha256(&preimage) == expected,
            _ => false,
        }
    }
}
