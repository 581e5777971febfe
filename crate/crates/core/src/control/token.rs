//! Auth tokens: replay state, the requested ack scheme, and an
//! authenticator, packed into the last component of a command name.
//!
//! ```text
//! token   := state(20) ack_req auth
//! state   := seq u64 | ts_sec u32 | ts_usec u32 | rtt_ms u32      (big-endian)
//! ack_req := 0x00                        signed ack
//!          | 0x01                        MAC'd ack
//!          | 0x02 z(32) y(16)            encrypted challenge
//!          | 0x03 challenge(32)          hash-chain answer
//!          | 0x04                        signed ack carrying chain sync
//! auth    := 0x01 tagged-signature | 0x02 hmac(32)
//! ```
//! See `docs/token.md`.

use thiserror::Error;

pub const STATE_LEN: usize = 20;
pub const MAC_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ReplayState {
    pub seq: u64,
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub rtt_ms: u32,
}

impl ReplayState {
    pub fn at(seq: u64, time_ms: u64, rtt_ms: u32) -> Self {
        Self {
            seq,
            ts_sec: (time_ms / 1000) as u32,
            ts_usec: ((time_ms % 1000) * 1000) as u32,
            rtt_ms,
        }
    }

    pub fn time_ms(&self) -> u64 {
        u64::from(self.ts_sec) * 1000 + u64::from(self.ts_usec) / 1000
    }

    pub fn encode(&self) -> [u8; STATE_LEN] {
        let mut out = [0u8; STATE_LEN];
        out[..8].copy_from_slice(&self.seq.to_be_bytes());
        out[8..12].copy_from_slice(&self.ts_sec.to_be_bytes());
        out[12..16].copy_from_slice(&self.ts_usec.to_be_bytes());
        out[16..20].copy_from_slice(&self.rtt_ms.to_be_bytes());
        out
    }

    pub fn decode(b: &[u8; STATE_LEN]) -> Self {
        let u32_at = |i: usize| u32::from_be_bytes(b[i..i + 4].try_into().expect("4 bytes"));
        Self {
            seq: u64::from_be_bytes(b[..8].try_into().expect("8 bytes")),
            ts_sec: u32_at(8),
            ts_usec: u32_at(12),
            rtt_ms: u32_at(16),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AckRequest {
    Sig,
    Mac,
    Enc { z: [u8; 32], y: [u8; 16] },
    Chain { challenge: [u8; 32] },
    ChainSync,
}

impl AckRequest {
    pub fn label(&self) -> &'static str {
        match self {
            AckRequest::Sig => "sig",
            AckRequest::Mac => "mac",
            AckRequest::Enc { .. } => "enc",
            AckRequest::Chain { .. } => "chain",
            AckRequest::ChainSync => "chain-sync",
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            AckRequest::Sig => out.push(0x00),
            AckRequest::Mac => out.push(0x01),
            AckRequest::Enc { z, y } => {
                out.push(0x02);
                out.extend_from_slice(z);
                out.extend_from_slice(y);
            }
            AckRequest::Chain { challenge } => {
                out.push(0x03);
                out.extend_from_slice(challenge);
            }
            AckRequest::ChainSync => out.push(0x04),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Decodes from the front of `b`; returns the request and bytes consumed.
    pub fn decode(b: &[u8]) -> Result<(Self, usize), TokenError> {
        let tag = *b.first().ok_or(TokenError::Truncated)?;
        let body = &b[1..];
        let take = |n: usize| body.get(..n).ok_or(TokenError::Truncated);
        Ok(match tag {
            0x00 => (AckRequest::Sig, 1),
            0x01 => (AckRequest::Mac, 1),
            0x02 => {
                let v = take(48)?;
                (
                    AckRequest::Enc {
                        z: v[..32].try_into().expect("32"),
                        y: v[32..].try_into().expect("16"),
                    },
                    49,
                )
            }
            0x03 => (
                AckRequest::Chain {
                    challenge: take(32)?.try_into().expect("32"),
                },
                33,
            ),
            0x04 => (AckRequest::ChainSync, 1),
            other => return Err(TokenError::UnknownAckRequest(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Authenticator {
    /// Tagged signature under the application's key.
    Sig(Vec<u8>),
    /// HMAC-SHA-256 under the per-application key.
    Mac([u8; MAC_LEN]),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuthToken {
    pub state: ReplayState,
    pub ack: AckRequest,
    pub auth: Authenticator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token truncated")]
    Truncated,
    #[error("unknown ack request 0x{0:02x}")]
    UnknownAckRequest(u8),
    #[error("unknown authenticator 0x{0:02x}")]
    UnknownAuthenticator(u8),
    #[error("MAC must be {MAC_LEN} bytes")]
    BadMacLength,
    #[error("empty signature")]
    EmptySignature,
}

impl AuthToken {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STATE_LEN + 50 + 130);
        out.extend_from_slice(&self.state.encode());
        self.ack.encode_into(&mut out);
        match &self.auth {
            Authenticator::Sig(s) => {
                out.push(0x01);
                out.extend_from_slice(s);
            }
            Authenticator::Mac(m) => {
                out.push(0x02);
                out.extend_from_slice(m);
            }
        }
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, TokenError> {
        let state: &[u8; STATE_LEN] = b.get(..STATE_LEN).ok_or(TokenError::Truncated)?.try_into().expect("20");
        let state = ReplayState::decode(state);
        let (ack, used) = AckRequest::decode(&b[STATE_LEN..])?;
        let rest = &b[STATE_LEN + used..];
        let (&tag, auth) = rest.split_first().ok_or(TokenError::Truncated)?;
        let auth = match tag {
            0x01 if auth.is_empty() => return Err(TokenError::EmptySignature),
            0x01 => Authenticator::Sig(auth.to_vec()),
            0x02 => Authenticator::Mac(auth.try_into().map_err(|_| TokenError::BadMacLength)?),
            other => return Err(TokenError::UnknownAuthenticator(other)),
        };
        Ok(Self { state, ack, auth })
    }
}
