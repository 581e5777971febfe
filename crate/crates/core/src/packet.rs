//! Interest and content packets and their canonical wire encoding.
//!
//! ```text
//! Interest := 0x05 len { Name, 0x0A 8 nonce, 0x0C 4 lifetime_ms(u32 BE) }
//! Content  := 0x06 len { Name, 0x15 payload, 0x1C { Name }, 0x17 signature,
//!                        0x19 8 timestamp_ms(u64 BE) }
//! Name     := 0x07 len { (0x08 len bytes)* }
//! ```
//! Lengths are minimal LEB128 varints. See `docs/names.md`.

use rand::RngCore;

use crate::name::Name;
use crate::tlv::{self, Reader, TlvError};

pub const TLV_INTEREST: u8 = 0x05;
pub const TLV_CONTENT: u8 = 0x06;
const TLV_NONCE: u8 = 0x0A;
const TLV_LIFETIME: u8 = 0x0C;
const TLV_PAYLOAD: u8 = 0x15;
const TLV_SIGNATURE: u8 = 0x17;
const TLV_TIMESTAMP: u8 = 0x19;
const TLV_KEY_LOCATOR: u8 = 0x1C;

pub const DEFAULT_LIFETIME_MS: u32 = 4000;

/// Domain separation for content signatures.
pub const CONTENT_SIG_DOMAIN: &[u8] = b"lumen/content-sig/v1\0";

pub type DecodeError = TlvError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interest {
    pub name: Name,
    pub nonce: [u8; 8],
    pub lifetime_ms: u32,
}

impl Interest {
    pub fn new<R: RngCore + ?Sized>(name: Name, lifetime_ms: u32, rng: &mut R) -> Self {
        assert!(lifetime_ms > 0, "interest lifetime must be positive");
        let mut nonce = [0u8; 8];
        rng.fill_bytes(&mut nonce);
        Self {
            name,
            nonce,
            lifetime_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContentObject {
    pub name: Name,
    pub payload: Vec<u8>,
    /// Names the content object carrying the verification key.
    pub key_locator: Name,
    pub signature: Vec<u8>,
    pub timestamp_ms: u64,
}

impl ContentObject {
    /// An unsigned object; sign it with [`crate::crypto::sign_content`].
    pub fn unsigned(name: Name, payload: Vec<u8>, key_locator: Name, timestamp_ms: u64) -> Self {
        Self {
            name,
            payload,
            key_locator,
            signature: Vec::new(),
            timestamp_ms,
        }
    }

    /// Bytes covered by the signature: domain prefix, name, payload, key
    /// locator and timestamp.
    pub fn signed_portion(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTENT_SIG_DOMAIN.len() + self.payload.len() + 64);
        out.extend_from_slice(CONTENT_SIG_DOMAIN);
        self.name.encode_into(&mut out);
        tlv::put_tlv(&mut out, TLV_PAYLOAD, &self.payload);
        self.key_locator.encode_into(&mut out);
        out.extend_from_slice(&self.timestamp_ms.to_be_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Packet {
    Interest(Interest),
    Content(ContentObject),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Content(c) => &c.name,
        }
    }

    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Interest(_) => PacketKind::Interest,
            Packet::Content(_) => PacketKind::Content,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_packet(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PacketKind {
    #[serde(rename = "I")]
    Interest,
    #[serde(rename = "D")]
    Content,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Interest => "I",
            PacketKind::Content => "D",
        }
    }
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(i)
    }
}

impl From<ContentObject> for Packet {
    fn from(c: ContentObject) -> Self {
        Packet::Content(c)
    }
}

pub fn encode_interest(i: &Interest) -> Vec<u8> {
    let mut inner = Vec::with_capacity(64);
    i.name.encode_into(&mut inner);
    tlv::put_tlv(&mut inner, TLV_NONCE, &i.nonce);
    tlv::put_tlv(&mut inner, TLV_LIFETIME, &i.lifetime_ms.to_be_bytes());
    let mut out = Vec::with_capacity(inner.len() + 4);
    tlv::put_tlv(&mut out, TLV_INTEREST, &inner);
    out
}

pub fn encode_content(c: &ContentObject) -> Vec<u8> {
    let mut inner = Vec::with_capacity(c.payload.len() + c.signature.len() + 96);
    c.name.encode_into(&mut inner);
    tlv::put_tlv(&mut inner, TLV_PAYLOAD, &c.payload);
    tlv::put_tlv(&mut inner, TLV_KEY_LOCATOR, &c.key_locator.encode());
    tlv::put_tlv(&mut inner, TLV_SIGNATURE, &c.signature);
    tlv::put_tlv(&mut inner, TLV_TIMESTAMP, &c.timestamp_ms.to_be_bytes());
    let mut out = Vec::with_capacity(inner.len() + 4);
    tlv::put_tlv(&mut out, TLV_CONTENT, &inner);
    out
}

pub fn encode_packet(p: &Packet) -> Vec<u8> {
    match p {
        Packet::Interest(i) => encode_interest(i),
        Packet::Content(c) => encode_content(c),
    }
}

fn fixed<const N: usize>(v: &[u8], what: &'static str) -> Result<[u8; N], TlvError> {
    v.try_into().map_err(|_| TlvError::InvalidField(what))
}

fn decode_interest_value(value: &[u8]) -> Result<Interest, TlvError> {
    let mut r = Reader::new(value);
    let name = Name::read(&mut r)?;
    let nonce = fixed::<8>(r.expect(TLV_NONCE)?, "nonce must be 8 bytes")?;
    let lifetime_ms = u32::from_be_bytes(fixed::<4>(r.expect(TLV_LIFETIME)?, "lifetime must be 4 bytes")?);
    r.finish()?;
    if lifetime_ms == 0 {
        return Err(TlvError::InvalidField("lifetime must be positive"));
    }
    Ok(Interest {
        name,
        nonce,
        lifetime_ms,
    })
}

fn decode_content_value(value: &[u8]) -> Result<ContentObject, TlvError> {
    let mut r = Reader::new(value);
    let name = Name::read(&mut r)?;
    let payload = r.expect(TLV_PAYLOAD)?.to_vec();
    let key_locator = Name::decode(r.expect(TLV_KEY_LOCATOR)?)?;
    let signature = r.expect(TLV_SIGNATURE)?.to_vec();
    let timestamp_ms = u64::from_be_bytes(fixed::<8>(r.expect(TLV_TIMESTAMP)?, "timestamp must be 8 bytes")?);
    r.finish()?;
    Ok(ContentObject {
        name,
        payload,
        key_locator,
        signature,
        timestamp_ms,
    })
}

pub fn decode_packet(buf: &[u8]) -> Result<Packet, DecodeError> {
    let mut r = Reader::new(buf);
    let (tag, value) = r.any()?;
    let packet = match tag {
        TLV_INTEREST => Packet::Interest(decode_interest_value(value)?),
        TLV_CONTENT => Packet::Content(decode_content_value(value)?),
        other => return Err(TlvError::UnknownTag(other)),
    };
    r.finish()?;
    Ok(packet)
}

/// Decodes a standalone content object (key records, certificates, ACLs).
pub fn decode_content(buf: &[u8]) -> Result<ContentObject, DecodeError> {
    match decode_packet(buf)? {
        Packet::Content(c) => Ok(c),
        Packet::Interest(_) => Err(TlvError::UnknownTag(TLV_INTEREST)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_content() -> ContentObject {
        ContentObject {
            name: Name::parse("/a/b").unwrap(),
            payload: b"hello".to_vec(),
            key_locator: Name::parse("/a/key").unwrap(),
            signature: vec![1, 2, 3],
            timestamp_ms: 42,
        }
    }

    #[test]
    fn empty_interest_layout() {
        let i = Interest {
            name: Name::new(),
            nonce: [0; 8],
            lifetime_ms: 4000,
        };
        let bytes = encode_interest(&i);
        assert_eq!(bytes[0], TLV_INTEREST);
        assert_eq!(decode_packet(&bytes).unwrap(), Packet::Interest(i));
    }

    #[test]
    fn truncation_fails() {
        let bytes = encode_content(&sample_content());
        for cut in 0..bytes.len() {
            assert_eq!(decode_packet(&bytes[..cut]).unwrap_err(), TlvError::TruncatedBuffer, "cut={cut}");
        }
    }

    #[test]
    fn trailing_bytes_fail() {
        let mut bytes = encode_content(&sample_content());
        bytes.push(0);
        assert_eq!(decode_packet(&bytes).unwrap_err(), TlvError::TrailingBytes(1));
    }

    #[test]
    fn unknown_outer_tag() {
        let mut bytes = encode_content(&sample_content());
        bytes[0] = 0x42;
        assert_eq!(decode_packet(&bytes).unwrap_err(), TlvError::UnknownTag(0x42));
    }

    #[test]
    fn zero_lifetime_rejected() {
        let mut bytes = encode_interest(&Interest {
            name: Name::new(),
            nonce: [0; 8],
            lifetime_ms: 1,
        });
        let n = bytes.len();
        bytes[n - 1] = 0;
        assert!(matches!(decode_packet(&bytes), Err(TlvError::InvalidField(_))));
    }
}
