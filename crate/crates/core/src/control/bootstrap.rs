//! Fixture bootstrap. The configuration manager and the fixture share a
//! pairing key read off the fixture's enclosure; every message is MAC'd
//! under it.
//!
//! ```text
//! CM  -> Fix  offer    := name_fix, root key name, root pk, acl names, cm time
//! Fix -> CM   response := fixture pk, fixture time, H(offer || fixture pk || fixture time)
//! ```
//! The fixture generates its own key pair and `k_Fix` while handling the
//! offer; neither leaves the device except the public key.

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{hmac_sha256, hmac_sha256_verify, sha256, KeyPair, PublicKey, SchemeTag};
use crate::name::Name;
use crate::tlv::{put_tlv, Reader};
use crate::trust::TrustRoot;

pub const PAIRING_KEY_LEN: usize = 16;
const MAC_LEN: usize = 32;

const T_NAME_FIX: u8 = 0x40;
const T_ROOT_NAME: u8 = 0x41;
const T_ROOT_PK: u8 = 0x42;
const T_ACL_NAME: u8 = 0x43;
const T_TIME: u8 = 0x44;
const T_FIX_PK: u8 = 0x45;
const T_CONFIRM: u8 = 0x46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("pairing MAC mismatch")]
    PairingMacMismatch,
    #[error("fixture is already bootstrapped")]
    AlreadyBootstrapped,
    #[error("malformed bootstrap message")]
    Malformed,
    #[error("confirmation hash mismatch")]
    ConfirmationMismatch,
}

/// What the configuration manager installs on a fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapOffer {
    pub name_fix: Name,
    pub root: TrustRoot,
    pub acl_names: Vec<Name>,
    pub cm_time_ms: u64,
}

/// Fixture-side result of a completed bootstrap.
#[derive(Debug, Clone)]
pub struct BootstrapRecord {
    pub pairing_key: [u8; PAIRING_KEY_LEN],
    pub name_fix: Name,
    /// Added to the fixture's local clock to get the CM's clock.
    pub clock_offset_ms: i64,
    pub root: TrustRoot,
    pub keypair: KeyPair,
    pub k_fix: [u8; 32],
    pub acl_names: Vec<Name>,
    pub confirmation: [u8; 32],
}

/// CM-side result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confirmed {
    pub fixture_pk: PublicKey,
    pub fixture_time_ms: u64,
    pub confirmation: [u8; 32],
}

impl BootstrapOffer {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_tlv(&mut out, T_NAME_FIX, &self.name_fix.encode());
        put_tlv(&mut out, T_ROOT_NAME, &self.root.key_name.encode());
        put_tlv(&mut out, T_ROOT_PK, &self.root.pk.encode());
        for n in &self.acl_names {
            put_tlv(&mut out, T_ACL_NAME, &n.encode());
        }
        put_tlv(&mut out, T_TIME, &self.cm_time_ms.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, BootstrapError> {
        let bad = |_| BootstrapError::Malformed;
        let mut r = Reader::new(buf);
        let name_fix = Name::decode(r.expect(T_NAME_FIX).map_err(bad)?).map_err(bad)?;
        let key_name = Name::decode(r.expect(T_ROOT_NAME).map_err(bad)?).map_err(bad)?;
        let pk = PublicKey::decode(r.expect(T_ROOT_PK).map_err(bad)?).map_err(|_| BootstrapError::Malformed)?;
        let mut acl_names = Vec::new();
        while r.peek_tag() == Some(T_ACL_NAME) {
            acl_names.push(Name::decode(r.expect(T_ACL_NAME).map_err(bad)?).map_err(bad)?);
        }
        let cm_time_ms = u64_field(r.expect(T_TIME).map_err(bad)?)?;
        r.finish().map_err(bad)?;
        Ok(Self {
            name_fix,
            root: TrustRoot { pk, key_name },
            acl_names,
            cm_time_ms,
        })
    }
}

fn u64_field(b: &[u8]) -> Result<u64, BootstrapError> {
    Ok(u64::from_be_bytes(b.try_into().map_err(|_| BootstrapError::Malformed)?))
}

fn seal(key: &[u8; PAIRING_KEY_LEN], body: Vec<u8>) -> Vec<u8> {
    let mac = hmac_sha256(key, &body);
    let mut out = body;
    out.extend_from_slice(&mac);
    out
}

fn open<'a>(key: &[u8; PAIRING_KEY_LEN], wire: &'a [u8]) -> Result<&'a [u8], BootstrapError> {
    if wire.len() < MAC_LEN {
        return Err(BootstrapError::PairingMacMismatch);
    }
    let (body, mac) = wire.split_at(wire.len() - MAC_LEN);
    if !hmac_sha256_verify(key, body, mac) {
        return Err(BootstrapError::PairingMacMismatch);
    }
    Ok(body)
}

/// Hash over everything exchanged, in message order.
pub fn confirmation_hash(offer_body: &[u8], fixture_pk: &PublicKey, fixture_time_ms: u64) -> [u8; 32] {
    let mut t = offer_body.to_vec();
    t.extend_from_slice(&fixture_pk.encode());
    t.extend_from_slice(&fixture_time_ms.to_be_bytes());
    sha256(&t)
}

/// CM: the sealed offer message.
pub fn cm_offer(pairing_key: &[u8; PAIRING_KEY_LEN], offer: &BootstrapOffer) -> Vec<u8> {
    seal(pairing_key, offer.encode())
}

/// CM: check the fixture's response against the offer that was sent.
pub fn cm_confirm(
    pairing_key: &[u8; PAIRING_KEY_LEN],
    offer_wire: &[u8],
    response_wire: &[u8],
) -> Result<Confirmed, BootstrapError> {
    let offer_body = open(pairing_key, offer_wire)?;
    let body = open(pairing_key, response_wire)?;
    let bad = |_| BootstrapError::Malformed;
    let mut r = Reader::new(body);
    let fixture_pk = PublicKey::decode(r.expect(T_FIX_PK).map_err(bad)?).map_err(|_| BootstrapError::Malformed)?;
    let fixture_time_ms = u64_field(r.expect(T_TIME).map_err(bad)?)?;
    let confirmation: [u8; 32] = r
        .expect(T_CONFIRM)
        .map_err(bad)?
        .try_into()
        .map_err(|_| BootstrapError::Malformed)?;
    r.finish().map_err(bad)?;
    if confirmation != confirmation_hash(offer_body, &fixture_pk, fixture_time_ms) {
        return Err(BootstrapError::ConfirmationMismatch);
    }
    Ok(Confirmed {
        fixture_pk,
        fixture_time_ms,
        confirmation,
    })
}

/// The fixture before and after pairing.
#[derive(Debug, Clone)]
pub struct Device {
    pub pairing_key: [u8; PAIRING_KEY_LEN],
    pub scheme: SchemeTag,
    record: Option<BootstrapRecord>,
}

impl Device {
    pub fn new(pairing_key: [u8; PAIRING_KEY_LEN], scheme: SchemeTag) -> Self {
        Self {
            pairing_key,
            scheme,
            record: None,
        }
    }

    pub fn record(&self) -> Option<&BootstrapRecord> {
        self.record.as_ref()
    }

    pub fn factory_reset(&mut self) {
        self.record = None;
    }

    /// Handles a sealed offer at local time `local_ms` and returns the
    /// sealed response.
    pub fn accept<R: RngCore + ?Sized>(&mut self, offer_wire: &[u8], local_ms: u64, rng: &mut R) -> Result<Vec<u8>, BootstrapError> {
        if self.record.is_some() {
            return Err(BootstrapError::AlreadyBootstrapped);
        }
        let offer_body = open(&self.pairing_key, offer_wire)?;
        let offer = BootstrapOffer::decode(offer_body)?;
        let keypair = KeyPair::from_seed(self.scheme, rng.next_u64());
        let mut k_fix = [0u8; 32];
        rng.fill_bytes(&mut k_fix);
        let clock_offset_ms = offer.cm_time_ms as i64 - local_ms as i64;
        let fixture_time_ms = local_ms;
        let confirmation = confirmation_hash(offer_body, keypair.public(), fixture_time_ms);

        let mut body = Vec::new();
        put_tlv(&mut body, T_FIX_PK, &keypair.public().encode());
        put_tlv(&mut body, T_TIME, &fixture_time_ms.to_be_bytes());
        put_tlv(&mut body, T_CONFIRM, &confirmation);

        self.record = Some(BootstrapRecord {
            pairing_key: self.pairing_key,
            name_fix: offer.name_fix,
            clock_offset_ms,
            root: offer.root,
            keypair,
            k_fix,
            acl_names: offer.acl_names,
            confirmation,
        });
        Ok(seal(&self.pairing_key, body))
    }
}

/// Runs both sides in process.
pub fn bootstrap<R: RngCore + ?Sized>(
    pairing_key: [u8; PAIRING_KEY_LEN],
    offer: &BootstrapOffer,
    device: &mut Device,
    fixture_local_ms: u64,
    rng: &mut R,
) -> Result<(BootstrapRecord, Confirmed), BootstrapError> {
    let offer_wire = cm_offer(&pairing_key, offer);
    let response = device.accept(&offer_wire, fixture_local_ms, rng)?;
    let confirmed = cm_confirm(&pairing_key, &offer_wire, &response)?;
    Ok((device.record().expect("just bootstrapped").clone(), confirmed))
}
