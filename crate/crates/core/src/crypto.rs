//! Signature schemes, content signing, and the symmetric primitives used by
//! the protocol (SHA-256, HMAC-SHA-256, AES-128, AES-128-GCM, RSA-OAEP).
//!
//! The default signature profile is RSA with a 1024-bit modulus, public
//! exponent 3, PKCS#1 v1.5 padding and SHA-256. Signatures and public keys
//! carry a one-byte scheme tag so the scheme stays pluggable.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use aes_gcm::aead::Aead;
use aes_gcm::{Aes128Gcm, Nonce};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsa::pkcs1v15::{Signature as RsaSignature, SigningKey, VerifyingKey};
use rsa::signature::{SignatureEncoding, Signer, Verifier};
use rsa::traits::PublicKeyParts;
use rsa::{BigUint, Oaep, RsaPrivateKey, RsaPublicKey};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::packet::ContentObject;

pub const RSA_MODULUS_BITS: usize = 1024;
pub const RSA_PUBLIC_EXPONENT: u32 = 3;
pub const AEAD_NONCE_LEN: usize = 12;
pub const AEAD_TAG_LEN: usize = 16;
/// Ciphertext expansion of [`aead_seal`].
pub const AEAD_OVERHEAD: usize = AEAD_NONCE_LEN + AEAD_TAG_LEN;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SchemeTag {
    /// RSA-1024, e = 3, PKCS#1 v1.5, SHA-256.
    Rsa1024E3Sha256 = 0x01,
    /// Hash-as-signature. Anyone can forge it; only for deterministic codec
    /// tests.
    NullTest = 0xF0,
}

impl SchemeTag {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(SchemeTag::Rsa1024E3Sha256),
            0xF0 => Some(SchemeTag::NullTest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("signature scheme mismatch: key is {expected:?}, signature is {found:?}")]
    SchemeMismatch { expected: SchemeTag, found: Option<SchemeTag> },
    #[error("content object is already signed")]
    AlreadySigned,
    #[error("malformed key encoding")]
    BadKeyEncoding,
    #[error("operation not supported by scheme {0:?}")]
    Unsupported(SchemeTag),
    #[error("decryption failed")]
    DecryptFailed,
    #[error("encryption failed")]
    EncryptFailed,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey {
    pub scheme: SchemeTag,
    pub material: Vec<u8>,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digest = sha256(&self.material);
        write!(f, "PublicKey({:?}, {:02x}{:02x}{:02x}{:02x}..)", self.scheme, digest[0], digest[1], digest[2], digest[3])
    }
}

impl PublicKey {
    /// `tag || material`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.material.len() + 1);
        out.push(self.scheme as u8);
        out.extend_from_slice(&self.material);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CryptoError> {
        let (&tag, material) = buf.split_first().ok_or(CryptoError::BadKeyEncoding)?;
        let scheme = SchemeTag::from_u8(tag).ok_or(CryptoError::BadKeyEncoding)?;
        let pk = PublicKey {
            scheme,
            material: material.to_vec(),
        };
        match scheme {
            SchemeTag::Rsa1024E3Sha256 => {
                pk.rsa()?;
            }
            SchemeTag::NullTest if material.len() != 32 => return Err(CryptoError::BadKeyEncoding),
            SchemeTag::NullTest => {}
        }
        Ok(pk)
    }

    fn rsa(&self) -> Result<RsaPublicKey, CryptoError> {
        let m = &self.material;
        if m.len() < 2 {
            return Err(CryptoError::BadKeyEncoding);
        }
        let n_len = usize::from(u16::from_be_bytes([m[0], m[1]]));
        let n = m.get(2..2 + n_len).ok_or(CryptoError::BadKeyEncoding)?;
        let e = &m[2 + n_len..];
        if e.is_empty() {
            return Err(CryptoError::BadKeyEncoding);
        }
        RsaPublicKey::new(BigUint::from_bytes_be(n), BigUint::from_bytes_be(e)).map_err(|_| CryptoError::BadKeyEncoding)
    }

    /// Verifies a tagged signature over `msg`.
    pub fn verify(&self, msg: &[u8], signature: &[u8]) -> Result<bool, CryptoError> {
        let Some((&tag, raw)) = signature.split_first() else {
            return Ok(false);
        };
        let found = SchemeTag::from_u8(tag);
        if found != Some(self.scheme) {
            return Err(CryptoError::SchemeMismatch {
                expected: self.scheme,
                found,
            });
        }
        match self.scheme {
            SchemeTag::Rsa1024E3Sha256 => {
                let key = VerifyingKey::<Sha256>::new(self.rsa()?);
                let Ok(sig) = RsaSignature::try_from(raw) else {
                    return Ok(false);
                };
                Ok(key.verify(msg, &sig).is_ok())
            }
            SchemeTag::NullTest => Ok(raw == null_signature(&self.material, msg)),
        }
    }

    /// RSA-OAEP(SHA-256) encryption to this key.
    pub fn encrypt<R: RngCore + CryptoRng>(&self, rng: &mut R, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        match self.scheme {
            SchemeTag::Rsa1024E3Sha256 => self
                .rsa()?
                .encrypt(rng, Oaep::new::<Sha256>(), msg)
                .map_err(|_| CryptoError::EncryptFailed),
            other => Err(CryptoError::Unsupported(other)),
        }
    }
}

fn null_signature(material: &[u8], msg: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"lumen/null-sig\0");
    h.update(material);
    h.update(msg);
    h.finalize().into()
}

#[derive(Clone)]
enum Secret {
    Rsa {
        private: Box<RsaPrivateKey>,
        signing: Box<SigningKey<Sha256>>,
    },
    Null,
}

#[derive(Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: Secret,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(scheme: SchemeTag, rng: &mut R) -> Self {
        match scheme {
            SchemeTag::Rsa1024E3Sha256 => {
                let private = RsaPrivateKey::new_with_exp(rng, RSA_MODULUS_BITS, &BigUint::from(RSA_PUBLIC_EXPONENT))
                    .expect("RSA key generation");
                Self::from_rsa(private)
            }
            SchemeTag::NullTest => {
                let mut material = vec![0u8; 32];
                rng.fill_bytes(&mut material);
                KeyPair {
                    public: PublicKey { scheme, material },
                    secret: Secret::Null,
                }
            }
        }
    }

    fn from_rsa(private: RsaPrivateKey) -> Self {
        let n = private.n().to_bytes_be();
        let e = private.e().to_bytes_be();
        let mut material = Vec::with_capacity(n.len() + e.len() + 2);
        material.extend_from_slice(&(n.len() as u16).to_be_bytes());
        material.extend_from_slice(&n);
        material.extend_from_slice(&e);
        let signing = SigningKey::<Sha256>::new(private.clone());
        KeyPair {
            public: PublicKey {
                scheme: SchemeTag::Rsa1024E3Sha256,
                material,
            },
            secret: Secret::Rsa {
                private: Box::new(private),
                signing: Box::new(signing),
            },
        }
    }

    /// Deterministic key for `seed`, memoized process-wide. RSA generation
    /// is slow enough that simulations and tests share keys per seed.
    pub fn from_seed(scheme: SchemeTag, seed: u64) -> Self {
        static POOL: OnceLock<Mutex<HashMap<(SchemeTag, u64), KeyPair>>> = OnceLock::new();
        let pool = POOL.get_or_init(Default::default);
        if let Some(k) = pool.lock().expect("key pool").get(&(scheme, seed)) {
            return k.clone();
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6b65_7970_6f6f_6c00);
        let key = KeyPair::generate(scheme, &mut rng);
        pool.lock().expect("key pool").entry((scheme, seed)).or_insert(key).clone()
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn scheme(&self) -> SchemeTag {
        self.public.scheme
    }

    /// Tagged signature over `msg`.
    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        let mut out = vec![self.public.scheme as u8];
        match &self.secret {
            Secret::Rsa { signing, .. } => out.extend_from_slice(&signing.sign(msg).to_vec()),
            Secret::Null => out.extend_from_slice(&null_signature(&self.public.material, msg)),
        }
        out
    }

    pub fn decrypt(&self, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        match &self.secret {
            Secret::Rsa { private, .. } => private
                .decrypt(Oaep::new::<Sha256>(), ciphertext)
                .map_err(|_| CryptoError::DecryptFailed),
            Secret::Null => Err(CryptoError::Unsupported(self.public.scheme)),
        }
    }
}

/// Signs `obj` in place semantics: returns the signed copy.
pub fn sign_content(key: &KeyPair, mut obj: ContentObject) -> Result<ContentObject, CryptoError> {
    if !obj.signature.is_empty() {
        return Err(CryptoError::AlreadySigned);
    }
    obj.signature = key.sign(&obj.signed_portion());
    Ok(obj)
}

pub fn verify_content(pk: &PublicKey, obj: &ContentObject) -> Result<bool, CryptoError> {
    if obj.signature.is_empty() {
        return Ok(false);
    }
    pk.verify(&obj.signed_portion(), &obj.signature)
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; 32] {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(data);
    mac.finalize().into_bytes().into()
}

/// Constant-time HMAC check.
pub fn hmac_sha256_verify(key: &[u8], data: &[u8], tag: &[u8]) -> bool {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(data);
    mac.verify_slice(tag).is_ok()
}

pub fn aes128_encrypt_block(key: &[u8; 16], block: &[u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(key.into());
    let mut b = aes::Block::clone_from_slice(block);
    cipher.encrypt_block(&mut b);
    b.into()
}

pub fn aes128_decrypt_block(key: &[u8; 16], block: &[u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(key.into());
    let mut b = aes::Block::clone_from_slice(block);
    cipher.decrypt_block(&mut b);
    b.into()
}

/// AES-128-GCM; output is `nonce || ciphertext || tag`.
pub fn aead_seal<R: RngCore + ?Sized>(key: &[u8; 16], rng: &mut R, plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes128Gcm::new(key.into());
    let mut nonce = [0u8; AEAD_NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("GCM encryption of bounded input");
    let mut out = nonce.to_vec();
    out.extend_from_slice(&ct);
    out
}

pub fn aead_open(key: &[u8; 16], sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < AEAD_OVERHEAD {
        return Err(CryptoError::DecryptFailed);
    }
    let (nonce, ct) = sealed.split_at(AEAD_NONCE_LEN);
    Aes128Gcm::new(key.into())
        .decrypt(Nonce::from_slice(nonce), ct)
        .map_err(|_| CryptoError::DecryptFailed)
}

/// Stable 64-bit seed from a label, for deriving per-entity RNG streams.
pub fn seed_from_label(base: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_be_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::Name;

    fn content() -> ContentObject {
        ContentObject::unsigned(
            Name::parse("/dom/app1/data").unwrap(),
            (0u8..64).collect(),
            Name::parse("/dom/app1/key").unwrap(),
            7,
        )
    }

    #[test]
    fn rsa_profile_parameters() {
        let k = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1);
        let rsa = k.public().rsa().unwrap();
        assert_eq!(rsa.n().bits(), 1024);
        assert_eq!(rsa.e(), &BigUint::from(3u32));
        let sig = k.sign(b"x");
        assert_eq!(sig.len(), 1 + 128);
    }

    #[test]
    fn sign_then_verify() {
        let k = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1);
        let signed = sign_content(&k, content()).unwrap();
        assert!(verify_content(k.public(), &signed).unwrap());
        let other = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 2);
        assert!(!verify_content(other.public(), &signed).unwrap());
    }

    #[test]
    fn double_sign_rejected() {
        let k = KeyPair::from_seed(SchemeTag::NullTest, 1);
        let signed = sign_content(&k, content()).unwrap();
        assert_eq!(sign_content(&k, signed).unwrap_err(), CryptoError::AlreadySigned);
    }

    #[test]
    fn scheme_mismatch() {
        let rsa = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1);
        let null = KeyPair::from_seed(SchemeTag::NullTest, 1);
        let signed = sign_content(&null, content()).unwrap();
        assert!(matches!(
            verify_content(rsa.public(), &signed),
            Err(CryptoError::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn oaep_round_trip() {
        let k = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let ct = k.public().encrypt(&mut rng, &[7u8; 32]).unwrap();
        assert_eq!(k.decrypt(&ct).unwrap(), vec![7u8; 32]);
        let other = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 4);
        assert_eq!(other.decrypt(&ct).unwrap_err(), CryptoError::DecryptFailed);
    }

    #[test]
    fn public_key_encoding_round_trip() {
        let k = KeyPair::from_seed(SchemeTag::Rsa1024E3Sha256, 1);
        let enc = k.public().encode();
        assert_eq!(&PublicKey::decode(&enc).unwrap(), k.public());
        assert!(PublicKey::decode(&enc[..10]).is_err());
        assert!(PublicKey::decode(&[0x77, 1, 2]).is_err());
    }

    #[test]
    fn aead_round_trip_and_tamper() {
        let key = [5u8; 16];
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let sealed = aead_seal(&key, &mut rng, b"on");
        assert_eq!(sealed.len(), 2 + AEAD_OVERHEAD);
        assert_eq!(aead_open(&key, &sealed).unwrap(), b"on");
        let mut bad = sealed.clone();
        bad[AEAD_NONCE_LEN] ^= 1;
        assert_eq!(aead_open(&key, &bad).unwrap_err(), CryptoError::DecryptFailed);
    }

    #[test]
    fn aes_block_inverse() {
        let key = [9u8; 16];
        let x = [3u8; 16];
        assert_eq!(aes128_decrypt_block(&key, &aes128_encrypt_block(&key, &x)), x);
    }
}
